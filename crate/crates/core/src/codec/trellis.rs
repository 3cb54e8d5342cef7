use crate::error::{Error, Result};

/// State-transition table of a binary rate-1/n convolutional encoder.
///
/// Generator and feedback polynomials use the octal convention where the most
/// significant of the `constraint_length` tap bits multiplies the current
/// input and the least significant multiplies the oldest register.
///
/// A state packs the register contents with the most recent bit in the MSB.
/// For a recursive (feedback) trellis the register holds the feedback sum and
/// the systematic output (equal to the input) is implicit; `outputs` then
/// covers the parity generators only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trellis {
    name: Option<String>,
    constraint_length: usize,
    generators: Vec<u32>,
    feedback: Option<u32>,
    next: Vec<[usize; 2]>,
    outputs: Vec<[u32; 2]>,
    prev: Vec<[(usize, u8); 2]>,
}

#[inline]
fn parity(x: u32) -> u8 {
    (x.count_ones() & 1) as u8
}

/// Formats a tap vector in octal, e.g. `0o133` -> `"133"`.
pub fn octal(taps: u32) -> String {
    format!("{taps:o}")
}

/// Parses an octal tap string such as `"171"`.
pub fn parse_octal(s: &str) -> Result<u32> {
    u32::from_str_radix(s.trim().trim_start_matches("0o"), 8)
        .map_err(|e| Error::Config(format!("bad octal taps {s:?}: {e}")))
}

impl Trellis {
    pub fn new(generators: &[u32], constraint_length: usize, feedback: Option<u32>) -> Result<Self> {
        if constraint_length < 2 {
            return Err(Error::Config(format!(
                "constraint length must be at least 2, got {constraint_length}"
            )));
        }
        if constraint_length > 16 {
            return Err(Error::Config(format!(
                "constraint length {constraint_length} exceeds the supported maximum of 16"
            )));
        }
        if generators.is_empty() {
            return Err(Error::Config("at least one generator is required".into()));
        }
        let width_limit = 1u32 << constraint_length;
        for &g in generators.iter().chain(feedback.iter()) {
            if g >= width_limit {
                return Err(Error::Config(format!(
                    "taps {} do not fit in constraint length {constraint_length}",
                    octal(g)
                )));
            }
            if g == 0 {
                return Err(Error::Config("all-zero tap vector".into()));
            }
        }
        let m = constraint_length - 1;
        if let Some(fb) = feedback {
            if fb >> m & 1 == 0 {
                return Err(Error::Config(format!(
                    "feedback taps {} must include the current-input tap",
                    octal(fb)
                )));
            }
        }
        let num_states = 1usize << m;
        let state_mask = (num_states - 1) as u32;
        let mut next = vec![[0usize; 2]; num_states];
        let mut outputs = vec![[0u32; 2]; num_states];
        for s in 0..num_states {
            for u in 0..2u32 {
                let reg_in = match feedback {
                    Some(fb) => u ^ parity(s as u32 & fb & state_mask) as u32,
                    None => u,
                };
                let window = (reg_in << m) | s as u32;
                let mut out = 0u32;
                for (j, &g) in generators.iter().enumerate() {
                    out |= (parity(window & g) as u32) << j;
                }
                next[s][u as usize] = (window >> 1) as usize;
                outputs[s][u as usize] = out;
            }
        }
        let mut prev = vec![Vec::with_capacity(2); num_states];
        for s in 0..num_states {
            for u in 0..2u8 {
                prev[next[s][u as usize]].push((s, u));
            }
        }
        let prev = prev
            .into_iter()
            .enumerate()
            .map(|(s, p)| {
                <[(usize, u8); 2]>::try_from(p).map_err(|p| {
                    Error::Config(format!("state {s} has {} incoming transitions", p.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: None,
            constraint_length,
            generators: generators.to_vec(),
            feedback,
            next,
            outputs,
            prev,
        })
    }

    /// The IEEE 802.11 rate-1/2, K=7 code (133, 171).
    pub fn wifi_k7() -> Self {
        let mut t = Self::new(&[0o133, 0o171], 7, None).expect("valid generators");
        t.name = Some("wifi-cc-k7".into());
        t
    }

    /// The 8-state recursive constituent of the LTE Turbo code,
    /// `g1(D)/g0(D)` with `g0 = 1 + D^2 + D^3` and `g1 = 1 + D + D^3`.
    pub fn lte_turbo_constituent() -> Self {
        let mut t = Self::new(&[0o15], 4, Some(0o13)).expect("valid generators");
        t.name = Some("lte-turbo-constituent".into());
        t
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "wifi-cc-k7" => Ok(Self::wifi_k7()),
            "lte-turbo-constituent" => Ok(Self::lte_turbo_constituent()),
            other => Err(Error::Config(format!("unknown trellis {other:?}"))),
        }
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }
    pub fn constraint_length(&self) -> usize {
        self.constraint_length
    }
    pub fn memory(&self) -> usize {
        self.constraint_length - 1
    }
    pub fn num_states(&self) -> usize {
        self.next.len()
    }
    pub fn generators(&self) -> &[u32] {
        &self.generators
    }
    pub fn feedback(&self) -> Option<u32> {
        self.feedback
    }
    pub fn is_recursive(&self) -> bool {
        self.feedback.is_some()
    }
    /// Number of generator outputs per step (excluding the implicit
    /// systematic output of a recursive trellis).
    pub fn num_outputs(&self) -> usize {
        self.generators.len()
    }

    #[inline]
    pub fn next_state(&self, state: usize, input: u8) -> usize {
        self.next[state][input as usize]
    }

    /// Output bits of the branch, bit `j` belonging to generator `j`.
    #[inline]
    pub fn output(&self, state: usize, input: u8) -> u32 {
        self.outputs[state][input as usize]
    }

    #[inline]
    pub fn output_bit(&self, state: usize, input: u8, j: usize) -> u8 {
        (self.outputs[state][input as usize] >> j & 1) as u8
    }

    /// The two `(previous state, input)` pairs entering `state`.
    #[inline]
    pub fn predecessors(&self, state: usize) -> &[(usize, u8); 2] {
        &self.prev[state]
    }

    /// Input that drives the register towards zero from `state`.
    ///
    /// Zero for feed-forward codes; the feedback sum for recursive ones.
    #[inline]
    pub fn termination_input(&self, state: usize) -> u8 {
        match self.feedback {
            Some(fb) => parity(state as u32 & fb & (self.num_states() as u32 - 1)),
            None => 0,
        }
    }
}
