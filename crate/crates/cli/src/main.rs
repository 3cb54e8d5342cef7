//! `cne`: command-line front end for encoding, simulation, training,
//! evaluation and cost accounting.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 unreadable
//! config file, 4 checkpoint missing or inconsistent with the config,
//! 5 invalid config contents.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::Rng;

use cne_core::cne::model_config;
use cne_core::codec::QppTable;
use cne_core::harness::{cost_model, run_sweep, BerReport, DecoderKind, SweepConfig};
use cne_core::link::LinkSpec;
use cne_core::training::{block_rng, Checkpoint, SampleDomain, TrainFile, Trainer};
use cne_core::{CodeRate, Error};

#[derive(Parser)]
#[command(name = "cne", version, about = "Punctured convolutional / Turbo coding workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (CSV report or checkpoint).
    #[arg(long)]
    out: Option<PathBuf>,
    /// viterbi, bcjr or cne.
    #[arg(long)]
    decoder: Option<String>,
    /// Comma-separated SNR points in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    /// Comma-separated code rates, e.g. 1/2,3/4.
    #[arg(long, value_delimiter = ',')]
    rate: Option<Vec<String>>,
    /// Block budget per cell.
    #[arg(long)]
    blocks: Option<usize>,
    /// CNE checkpoint or model archive.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Plot-data CSV path.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Encode and rate-match one block, printing the transmitted bits.
    Encode {
        #[arg(long)]
        config: PathBuf,
        /// Information bits as a 0/1 string; random when omitted.
        #[arg(long)]
        bits: Option<String>,
        #[command(flatten)]
        o: Overrides,
    },
    /// Simulate the configured cells and print the report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
    /// Run a BER sweep and write the CSV report.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
    /// Evaluate a trained CNE over the configured cells.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
    /// Train (pretrain or fine-tune) a CNE.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Pretrained checkpoint to fine-tune from.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Checkpoint to continue.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Checkpoint path; the training log goes next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter, MAC and latency accounting of a model config.
    Cost {
        #[arg(long)]
        model: PathBuf,
        /// Block length for the op counts.
        #[arg(long, default_value_t = 120)]
        k: usize,
        #[arg(long, default_value_t = 6)]
        bcjr_iterations: usize,
        /// Also count MACs on an actual forward pass.
        #[arg(long)]
        instrument: bool,
    },
}

/// Failure with its exit code and one-line diagnostic.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Checkpoint(_) => 4,
            Error::Config(_) | Error::Parse { .. } | Error::UnsupportedRate(_) => 5,
            _ => 1,
        };
        Failure(code, e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read_config(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure(3, format!("cannot read config {}: {e}", path.display())))
}

fn invalid(path: &Path, e: Error) -> Failure {
    let f = Failure::from(e);
    Failure(f.0, format!("{}: {}", path.display(), f.1))
}

fn sweep_config(path: &Path, o: &Overrides) -> CliResult<SweepConfig> {
    let mut c = SweepConfig::from_toml(&read_config(path)?).map_err(|e| invalid(path, e))?;
    if let Some(s) = o.seed {
        c.seed = s;
    }
    if let Some(p) = &o.out {
        c.out = Some(p.clone());
    }
    if let Some(d) = &o.decoder {
        c.decoder = d.parse::<DecoderKind>()?;
    }
    if let Some(s) = &o.snr {
        c.snr_db = s.clone();
    }
    if let Some(r) = &o.rate {
        c.rates = r.iter().map(|s| s.parse::<CodeRate>()).collect::<Result<_, _>>()?;
    }
    if let Some(b) = o.blocks {
        c.blocks = b;
    }
    if let Some(p) = &o.checkpoint {
        c.checkpoint = Some(p.clone());
    }
    if let Some(p) = &o.plot {
        c.plot = Some(p.clone());
    }
    c.validate()?;
    Ok(c)
}

fn emit_report(report: &BerReport, cfg: &SweepConfig) -> CliResult<()> {
    match &cfg.out {
        Some(p) => {
            report.save(p)?;
            eprintln!("wrote {} rows to {}", report.rows.len(), p.display());
        }
        None => report.write_csv(std::io::stdout())?,
    }
    if let Some(p) = &cfg.plot {
        report.save_plot_data(p)?;
    }
    Ok(())
}

fn encode(config: &Path, bits: Option<&str>, o: &Overrides) -> CliResult<()> {
    let c = sweep_config(config, o)?;
    let k = c.lengths[0];
    let link = LinkSpec::new(c.code, k, c.rates[0], c.terminate(), c.channel.clone(), &c.qpp()?)?;
    let info: Vec<u8> = match bits {
        Some(s) => s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(Failure(5, format!("bits must be 0/1, found {ch:?}"))),
            })
            .collect::<CliResult<_>>()?,
        None => {
            let mut rng = block_rng(SampleDomain::Test, c.seed, 0);
            (0..k).map(|_| rng.random_range(0..2u8)).collect()
        }
    };
    if info.len() != k {
        return Err(Failure(5, format!("expected {k} information bits, got {}", info.len())));
    }
    let coded = link.encode(&info)?;
    let show = |v: &[u8]| v.iter().map(|b| char::from(b'0' + b)).collect::<String>();
    println!("info  {}", show(&info));
    println!("coded {}", show(&coded));
    println!("rate  {} ({} -> {} bits)", c.rates[0], k, coded.len());
    Ok(())
}

fn train(config: &Path, init: Option<&Path>, resume: Option<&Path>, seed: Option<u64>, out: Option<&Path>) -> CliResult<()> {
    let qpp = QppTable::lte_defaults();
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("checkpoint.cne"));
    let trainer = match resume {
        Some(p) => Trainer::<f32>::resume(Checkpoint::load(p)?, &qpp)?,
        None => {
            let mut f = TrainFile::from_toml(&read_config(config)?).map_err(|e| invalid(config, e))?;
            if let Some(s) = seed {
                f.training.seed = s;
            }
            let pre = init.map(Checkpoint::<f32>::load).transpose()?;
            Trainer::new(&f.model, &f.training, pre.as_ref(), &qpp)?
        }
    };
    let log_path = out.with_extension("log.csv");
    let mut log = csv::Writer::from_path(&log_path).map_err(|e| Failure(1, format!("{}: {e}", log_path.display())))?;
    for e in &trainer.state().log {
        log.serialize(e).map_err(|e| Failure(1, e.to_string()))?;
    }
    let done = trainer.run(|e, state| {
        eprintln!("epoch {:>4}  loss {:.5}  lr {:.3e}  val BER {:.5}", e.epoch, e.loss, e.lr, e.val_ber);
        log.serialize(e).map_err(|x| Error::Numerical(x.to_string()))?;
        log.flush().map_err(|x| Error::Numerical(x.to_string()))?;
        state.save(&out)
    })?;
    eprintln!(
        "best validation BER {:.5} at epoch {}; checkpoint {}",
        done.best_val_ber,
        done.best_epoch,
        out.display()
    );
    Ok(())
}

fn cost(model: &Path, k: usize, iters: usize, instrument: bool) -> CliResult<()> {
    let cfg = model_config(&read_config(model)?).map_err(|e| invalid(model, e))?;
    print!("{}", cost_model(&cfg, k, iters, instrument)?.render());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Encode { config, bits, o } => encode(&config, bits.as_deref(), &o),
        Command::Simulate { config, o } => {
            let mut c = sweep_config(&config, &o)?;
            c.out = None;
            let r = run_sweep::<f32>(&c)?;
            emit_report(&r, &c)
        }
        Command::Sweep { config, o } => {
            let c = sweep_config(&config, &o)?;
            let r = run_sweep::<f32>(&c)?;
            emit_report(&r, &c)
        }
        Command::Evaluate { config, o } => {
            let mut c = sweep_config(&config, &o)?;
            c.decoder = DecoderKind::Cne;
            c.validate()?;
            let r = run_sweep::<f32>(&c)?;
            emit_report(&r, &c)
        }
        Command::Train {
            config,
            init,
            resume,
            seed,
            out,
        } => train(&config, init.as_deref(), resume.as_deref(), seed, out.as_deref()),
        Command::Cost {
            model,
            k,
            bcjr_iterations,
            instrument,
        } => cost(&model, k, bcjr_iterations, instrument),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
