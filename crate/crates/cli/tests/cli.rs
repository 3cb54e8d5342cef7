use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cne(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cne"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SWEEP: &str = r#"
code = "conv"
decoder = "viterbi"
lengths = [120]
rates = ["1/2", "3/4"]
snr_db = [40.0]
blocks = 20
seed = 3
out = "out/report.csv"
"#;

#[test]
fn cost_prints_default_counts() {
    let dir = configs();
    let out = cne(&["cost", "--model", "cne_conv_default.cfg"], &dir);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("trainable parameters: 2237441"), "{text}");
    assert!(text.contains("MACs/decoded bit: 2245632"));
    let out = cne(&["cost", "--model", "cne_turbo_default.cfg"], &dir);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("trainable parameters: 6715398"), "{text}");
}

#[test]
fn sweep_writes_csv_at_declared_path() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "awgn_conv.cfg", SWEEP);
    let out = cne(&["sweep", "--config", "awgn_conv.cfg", "--seed", "7"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("decoder,code,k,rate"));
    let cols: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&cols[8..11], &["20", "0", "0"], "{}", lines[1]);
    assert!(lines[1].ends_with(",7"));
}

#[test]
fn overrides_replace_config_values() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "s.cfg", SWEEP);
    let out = cne(
        &["simulate", "--config", "s.cfg", "--snr", "-2,40", "--rate", "1/2", "--blocks", "4"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains(",-2.0,"), "{text}");
    assert!(!dir.path().join("out/report.csv").exists());
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = cne(&["sweep", "--config", "nope.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nope.cfg"));
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cne(&["sweep", "--config", "x.cfg", "--frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_and_missing_checkpoint_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.cfg", "code = \"conv\"\nbogus = 1\n");
    let out = cne(&["sweep", "--config", "bad.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(5));
    write(dir.path(), "s.cfg", SWEEP);
    let out = cne(&["evaluate", "--config", "s.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    let out = cne(&["evaluate", "--config", "s.cfg", "--checkpoint", "missing.cne"], dir.path());
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn checkpoint_for_another_code_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "t.cfg",
        r#"
[model]
code = "turbo"
d_embed = 4
d_hidden = 4
n_layers = 1
n_iter = 1

[training]
code = "turbo"
k = 40
rates = ["1/3"]
epochs = 1
batches_per_epoch = 1
batch_size = 4
validation_blocks = 4
"#,
    );
    let out = cne(&["train", "--config", "t.cfg", "--out", "t.cne"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("t.log.csv").exists());
    write(dir.path(), "s.cfg", SWEEP);
    let out = cne(&["evaluate", "--config", "s.cfg", "--checkpoint", "t.cne"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t.cne"));
}

#[test]
fn encode_prints_rate_matched_block() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "s.cfg", SWEEP);
    let bits = "1".repeat(120);
    let out = cne(&["encode", "--config", "s.cfg", "--rate", "3/4", "--bits", &bits], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let coded = text.lines().find(|l| l.starts_with("coded")).unwrap();
    assert_eq!(coded.trim_start_matches("coded ").len(), 168);
}
