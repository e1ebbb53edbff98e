//! End-to-end tests against the compiled binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_icelayer"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn assert_ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

#[test]
fn synthetic_pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    // Generation is deterministic: two runs, byte-identical files.
    assert_ok(&run_in(dir, &["synth", "--seed", "7", "--n", "20", "--out", "a/records.jsonl"]));
    assert_ok(&run_in(dir, &["synth", "--seed", "7", "--n", "20", "--out", "b/records.jsonl"]));
    let records = fs::read(dir.join("a/records.jsonl")).unwrap();
    assert_eq!(records, fs::read(dir.join("b/records.jsonl")).unwrap());
    assert_eq!(
        fs::read(dir.join("a/records.mar.csv")).unwrap(),
        fs::read(dir.join("b/records.mar.csv")).unwrap()
    );

    let stdout = assert_ok(&run_in(
        dir,
        &[
            "build", "--records", "a/records.jsonl", "--mar", "a/records.mar.csv",
            "--physical-features", "smb", "--out", "samples.jsonl",
        ],
    ));
    assert!(stdout.contains("20 samples"), "{stdout}");

    let stdout = assert_ok(&run_in(
        dir,
        &[
            "train", "--samples", "samples.jsonl", "--physical-features", "smb",
            "--hidden", "8", "--epochs", "2", "--seed", "1", "--out-dir", "run",
        ],
    ));
    assert!(stdout.contains("split: 12 train / 4 val / 4 test"), "{stdout}");
    assert!(stdout.contains("test RMSE"), "{stdout}");
    let history = fs::read_to_string(dir.join("run/history.csv")).unwrap();
    assert!(history.starts_with("epoch,lr,train_mse,val_rmse\n"));
    assert_eq!(history.lines().count(), 3); // header + 2 epochs

    // A samples file built with other features is refused up front.
    let out = run_in(dir, &["train", "--samples", "samples.jsonl", "--epochs", "1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("rebuild"), "unexpected stderr");

    let stdout = assert_ok(&run_in(
        dir,
        &["eval", "--checkpoint", "run/model.ckpt", "--samples", "samples.jsonl", "--out", "eval.json"],
    ));
    assert!(stdout.contains("RMSE"), "{stdout}");
    assert!(dir.join("eval.json").is_file());

    // The trial protocol from a committed config file, twice: byte-identical.
    fs::write(
        dir.join("exp.toml"),
        "records = \"a/records.jsonl\"\nmar = \"a/records.mar.csv\"\n\
         physical_features = [\"smb\"]\nhidden = 8\nepochs = 2\ntrials = 2\n",
    )
    .unwrap();
    let stdout = assert_ok(&run_in(dir, &["trials", "--config", "exp.toml", "--out-dir", "t1"]));
    assert!(stdout.contains("test RMSE over 2 trials"), "{stdout}");
    assert_ok(&run_in(dir, &["trials", "--config", "exp.toml", "--out-dir", "t2"]));
    let report = fs::read(dir.join("t1/trials.json")).unwrap();
    assert_eq!(report, fs::read(dir.join("t2/trials.json")).unwrap());

    // Second variant (base-only), then a two-row comparison table.
    assert_ok(&run_in(
        dir,
        &["trials", "--config", "exp.toml", "--physical-features", "none", "--out-dir", "t3"],
    ));
    fs::copy(dir.join("t1/trials.json"), dir.join("sage-smb.json")).unwrap();
    fs::copy(dir.join("t3/trials.json"), dir.join("sage-base.json")).unwrap();
    let stdout = assert_ok(&run_in(dir, &["report", "sage-smb.json", "sage-base.json", "--out", "table.csv"]));
    let rows: Vec<&str> = stdout.lines().filter(|l| l.starts_with("sage-")).collect();
    assert_eq!(rows.len(), 2, "{stdout}");
    assert!(rows[0].starts_with("sage-smb") && rows[0].contains('±'), "{stdout}");
    assert!(rows[1].contains("base"), "{stdout}");
    let table = fs::read_to_string(dir.join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.starts_with("report,cell,features,n_trials,mean_rmse,std_rmse,y1,"));
}

#[test]
fn gradcheck_passes_on_the_shipped_configuration() {
    let out = bin().arg("gradcheck").output().unwrap();
    let stdout = assert_ok(&out);
    assert!(stdout.contains("all 7 gradient checks passed"), "{stdout}");
}

#[test]
fn exit_codes_distinguish_config_data_and_numeric_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    // Configuration problems → 2.
    assert_eq!(code(&run_in(dir, &["train", "--bogus"])), 2);
    fs::write(dir.join("bad.toml"), "hiden = 4\n").unwrap();
    let out = run_in(dir, &["train", "--config", "bad.toml"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field"));
    assert_eq!(code(&run_in(dir, &["train", "--cell", "tree"])), 2);

    // Data problems → 3.
    let out = run_in(dir, &["train", "--records", "missing.jsonl", "--epochs", "1"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.jsonl"));
    fs::write(dir.join("trunc.ckpt"), b"ILCPxxxx").unwrap();
    assert_eq!(code(&run_in(dir, &["eval", "--checkpoint", "trunc.ckpt", "--records", "r.jsonl"])), 3);

    // Numeric failures → 4: an absurd learning rate blows the loss up to inf.
    assert_ok(&run_in(dir, &["synth", "--seed", "3", "--n", "8", "--out", "records.jsonl", "--no-mar"]));
    let out = run_in(
        dir,
        &[
            "train", "--records", "records.jsonl", "--hidden", "4", "--epochs", "1",
            "--lr0", "1e100", "--out-dir", "blow",
        ],
    );
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("numeric"));
}

#[test]
fn help_covers_every_subcommand() {
    for sub in ["synth", "build", "train", "eval", "trials", "gradcheck", "report"] {
        let out = bin().args([sub, "--help"]).output().unwrap();
        assert!(out.status.success(), "{sub} --help failed");
    }
    let out = bin().args(["train", "--help"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for flag in [
        "--config", "--records", "--mar", "--samples", "--out-dir", "--cell", "--hidden",
        "--dropout", "--physical-features", "--edge-mode", "--edge-cap", "--fanout",
        "--weighted-mean", "--epochs", "--lr0", "--period", "--seed", "--weight-decay",
        "--decoupled-decay", "--shuffle", "--trials", "--bit-exact",
    ] {
        assert!(text.contains(flag), "train --help missing {flag}");
    }
}
