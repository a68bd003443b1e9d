use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn codes() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../codes")
}

fn crossmpt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossmpt"))
        .args(args)
        .current_dir(codes())
        .env_remove("CROSSMPT_PCM_DIR")
        .output()
        .unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = crossmpt(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

struct TempDir(PathBuf);

impl TempDir {
    fn new(tag: &str) -> Self {
        let p = std::env::temp_dir().join(format!("crossmpt-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&p).unwrap();
        TempDir(p)
    }

    fn file(&self, name: &str) -> String {
        self.0.join(name).to_string_lossy().into_owned()
    }
}

impl Drop for TempDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

#[test]
fn mask_stats_bch_63_45() {
    let csv = stdout(&["mask-stats", "--pcm", "bch_63_45.alist"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "name,n,k,rho1,rho2,mm_unmasked,ms_unmasked,ss_unmasked");
    let row = lines.next().unwrap();
    assert!(row.starts_with("bch_63_45,63,45,"), "{row}");
    assert!(row.contains("32.45") && row.contains("53.09"), "{row}");
}

#[test]
fn code_info_reports_dimensions() {
    let out = stdout(&["code-info", "--pcm", "hamming_7_4.alist"]);
    assert!(out.contains("n,7\n") && out.contains("k,4\n") && out.contains("rank,3\n"), "{out}");
    assert!(out.contains("row_degrees,4:3"), "{out}");
}

#[test]
fn pcm_directory_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_crossmpt"))
        .args(["code-info", "--pcm", "hamming_7_4"])
        .env("CROSSMPT_PCM_DIR", codes())
        .current_dir(std::env::temp_dir())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn hard_decision_ber_near_uncoded_value() {
    // ldpc_121_60 has rate close to one half; σ depends on the exact rate.
    let csv = stdout(&[
        "eval", "--pcm", "ldpc_121_60.alist", "--decoder", "hard", "--snr", "4", "--min-frame-errors", "2000",
        "--seed", "1",
    ]);
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let ber: f64 = row[9].parse().unwrap();
    let bits: f64 = row[8].parse().unwrap();
    let info = stdout(&["code-info", "--pcm", "ldpc_121_60.alist"]);
    let rate: f64 = info.lines().find_map(|l| l.strip_prefix("rate,")).unwrap().parse().unwrap();
    let sigma = (2.0 * rate * 10f64.powf(0.4)).powf(-0.5);
    let q = 0.5 * libm::erfc(1.0 / sigma / std::f64::consts::SQRT_2);
    let se = (q * (1.0 - q) / bits).sqrt();
    assert!((ber - q).abs() < 4.0 * se, "ber {ber} vs {q} (se {se})");
}

fn model_flags() -> Vec<&'static str> {
    vec!["--pcm", "hamming_7_4.alist", "--layers", "1", "--dim", "8", "--heads", "2", "--seed", "5"]
}

#[test]
fn zero_epoch_training_equals_init() {
    let dir = TempDir::new("zero");
    let (a, b) = (dir.file("init.ckpt"), dir.file("train.ckpt"));
    let mut init = vec!["init"];
    init.extend(model_flags());
    init.extend(["--out", &a]);
    stdout(&init);
    let mut train = vec!["train"];
    train.extend(model_flags());
    train.extend(["--epochs", "0", "--out", &b]);
    stdout(&train);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn training_is_seeded_and_resumable() {
    let dir = TempDir::new("train");
    let run = |out: &str, csv: &str, extra: &[&str]| {
        let mut args = vec!["train"];
        args.extend(model_flags());
        args.extend(["--epochs", "3", "--batches-per-epoch", "3", "--batch-size", "8"]);
        args.extend(["--out", out, "--loss-csv", csv]);
        args.extend(extra);
        stdout(&args);
    };
    run(&dir.file("a.ckpt"), &dir.file("a.csv"), &[]);
    run(&dir.file("b.ckpt"), &dir.file("b.csv"), &[]);
    let read = |n: &str| std::fs::read(dir.file(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.ckpt"), read("b.ckpt"));
    let csv = String::from_utf8(read("a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("epoch,mean_loss,lr\n1,"));

    // One epoch of the three-epoch schedule, then resume for the rest.
    let partial = dir.file("partial.ckpt");
    let mut args = vec!["train"];
    args.extend(model_flags());
    args.extend(["--epochs", "3", "--batches-per-epoch", "3", "--batch-size", "8", "--out", &partial]);
    args.extend(["--stop-after", "1"]);
    stdout(&args);
    run(&dir.file("c.ckpt"), &dir.file("c.csv"), &["--resume", &partial]);
    assert_eq!(read("a.ckpt"), read("c.ckpt"));
    let tail: Vec<String> = csv.lines().skip(2).map(String::from).collect();
    let resumed: Vec<String> = String::from_utf8(read("c.csv")).unwrap().lines().skip(1).map(String::from).collect();
    assert_eq!(tail, resumed);
}

#[test]
fn eval_is_worker_invariant() {
    let run = |workers: &str| {
        stdout(&[
            "eval", "--pcm", "hamming_7_4.alist", "--decoder", "ms", "--snr", "2,4", "--min-frame-errors", "300",
            "--seed", "4", "--workers", workers,
        ])
    };
    let one = run("1");
    assert_eq!(one, run("1"));
    assert_eq!(one, run("3"));
    assert!(one.starts_with("code,decoder,channel,seed,ebno_db,"));
    assert_eq!(one.lines().count(), 3);
}

#[test]
fn eval_writes_plot_data() {
    let dir = TempDir::new("plot");
    let (out, plot) = (dir.file("ber.csv"), dir.file("plot.csv"));
    let printed = stdout(&[
        "eval", "--pcm", "hamming_7_4.alist", "--decoder", "ml", "--snr", "3", "--min-frame-errors", "20", "--out",
        &out, "--plot-data", &plot,
    ]);
    assert!(printed.is_empty());
    assert!(std::fs::read_to_string(&out).unwrap().lines().count() == 2);
    assert!(std::fs::read_to_string(&plot).unwrap().starts_with("series,ebno_db,ber\n"));
}

#[test]
fn attention_dump_shapes() {
    let dir = TempDir::new("attn");
    let ckpt = dir.file("m.ckpt");
    let mut init = vec!["init"];
    init.extend(model_flags());
    init.extend(["--out", &ckpt]);
    stdout(&init);
    let csv = stdout(&["attn-dump", "--pcm", "hamming_7_4.alist", "--checkpoint", &ckpt, "--flip", "2"]);
    assert!(csv.starts_with("layer,map,row,col,score\n"));
    // One layer: m2s is 7x3 and s2m is 3x7.
    assert_eq!(csv.lines().count(), 1 + 21 + 21);
    let summed = stdout(&[
        "attn-dump", "--pcm", "hamming_7_4.alist", "--checkpoint", &ckpt, "--aggregate", "mean-over-layers",
        "--reduce", "column-sum",
    ]);
    assert_eq!(summed.lines().count(), 1 + 3 + 7);
    assert!(summed.lines().skip(1).all(|l| l.starts_with("mean,")));
}

#[test]
fn flops_report_has_both_architectures() {
    let csv = stdout(&["flops", "--pcm", "bch_63_45.alist"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("bch_63_45,63,45,6,128,crossmpt,"));
    assert!(lines[2].starts_with("bch_63_45,63,45,6,128,ecct,"));
}

fn assert_fails(args: &[&str], code: i32, needle: &str) {
    let out = crossmpt(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}");
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(needle), "{args:?}: {err}");
}

#[test]
fn user_errors_exit_one_with_distinct_messages() {
    assert_fails(&["code-info", "--pcm", "missing.alist"], 1, "PCM file not found");
    assert_fails(&["code-info", "--pcm", "hamming_7_4.alist", "--bogus"], 1, "--bogus");
    assert_fails(&["eval", "--pcm", "hamming_7_4.alist", "--decoder", "nn", "--snr", "3"], 1, "--checkpoint");

    let dir = TempDir::new("mismatch");
    let ckpt = dir.file("m.ckpt");
    let mut init = vec!["init"];
    init.extend(model_flags());
    init.extend(["--out", &ckpt]);
    stdout(&init);
    assert_fails(
        &["eval", "--pcm", "bch_31_16.alist", "--decoder", "nn", "--checkpoint", &ckpt, "--snr", "3"],
        1,
        "checkpoint/config mismatch",
    );
    std::fs::write(&ckpt, b"not a checkpoint").unwrap();
    assert_fails(
        &["eval", "--pcm", "hamming_7_4.alist", "--decoder", "nn", "--checkpoint", &ckpt, "--snr", "3"],
        1,
        "m.ckpt",
    );
}

#[test]
fn help_exists_for_every_subcommand() {
    for sub in ["code-info", "mask-stats", "init", "train", "eval", "attn-dump", "flops"] {
        let out = crossmpt(&[sub, "--help"]);
        assert!(out.status.success(), "{sub}");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("--pcm"), "{sub}: {text}");
    }
    let train = String::from_utf8(crossmpt(&["train", "--help"]).stdout).unwrap();
    for flag in ["--seed", "--resume", "--loss-csv", "--lr-start", "--continuous-snr"] {
        assert!(train.contains(flag), "{flag}");
    }
}

#[test]
fn outputs_leave_no_temporary_files() {
    let dir = TempDir::new("atomic");
    let out = dir.file("stats.csv");
    stdout(&["mask-stats", "--pcm", "tree_3.alist", "--out", &out]);
    let names: Vec<String> = std::fs::read_dir(&dir.0)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, ["stats.csv"]);
    assert!(Path::new(&out).exists());
}
