use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rateless_core::codebook::{build_codebook, RatelessCodebook};
use rateless_core::types::CompositionSpec;

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rateless-sim"))
        .args(args)
        .env("RATELESS_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("small.cfg");
    let text = format!(
        "name = small\nmode = direct\nn = 3200\nk = 8\nb = 64\nt = 8\neps1 = 0.1\ntrials = 4\n\
         state = iid 0.95,0.05\nr_target = 0.05\nlambda_star = 0.05\n{extra}"
    );
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn oracle_command_passes() {
    let out = sim(&["oracle", "all"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn dumped_codebook_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cb.bin");
    let out = sim(&["dump-codebook", "--k", "4", "--c", "6", "--m-star", "3", "--input", "1,2", "--seed", "9", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let read = RatelessCodebook::read_from(fs::File::open(&path).unwrap()).unwrap();
    let comp = CompositionSpec::from_weights(&[1, 2], 6).unwrap();
    assert_eq!(read, build_codebook(3, 6, 4, &comp, 9).unwrap());
}

#[test]
fn run_writes_identical_files_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let mut seen = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let out = sim(&["run", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert!(matches!(out.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = fs::read(out_dir.join("small_trials.csv")).unwrap();
        let summary = fs::read_to_string(out_dir.join("small_summary.txt")).unwrap();
        assert!(summary.contains("check.feedback_rate"));
        seen.push((csv, summary));
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn seed_override_changes_trials() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let csv = |seed: &str| {
        let out_dir = dir.path().join(seed);
        sim(&["run", "--config", &cfg, "--seed", seed, "--out", out_dir.to_str().unwrap()]);
        fs::read_to_string(out_dir.join("small_trials.csv")).unwrap()
    };
    let (a, b) = (csv("1"), csv("2"));
    assert!(a.lines().nth(1).unwrap().starts_with("0,1,"));
    assert_ne!(a, b);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let failing = small_config(dir.path(), "min_rate = 0.99\n");
    assert_eq!(sim(&["run", "--config", &failing]).status.code(), Some(1));

    assert_eq!(sim(&["run", "--preset", "no-such-preset"]).status.code(), Some(2));
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "k = banana\n").unwrap();
    assert_eq!(sim(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}
