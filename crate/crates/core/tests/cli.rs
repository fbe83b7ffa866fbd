//! The `inseg` binary end to end through its command-line interface.

use std::path::Path;
use std::process::{Command, Output};

use inseg::io::read_mvol;

fn inseg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inseg")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn phantom_then_evaluate_against_itself() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "spec.txt", "dims = 20,18,10\nradius_min = 2\nradius_max = 3\nseed = 4\n");
    let o = inseg(&["phantom", "--spec", "spec.txt", "--out", "subj"], d);
    assert!(o.status.success(), "{o:?}");
    let truth = read_mvol(&d.join("subj/truth.mvol")).unwrap();
    assert_eq!(truth.dims(), [20, 18, 10]);

    let o = inseg(&["evaluate", "--pred", "subj/truth.mvol", "--truth", "subj/truth.mvol"], d);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "dice=1.0\nppv=1.0\nvolume_difference=0.0\nsurface_distance=0.0\n");
}

#[test]
fn cohort_evaluation_prints_summary_table() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "spec.txt", "dims = 16,16,8\nradius_min = 2\nradius_max = 2.5\n");
    assert!(inseg(&["phantom", "--spec", "spec.txt", "--out", "c", "--count", "2"], d).status.success());
    let (a, b) = ("c/case_000/truth.mvol", "c/case_001/truth.mvol");
    let o = inseg(&["evaluate", "--pred", a, "--truth", a, "--pred", b, "--truth", a], d);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("case=0\ndice=1.0\n"), "{out}");
    assert!(out.contains("case=1\n"));
    assert!(out.contains("metric\tmedian\tmin\tmax\n"));
}

#[test]
fn train_and_infer_preserve_subject_dims() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write(d, "atlas.txt", "dims = 20,20,10\nradius_min = 2\nradius_max = 3\n");
    write(d, "subject.txt", "seed = 99\n");
    write(
        d,
        "run.txt",
        "patch_size = 9\nbatch_size = 4\nepochs = 1\npatches = 12\n\
         module1 = 1,1,1,1,1,1,1\nmodule2 = 1,1,1,1,1,1,1\nmodule3 = 1,1,1,1,1,1,1\n",
    );
    assert!(inseg(&["phantom", "--spec", "atlas.txt", "--out", "atlases", "--count", "2"], d).status.success());
    let o = inseg(&["train", "--atlases", "atlases", "--config", "run.txt", "--out", "models"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["axial.insg", "coronal.insg", "sagittal.insg", "config.txt", "loss_history.tsv"] {
        assert!(d.join("models").join(f).is_file(), "{f}");
    }

    let o = inseg(&["train", "--atlases", "atlases", "--config", "run.txt", "--out", "models2"], d);
    assert!(o.status.success());
    for f in ["axial.insg", "coronal.insg", "sagittal.insg", "loss_history.tsv"] {
        assert_eq!(read(d, &format!("models/{f}")), read(d, &format!("models2/{f}")), "{f}");
    }

    assert!(inseg(&["phantom", "--spec", "subject.txt", "--out", "subj"], d).status.success());
    for out in ["pred", "pred2"] {
        let o = inseg(
            &[
                "infer", "--models", "models", "--mprage", "subj/mprage.mvol", "--t2", "subj/t2.mvol",
                "--flair", "subj/flair.mvol", "--out", out,
            ],
            d,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["mask.mvol", "membership.mvol"] {
        assert_eq!(read_mvol(&d.join("pred").join(f)).unwrap().dims(), [48, 48, 24]);
        assert_eq!(read(d, &format!("pred/{f}")), read(d, &format!("pred2/{f}")), "{f}");
    }
}

#[test]
fn gradcheck_passes_on_a_fixed_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let o = inseg(&["gradcheck", "--seed", "3", "--trials", "20"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let last = out.lines().last().unwrap();
    let value: f64 = last.strip_prefix("max_rel_err=").unwrap().parse().unwrap();
    assert!(value <= 1e-3, "{out}");
}

#[test]
fn usage_and_runtime_errors_have_distinct_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(inseg(&["evaluate", "--pred", "a.mvol"], d).status.code(), Some(2));
    assert_eq!(inseg(&["frobnicate"], d).status.code(), Some(2));
    assert_eq!(
        inseg(&["evaluate", "--pred", "a", "--truth", "b", "--pred", "c"], d).status.code(),
        Some(2)
    );
    let o = inseg(&["evaluate", "--pred", "missing.mvol", "--truth", "missing.mvol"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.mvol"));
    write(d, "bad.txt", "colour = blue\n");
    assert_eq!(inseg(&["phantom", "--spec", "bad.txt", "--out", "x"], d).status.code(), Some(1));
}
