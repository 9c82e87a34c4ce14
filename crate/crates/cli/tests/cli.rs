//! End-to-end tests of the kernelboost binary: subcommand round-trips, exit
//! codes, and byte-deterministic crossval output.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kernelboost"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

/// A 32x32 striped PGM; class "horiz" varies with y, class "vert" with x.
fn write_pgm(path: &Path, vertical: bool, phase: usize) {
    let side = 32;
    let mut body = format!("P2\n{side} {side}\n255\n");
    for y in 0..side {
        for x in 0..side {
            let t = if vertical { x } else { y };
            let v = if ((t + phase) / 4).is_multiple_of(2) { 30 } else { 220 };
            body.push_str(&format!("{v} "));
        }
        body.push('\n');
    }
    fs::write(path, body).unwrap();
}

fn write_dataset(root: &Path, per_class: usize) {
    for (class, vertical) in [("horiz", false), ("vert", true)] {
        let dir = root.join(class);
        fs::create_dir_all(&dir).unwrap();
        for i in 0..per_class {
            write_pgm(&dir.join(format!("img{i:02}.pgm")), vertical, i);
        }
    }
}

fn write_config(path: &Path) {
    fs::write(
        path,
        "size=32\n\
         channels=phog,siftbow\n\
         phog.levels=1\n\
         sift.step=8\n\
         sift.words=8\n\
         svm.c=10\n\
         knn.k=3\n\
         svmknn.k=4\n\
         svmknn.shortlist=8\n\
         folds=2\n",
    )
    .unwrap();
}

struct Fixture {
    _tmp: tempfile::TempDir,
    data: PathBuf,
    config: PathBuf,
    dir: PathBuf,
}

fn fixture() -> Fixture {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_path_buf();
    let data = dir.join("data");
    write_dataset(&data, 8);
    let config = dir.join("run.conf");
    write_config(&config);
    Fixture {
        _tmp: tmp,
        data,
        config,
        dir,
    }
}

#[test]
fn train_predict_eval_roundtrip() {
    let fx = fixture();
    let model = fx.dir.join("svm.model");
    let out = run(&[
        "train",
        "--method",
        "svm",
        "--data",
        fx.data.to_str().unwrap(),
        "--config",
        fx.config.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "train failed: {}", stderr_of(&out));
    assert!(model.is_file());

    let image = fx.data.join("vert/img00.pgm");
    let out = run(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--image",
        image.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "predict failed: {}", stderr_of(&out));
    let printed = String::from_utf8_lossy(&out.stdout);
    assert_eq!(printed.trim(), "vert");

    let csv = fx.dir.join("eval.csv");
    let out = run(&[
        "eval",
        "--model",
        model.to_str().unwrap(),
        "--data",
        fx.data.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "eval failed: {}", stderr_of(&out));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("class,horiz,vert\n"));
    assert!(text.contains("SVM,1.000000,"), "unexpected eval csv:\n{text}");
}

#[test]
fn extract_and_codebook_write_caches() {
    let fx = fixture();
    let cb = fx.dir.join("words.codebook");
    let out = run(&[
        "codebook",
        "--data",
        fx.data.to_str().unwrap(),
        "--config",
        fx.config.to_str().unwrap(),
        "--out",
        cb.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "codebook failed: {}", stderr_of(&out));
    assert!(fs::read_to_string(&cb)
        .unwrap()
        .starts_with("kernelboost-codebook v1"));

    let cache = fx.dir.join("phog.desc");
    let out = run(&[
        "extract",
        "--data",
        fx.data.to_str().unwrap(),
        "--config",
        fx.config.to_str().unwrap(),
        "--channel",
        "phog",
        "--out",
        cache.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "extract failed: {}", stderr_of(&out));
    assert!(fs::read_to_string(&cache)
        .unwrap()
        .starts_with("kernelboost-descriptors v1"));
}

#[test]
fn crossval_is_byte_deterministic_on_disk() {
    let fx = fixture();
    let (a, b) = (fx.dir.join("cv_a.csv"), fx.dir.join("cv_b.csv"));
    for out_path in [&a, &b] {
        let out = run(&[
            "crossval",
            "--data",
            fx.data.to_str().unwrap(),
            "--config",
            fx.config.to_str().unwrap(),
            "--folds",
            "2",
            "--seed",
            "5",
            "--method",
            "nn,knn,svm",
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "crossval failed: {}", stderr_of(&out));
    }
    let (a, b) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b, "crossval CSV must be byte-identical across runs");
}

#[test]
fn usage_errors_exit_1() {
    let fx = fixture();
    // Unknown method.
    let out = run(&[
        "train",
        "--method",
        "forest",
        "--data",
        fx.data.to_str().unwrap(),
        "--model",
        fx.dir.join("x.model").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr_of(&out));
    // Missing required argument (clap error).
    let out = run(&["train", "--method", "svm"]);
    assert_eq!(out.status.code(), Some(1));
    // Unknown subcommand.
    let out = run(&["transmogrify"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn data_errors_exit_2() {
    let fx = fixture();
    // Missing dataset directory.
    let out = run(&[
        "train",
        "--method",
        "svm",
        "--data",
        fx.dir.join("nowhere").to_str().unwrap(),
        "--model",
        fx.dir.join("x.model").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr_of(&out));

    // Corrupt image inside an otherwise fine tree.
    let bad = fx.data.join("vert/broken.pgm");
    fs::write(&bad, b"P5\n4 4\n255\nxx").unwrap();
    let out = run(&[
        "crossval",
        "--data",
        fx.data.to_str().unwrap(),
        "--config",
        fx.config.to_str().unwrap(),
        "--method",
        "nn",
        "--out",
        fx.dir.join("cv.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("broken.pgm"),
        "error should name the corrupt file: {}",
        stderr_of(&out)
    );

    // Malformed config.
    fs::remove_file(&bad).unwrap();
    let bad_conf = fx.dir.join("bad.conf");
    fs::write(&bad_conf, "svm.c=ten\n").unwrap();
    let out = run(&[
        "crossval",
        "--data",
        fx.data.to_str().unwrap(),
        "--config",
        bad_conf.to_str().unwrap(),
        "--method",
        "nn",
        "--out",
        fx.dir.join("cv.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_0() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("crossval"));
}
