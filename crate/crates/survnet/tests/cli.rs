use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use survnet::manifest::{validate_json, Manifest};

fn survnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_survnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}\n{}", o.status.code(), stderr(&o));
    o
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, preset: &str, seed: &str, train: &str, test: &str) -> Output {
    ok(survnet(&[
        "gen-data",
        "--preset",
        preset,
        "--seed",
        seed,
        "--out",
        p(dir),
        "--train",
        train,
        "--test",
        test,
    ]))
}

#[test]
fn gen_data_reports_prevalence_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = gen(&a, "nodule-cifar", "7", "600", "200");
    gen(&b, "nodule-cifar", "7", "600", "200");
    let text = stdout(&out);
    let row = text.lines().find(|l| l.starts_with("train\t1")).unwrap();
    let prevalence: f64 = row.rsplit('\t').next().unwrap().parse().unwrap();
    assert!((prevalence - 0.5).abs() < 0.06, "{text}");
    for split in ["train", "test"] {
        for f in ["records.tsv", "pixels.bin", "dataset.json"] {
            let x = fs::read(a.join(split).join(f)).unwrap();
            assert_eq!(x, fs::read(b.join(split).join(f)).unwrap(), "{split}/{f}");
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    let o = survnet(&["gen-data", "--preset", "sim-a"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(survnet(&["train", "--data", "x", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        survnet(&["gen-data", "--preset", "sim-z", "--out", "x"]).status.code(),
        Some(2)
    );
}

#[test]
fn missing_or_corrupt_data_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = survnet(&["train", "--data", p(&tmp.path().join("nothing"))]);
    assert_eq!(o.status.code(), Some(3));
    let d = tmp.path().join("d");
    gen(&d, "sim-a", "1", "8", "8");
    let pixels = d.join("train").join("pixels.bin");
    let mut bytes = fs::read(&pixels).unwrap();
    bytes.truncate(bytes.len() - 5);
    fs::write(&pixels, bytes).unwrap();
    let o = survnet(&["train", "--data", p(&d), "--epochs", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("pixels.bin"));
}

#[test]
fn train_streams_rows_and_writes_a_complete_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (d, run) = (tmp.path().join("d"), tmp.path().join("run"));
    gen(&d, "sim-a", "2", "96", "40");
    let o = ok(survnet(&[
        "train",
        "--loss",
        "mini-batched",
        "--preset",
        "table1",
        "--data",
        p(&d),
        "--epochs",
        "5",
        "--out",
        p(&run),
    ]));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epoch,train_loss,test_loss,auc,c1,c2,seconds,skipped_batches");
    assert_eq!(lines.len(), 6);
    assert_eq!(fs::read_to_string(run.join("metrics.csv")).unwrap(), text);
    assert_eq!(
        fs::read_to_string(run.join("metrics.jsonl")).unwrap().lines().count(),
        5
    );
    for row in &lines[1..] {
        let f: Vec<&str> = row.split(',').collect();
        assert!(f[3].is_empty() && !f[4].is_empty() && f[6].is_empty());
    }

    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    validate_json(&doc).unwrap();
    let m = Manifest::load(&run.join("manifest.json")).unwrap();
    assert_eq!(m.train.loss, "mini-batched");
    assert_eq!(m.model.init, "he-uniform");
    assert!(m.data.params.iter().any(|(k, v)| k == "phi.1" && v == "3"));

    let e = ok(survnet(&["eval", "--run", p(&run), "--data", p(&d)]));
    let last: Vec<&str> = lines[5].split(',').collect();
    let ev: Vec<String> = stdout(&e)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(String::from)
        .collect();
    assert_eq!((ev[0].as_str(), ev[2].as_str()), (last[2], last[4]));
}

#[test]
fn two_task_rows_carry_auc_and_both_c_indexes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    gen(&d, "nodule-cifar", "3", "128", "64");
    let o = ok(survnet(&[
        "train",
        "--loss",
        "two-task",
        "--preset",
        "simc",
        "--data",
        p(&d),
        "--epochs",
        "2",
    ]));
    for row in stdout(&o).lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        assert!(!f[3].is_empty() && !f[4].is_empty() && !f[5].is_empty(), "{row}");
    }
}

#[test]
fn oracle_trains_on_censored_data_and_flags_beat_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    gen(&d, "sim-b", "4", "64", "32");
    let cfg = tmp.path().join("train.cfg");
    fs::write(&cfg, "# oracle run\nloss = oracle\nepochs = 4\nbatch_size = 16\n").unwrap();
    let o = ok(survnet(&[
        "train",
        "--data",
        p(&d),
        "--config",
        p(&cfg),
        "--epochs",
        "2",
    ]));
    assert_eq!(stdout(&o).lines().count(), 3);
    fs::write(&cfg, "momentum = 0.9\n").unwrap();
    assert_eq!(
        survnet(&["train", "--data", p(&d), "--config", p(&cfg)]).status.code(),
        Some(2)
    );
}

#[test]
fn divergence_exits_4_naming_the_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    gen(&d, "sim-a", "5", "64", "16");
    let o = survnet(&[
        "train",
        "--data",
        p(&d),
        "--loss",
        "oracle",
        "--lr",
        "1e30",
        "--epochs",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("batch"), "{}", stderr(&o));
}

#[test]
fn grad_check_passes_deterministically_and_catches_a_sign_bug() {
    let a = ok(survnet(&["grad-check", "--trials", "3", "--seed", "1"]));
    let b = ok(survnet(&["grad-check", "--trials", "3", "--seed", "1"]));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(
        text.lines().last().unwrap().starts_with("PASS 4 losses, 5 layer kinds"),
        "{text}"
    );
    let bad = survnet(&["grad-check", "--trials", "3", "--inject-sign-bug"]);
    assert_eq!(bad.status.code(), Some(5));
    assert!(stderr(&bad).contains("mini-batched"));
}
