use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use cabin_nlu::corpus::parse_corpus;

fn nlu() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlu"))
}

fn run(args: &[&str]) -> Output {
    nlu().args(args).output().expect("spawn nlu")
}

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/overfit50.tsv")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Flags for a small network that memorizes the fixture.
const SMALL: [&str; 14] = [
    "--hidden-dim",
    "32",
    "--attention-dim",
    "16",
    "--embedding-dim",
    "50",
    "--dropout",
    "0",
    "--max-epochs",
    "300",
    "--patience",
    "300",
    "--holdout-fraction",
    "0",
];

fn train(model: &str, out: &Path) -> Output {
    let mut args = vec!["train", "--model", model, "--data", s(&fixture()).to_owned().leak(), "--out", s(out)];
    args.extend(SMALL);
    run(&args)
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

#[test]
fn generate_writes_requested_count_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a.tsv"), tmp.path().join("b.tsv"));
    for p in [&a, &b] {
        let out = run(&["generate", "--out", s(p), "--n", "3347", "--seed", "7"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(parse_corpus(&text).unwrap().len(), 3347);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(String::from_utf8_lossy(&run(&["generate", "--out", s(&a), "--n", "3347"]).stdout).contains("3347"));
}

#[test]
fn generate_small_and_unwritable() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("small.tsv");
    assert!(run(&["generate", "--out", s(&p), "--n", "5"]).status.success());
    assert_eq!(parse_corpus(&fs::read_to_string(&p).unwrap()).unwrap().len(), 5);
    let bad = tmp.path().join("missing/dir/x.tsv");
    assert_eq!(run(&["generate", "--out", s(&bad), "--n", "5"]).status.code(), Some(2));
}

#[test]
fn train_writes_bundles_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let hj = tmp.path().join("hj");
    let out = train("hier_joint", &hj);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(files(&hj), ["bundle.json", "joint.nlu", "keyword_tagger.nlu", "slot_tagger.nlu"]);

    let hy = tmp.path().join("hy");
    assert!(train("hybrid1", &hy).status.success());
    assert_eq!(files(&hy), ["bundle.json", "freq_table.json", "keyword_tagger.nlu"]);

    let again = tmp.path().join("hj2");
    assert!(train("hier_joint", &again).status.success());
    for f in files(&hj) {
        assert_eq!(fs::read(hj.join(&f)).unwrap(), fs::read(again.join(&f)).unwrap(), "{f}");
    }
}

#[test]
fn usage_and_parse_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let data = fixture();
    let out = run(&["train", "--model", "hybrid9", "--data", s(&data), "--out", s(&tmp.path().join("x"))]);
    assert_eq!(out.status.code(), Some(64));
    let report = tmp.path().join("r.json");
    let out = run(&["eval", "--model", "slot_tagger", "--data", s(&data), "--k", "1", "--report", s(&report)]);
    assert_eq!(out.status.code(), Some(64));
    let bad = tmp.path().join("bad.tsv");
    fs::write(&bad, "# id=1\tintent=Stop\nstop\tNone\n\n").unwrap();
    let out = run(&["train", "--model", "joint", "--data", s(&bad), "--out", s(&tmp.path().join("y"))]);
    assert_eq!(out.status.code(), Some(65));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn eval_writes_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for name in ["a.json", "b.json"] {
        let report = tmp.path().join(name);
        let mut args = vec!["eval", "--model", "slot_tagger", "--k", "10", "--seed", "4"];
        let data = fixture();
        let data = s(&data).to_owned();
        args.extend(["--data", &data, "--report", s(&report)]);
        args.extend(["--hidden-dim", "16", "--embedding-dim", "20", "--max-epochs", "3"]);
        let out = run(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        texts.push((fs::read(&report).unwrap(), fs::read_to_string(report.with_extension("txt")).unwrap()));
    }
    assert_eq!(texts[0], texts[1]);
    let table = &texts[0].1;
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('-')).skip(1).collect();
    assert_eq!(rows.len(), 8);
    assert!(table.lines().next().unwrap().starts_with("Slot Type "));
    assert!(rows[7].starts_with("*AVERAGE*"));
}

#[test]
fn predict_and_serve() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = tmp.path().join("b");
    assert!(train("hier_joint", &bundle).status.success());

    let out = run(&["predict", "--bundle", s(&bundle), "--text", "stop the car"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["intent"], "Stop");

    let mut child = nlu()
        .args(["serve", "--bundle", s(&bundle)])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"{\"id\":42,\"text\":\"stop the car\"}\nnot json\n{\"id\":7,\"text\":\"pull over at the gym\"}\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["id"], 42);
    assert_eq!(lines[0]["intent"], "Stop");
    assert!(lines[1]["id"].is_null() && lines[1]["error"].is_string());
    assert_eq!(lines[2]["id"], 7);
    assert_eq!(lines[2]["slots"][0]["label"], "Location");
}

#[test]
fn corrupted_model_exits_66() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = tmp.path().join("b");
    let mut args = vec!["train", "--model", "separate1", "--out", s(&bundle)];
    let data = s(&fixture()).to_owned();
    args.extend(["--data", &data, "--max-epochs", "1", "--hidden-dim", "8", "--embedding-dim", "8"]);
    assert!(run(&args).status.success());
    let file = bundle.join("intent.nlu");
    let mut bytes = fs::read(&file).unwrap();
    bytes[..4].copy_from_slice(b"XXXX");
    fs::write(&file, &bytes).unwrap();
    let out = run(&["predict", "--bundle", s(&bundle), "--text", "stop"]);
    assert_eq!(out.status.code(), Some(66));
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));

    bytes[..4].copy_from_slice(b"NLU1");
    bytes[4] = 9;
    fs::write(&file, &bytes).unwrap();
    assert_eq!(run(&["serve", "--bundle", s(&bundle)]).status.code(), Some(66));
}
