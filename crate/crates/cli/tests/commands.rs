use std::fs;
use std::path::Path;
use std::process::Command;

use adc_core::collector::{FetchStatus, Manifest, SampleRecord, Split};
use adc_core::curator::{CurationReport, SampleFlag};
use adc_core::taxonomy::SubclassKey;

fn adc(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_adc")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(out: &std::process::Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn manifest(per_class: &[usize]) -> Manifest {
    let mut m = Manifest::new("t", Some(1));
    for (c, &n) in per_class.iter().enumerate() {
        for i in 0..n {
            m.push(SampleRecord {
                sample_id: format!("c{c}-{i:03}"),
                subclass_key: SubclassKey { class_index: c, option_indices: vec![0] },
                webly_label: c,
                query: format!("q{c}"),
                uri: format!("mock://{c}/{i}"),
                content_hash: Some(format!("{c}-{i}")),
                byte_size: 10,
                status: FetchStatus::Fetched,
                split: Split::None,
                clean_candidate: false,
            })
            .unwrap();
        }
    }
    m
}

#[test]
fn votes_aggregate_reports_interval() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("votes.csv"), "a,yes,yes,yes\nb,yes,yes,no\nc,yes,no,no\nd,yes,unsure,yes\n").unwrap();
    let text = ok(&adc(&["votes", "aggregate", "--votes", "votes.csv", "--policy", "strict"], dir.path()));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["clean"], 1);
    assert_eq!(v["noise_interval"]["lower"], 0.25);
    assert_eq!(v["noise_interval"]["upper"], 0.5);
}

#[test]
fn eval_dro_identities() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("acc.jsonl"),
        "{\"class\":1,\"accuracy\":0.5}\n{\"class\":0,\"accuracy\":0.9}\n{\"class\":2,\"accuracy\":0.7}\n",
    )
    .unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&ok(&adc(&["eval", "dro", "--acc", "acc.jsonl", "--delta", "0"], dir.path()))).unwrap();
    assert!((v["result"]["value"].as_f64().unwrap() - 0.7).abs() < 1e-12);
    let v: serde_json::Value =
        serde_json::from_str(&ok(&adc(&["eval", "dro", "--acc", "acc.jsonl", "--delta", "inf"], dir.path()))).unwrap();
    assert_eq!(v["result"]["value"].as_f64().unwrap(), 0.5);
}

#[test]
fn eval_detect_counts_hits() {
    let dir = tempfile::tempdir().unwrap();
    let entries = (0..4)
        .map(|i| SampleFlag { sample_id: format!("s{i}"), label: 0, score: 0.0, flag: i < 2, suggested_label: None })
        .collect();
    CurationReport::new("t", 2, entries).save(&dir.path().join("r.rep")).unwrap();
    fs::write(
        dir.path().join("truth.jsonl"),
        "{\"sample_id\":\"s0\",\"label\":1}\n{\"sample_id\":\"s1\",\"label\":0}\n{\"sample_id\":\"s2\",\"label\":1}\n{\"sample_id\":\"s3\",\"label\":0}\n",
    )
    .unwrap();
    let v: serde_json::Value = serde_json::from_str(&ok(&adc(
        &["eval", "detect", "--report", "r.rep", "--truth", "truth.jsonl"],
        dir.path(),
    )))
    .unwrap();
    assert_eq!(v["hits"], 1);
    assert_eq!(v["precision"], serde_json::json!({"state": "defined", "value": 0.5}));
    assert_eq!(v["recall"]["value"], 0.5);
}

#[test]
fn subset_commands_write_manifests() {
    let dir = tempfile::tempdir().unwrap();
    manifest(&[40, 60, 20]).save(&dir.path().join("m.jsonl")).unwrap();
    ok(&adc(
        &["subset", "split", "--manifest", "m.jsonl", "--eval", "12", "--test", "6", "--tiny", "50", "--out", "s.jsonl"],
        dir.path(),
    ));
    let s = Manifest::load(&dir.path().join("s.jsonl")).unwrap();
    let count = |sp| s.records().iter().filter(|r| r.split == sp).count();
    assert_eq!((count(Split::Eval), count(Split::Test), count(Split::Train)), (12, 6, 50));

    ok(&adc(&["subset", "longtail", "--manifest", "m.jsonl", "--rho", "4", "--out", "lt.jsonl"], dir.path()));
    let lt = Manifest::load(&dir.path().join("lt.jsonl")).unwrap();
    let per = |c| lt.records().iter().filter(|r| r.webly_label == c).count();
    // head = class 1 (60), then class 0 gets floor(60/2) = 30, class 2 gets 15
    assert_eq!((per(1), per(0), per(2)), (60, 30, 15));

    let too_many = adc(&["subset", "split", "--manifest", "m.jsonl", "--eval", "100", "--test", "100", "--out", "x"], dir.path());
    assert!(!too_many.status.success());
}

#[test]
fn curate_merge_and_clean() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(&[5, 5]);
    m.save(&dir.path().join("m.jsonl")).unwrap();
    let report = |name: &str, flagged: &[usize]| {
        let entries = m
            .records()
            .iter()
            .enumerate()
            .map(|(i, r)| SampleFlag {
                sample_id: r.sample_id.clone(),
                label: r.webly_label,
                score: 0.0,
                flag: flagged.contains(&i),
                suggested_label: None,
            })
            .collect();
        CurationReport::new(name, 2, entries).save(&dir.path().join(format!("{name}.rep"))).unwrap();
    };
    report("a", &[0, 1, 2]);
    report("b", &[2, 3]);
    ok(&adc(&["curate", "merge", "--mode", "union", "a.rep", "b.rep", "--out", "u.rep"], dir.path()));
    assert_eq!(CurationReport::load(&dir.path().join("u.rep")).unwrap().flagged_count(), 4);
    ok(&adc(&["subset", "clean", "--manifest", "m.jsonl", "--reports", "a.rep,b.rep", "--out", "c.jsonl"], dir.path()));
    assert_eq!(Manifest::load(&dir.path().join("c.jsonl")).unwrap().len(), 6);
}
