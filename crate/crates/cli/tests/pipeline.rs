use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use adc_cli::pipeline::{Layout, StageStatus};
use adc_cli::{run_pipeline, PipelineError, ProjectConfig};
use adc_core::collector::{query_slug, sample_id, synthetic_png, FetchStatus, Manifest};
use adc_core::curator::CurationReport;
use adc_core::embedstore::EmbeddingMatrix;
use adc_core::taxonomy::{generate_queries, TaxonomySpec};

const TAXONOMY: &str = r#"
version = "fixture-1"

[[classes]]
name = "shirt"
[[classes.attributes]]
name = "color"
options = ["red", "blue"]

[[classes]]
name = "sweater"
[[classes.attributes]]
name = "color"
options = ["red", "blue"]
"#;

const PER_QUERY: usize = 15;

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    /// Samples whose features belong to the other class.
    planted: BTreeSet<String>,
}

/// Two classes, four queries, fifteen images each. One file is not an image,
/// one repeats another query's bytes, and three class-0 images carry class-1
/// features.
fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    fs::write(root.join("taxonomy.toml"), TAXONOMY).unwrap();
    let spec = TaxonomySpec::from_toml_str(TAXONOMY).unwrap();
    let queries = generate_queries(&spec).unwrap();

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut planted = BTreeSet::new();
    for (qi, (key, query)) in queries.iter().enumerate() {
        let slug = query_slug(query);
        let folder = root.join("corpus").join(&slug);
        fs::create_dir_all(&folder).unwrap();
        for i in 0..PER_QUERY {
            let name = format!("img-{i:02}.png");
            let bytes = match (qi, i) {
                (1, 14) => b"plain text, not an image".to_vec(),
                (3, 14) => synthetic_png(b"q0-0"),
                _ => synthetic_png(format!("q{qi}-{i}").as_bytes()),
            };
            fs::write(folder.join(&name), bytes).unwrap();
            let id = sample_id(query, &format!("corpus://{slug}/{name}"));
            let mut feature_class = key.class_index;
            if key.class_index == 0 && qi == 0 && i < 3 {
                feature_class = 1;
                planted.insert(id.clone());
            }
            // Deterministic jitter around the class center.
            let mut row = vec![0.0f32; 4];
            row[feature_class] = 4.0;
            for (d, v) in row.iter_mut().enumerate() {
                *v += ((qi * 31 + i * 7 + d * 3) % 11) as f32 * 0.05;
            }
            ids.push(id);
            rows.push(row);
        }
    }
    EmbeddingMatrix::new(ids, 4, rows.concat()).unwrap().write(&root.join("features.adce")).unwrap();

    fs::write(
        root.join("project.toml"),
        r#"
seed = 11
spec = "taxonomy.toml"
out_dir = "out"
log_level = "warn"

[collect]
backend = "local"
corpus = "corpus"
workers = 4

[curate]
embeddings = "features.adce"
methods = ["knn"]
knn_k = 10

[subset.split]
eval = 10
test = 10
"#,
    )
    .unwrap();
    Fixture { _dir: dir, root, planted }
}

#[test]
fn end_to_end_over_local_corpus() {
    let fx = fixture();
    let cfg = ProjectConfig::load(&fx.root.join("project.toml")).unwrap();
    let report = run_pipeline(&cfg).unwrap();
    // Without expansion requests the design stage only validates the taxonomy.
    assert_eq!(report.stage("design").unwrap().status, StageStatus::Unchanged);
    for stage in ["collect", "curate", "subset"] {
        assert_eq!(report.stage(stage).unwrap().status, StageStatus::Ok, "{stage}");
    }

    let layout = Layout { root: fx.root.join("out") };
    let manifest = Manifest::load(&layout.manifest()).unwrap();
    let counts = manifest.counts();
    assert_eq!(manifest.len(), 4 * PER_QUERY);
    assert_eq!((counts.fetched, counts.malformed, counts.duplicate), (58, 1, 1));
    assert_eq!(manifest.seed, Some(11));

    let knn = CurationReport::load(&layout.report("knn")).unwrap();
    assert_eq!(knn.len(), 58);
    assert_eq!(knn.seed, Some(11));
    let flagged: BTreeSet<String> =
        knn.entries.iter().filter(|e| e.flag).map(|e| e.sample_id.clone()).collect();
    assert_eq!(flagged, fx.planted);

    let clean = Manifest::load(&layout.clean_manifest()).unwrap();
    assert_eq!(clean.len(), 60 - 3);
    assert_eq!(clean.counts().fetched, 55);
    assert!(fx.planted.iter().all(|id| !clean.contains(id)));

    let split = Manifest::load(&layout.split_manifest()).unwrap();
    let count = |s| split.records().iter().filter(|r| r.split == s).count();
    use adc_core::collector::Split;
    assert_eq!((count(Split::Eval), count(Split::Test), count(Split::Train)), (10, 10, 35));
    assert!(split.records().iter().filter(|r| r.status != FetchStatus::Fetched).all(|r| r.split == Split::None));

    let rerun = run_pipeline(&cfg).unwrap();
    assert!(rerun.is_noop(), "{rerun:#?}");
    assert_eq!(fs::read(layout.manifest()).unwrap(), manifest.to_text().into_bytes());
}

#[test]
fn missing_spec_fails_before_any_stage() {
    let fx = fixture();
    let mut cfg = ProjectConfig::load(&fx.root.join("project.toml")).unwrap();
    cfg.spec = Some(fx.root.join("nope.toml"));
    match run_pipeline(&cfg) {
        Err(PipelineError::Config(e)) => assert!(e.to_string().contains("nope.toml")),
        other => panic!("expected a config error, got {other:?}"),
    }
    assert!(!fx.root.join("out").exists());
}

#[test]
fn failing_stage_is_named_and_progress_kept() {
    let fx = fixture();
    let mut cfg = ProjectConfig::load(&fx.root.join("project.toml")).unwrap();
    cfg.curate.methods = vec!["simifeat".into()];
    // 58 samples are below the transition estimator's minimum for 2 classes.
    match run_pipeline(&cfg) {
        Err(PipelineError::Stage { stage, report, .. }) => {
            assert_eq!(stage, "curate");
            assert_eq!(report.stage("collect").unwrap().status, StageStatus::Ok);
        }
        other => panic!("expected a curate failure, got {other:?}"),
    }
    assert!(Layout { root: fx.root.join("out") }.manifest().exists());
    assert!(fx.root.join("out/run_report.json").exists());
}

fn adc(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_adc")).args(args).current_dir(cwd).output().unwrap()
}

#[test]
fn binary_runs_and_explains() {
    let fx = fixture();
    let out = adc(&["--config", "project.toml", "run"], &fx.root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());

    let out = adc(&["explain", "features.adce"], &fx.root);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("ADCE v1, N=60, d=4"), "{text}");

    let out = adc(&["explain", "out/manifest.jsonl"], &fx.root);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("fetched: 58") && text.contains("malformed: 1") && text.contains("duplicate: 1"), "{text}");

    let out = adc(&["explain", "out/run_report.json"], &fx.root);
    assert!(String::from_utf8(out.stdout).unwrap().contains("curate: Ok"));

    let mut bytes = fs::read(fx.root.join("features.adce")).unwrap();
    bytes.truncate(bytes.len() - 3);
    fs::write(fx.root.join("broken.adce"), bytes).unwrap();
    fs::copy(fx.root.join("features.adce.ids"), fx.root.join("broken.adce.ids")).unwrap();
    let out = adc(&["explain", "broken.adce"], &fx.root);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncated"));

    fs::write(fx.root.join("mystery.json"), "{\"format\": \"something-else\"}\n").unwrap();
    let out = adc(&["explain", "mystery.json"], &fx.root);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown format"));

    let out = adc(&["--config", "project.toml", "embed", "verify"], &fx.root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("58 of 60 rows fetched"));
}

#[test]
fn binary_missing_spec_exits_nonzero() {
    let fx = fixture();
    fs::write(fx.root.join("bad.toml"), "inherit_from = \"project.toml\"\nspec = \"missing.toml\"\n").unwrap();
    let out = adc(&["--config", "bad.toml", "run"], &fx.root);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));
    assert!(!fx.root.join("out").exists());
}
