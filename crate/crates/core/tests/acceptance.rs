//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! exits non-zero if any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;

use adc_core::collector::{
    plan_fetch, run_fetch, ContentStore, FetchConfig, FetchStatus, Manifest, MockBackend, SampleRecord, Split,
};
use adc_core::curator::synthetic::{gaussian_clusters, ClusterSpec};
use adc_core::curator::{
    confidence_percentile_filter, estimate_transition, knn_vote_detect, merge_filters, simifeat_detect,
    CurationReport, MergeMode, SampleFlag, TransitionConfig,
};
use adc_core::embedstore::{sidecar_path, EmbeddingMatrix, ProbMatrix};
use adc_core::evalkit::{delta_worst_accuracy, detection_prf, DetectionOutcome, Metric};
use adc_core::seed;
use adc_core::subsetter::{build_clean_subset, longtail_counts};
use adc_core::taxonomy::{generate_queries, SubclassKey, TaxonomySpec};
use adc_core::votes::{
    aggregate_votes, estimate_noise_interval, read_votes, write_votes, AggregationPolicy, Pattern, Vote, VoteRecord,
    DEFAULT_MAX_VOTES,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within_budget(o: Outcome, elapsed: Duration, budget: Option<Duration>) -> Outcome {
    match budget {
        Some(b) if elapsed > b => check(false, format!("{} (took {:.2?}, budget {:.0?})", o.detail, elapsed, b)),
        _ => check(o.pass, format!("{} ({:.2?})", o.detail, elapsed)),
    }
}

// Expected profiles for 12 classes with n_max 39297.
const LONGTAIL_ROWS: [(f64, [usize; 12], usize); 3] = [
    (10.0, [39297, 31875, 25854, 20971, 17010, 13797, 11191, 9078, 7363, 5972, 4844, 3929], 191181),
    (50.0, [39297, 27536, 19295, 13520, 9474, 6638, 4652, 3259, 2284, 1600, 1121, 785], 129461),
    (100.0, [39297, 25854, 17010, 11191, 7363, 4844, 3187, 2097, 1379, 907, 597, 392], 114118),
];

fn longtail_profile() -> Outcome {
    let mut worst_class = 0i64;
    let mut worst_total = 0i64;
    for (rho, row, total) in LONGTAIL_ROWS {
        let d = match longtail_counts(39297, 12, rho) {
            Ok(d) => d,
            Err(e) => return check(false, format!("rho={rho}: {e}")),
        };
        for (got, want) in d.counts.iter().zip(row) {
            worst_class = worst_class.max((*got as i64 - want as i64).abs());
        }
        worst_total = worst_total.max((d.total() as i64 - total as i64).abs());
    }
    check(
        worst_class <= 1 && worst_total <= 12,
        format!("max per-class deviation {worst_class}, max total deviation {worst_total}"),
    )
}

fn vote(c: char) -> Vote {
    match c {
        'y' => Vote::Yes,
        'u' => Vote::Unsure,
        _ => Vote::No,
    }
}

fn pattern_records() -> Vec<VoteRecord> {
    let other = ["ynn", "uun", "nnn", "yuu", "yun", "uuu"];
    let mut patterns: Vec<String> = Vec::with_capacity(20_000);
    patterns.extend((0..12_250).map(|_| "yyy".to_string()));
    patterns.extend((0..1_220).map(|i| ["yyu", "yuy", "uyy"][i % 3].to_string()));
    patterns.extend((0..2_100).map(|i| ["yyn", "nyy", "yny"][i % 3].to_string()));
    patterns.extend((0..4_430).map(|i| other[i % other.len()].to_string()));
    patterns.shuffle(&mut seed::rng_for(7, "acceptance.votes"));
    patterns
        .iter()
        .enumerate()
        .map(|(i, p)| VoteRecord::new(format!("s{i:05}"), p.chars().map(vote).collect()))
        .collect()
}

fn vote_arithmetic() -> Outcome {
    let records = pattern_records();
    let strict = aggregate_votes(&records, AggregationPolicy::Strict, DEFAULT_MAX_VOTES).unwrap();
    let majority = aggregate_votes(&records, AggregationPolicy::Majority, DEFAULT_MAX_VOTES).unwrap();
    let interval = estimate_noise_interval(&majority.table).unwrap();
    // Exact targets as integer counts out of 20,000.
    let ok = strict.clean_count() == 12_250
        && majority.verdicts.len() - majority.clean_count() == 4_430
        && interval.lower_count == 4_430
        && interval.ambiguity_count == 2_100
        && interval.total == 20_000
        && interval.lower == 4_430.0 / 20_000.0
        && interval.upper == 6_530.0 / 20_000.0
        && interval.ambiguity == 2_100.0 / 20_000.0
        && majority.table.count(Pattern::OneUnsure) == 1_220;
    check(
        ok,
        format!(
            "strict clean {:.2}%, majority noisy {:.2}%, interval [{:.2}%, {:.2}%], ambiguity {:.2}%",
            100.0 * strict.clean_fraction(),
            100.0 * (1.0 - majority.clean_fraction()),
            100.0 * interval.lower,
            100.0 * interval.upper,
            100.0 * interval.ambiguity
        ),
    )
}

fn flag_report(method: &str, ids: &[String], flagged: impl Fn(usize) -> bool) -> CurationReport {
    CurationReport::new(
        method,
        2,
        ids.iter()
            .enumerate()
            .map(|(i, id)| SampleFlag { sample_id: id.clone(), label: i % 2, score: 0.0, flag: flagged(i), suggested_label: None })
            .collect(),
    )
}

fn record(id: String, label: usize, status: FetchStatus, split: Split, clean: bool) -> SampleRecord {
    SampleRecord {
        subclass_key: SubclassKey { class_index: label, option_indices: vec![label % 3, 1] },
        webly_label: label,
        query: format!("query for {id}"),
        uri: format!("mock://{id}"),
        content_hash: (status != FetchStatus::Pending).then(|| format!("{:064x}", id.len() * 7919)),
        byte_size: 100 + id.len() as u64,
        status,
        split,
        clean_candidate: clean,
        sample_id: id,
    }
}

fn filter_union() -> Outcome {
    let n = 10_000;
    let ids: Vec<String> = (0..n).map(|i| format!("x{i:05}")).collect();
    // 26.36% and 25.00% flagged, 6.21% flagged by both.
    let a = flag_report("sim", &ids, |i| i < 2_636);
    let b = flag_report("conf", &ids, |i| (2_636 - 621..2_636 - 621 + 2_500).contains(&i));
    let (_, stats) = merge_filters(&[a.clone(), b.clone()], MergeMode::Union).unwrap();
    let mut manifest = Manifest::new("v", Some(0));
    for (i, id) in ids.iter().enumerate() {
        manifest.push(record(id.clone(), i % 2, FetchStatus::Fetched, Split::None, false)).unwrap();
    }
    let (clean, cs) = build_clean_subset(&manifest, &[a, b], MergeMode::Union).unwrap();
    let ok = stats.combined == 4_515
        && stats.overlap == 621
        && stats.combined_fraction == 4_515.0 / 10_000.0
        && clean.len() == 5_485
        && cs.retained_fraction == 5_485.0 / 10_000.0;
    check(
        ok,
        format!(
            "combined {:.2}%, overlap {:.2}%, retained {:.2}%",
            100.0 * stats.combined_fraction,
            100.0 * stats.overlap_fraction,
            100.0 * cs.retained_fraction
        ),
    )
}

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn query_fanout() -> Outcome {
    let spec = TaxonomySpec::load_valid(&fixture("clothing_taxonomy.toml")).unwrap();
    let queries = generate_queries(&spec).unwrap();
    let distinct: std::collections::HashSet<_> = queries.iter().map(|(_, q)| q.as_str()).collect();
    check(
        queries.len() == 12_000 && distinct.len() == 12_000 && spec.classes.len() == 12,
        format!("{} queries ({} distinct) over {} classes", queries.len(), distinct.len(), spec.classes.len()),
    )
}

fn transition_recovery() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in 0..5 {
        let data = gaussian_clusters(&ClusterSpec { seed: s, ..ClusterSpec::default() });
        let cfg = TransitionConfig { seed: s, ..TransitionConfig::default() };
        let est = estimate_transition(&data.matrix, &data.noisy_labels, 3, &cfg).unwrap();
        worst = worst.max(est.max_row_l1(&data.transition));
    }
    check(worst <= 0.05, format!("worst per-row L1 over 5 seeds {worst:.4} (limit 0.05)"))
}

fn brute_prf(flags: &[bool], corrupted: &[bool]) -> (usize, usize, usize) {
    let mut hits = 0;
    let mut flagged = 0;
    let mut bad = 0;
    for i in 0..flags.len() {
        if flags[i] {
            flagged += 1;
        }
        if corrupted[i] {
            bad += 1;
        }
        if flags[i] && corrupted[i] {
            hits += 1;
        }
    }
    (hits, flagged, bad)
}

fn detection_quality() -> Outcome {
    let mut worst_sim: f64 = 1.0;
    let mut worst_knn: f64 = 1.0;
    for s in 0..5 {
        let data = gaussian_clusters(&ClusterSpec { seed: s, ..ClusterSpec::default() });
        let cfg = TransitionConfig { seed: s, ..TransitionConfig::default() };
        let est = estimate_transition(&data.matrix, &data.noisy_labels, 3, &cfg).unwrap();
        let corrupted = data.corrupted();
        let sim = simifeat_detect(&data.matrix, &data.noisy_labels, &est, 10).unwrap();
        let knn = knn_vote_detect(&data.matrix, &data.noisy_labels, 100).unwrap();
        for (report, worst) in [(sim, &mut worst_sim), (knn, &mut worst_knn)] {
            let prf = detection_prf(&DetectionOutcome::new(report.flags(), corrupted.clone()).unwrap());
            *worst = worst.min(prf.f1.value().unwrap_or(0.0));
        }
    }

    let mut rng = seed::rng_for(11, "acceptance.prf");
    let mut oracle_ok = true;
    for _ in 0..10 {
        let flag_rate = rng.random_range(0.0..1.0);
        let bad_rate = rng.random_range(0.0..1.0);
        let flags: Vec<bool> = (0..200).map(|_| rng.random_bool(flag_rate)).collect();
        let corrupted: Vec<bool> = (0..200).map(|_| rng.random_bool(bad_rate)).collect();
        let (hits, flagged, bad) = brute_prf(&flags, &corrupted);
        let prf = detection_prf(&DetectionOutcome::new(flags, corrupted).unwrap());
        let p = if flagged == 0 { Metric::Undefined } else { Metric::Defined(hits as f64 / flagged as f64) };
        let r = if bad == 0 { Metric::Undefined } else { Metric::Defined(hits as f64 / bad as f64) };
        oracle_ok &= prf.hits == hits && prf.flagged == flagged && prf.corrupted == bad && prf.precision == p && prf.recall == r;
    }
    check(
        worst_sim >= 0.90 && worst_knn >= 0.90 && oracle_ok,
        format!("worst F1 simifeat {worst_sim:.4}, knn-vote {worst_knn:.4}; PRF oracle agreement {oracle_ok}"),
    )
}

/// Minimum of `g . acc` over a 1e-3 grid on the simplex, restricted to
/// points with KL(g || uniform) <= delta.
fn grid_worst(acc: &[f64], delta: f64) -> f64 {
    let k = acc.len();
    let steps = 1000usize;
    let kl = |g: &[f64]| -> f64 { g.iter().filter(|&&p| p > 0.0).map(|&p| p * (p * k as f64).ln()).sum() };
    let mut best = f64::INFINITY;
    let mut eval = |g: &[f64]| {
        if kl(g) <= delta + 1e-12 {
            best = best.min(g.iter().zip(acc).map(|(a, b)| a * b).sum());
        }
    };
    match k {
        1 => eval(&[1.0]),
        2 => (0..=steps).for_each(|i| {
            let a = i as f64 / steps as f64;
            eval(&[a, 1.0 - a]);
        }),
        _ => {
            for i in 0..=steps {
                for j in 0..=steps - i {
                    let a = i as f64 / steps as f64;
                    let b = j as f64 / steps as f64;
                    eval(&[a, b, (1.0 - a - b).max(0.0)]);
                }
            }
        }
    }
    best
}

fn delta_worst_solver() -> Outcome {
    let mut rng = seed::rng_for(13, "acceptance.delta");
    let mut worst_gap: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.random_range(2..=3usize);
        let acc: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let delta = rng.random_range(0.0..(k as f64).ln() * 1.1);
        let got = delta_worst_accuracy(&acc, delta).unwrap().value;
        worst_gap = worst_gap.max((got - grid_worst(&acc, delta)).abs());
    }

    let mut identities = true;
    for _ in 0..100 {
        let k = rng.random_range(2..=5usize);
        let acc: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
        let mean = acc.iter().sum::<f64>() / k as f64;
        let min = acc.iter().cloned().fold(f64::INFINITY, f64::min);
        identities &= (delta_worst_accuracy(&acc, 0.0).unwrap().value - mean).abs() <= 1e-8;
        identities &= (delta_worst_accuracy(&acc, (k as f64).ln()).unwrap().value - min).abs() <= 1e-8;
        let mut prev = f64::INFINITY;
        for step in 0..=40 {
            let v = delta_worst_accuracy(&acc, step as f64 * (k as f64).ln() / 40.0).unwrap().value;
            identities &= v <= prev + 1e-8;
            prev = v;
        }
    }
    check(
        worst_gap <= 1e-3 && identities,
        format!("max gap to grid search {worst_gap:.2e} (limit 1e-3); identities hold: {identities}"),
    )
}

fn percentile_filter() -> Outcome {
    let mut rng = seed::rng_for(17, "acceptance.percentile");
    let mut mismatches = 0;
    for case in 0..1000 {
        let n = rng.random_range(1..=400usize);
        let hundredths = rng.random_range(1..10_000usize);
        let x = hundredths as f64 / 100.0;
        // Coarse probabilities so that ties are common.
        let rows: Vec<Vec<f32>> = (0..n)
            .map(|_| {
                let a = rng.random_range(0..=4u32);
                let b = rng.random_range(0..=(4 - a));
                vec![a as f32 / 4.0, b as f32 / 4.0, (4 - a - b) as f32 / 4.0]
            })
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let probs = ProbMatrix::from_rows(&rows).unwrap();
        let report = confidence_percentile_filter(&probs, &labels, x).unwrap();

        let expected = hundredths * n / 10_000;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| rows[i][labels[i]].partial_cmp(&rows[j][labels[j]]).unwrap().then(i.cmp(&j)));
        let mut oracle = vec![false; n];
        for &i in &order[..expected] {
            oracle[i] = true;
        }
        if report.flags() != oracle {
            mismatches += 1;
            if mismatches == 1 {
                eprintln!("percentile mismatch at case {case}: n={n} x={x}");
            }
        }
    }
    check(mismatches == 0, format!("{mismatches} of 1000 (N, x) pairs disagree with the sort oracle"))
}

fn collector_determinism() -> Outcome {
    let spec = TaxonomySpec::load_valid(&fixture("clothing_taxonomy.toml")).unwrap();
    let queries: Vec<_> = generate_queries(&spec).unwrap().into_iter().step_by(997).collect();
    let tasks = plan_fetch(&queries, 100, true).unwrap();
    let backend = MockBackend::new(5, 140).overfilling().with_broken_rate(0.05).with_transient_rate(0.1);
    let mut texts = Vec::new();
    let mut rerun_noop = true;
    let mut cutoff_ok = true;
    for workers in [1, 4, 30] {
        let dir = tempfile::tempdir().unwrap();
        let store = ContentStore::open(dir.path()).unwrap();
        let mut m = Manifest::new(spec.version.clone(), Some(5));
        run_fetch(&tasks, &backend, &FetchConfig::immediate(workers), &mut m, &store, None).unwrap();
        for t in &tasks {
            cutoff_ok &= m.records().iter().filter(|r| r.query == t.query).count() == 100;
        }
        let text = m.to_text();
        let again = run_fetch(&tasks, &backend, &FetchConfig::immediate(workers), &mut m, &store, None).unwrap();
        rerun_noop &= again.downloads == 0 && again.new_records == 0 && m.to_text() == text;
        texts.push(text);
    }
    let identical = texts.windows(2).all(|w| w[0] == w[1]);
    check(
        identical && rerun_noop && cutoff_ok,
        format!(
            "{} queries: manifests identical across workers {identical}, rerun no-op {rerun_noop}, cutoff 100 held {cutoff_ok}",
            tasks.len()
        ),
    )
}

/// Writes with `write`, reads back and rewrites with `reread`, then compares
/// the two outputs byte for byte (plus the id sidecar when `sidecar` is set).
fn write_read_write(
    dir: &Path,
    sidecar: bool,
    write: impl Fn(&Path) -> Result<(), String>,
    reread: impl Fn(&Path, &Path) -> Result<(), String>,
) -> Result<bool, String> {
    let a = dir.join("a.bin");
    let b = dir.join("b.bin");
    write(&a)?;
    reread(&a, &b)?;
    let mut pairs = vec![(a.clone(), b.clone())];
    if sidecar {
        pairs.push((sidecar_path(&a), sidecar_path(&b)));
    }
    for (pa, pb) in pairs {
        if std::fs::read(&pa).map_err(|e| e.to_string())? != std::fs::read(&pb).map_err(|e| e.to_string())? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn random_id(rng: &mut impl Rng, i: usize) -> String {
    let alphabet = b"abcdefghijklmnopqrstuvwxyz0123456789-_.";
    let len = rng.random_range(1..12);
    let body: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())] as char).collect();
    format!("id{i}{body}")
}

fn format_round_trips() -> Outcome {
    let mut rng = seed::rng_for(19, "acceptance.formats");
    let mut failures: Vec<String> = Vec::new();
    for case in 0..25 {
        let dir = tempfile::tempdir().unwrap();
        let rows = rng.random_range(1..60usize);
        let ids: Vec<String> = (0..rows).map(|i| random_id(&mut rng, i)).collect();

        let dim = rng.random_range(1..40usize);
        let data: Vec<f32> = (0..rows * dim).map(|_| rng.random_range(-1e3f32..1e3)).collect();
        let emb = EmbeddingMatrix::new(ids.clone(), dim, data).unwrap();
        let r = write_read_write(
            dir.path(),
            true,
            |p| emb.write(p).map_err(|e| e.to_string()),
            |a, b| EmbeddingMatrix::read(a).and_then(|m| m.write(b)).map_err(|e| e.to_string()),
        );
        if r != Ok(true) {
            failures.push(format!("embedding case {case}: {r:?}"));
        }

        let k = rng.random_range(2..8usize);
        let prob_rows: Vec<Vec<f32>> = (0..rows)
            .map(|_| {
                let raw: Vec<f32> = (0..k).map(|_| rng.random_range(0.0f32..1.0)).collect();
                let s: f32 = raw.iter().sum();
                raw.iter().map(|v| v / s).collect()
            })
            .collect();
        let probs = ProbMatrix::new(ids.clone(), k, prob_rows.concat()).unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let r = write_read_write(
            dir2.path(),
            true,
            |p| probs.write(p).map_err(|e| e.to_string()),
            |a, b| ProbMatrix::read(a).and_then(|m| m.write(b)).map_err(|e| e.to_string()),
        );
        if r != Ok(true) {
            failures.push(format!("probability case {case}: {r:?}"));
        }

        let statuses = [FetchStatus::Pending, FetchStatus::Fetched, FetchStatus::Broken, FetchStatus::Malformed, FetchStatus::Duplicate];
        let splits = [Split::Train, Split::Eval, Split::Test, Split::None];
        let mut manifest = Manifest::new(format!("v{case}"), rng.random_bool(0.5).then(|| rng.random()));
        for (i, id) in ids.iter().enumerate() {
            let label = rng.random_range(0..5);
            let status = statuses[rng.random_range(0..statuses.len())];
            manifest
                .push(record(id.clone(), label, status, splits[rng.random_range(0..4)], rng.random_bool(0.3)))
                .unwrap_or_else(|e| panic!("record {i}: {e}"));
        }
        let dir3 = tempfile::tempdir().unwrap();
        let r = write_read_write(
            dir3.path(),
            false,
            |p| manifest.save(p).map_err(|e| e.to_string()),
            |a, b| Manifest::load(a).and_then(|m| m.save(b)).map_err(|e| e.to_string()),
        );
        if r != Ok(true) {
            failures.push(format!("manifest case {case}: {r:?}"));
        }

        let mut report = CurationReport::new(
            "fuzz",
            k,
            ids.iter()
                .map(|id| SampleFlag {
                    sample_id: id.clone(),
                    label: rng.random_range(0..k),
                    score: rng.random_range(-1e6..1e6),
                    flag: rng.random_bool(0.3),
                    suggested_label: rng.random_bool(0.2).then(|| rng.random_range(0..k)),
                })
                .collect(),
        );
        report.seed = rng.random_bool(0.5).then(|| rng.random());
        let dir4 = tempfile::tempdir().unwrap();
        let r = write_read_write(
            dir4.path(),
            false,
            |p| report.save(p).map_err(|e| e.to_string()),
            |a, b| CurationReport::load(a).and_then(|m| m.save(b)).map_err(|e| e.to_string()),
        );
        if r != Ok(true) {
            failures.push(format!("report case {case}: {r:?}"));
        }

        let with_annotators = rng.random_bool(0.5);
        let votes: Vec<VoteRecord> = ids
            .iter()
            .map(|id| {
                let n = rng.random_range(1..=DEFAULT_MAX_VOTES);
                let mut rec = VoteRecord::new(id.clone(), (0..n).map(|_| [Vote::Yes, Vote::Unsure, Vote::No][rng.random_range(0..3)]).collect());
                if with_annotators {
                    rec.annotator_ids = Some((0..n).map(|j| format!("ann{}", (j * 31 + id.len()) % 17)).collect());
                }
                rec
            })
            .collect();
        let dir5 = tempfile::tempdir().unwrap();
        let r = write_read_write(
            dir5.path(),
            false,
            |p| write_votes(p, &votes).map_err(|e| e.to_string()),
            |a, b| read_votes(a, DEFAULT_MAX_VOTES).and_then(|v| write_votes(b, &v)).map_err(|e| e.to_string()),
        );
        if r != Ok(true) {
            failures.push(format!("votes case {case}: {r:?}"));
        }
    }
    match failures.first() {
        None => check(true, "25 fuzzed cases per format, all byte-identical"),
        Some(first) => check(false, format!("{} failures, first: {first}", failures.len())),
    }
}

/// Name, check and optional time budget.
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("long-tail profile", longtail_profile, Some(Duration::from_secs(1))),
        ("vote arithmetic", vote_arithmetic, Some(Duration::from_secs(1))),
        ("filter-union arithmetic", filter_union, None),
        ("query fan-out", query_fanout, None),
        ("transition recovery", transition_recovery, Some(Duration::from_secs(30))),
        ("detection quality", detection_quality, None),
        ("delta-worst solver", delta_worst_solver, Some(Duration::from_secs(10))),
        ("percentile filter", percentile_filter, None),
        ("collector determinism", collector_determinism, None),
        ("format round-trips", format_round_trips, None),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = within_budget(run(), start.elapsed(), budget);
        if !outcome.pass {
            failed += 1;
        }
        println!("[{}] {name}: {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
