//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run with `cargo test -p roadside-cli --test acceptance`.

mod support;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use roadside::classifier::{kfold_evaluate, topic_dataset};
use roadside::entropy::{entropy_table, entropy_tables, extract_keywords, select_keywords, shannon_entropy};
use roadside::lingam::{check_assumptions, connection_matrix, fit, causal_order, normalize_diagonal, CausalModel};
use roadside::synthgen::{chain_spec, generate_corpus, generate_sem, star_spec, star_strengths, CorpusSpec, NoiseKind};
use roadside::{Document, FeatureSpace, Hyper, KeywordConfig, LabeledCorpus, LingamConfig, SelectionMode, TopicId};
use roadside::corpus::Topic;
use roadside::IcaConfig;

use support::{oracle_keywords, random_corpus, roadside, write_pipeline_fixture};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn lingam_cfg(seed: u64) -> LingamConfig {
    LingamConfig {
        ica: IcaConfig {
            seed,
            ..IcaConfig::default()
        },
        prune_threshold: None,
    }
}

fn fit_sem(spec: &roadside::synthgen::StructuralSpec) -> roadside::Result<CausalModel> {
    let (obs, _) = generate_sem(spec)?;
    fit(&obs, &lingam_cfg(spec.seed))
}

/// Gaussian disturbances leave ICA without a preferred rotation, so the
/// fixed-point iteration usually wanders until `max_iter`; the last iterate is
/// what the estimator would report. 200 iterations keep the run short.
fn fit_unidentifiable(spec: &roadside::synthgen::StructuralSpec) -> CausalModel {
    let (obs, _) = generate_sem(spec).unwrap();
    let mut cfg = lingam_cfg(spec.seed);
    cfg.ica.accept_unconverged = true;
    cfg.ica.max_iter = 200;
    fit(&obs, &cfg).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for seed in 0..20 {
        let (corpus, topics) = random_corpus(seed);
        let tables = entropy_tables(&corpus, &topics).unwrap();
        for (mode, cross) in [(SelectionMode::CrossCategory, true), (SelectionMode::Binary, false)] {
            let cfg = KeywordConfig {
                mode,
                ..KeywordConfig::default()
            };
            let got: BTreeMap<TopicId, _> = select_keywords(&tables, &cfg)
                .unwrap()
                .into_iter()
                .map(|(t, s)| (t, s.keywords))
                .collect();
            if got != oracle_keywords(&corpus, &topics, cfg.alpha, cross) {
                mismatches.push(format!("seed {seed} {mode:?}"));
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches.is_empty() && elapsed < Duration::from_secs(5),
        format!("20 corpora x 2 modes, mismatches {mismatches:?}, {elapsed:.2?}"),
    )
}

fn criterion_2() -> Outcome {
    let doc = |id: &str, toks: &[&str]| Document::new(id, toks.join(" "), "u").with_tokens(toks.iter().copied());
    let docs = vec![
        doc("d1", &["once", "even"]),
        doc("d2", &["even"]),
        doc("d3", &["even"]),
        doc("d4", &["even"]),
    ];
    let labels = docs
        .iter()
        .map(|d| (d.id.clone(), [TopicId::from("T1")].into()))
        .collect();
    let catalog = vec![Topic {
        id: TopicId::from("T1"),
        name: "t".into(),
    }];
    let corpus = LabeledCorpus::new(docs, labels, catalog).unwrap();
    let table = entropy_table(&corpus, &TopicId::from("T1")).unwrap();
    let single = table.pos("once");
    let uniform = table.pos("even");
    let direct = (shannon_entropy(&[1.0, 0.0, 0.0]), shannon_entropy(&[0.25; 4]));
    let pass = single == 0.0 && (uniform - 2.0).abs() <= 1e-9 && direct.0 == 0.0 && (direct.1 - 2.0).abs() <= 1e-9;
    outcome(pass, format!("H(single doc) = {single}, H(uniform over 4) = {uniform}"))
}

/// Minimum per-topic 5-fold F1 on a synthetic 8-topic corpus.
fn classifier_f1(noise_rate: f64, multi_label_rate: f64, seed: u64) -> BTreeMap<TopicId, f64> {
    let spec = CorpusSpec::generated(8, 20, 200, 125, noise_rate, multi_label_rate, seed);
    let corpus = generate_corpus(&spec).unwrap().corpus;
    let topics: Vec<TopicId> = corpus.topic_ids().cloned().collect();
    let keywords = extract_keywords(&corpus, &topics, &KeywordConfig::default()).unwrap();
    let space = FeatureSpace::from_keywords(keywords.values());
    topics
        .iter()
        .map(|t| {
            let (x, y) = topic_dataset(&corpus, &space, t);
            let m = kfold_evaluate(&x, &y, 5, &Hyper::default(), seed).unwrap();
            (t.clone(), m.f1)
        })
        .collect()
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let f1 = classifier_f1(0.5, 0.1, 7);
    let elapsed = start.elapsed();
    let min = f1.values().copied().fold(f64::INFINITY, f64::min);
    outcome(
        min >= 0.78 && elapsed < Duration::from_secs(60),
        format!("min F1 {min:.3} over {} topics, {elapsed:.2?}", f1.len()),
    )
}

fn criterion_4() -> Outcome {
    let f1 = classifier_f1(0.0, 0.0, 7);
    let all_one = f1.values().all(|&v| v == 1.0);
    outcome(all_one, format!("F1 per topic {:?}", f1.values().collect::<Vec<_>>()))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut ok = 0;
    for seed in 0..100 {
        let m = fit_sem(&chain_spec(0.8, NoiseKind::Uniform, 5000, seed)).unwrap();
        let b21 = m.strength("x1", "x2").unwrap();
        let b12 = m.strength("x2", "x1").unwrap();
        if (0.75..=0.85).contains(&b21) && b12.abs() < 0.05 {
            ok += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        ok >= 95 && elapsed < Duration::from_secs(30),
        format!("{ok}/100 seeds recovered b21, {elapsed:.2?}"),
    )
}

/// Per seed: (number of x_i with x_i -> y recovered, number of signs matching),
/// or `None` when the fit fails.
fn star_recovery(noise: NoiseKind, n: usize, seed: u64) -> Option<(usize, usize)> {
    let m = fit_sem(&star_spec(noise, n, seed)).ok()?;
    let mut directions = 0;
    let mut signs = 0;
    for (i, &b) in star_strengths().iter().enumerate() {
        let x = format!("x{}", i + 1);
        if m.precedes(&x, "y").unwrap() {
            directions += 1;
        }
        if m.strength(&x, "y").unwrap().signum() == b.signum() {
            signs += 1;
        }
    }
    Some((directions, signs))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let ok = (0..100)
        .filter(|&seed| star_recovery(NoiseKind::Uniform, 5000, seed) == Some((7, 7)))
        .count();
    outcome(ok >= 90, format!("{ok}/100 seeds with all 7 directions and signs, {:.2?}", start.elapsed()))
}

fn criterion_7() -> Outcome {
    let runs: Vec<_> = (0..100).map(|seed| star_recovery(NoiseKind::Uniform, 94, seed)).collect();
    let ok = runs.iter().filter(|r| r.is_some_and(|(_, s)| s == 7)).count();
    let failed = runs.iter().filter(|r| r.is_none()).count();
    outcome(
        ok >= 60,
        format!("{ok}/100 seeds with all 7 signs at n = 94, {failed} fits failed (small-sample degradation expected)"),
    )
}

fn criterion_8() -> Outcome {
    let mut directions = 0;
    let mut flagged = 0;
    let mut unconverged = 0;
    for seed in 0..100 {
        let spec = star_spec(NoiseKind::Gaussian, 5000, seed);
        let (obs, _) = generate_sem(&spec).unwrap();
        if check_assumptions(&obs).gaussian_warning {
            flagged += 1;
        }
        let m = fit_unidentifiable(&spec);
        if !m.ica_converged {
            unconverged += 1;
        }
        for i in 1..=7 {
            if m.precedes(&format!("x{i}"), "y").unwrap() {
                directions += 1;
            }
        }
    }
    let rate = directions as f64 / 700.0;
    outcome(
        (0.2..=0.8).contains(&rate) && flagged >= 95,
        format!("direction rate {rate:.3} over 700 edges ({unconverged} ICA runs hit max_iter), flagged {flagged}/100"),
    )
}

fn criterion_9() -> Outcome {
    let m = |rows: usize, v: &[f64]| DMatrix::from_row_slice(rows, v.len() / rows, v);
    let close = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b).abs().max() <= 1e-12;
    let mut failures = Vec::new();

    let (w, s) = normalize_diagonal(&m(2, &[2.0, 1.0, 0.5, 4.0])).unwrap();
    if !close(&w, &m(2, &[1.0, 0.5, 0.125, 1.0])) || s != [2.0, 4.0] {
        failures.push("normalize_diagonal [[2,1],[0.5,4]]");
    }
    let (w, _) = normalize_diagonal(&DMatrix::identity(3, 3)).unwrap();
    if !close(&w, &DMatrix::identity(3, 3)) {
        failures.push("normalize_diagonal identity");
    }
    if !close(&connection_matrix(&DMatrix::identity(2, 2)), &DMatrix::zeros(2, 2)) {
        failures.push("connection_matrix identity");
    }
    if !close(&connection_matrix(&m(2, &[1.0, 0.0, -0.8, 1.0])), &m(2, &[0.0, 0.0, 0.8, 0.0])) {
        failures.push("connection_matrix chain");
    }
    if !close(&connection_matrix(&m(2, &[1.0, -0.3, -0.5, 1.0])), &m(2, &[0.0, 0.3, 0.5, 0.0])) {
        failures.push("connection_matrix cyclic");
    }
    for d in [2usize, 5, 8, 10] {
        let b = DMatrix::from_fn(d, d, |i, j| if j < i { 0.37 * (i + 2 * j + 1) as f64 } else { 0.0 });
        // scramble the labels so the order has to be found
        let relabel: Vec<usize> = (0..d).map(|i| (i * 3 + 1) % d).collect();
        let mut scrambled = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                scrambled[(relabel[i], relabel[j])] = b[(i, j)];
            }
        }
        let (plain, mixed) = (causal_order(&b), causal_order(&scrambled));
        if plain.residual != 0.0 || mixed.residual != 0.0 {
            failures.push("causal_order residual");
        }
    }
    outcome(failures.is_empty(), format!("failures {failures:?}"))
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect()
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let data = root.join("data");
    write_pipeline_fixture(&data, 11);
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    let d = |s: &str| data.join(s).to_string_lossy().into_owned();

    let mut codes = vec![
        roadside(["keywords", "--docs", &d("docs.jsonl"), "--labels", &d("labels.csv"), "--out", &p("kw")]),
        roadside([
            "train", "--docs", &d("docs.jsonl"), "--labels", &d("labels.csv"), "--keywords", &p("kw"), "--out",
            &p("models"), "--seed", "3",
        ]),
    ];
    for run in ["run1", "run2"] {
        let out = root.join(run);
        let o = |s: &str| out.join(s).to_string_lossy().into_owned();
        codes.push(roadside([
            "classify", "--docs", &d("docs.jsonl"), "--models", &p("models"), "--sales", &d("sales.csv"),
            "--official-accounts", &d("official.txt"), "--out", &o("classify"),
        ]));
        codes.push(roadside(["causal", "--matrix", &o("classify/matrix.csv"), "--out", &o("causal"), "--seed", "5"]));
    }
    let mut identical = true;
    let mut files = 0;
    for sub in ["classify", "causal"] {
        let a = read_dir_bytes(&root.join("run1").join(sub));
        let b = read_dir_bytes(&root.join("run2").join(sub));
        files += a.len();
        identical &= a == b && !a.is_empty();
    }
    outcome(
        codes.iter().all(|&c| c == 0) && identical,
        format!("exit codes {codes:?}, {files} output files byte-identical: {identical}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("entropy keywords equal brute-force oracle", criterion_1),
        ("entropy endpoints", criterion_2),
        ("classifier F1 band on noisy corpus", criterion_3),
        ("separable corpus gives F1 = 1", criterion_4),
        ("two-variable LiNGAM recovery", criterion_5),
        ("eight-variable star recovery", criterion_6),
        ("small-n star sign agreement", criterion_7),
        ("Gaussian noise is not identifiable and is flagged", criterion_8),
        ("algebraic exactness", criterion_9),
        ("pipeline determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("{verdict} criterion {:>2}: {name} ({}) [{:.1?}]", i + 1, o.detail, start.elapsed());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
