//! Shared helpers for the integration and acceptance tests: a brute-force
//! keyword selector written directly from the entropy definitions, random
//! corpora for it, and an end-to-end pipeline fixture.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roadside::corpus::{write_documents_jsonl, write_labels, Topic};
use roadside::pipeline::write_sales;
use roadside::synthgen::{generate_corpus, star_strengths, CorpusSpec};
use roadside::{Document, LabeledCorpus, TopicId};

/// Entropy in bits of the distribution `counts / sum(counts)`; zero when the word never occurs.
pub fn oracle_entropy(counts: &[u32]) -> f64 {
    let total: u32 = counts.iter().sum();
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / total as f64;
            h -= p * p.log2();
        }
    }
    h
}

/// Counts of `word` in each document of `docs`, in order.
fn counts_in(docs: &[&Document], word: &str) -> Vec<u32> {
    docs.iter()
        .map(|d| d.tokens.iter().filter(|t| *t == word).count() as u32)
        .collect()
}

/// Keywords per topic recomputed from scratch: per topic, every word of the
/// vocabulary, its positive and negative entropies, then the selection rule.
pub fn oracle_keywords(
    corpus: &LabeledCorpus,
    topics: &[TopicId],
    alpha: f64,
    cross_category: bool,
) -> BTreeMap<TopicId, BTreeSet<String>> {
    let vocab: BTreeSet<&str> = corpus
        .documents
        .iter()
        .flat_map(|d| d.tokens.iter().map(String::as_str))
        .collect();
    let mut h_pos: BTreeMap<(&TopicId, &str), f64> = BTreeMap::new();
    let mut h_neg: BTreeMap<(&TopicId, &str), f64> = BTreeMap::new();
    for t in topics {
        let pos: Vec<&Document> = corpus
            .documents
            .iter()
            .filter(|d| corpus.labels.get(&d.id).is_some_and(|s| s.contains(t)))
            .collect();
        let neg: Vec<&Document> = corpus
            .documents
            .iter()
            .filter(|d| !corpus.labels.get(&d.id).is_some_and(|s| s.contains(t)))
            .collect();
        for &w in &vocab {
            h_pos.insert((t, w), oracle_entropy(&counts_in(&pos, w)));
            h_neg.insert((t, w), oracle_entropy(&counts_in(&neg, w)));
        }
    }
    let mut out = BTreeMap::new();
    for t in topics {
        let mut selected = BTreeSet::new();
        for &w in &vocab {
            let h = h_pos[&(t, w)];
            let keep = if cross_category {
                topics
                    .iter()
                    .filter(|u| *u != t)
                    .all(|u| h > alpha * h_pos[&(u, w)])
            } else {
                h > alpha * h_neg[&(t, w)]
            };
            if keep {
                selected.insert(w.to_owned());
            }
        }
        out.insert(t.clone(), selected);
    }
    out
}

/// Random tokenized corpus: up to 50 documents over up to 200 words and 2..=5
/// topics, every topic with at least one positive document.
pub fn random_corpus(seed: u64) -> (LabeledCorpus, Vec<TopicId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_docs = rng.random_range(5..=50);
    let n_words = rng.random_range(5..=200);
    let n_topics = rng.random_range(2..=5usize).min(n_docs);
    let topics: Vec<TopicId> = (1..=n_topics).map(|i| TopicId::new(format!("T{i}"))).collect();
    // a skewed word distribution makes repeated words and wide spreads common
    let docs: Vec<Document> = (0..n_docs)
        .map(|i| {
            let len = rng.random_range(1..=12);
            let tokens: Vec<String> = (0..len)
                .map(|_| {
                    let r: f64 = rng.random();
                    format!("w{}", (r * r * n_words as f64) as usize)
                })
                .collect();
            Document::new(format!("d{i}"), tokens.join(" "), "u").with_tokens(tokens)
        })
        .collect();
    let mut labels: BTreeMap<String, BTreeSet<TopicId>> = BTreeMap::new();
    for (i, d) in docs.iter().enumerate() {
        let mut set = BTreeSet::new();
        // first documents cover every topic once
        if i < n_topics {
            set.insert(topics[i].clone());
        }
        for t in &topics {
            if rng.random::<f64>() < 0.3 {
                set.insert(t.clone());
            }
        }
        if !set.is_empty() {
            labels.insert(d.id.clone(), set);
        }
    }
    let catalog = topics
        .iter()
        .map(|t| Topic {
            id: t.clone(),
            name: t.to_string(),
        })
        .collect();
    (LabeledCorpus::new(docs, labels, catalog).unwrap(), topics)
}

pub const OFFICIAL_ACCOUNT: &str = "station_official";

/// Write a labeled, station-tagged corpus to `dir`: `docs.jsonl`, `labels.csv`,
/// `sales.csv` and `official.txt`. Promotional (T3) posts come from the
/// official account and check-in (T5) posts carry the check-in phrase, so the
/// rule stages of the router see them; a few posts have no station.
pub fn write_pipeline_fixture(dir: &Path, seed: u64) {
    let mut spec = CorpusSpec::generated(8, 15, 100, 100, 0.3, 0.05, seed);
    spec.stations = 60;
    spec.sales_base = 100.0;
    spec.sales_noise = 2.0;
    spec.sales_effects = star_strengths()
        .iter()
        .enumerate()
        .map(|(i, &b)| (TopicId::new(format!("T{}", i + 1)), 3.0 * b))
        .collect();
    let synth = generate_corpus(&spec).unwrap();
    let t3 = TopicId::from("T3");
    let t5 = TopicId::from("T5");
    let mut docs = synth.corpus.documents.clone();
    for (i, d) in docs.iter_mut().enumerate() {
        let labels = &synth.corpus.labels[&d.id];
        if labels.contains(&t3) {
            d.author = OFFICIAL_ACCOUNT.to_owned();
        }
        if labels.contains(&t5) {
            d.text = format!("I'm at {}", d.text);
        }
        if i % 97 == 0 {
            d.station_id = None;
        }
    }
    std::fs::create_dir_all(dir).unwrap();
    write_documents_jsonl(&docs, &dir.join("docs.jsonl")).unwrap();
    write_labels(&synth.corpus.labels, &dir.join("labels.csv")).unwrap();
    write_sales(synth.sales.as_ref().unwrap(), &dir.join("sales.csv")).unwrap();
    std::fs::write(dir.join("official.txt"), format!("{OFFICIAL_ACCOUNT}\n")).unwrap();
}

/// Run the CLI in-process and return its exit code.
pub fn roadside<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let mut argv: Vec<std::ffi::OsString> = vec!["roadside".into()];
    argv.extend(args.into_iter().map(|a| a.as_ref().to_owned()));
    roadside_cli::run(argv)
}
