//! Entropy-based keyword extraction.
//!
//! For a topic, every document is either positive (carries the label) or
//! negative. A word's per-document token counts in each partition are turned
//! into an occurrence distribution over documents, and the Shannon entropy of
//! that distribution measures how widely the word is spread across the
//! partition. Words that are spread much more widely among on-topic documents
//! than elsewhere become keywords.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledCorpus, TopicId};
use crate::error::{Error, Result};

/// Per-document token counts of every word, split by partition.
///
/// Words are present in a map only if they occur at least once in that partition.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    pub category: TopicId,
    pub pos_docs: usize,
    pub neg_docs: usize,
    pub n_pos: BTreeMap<String, Vec<u32>>,
    pub n_neg: BTreeMap<String, Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub category: TopicId,
    pub p_pos: BTreeMap<String, Vec<f64>>,
    pub p_neg: BTreeMap<String, Vec<f64>>,
}

/// Entropies in bits. Words missing from a map have entropy 0 in that partition.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyTable {
    pub category: TopicId,
    pub h_pos: BTreeMap<String, f64>,
    pub h_neg: BTreeMap<String, f64>,
}

impl EntropyTable {
    pub fn pos(&self, word: &str) -> f64 {
        self.h_pos.get(word).copied().unwrap_or(0.0)
    }

    pub fn neg(&self, word: &str) -> f64 {
        self.h_neg.get(word).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// Positive vs. negative partition of the same topic.
    Binary,
    /// A topic's entropy against the entropy of every other topic.
    CrossCategory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeywordConfig {
    pub alpha: f64,
    pub alpha_neg: f64,
    pub mode: SelectionMode,
}

impl Default for KeywordConfig {
    fn default() -> Self {
        KeywordConfig {
            alpha: 2.0,
            alpha_neg: 2.0,
            mode: SelectionMode::CrossCategory,
        }
    }
}

impl KeywordConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0) || !(self.alpha_neg > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "keyword coefficients must exceed 1 (alpha = {}, alpha_neg = {})",
                self.alpha, self.alpha_neg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSet {
    pub topic: TopicId,
    pub keywords: BTreeSet<String>,
}

pub fn count_occurrences(corpus: &LabeledCorpus, topic: &TopicId) -> Result<CountMatrix> {
    if !corpus.has_topic(topic) {
        return Err(Error::UnknownTopic(topic.0.clone()));
    }
    let (pos, neg): (Vec<_>, Vec<_>) = corpus
        .documents
        .iter()
        .partition(|d| corpus.is_labeled(&d.id, topic));
    if pos.is_empty() {
        return Err(Error::NoPositiveDocuments(topic.clone()));
    }

    fn tally(docs: &[&crate::corpus::Document]) -> BTreeMap<String, Vec<u32>> {
        let mut out: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        for (i, doc) in docs.iter().enumerate() {
            for tok in &doc.tokens {
                let counts = out
                    .entry(tok.clone())
                    .or_insert_with(|| vec![0; docs.len()]);
                counts[i] += 1;
            }
        }
        out
    }

    Ok(CountMatrix {
        category: topic.clone(),
        pos_docs: pos.len(),
        neg_docs: neg.len(),
        n_pos: tally(&pos),
        n_neg: tally(&neg),
    })
}

fn normalize(counts: &[u32]) -> Vec<f64> {
    let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    let total = total as f64;
    counts.iter().map(|&c| f64::from(c) / total).collect()
}

pub fn word_probabilities(counts: &CountMatrix) -> ProbabilityTable {
    let map = |m: &BTreeMap<String, Vec<u32>>| {
        m.iter()
            .map(|(w, c)| (w.clone(), normalize(c)))
            .collect::<BTreeMap<_, _>>()
    };
    ProbabilityTable {
        category: counts.category.clone(),
        p_pos: map(&counts.n_pos),
        p_neg: map(&counts.n_neg),
    }
}

/// Shannon entropy in bits with `0 log 0 = 0`.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    // a single nonzero entry of exactly 1 gives -0.0
    h.max(0.0)
}

pub fn word_entropy(probs: &ProbabilityTable) -> EntropyTable {
    let map = |m: &BTreeMap<String, Vec<f64>>| {
        m.iter()
            .map(|(w, p)| (w.clone(), shannon_entropy(p)))
            .collect::<BTreeMap<_, _>>()
    };
    EntropyTable {
        category: probs.category.clone(),
        h_pos: map(&probs.p_pos),
        h_neg: map(&probs.p_neg),
    }
}

pub fn entropy_table(corpus: &LabeledCorpus, topic: &TopicId) -> Result<EntropyTable> {
    count_occurrences(corpus, topic).map(|c| word_entropy(&word_probabilities(&c)))
}

/// Entropy tables for every topic; topics run on separate threads.
pub fn entropy_tables(
    corpus: &LabeledCorpus,
    topics: &[TopicId],
) -> Result<BTreeMap<TopicId, EntropyTable>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = topics
            .iter()
            .map(|t| s.spawn(move || entropy_table(corpus, t)))
            .collect();
        topics
            .iter()
            .zip(handles)
            .map(|(t, h)| Ok((t.clone(), h.join().expect("entropy worker panicked")?)))
            .collect()
    })
}

/// Positive keywords per topic. Inequalities are strict, so ties never select a word.
pub fn select_keywords(
    entropies: &BTreeMap<TopicId, EntropyTable>,
    config: &KeywordConfig,
) -> Result<BTreeMap<TopicId, KeywordSet>> {
    config.validate()?;
    let alpha = config.alpha;
    let mut out = BTreeMap::new();
    match config.mode {
        SelectionMode::Binary => {
            for (topic, table) in entropies {
                let keywords = table
                    .h_pos
                    .iter()
                    .filter(|(w, &h)| h > alpha * table.neg(w))
                    .map(|(w, _)| w.clone())
                    .collect();
                out.insert(
                    topic.clone(),
                    KeywordSet {
                        topic: topic.clone(),
                        keywords,
                    },
                );
            }
        }
        SelectionMode::CrossCategory => {
            if entropies.len() < 2 {
                return Err(Error::TooFewTopics(entropies.len()));
            }
            for (topic, table) in entropies {
                let keywords = table
                    .h_pos
                    .iter()
                    .filter(|(w, &h)| {
                        entropies
                            .iter()
                            .filter(|(other, _)| *other != topic)
                            .all(|(_, t)| h > alpha * t.pos(w))
                    })
                    .map(|(w, _)| w.clone())
                    .collect();
                out.insert(
                    topic.clone(),
                    KeywordSet {
                        topic: topic.clone(),
                        keywords,
                    },
                );
            }
        }
    }
    Ok(out)
}

/// Words far more spread among off-topic documents: `H_N > alpha_neg * H_P`.
pub fn select_negative_keywords(
    entropies: &BTreeMap<TopicId, EntropyTable>,
    config: &KeywordConfig,
) -> Result<BTreeMap<TopicId, KeywordSet>> {
    config.validate()?;
    Ok(entropies
        .iter()
        .map(|(topic, table)| {
            let keywords = table
                .h_neg
                .iter()
                .filter(|(w, &h)| h > config.alpha_neg * table.pos(w))
                .map(|(w, _)| w.clone())
                .collect();
            (
                topic.clone(),
                KeywordSet {
                    topic: topic.clone(),
                    keywords,
                },
            )
        })
        .collect())
}

pub fn extract_keywords(
    corpus: &LabeledCorpus,
    topics: &[TopicId],
    config: &KeywordConfig,
) -> Result<BTreeMap<TopicId, KeywordSet>> {
    select_keywords(&entropy_tables(corpus, topics)?, config)
}

pub fn write_keywords<'a>(
    sets: impl IntoIterator<Item = &'a KeywordSet>,
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let err = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["topic_id", "word"]).map_err(err)?;
    for set in sets {
        for word in &set.keywords {
            w.write_record([set.topic.as_str(), word.as_str()])
                .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_keywords(path: &Path) -> Result<BTreeMap<TopicId, KeywordSet>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?;
    if headers.len() < 2 || &headers[0] != "topic_id" || &headers[1] != "word" {
        return Err(Error::parse(path, 1, "expected header `topic_id,word`"));
    }
    let mut out: BTreeMap<TopicId, KeywordSet> = BTreeMap::new();
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(path, idx + 2, e.to_string()))?;
        if rec.len() < 2 {
            return Err(Error::parse(path, idx + 2, "expected `topic_id,word`"));
        }
        let topic = TopicId::new(&rec[0]);
        out.entry(topic.clone())
            .or_insert_with(|| KeywordSet {
                topic,
                keywords: BTreeSet::new(),
            })
            .keywords
            .insert(rec[1].to_owned());
    }
    Ok(out)
}
