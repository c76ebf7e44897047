//! Hierarchical topic routing and per-station aggregation.
//!
//! Routing order:
//! 1. author is an official account: promotional topic, stop;
//! 2. text contains a check-in phrase: check-in topic, stop;
//! 3. external-factor classifiers in configured order, first positive wins;
//! 4. content classifiers in descending F1 order, every positive is kept;
//! 5. nothing positive: fallback topic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{FeatureSpace, LinearModel};
use crate::corpus::{Document, TopicId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Official,
    CheckIn,
    External,
    Content,
    Fallback,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Official => "1",
            Stage::CheckIn => "1b",
            Stage::External => "2",
            Stage::Content => "3",
            Stage::Fallback => "fallback",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicAssignment {
    pub doc_id: String,
    pub topics: BTreeSet<TopicId>,
    /// Stage that produced every topic in `topics`.
    pub stage: Stage,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub official_accounts: BTreeSet<String>,
    pub checkin_patterns: Vec<String>,
    pub official_topic: TopicId,
    pub checkin_topic: TopicId,
    pub fallback_topic: TopicId,
    pub stage2_topics: Vec<TopicId>,
    /// Content topics, highest F1 first.
    pub stage3_topics: Vec<TopicId>,
    pub models: BTreeMap<TopicId, LinearModel>,
    pub spaces: BTreeMap<TopicId, FeatureSpace>,
}

pub fn default_checkin_patterns() -> Vec<String> {
    vec!["I'm at".to_owned()]
}

impl PipelineConfig {
    /// Topic layout of the roadside-station study: T3 by account, T5 by phrase,
    /// T4/T7/T8 as external factors, the rest as content topics.
    pub fn new(
        models: BTreeMap<TopicId, LinearModel>,
        spaces: BTreeMap<TopicId, FeatureSpace>,
        f1_scores: &BTreeMap<TopicId, f64>,
    ) -> Self {
        let official_topic = TopicId::from("T3");
        let checkin_topic = TopicId::from("T5");
        let stage2_topics: Vec<TopicId> = ["T4", "T7", "T8"].map(TopicId::from).to_vec();
        let content: Vec<TopicId> = models
            .keys()
            .filter(|t| **t != official_topic && **t != checkin_topic && !stage2_topics.contains(t))
            .cloned()
            .collect();
        PipelineConfig {
            official_accounts: BTreeSet::new(),
            checkin_patterns: default_checkin_patterns(),
            official_topic,
            checkin_topic,
            fallback_topic: TopicId::from("T8"),
            stage2_topics: stage2_topics
                .into_iter()
                .filter(|t| models.contains_key(t))
                .collect(),
            stage3_topics: order_by_f1(content, f1_scores),
            models,
            spaces,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s2: BTreeSet<_> = self.stage2_topics.iter().collect();
        if self.stage3_topics.iter().any(|t| s2.contains(t)) {
            return Err(Error::InvalidConfig(
                "stage-2 and stage-3 topics must be disjoint".into(),
            ));
        }
        for t in self.stage2_topics.iter().chain(&self.stage3_topics) {
            self.classifier(t)?;
        }
        Ok(())
    }

    fn classifier(&self, topic: &TopicId) -> Result<(&LinearModel, &FeatureSpace)> {
        match (self.models.get(topic), self.spaces.get(topic)) {
            (Some(m), Some(s)) => Ok((m, s)),
            _ => Err(Error::MissingModel(topic.clone())),
        }
    }

    fn is_positive(&self, doc: &Document, topic: &TopicId) -> Result<bool> {
        let (model, space) = self.classifier(topic)?;
        Ok(model.predict(&space.featurize(doc))?.0 > 0)
    }
}

/// Sort topics by descending F1; unknown scores go last, ties by topic id.
pub fn order_by_f1(mut topics: Vec<TopicId>, f1_scores: &BTreeMap<TopicId, f64>) -> Vec<TopicId> {
    topics.sort_by(|a, b| {
        let fa = f1_scores.get(a).copied().unwrap_or(f64::NEG_INFINITY);
        let fb = f1_scores.get(b).copied().unwrap_or(f64::NEG_INFINITY);
        fb.total_cmp(&fa).then_with(|| a.cmp(b))
    });
    topics
}

pub fn route(doc: &Document, config: &PipelineConfig) -> Result<TopicAssignment> {
    let single = |topic: &TopicId, stage| TopicAssignment {
        doc_id: doc.id.clone(),
        topics: [topic.clone()].into(),
        stage,
    };
    if config.official_accounts.contains(&doc.author) {
        return Ok(single(&config.official_topic, Stage::Official));
    }
    if config
        .checkin_patterns
        .iter()
        .any(|p| !p.is_empty() && doc.text.contains(p.as_str()))
    {
        return Ok(single(&config.checkin_topic, Stage::CheckIn));
    }
    for topic in &config.stage2_topics {
        if config.is_positive(doc, topic)? {
            return Ok(single(topic, Stage::External));
        }
    }
    let mut topics = BTreeSet::new();
    for topic in &config.stage3_topics {
        if config.is_positive(doc, topic)? {
            topics.insert(topic.clone());
        }
    }
    if topics.is_empty() {
        return Ok(single(&config.fallback_topic, Stage::Fallback));
    }
    Ok(TopicAssignment {
        doc_id: doc.id.clone(),
        topics,
        stage: Stage::Content,
    })
}

pub fn classify_corpus(docs: &[Document], config: &PipelineConfig) -> Result<Vec<TopicAssignment>> {
    config.validate()?;
    docs.iter().map(|d| route(d, config)).collect()
}

pub fn write_assignments(assignments: &[TopicAssignment], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let err = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["doc_id", "topics", "stage"]).map_err(err)?;
    for a in assignments {
        let topics: Vec<&str> = a.topics.iter().map(TopicId::as_str).collect();
        w.write_record([a.doc_id.clone(), topics.join(";"), a.stage.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rows are observations (stations), columns are variables.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    pub row_ids: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl ObservationMatrix {
    pub fn new(row_ids: Vec<String>, columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if row_ids.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: row_ids.len(),
                got: rows.len(),
            });
        }
        for r in &rows {
            if r.len() != columns.len() {
                return Err(Error::DimensionMismatch {
                    expected: columns.len(),
                    got: r.len(),
                });
            }
        }
        Ok(ObservationMatrix {
            row_ids,
            columns,
            rows,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        let err = |e: csv::Error| Error::io(path, e.into());
        let mut header = vec!["station_id".to_owned()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(err)?;
        for (id, row) in self.row_ids.iter().zip(&self.rows) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(path, 1, e.to_string()))?
            .clone();
        if headers.len() < 2 || &headers[0] != "station_id" {
            return Err(Error::parse(path, 1, "expected header `station_id,<variables...>`"));
        }
        let columns: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
        let mut row_ids = Vec::new();
        let mut rows = Vec::new();
        for (idx, rec) in reader.records().enumerate() {
            let line = idx + 2;
            let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
            row_ids.push(rec[0].to_owned());
            let row = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::parse(path, line, format!("bad number `{v}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        ObservationMatrix::new(row_ids, columns, rows)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DropReport {
    /// Documents without a station id, excluded from the matrix.
    pub dropped_docs: Vec<String>,
    pub retained_docs: usize,
}

/// Count assigned topics per station and join sales as the last column `y`.
///
/// `count_topics[i]` becomes column `x{i+1}`. Every station with a sales
/// record gets a row, even without documents.
pub fn aggregate(
    assignments: &[TopicAssignment],
    docs: &[Document],
    sales: &BTreeMap<String, f64>,
    count_topics: &[TopicId],
) -> Result<(ObservationMatrix, DropReport)> {
    let station_of: BTreeMap<&str, Option<&str>> = docs
        .iter()
        .map(|d| (d.id.as_str(), d.station_id.as_deref()))
        .collect();
    let mut counts: BTreeMap<&str, Vec<f64>> = sales
        .keys()
        .map(|s| (s.as_str(), vec![0.0; count_topics.len()]))
        .collect();
    let mut report = DropReport::default();
    let mut missing = BTreeSet::new();

    for a in assignments {
        let station = station_of
            .get(a.doc_id.as_str())
            .ok_or_else(|| Error::UnknownDocument(a.doc_id.clone()))?;
        let Some(station) = station else {
            report.dropped_docs.push(a.doc_id.clone());
            continue;
        };
        report.retained_docs += 1;
        let Some(row) = counts.get_mut(station) else {
            missing.insert(station.to_string());
            continue;
        };
        for (j, t) in count_topics.iter().enumerate() {
            if a.topics.contains(t) {
                row[j] += 1.0;
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingSales(missing.into_iter().collect()));
    }

    let mut columns: Vec<String> = (1..=count_topics.len()).map(|i| format!("x{i}")).collect();
    columns.push("y".to_owned());
    let (row_ids, rows) = counts
        .into_iter()
        .map(|(station, mut row)| {
            row.push(sales[station]);
            (station.to_owned(), row)
        })
        .unzip();
    Ok((ObservationMatrix::new(row_ids, columns, rows)?, report))
}

/// Topics counted as `x1..x7`.
pub fn default_count_topics() -> Vec<TopicId> {
    (1..=7).map(|i| TopicId::new(format!("T{i}"))).collect()
}

/// `station_id,sales` CSV, header required.
pub fn read_sales(path: &Path) -> Result<BTreeMap<String, f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?;
    if headers.len() < 2 || &headers[0] != "station_id" || &headers[1] != "sales" {
        return Err(Error::parse(path, 1, "expected header `station_id,sales`"));
    }
    let mut out = BTreeMap::new();
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let value: f64 = rec
            .get(1)
            .and_then(|v| v.trim().parse().ok())
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::parse(path, line, "bad sales value"))?;
        if out.insert(rec[0].to_owned(), value).is_some() {
            return Err(Error::parse(path, line, format!("duplicate station `{}`", &rec[0])));
        }
    }
    Ok(out)
}

pub fn write_sales(sales: &BTreeMap<String, f64>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let err = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["station_id", "sales"]).map_err(err)?;
    for (s, v) in sales {
        w.write_record([s.clone(), v.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One account name per line; blank lines and `#` comments are ignored.
pub fn read_official_accounts(path: &Path) -> Result<BTreeSet<String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let name = line.trim();
        if !name.is_empty() && !name.starts_with('#') {
            out.insert(name.to_owned());
        }
    }
    Ok(out)
}
