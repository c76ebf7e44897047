//! Documents, topic labels and word segmentation.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Topic identifier such as `T1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicId(pub String);

impl TopicId {
    pub fn new(id: impl Into<String>) -> Self {
        TopicId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TopicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TopicId {
    fn from(s: &str) -> Self {
        TopicId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub id: TopicId,
    pub name: String,
}

/// The eight roadside-station tweet topics.
pub fn default_catalog() -> Vec<Topic> {
    [
        ("T1", "Products and Services"),
        ("T2", "Special Events"),
        ("T3", "Promotional"),
        ("T4", "Traffic and Weather"),
        ("T5", "Check-in"),
        ("T6", "Positive Reviews"),
        ("T7", "Motorcycles"),
        ("T8", "Unrelated and Others"),
    ]
    .into_iter()
    .map(|(id, name)| Topic {
        id: TopicId::from(id),
        name: name.to_owned(),
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub author: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub station_id: Option<String>,
    #[serde(skip)]
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, author: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            author: author.into(),
            station_id: None,
            tokens: Vec::new(),
        }
    }

    pub fn with_station(mut self, station: impl Into<String>) -> Self {
        self.station_id = Some(station.into());
        self
    }

    pub fn with_tokens<S: Into<String>>(mut self, tokens: impl IntoIterator<Item = S>) -> Self {
        self.tokens = tokens.into_iter().map(Into::into).collect();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentFormat {
    Jsonl,
    Csv,
}

impl DocumentFormat {
    /// Guess from a file extension, defaulting to JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DocumentFormat::Csv,
            _ => DocumentFormat::Jsonl,
        }
    }
}

#[derive(Deserialize)]
struct RawDocument {
    id: Option<String>,
    text: Option<String>,
    #[serde(default)]
    author: Option<String>,
    #[serde(default)]
    station_id: Option<String>,
}

/// Load documents from a JSONL or CSV file.
///
/// Records without an `id` get `<filename>:<line>`. Blank JSONL lines are skipped.
pub fn load_documents(path: &Path, format: DocumentFormat) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();

    let mut raws: Vec<(usize, RawDocument)> = Vec::new();
    match format {
        DocumentFormat::Jsonl => {
            for (idx, line) in BufReader::new(file).lines().enumerate() {
                let line_no = idx + 1;
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let raw: RawDocument = serde_json::from_str(&line)
                    .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
                raws.push((line_no, raw));
            }
        }
        DocumentFormat::Csv => {
            let mut reader = csv::Reader::from_reader(file);
            for (idx, record) in reader.deserialize::<RawDocument>().enumerate() {
                // header is line 1
                let line_no = idx + 2;
                let raw = record.map_err(|e| Error::parse(path, line_no, e.to_string()))?;
                raws.push((line_no, raw));
            }
        }
    }

    let mut seen = HashSet::new();
    let mut docs = Vec::with_capacity(raws.len());
    for (line_no, raw) in raws {
        let text = raw
            .text
            .ok_or_else(|| Error::parse(path, line_no, "missing field `text`"))?;
        let id = raw
            .id
            .filter(|id| !id.is_empty())
            .unwrap_or_else(|| format!("{file_name}:{line_no}"));
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        docs.push(Document {
            id,
            text,
            author: raw.author.unwrap_or_default(),
            station_id: raw.station_id.filter(|s| !s.is_empty()),
            tokens: Vec::new(),
        });
    }
    Ok(docs)
}

pub fn write_documents_jsonl(docs: &[Document], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in docs {
        let line = serde_json::to_string(doc).expect("document serializes");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SegmenterKind {
    /// Maximal runs of letters/digits, lowercased. `pattern` overrides the token regex.
    WhitespaceRegex {
        #[serde(default)]
        pattern: Option<String>,
    },
    /// Program reading text on stdin and printing whitespace-separated tokens.
    ExternalCommand { command: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmenterSpec {
    pub kind: SegmenterKind,
    /// Drop words from `stop_words` (approximates keeping self-sufficient words only).
    #[serde(default)]
    pub self_sufficient_only: bool,
    #[serde(default)]
    pub stop_words: BTreeSet<String>,
}

impl Default for SegmenterSpec {
    fn default() -> Self {
        SegmenterSpec {
            kind: SegmenterKind::WhitespaceRegex { pattern: None },
            self_sufficient_only: false,
            stop_words: BTreeSet::new(),
        }
    }
}

pub const DEFAULT_TOKEN_PATTERN: &str = r"[\p{L}\p{N}]+";

#[derive(Debug, Clone)]
enum Backend {
    Regex(Regex),
    Command(Vec<String>),
}

/// A validated, ready-to-run [`SegmenterSpec`].
#[derive(Debug, Clone)]
pub struct Segmenter {
    backend: Backend,
    stop_words: Option<BTreeSet<String>>,
}

impl Segmenter {
    pub fn new(spec: &SegmenterSpec) -> Result<Self> {
        let backend = match &spec.kind {
            SegmenterKind::WhitespaceRegex { pattern } => {
                let pattern = pattern.as_deref().unwrap_or(DEFAULT_TOKEN_PATTERN);
                let re = Regex::new(pattern)
                    .map_err(|e| Error::InvalidConfig(format!("token pattern: {e}")))?;
                Backend::Regex(re)
            }
            SegmenterKind::ExternalCommand { command } => {
                if command.is_empty() || command[0].trim().is_empty() {
                    return Err(Error::InvalidConfig(
                        "external segmenter needs a non-empty command".into(),
                    ));
                }
                Backend::Command(command.clone())
            }
        };
        Ok(Segmenter {
            backend,
            stop_words: spec.self_sufficient_only.then(|| spec.stop_words.clone()),
        })
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<String>> {
        let tokens: Vec<String> = match &self.backend {
            Backend::Regex(re) => re
                .find_iter(text)
                .map(|m| m.as_str().to_lowercase())
                .collect(),
            Backend::Command(cmd) => run_external(cmd, text)?,
        };
        Ok(tokens
            .into_iter()
            .filter(|t| !t.is_empty())
            .filter(|t| self.stop_words.as_ref().is_none_or(|s| !s.contains(t)))
            .collect())
    }

    pub fn segment(&self, doc: &Document) -> Result<Document> {
        let mut out = doc.clone();
        out.tokens = self.tokenize(&doc.text)?;
        Ok(out)
    }

    pub fn segment_all(&self, docs: &mut [Document]) -> Result<()> {
        for doc in docs.iter_mut() {
            doc.tokens = self.tokenize(&doc.text)?;
        }
        Ok(())
    }
}

fn run_external(cmd: &[String], text: &str) -> Result<Vec<String>> {
    let mut child = Command::new(&cmd[0])
        .args(&cmd[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Segmenter {
            status: "spawn failed".into(),
            stderr: e.to_string(),
        })?;
    {
        let mut stdin = child.stdin.take().expect("piped stdin");
        // a segmenter that exits without reading stdin is reported by its status below
        let _ = stdin.write_all(text.as_bytes());
    }
    let output = child.wait_with_output().map_err(|e| Error::Segmenter {
        status: "wait failed".into(),
        stderr: e.to_string(),
    })?;
    if !output.status.success() {
        return Err(Error::Segmenter {
            status: output.status.to_string(),
            stderr: String::from_utf8_lossy(&output.stderr).trim().to_owned(),
        });
    }
    Ok(String::from_utf8_lossy(&output.stdout)
        .split_whitespace()
        .map(str::to_owned)
        .collect())
}

/// Documents plus their (multi-label) topic tags.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    pub documents: Vec<Document>,
    pub labels: BTreeMap<String, BTreeSet<TopicId>>,
    pub topic_catalog: Vec<Topic>,
}

impl LabeledCorpus {
    pub fn new(
        documents: Vec<Document>,
        labels: BTreeMap<String, BTreeSet<TopicId>>,
        topic_catalog: Vec<Topic>,
    ) -> Result<Self> {
        let ids: HashSet<&str> = documents.iter().map(|d| d.id.as_str()).collect();
        if ids.len() != documents.len() {
            let mut seen = HashSet::new();
            let dup = documents
                .iter()
                .find(|d| !seen.insert(d.id.as_str()))
                .map(|d| d.id.clone())
                .unwrap_or_default();
            return Err(Error::DuplicateId(dup));
        }
        for (id, topics) in &labels {
            if !ids.contains(id.as_str()) {
                return Err(Error::UnknownDocument(id.clone()));
            }
            for t in topics {
                if !topic_catalog.iter().any(|c| &c.id == t) {
                    return Err(Error::UnknownTopic(t.0.clone()));
                }
            }
        }
        Ok(LabeledCorpus {
            documents,
            labels,
            topic_catalog,
        })
    }

    pub fn topic_ids(&self) -> impl Iterator<Item = &TopicId> {
        self.topic_catalog.iter().map(|t| &t.id)
    }

    pub fn has_topic(&self, topic: &TopicId) -> bool {
        self.topic_catalog.iter().any(|t| &t.id == topic)
    }

    pub fn topic_name(&self, topic: &TopicId) -> Option<&str> {
        self.topic_catalog
            .iter()
            .find(|t| &t.id == topic)
            .map(|t| t.name.as_str())
    }

    pub fn labels_of(&self, doc_id: &str) -> Option<&BTreeSet<TopicId>> {
        self.labels.get(doc_id)
    }

    pub fn is_labeled(&self, doc_id: &str, topic: &TopicId) -> bool {
        self.labels.get(doc_id).is_some_and(|s| s.contains(topic))
    }

    /// Size of the positive partition for `topic` (documents carrying that label).
    pub fn partition_size(&self, topic: &TopicId) -> usize {
        self.documents
            .iter()
            .filter(|d| self.is_labeled(&d.id, topic))
            .count()
    }
}

/// Read a `doc_id,topic_id` CSV (header required).
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, BTreeSet<TopicId>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    if headers.len() < 2 || &headers[0] != "doc_id" || &headers[1] != "topic_id" {
        return Err(Error::parse(path, 1, "expected header `doc_id,topic_id`"));
    }
    let mut labels: BTreeMap<String, BTreeSet<TopicId>> = BTreeMap::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, idx + 2, e.to_string()))?;
        if record.len() < 2 {
            return Err(Error::parse(path, idx + 2, "expected `doc_id,topic_id`"));
        }
        labels
            .entry(record[0].to_owned())
            .or_default()
            .insert(TopicId::new(record[1].trim()));
    }
    Ok(labels)
}

pub fn write_labels(labels: &BTreeMap<String, BTreeSet<TopicId>>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let err = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["doc_id", "topic_id"]).map_err(err)?;
    for (doc, topics) in labels {
        for t in topics {
            w.write_record([doc.as_str(), t.as_str()]).map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Join documents with a label file into a corpus. An empty file yields an unlabeled corpus.
pub fn attach_labels(
    docs: Vec<Document>,
    label_file: &Path,
    catalog: Vec<Topic>,
) -> Result<LabeledCorpus> {
    let empty = std::fs::metadata(label_file)
        .map_err(|e| Error::io(label_file, e))?
        .len()
        == 0;
    let labels = if empty {
        BTreeMap::new()
    } else {
        read_labels(label_file)?
    };
    LabeledCorpus::new(docs, labels, catalog)
}
