//! Seeded synthetic data with known ground truth: linear structural equation
//! samples and labeled topic corpora.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, LabeledCorpus, Topic, TopicId};
use crate::error::{Error, Result};
use crate::lingam::causal_order;
use crate::pipeline::ObservationMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Uniform,
    Laplace,
    Gaussian,
}

/// Zero-mean disturbance with standard deviation `scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub kind: NoiseKind,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Noise {
    pub fn uniform(scale: f64) -> Self {
        Noise {
            kind: NoiseKind::Uniform,
            scale,
        }
    }

    pub fn gaussian(scale: f64) -> Self {
        Noise {
            kind: NoiseKind::Gaussian,
            scale,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Uniform => {
                let half = self.scale * 3f64.sqrt();
                rng.random_range(-half..half)
            }
            NoiseKind::Laplace => {
                let b = self.scale / 2f64.sqrt();
                let u: f64 = rng.random_range(-0.5..0.5);
                -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            NoiseKind::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.scale * z
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralSpec {
    /// Defaults to `x1..xd`.
    #[serde(default)]
    pub names: Vec<String>,
    /// `b0[i][j]` is the strength of `x_j -> x_i`.
    pub b0: Vec<Vec<f64>>,
    /// One entry per variable, or a single entry shared by all.
    pub noise: Vec<Noise>,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

impl StructuralSpec {
    pub fn dim(&self) -> usize {
        self.b0.len()
    }

    pub fn variable_names(&self) -> Vec<String> {
        if self.names.is_empty() {
            (1..=self.dim()).map(|i| format!("x{i}")).collect()
        } else {
            self.names.clone()
        }
    }

    pub fn b0_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.b0[i][j])
    }

    fn noise_of(&self, i: usize) -> Noise {
        if self.noise.len() == 1 {
            self.noise[0]
        } else {
            self.noise[i]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || self.b0.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidConfig("b0 must be a non-empty square matrix".into()));
        }
        if !self.names.is_empty() && self.names.len() != d {
            return Err(Error::InvalidConfig(format!("{d} variables but {} names", self.names.len())));
        }
        if self.noise.len() != 1 && self.noise.len() != d {
            return Err(Error::InvalidConfig(format!(
                "noise needs 1 or {d} entries, got {}",
                self.noise.len()
            )));
        }
        if self.noise.iter().any(|n| !(n.scale > 0.0 && n.scale.is_finite())) {
            return Err(Error::InvalidConfig("noise scales must be positive".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        Ok(())
    }
}

/// Draw `x = (I - B0)^{-1} e`, one row per observation.
pub fn generate_sem(spec: &StructuralSpec) -> Result<(ObservationMatrix, DMatrix<f64>)> {
    spec.validate()?;
    let d = spec.dim();
    let b0 = spec.b0_matrix();
    if (0..d).any(|i| b0[(i, i)] != 0.0) || b0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotAcyclic);
    }
    let order = causal_order(&b0);
    if order.residual != 0.0 {
        return Err(Error::NotAcyclic);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::with_capacity(spec.n);
    let mut e = vec![0.0; d];
    for _ in 0..spec.n {
        for (i, ei) in e.iter_mut().enumerate() {
            *ei = spec.noise_of(i).sample(&mut rng);
        }
        // causes are filled in before their effects
        let mut x = vec![0.0; d];
        for &i in &order.order {
            x[i] = e[i] + (0..d).map(|j| b0[(i, j)] * x[j]).sum::<f64>();
        }
        rows.push(x);
    }
    let width = spec.n.to_string().len();
    let ids = (1..=spec.n).map(|k| format!("s{k:0width$}")).collect();
    Ok((ObservationMatrix::new(ids, spec.variable_names(), rows)?, b0))
}

/// Seven topic regressors feeding a target `y`, with the sign pattern
/// `(+, +, +, -, +, +, -)` and order-one magnitudes.
pub fn star_spec(noise: NoiseKind, n: usize, seed: u64) -> StructuralSpec {
    let strengths = star_strengths();
    let d = strengths.len() + 1;
    let mut b0 = vec![vec![0.0; d]; d];
    b0[d - 1][..d - 1].copy_from_slice(&strengths);
    let mut names: Vec<String> = (1..d).map(|i| format!("x{i}")).collect();
    names.push("y".into());
    StructuralSpec {
        names,
        b0,
        noise: vec![Noise { kind: noise, scale: 1.0 }],
        n,
        seed,
    }
}

pub fn star_strengths() -> [f64; 7] {
    [0.8, 0.5, 0.7, -0.9, 0.6, 1.0, -0.6]
}

/// `x2 = strength * x1 + e2`.
pub fn chain_spec(strength: f64, noise: NoiseKind, n: usize, seed: u64) -> StructuralSpec {
    StructuralSpec {
        names: vec![],
        b0: vec![vec![0.0, 0.0], vec![strength, 0.0]],
        noise: vec![Noise { kind: noise, scale: 1.0 }],
        n,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicVocab {
    pub id: TopicId,
    #[serde(default)]
    pub name: Option<String>,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub topics: Vec<TopicVocab>,
    pub noise_words: Vec<String>,
    pub docs_per_topic: usize,
    #[serde(default = "default_doc_length")]
    pub doc_length: usize,
    pub noise_rate: f64,
    #[serde(default)]
    pub multi_label_rate: f64,
    #[serde(default)]
    pub seed: u64,
    /// Assign documents to this many stations (0 = no station ids).
    #[serde(default)]
    pub stations: usize,
    /// Per-topic sales effect of one labeled document at a station.
    #[serde(default)]
    pub sales_effects: BTreeMap<TopicId, f64>,
    #[serde(default)]
    pub sales_base: f64,
    #[serde(default = "default_sales_noise")]
    pub sales_noise: f64,
}

fn default_doc_length() -> usize {
    8
}

fn default_sales_noise() -> f64 {
    1.0
}

impl CorpusSpec {
    /// Topics `T1..Tn` with keywords `t{i}w{k}` and noise words `noise{k}`.
    pub fn generated(
        n_topics: usize,
        words_per_topic: usize,
        noise_vocab: usize,
        docs_per_topic: usize,
        noise_rate: f64,
        multi_label_rate: f64,
        seed: u64,
    ) -> Self {
        CorpusSpec {
            topics: (1..=n_topics)
                .map(|i| TopicVocab {
                    id: TopicId::new(format!("T{i}")),
                    name: None,
                    keywords: (0..words_per_topic).map(|k| format!("t{i}w{k}")).collect(),
                })
                .collect(),
            noise_words: (0..noise_vocab).map(|k| format!("noise{k}")).collect(),
            docs_per_topic,
            doc_length: default_doc_length(),
            noise_rate,
            multi_label_rate,
            seed,
            stations: 0,
            sales_effects: BTreeMap::new(),
            sales_base: 0.0,
            sales_noise: default_sales_noise(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.topics.is_empty() {
            return Err(Error::EmptyVocabulary("no topics".into()));
        }
        if let Some(t) = self.topics.iter().find(|t| t.keywords.is_empty()) {
            return Err(Error::EmptyVocabulary(format!("topic {} has no keywords", t.id)));
        }
        if self.noise_rate > 0.0 && self.noise_words.is_empty() {
            return Err(Error::EmptyVocabulary("noise_rate > 0 but no noise words".into()));
        }
        for (what, v) in [("noise_rate", self.noise_rate), ("multi_label_rate", self.multi_label_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange { what, value: v });
            }
        }
        let mut seen = BTreeSet::new();
        for t in &self.topics {
            if !seen.insert(&t.id) {
                return Err(Error::InvalidConfig(format!("duplicate topic {}", t.id)));
            }
        }
        let mut owner: BTreeMap<&str, &TopicId> = BTreeMap::new();
        for t in &self.topics {
            for w in &t.keywords {
                if let Some(prev) = owner.insert(w, &t.id) {
                    if prev != &t.id {
                        return Err(Error::InvalidConfig(format!(
                            "keyword `{w}` shared by {prev} and {}",
                            t.id
                        )));
                    }
                }
            }
        }
        if self.doc_length == 0 || self.docs_per_topic == 0 {
            return Err(Error::InvalidConfig("doc_length and docs_per_topic must be positive".into()));
        }
        if self.multi_label_rate > 0.0 && self.topics.len() < 2 {
            return Err(Error::InvalidConfig("multi-label documents need 2 topics".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: LabeledCorpus,
    /// Present when the spec assigns stations.
    pub sales: Option<BTreeMap<String, f64>>,
}

pub fn generate_corpus(spec: &CorpusSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_docs = spec.topics.len() * spec.docs_per_topic;
    let width = n_docs.to_string().len();
    let station_width = spec.stations.to_string().len();

    let mut documents = Vec::with_capacity(n_docs);
    let mut labels: BTreeMap<String, BTreeSet<TopicId>> = BTreeMap::new();
    for (ti, topic) in spec.topics.iter().enumerate() {
        for _ in 0..spec.docs_per_topic {
            let id = format!("doc{:0width$}", documents.len() + 1);
            let second = (rng.random::<f64>() < spec.multi_label_rate).then(|| {
                let k = rng.random_range(0..spec.topics.len() - 1);
                if k >= ti {
                    k + 1
                } else {
                    k
                }
            });
            let tokens: Vec<String> = (0..spec.doc_length)
                .map(|_| {
                    let vocab = if rng.random::<f64>() < spec.noise_rate {
                        &spec.noise_words
                    } else {
                        match second {
                            Some(u) if rng.random::<bool>() => &spec.topics[u].keywords,
                            _ => &topic.keywords,
                        }
                    };
                    vocab.choose(&mut rng).expect("validated non-empty").clone()
                })
                .collect();
            let mut doc = Document::new(
                id.clone(),
                tokens.join(" "),
                format!("user{}", rng.random_range(0..1000)),
            )
            .with_tokens(tokens);
            if spec.stations > 0 {
                let s = rng.random_range(0..spec.stations);
                doc.station_id = Some(format!("st{:0station_width$}", s + 1));
            }
            let mut tags: BTreeSet<TopicId> = [topic.id.clone()].into();
            if let Some(u) = second {
                tags.insert(spec.topics[u].id.clone());
            }
            labels.insert(id, tags);
            documents.push(doc);
        }
    }

    let sales = (spec.stations > 0).then(|| {
        let mut totals: BTreeMap<String, f64> = (1..=spec.stations)
            .map(|s| (format!("st{s:0station_width$}"), spec.sales_base))
            .collect();
        for doc in &documents {
            let station = doc.station_id.as_ref().expect("assigned above");
            for t in &labels[&doc.id] {
                *totals.get_mut(station).expect("known station") +=
                    spec.sales_effects.get(t).copied().unwrap_or(0.0);
            }
        }
        let noise = Noise::uniform(spec.sales_noise.max(f64::MIN_POSITIVE));
        for v in totals.values_mut() {
            *v += noise.sample(&mut rng);
        }
        totals
    });

    let catalog = spec
        .topics
        .iter()
        .map(|t| Topic {
            id: t.id.clone(),
            name: t.name.clone().unwrap_or_else(|| t.id.to_string()),
        })
        .collect();
    Ok(SyntheticCorpus {
        corpus: LabeledCorpus::new(documents, labels, catalog)?,
        sales,
    })
}

/// Simulation spec file: exactly one of `[sem]` or `[corpus]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub sem: Option<StructuralSpec>,
    pub corpus: Option<CorpusSpec>,
}

pub fn read_simulation_spec(path: &Path) -> Result<SimulationSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: SimulationSpec =
        toml::from_str(&text).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    if spec.sem.is_some() == spec.corpus.is_some() {
        return Err(Error::InvalidConfig(
            "simulation spec needs exactly one of [sem] or [corpus]".into(),
        ));
    }
    Ok(spec)
}

pub fn write_matrix_csv(names: &[String], m: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let err = |e: csv::Error| Error::io(path, e.into());
    let mut header = vec!["effect\\cause".to_owned()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(err)?;
    for (i, name) in names.iter().enumerate() {
        let mut rec = vec![name.clone()];
        rec.extend((0..m.ncols()).map(|j| m[(i, j)].to_string()));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
