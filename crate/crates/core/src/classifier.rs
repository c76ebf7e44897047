//! Binary linear max-margin classifiers over keyword-count features.
//!
//! Training solves the soft-margin dual
//!
//! ```text
//! min_a  1/2 a'Qa - e'a   s.t.  0 <= a_i <= C,  y'a = 0,   Q_ij = y_i y_j <x_i, x_j>
//! ```
//!
//! by sequential minimal optimization with second-order working-set
//! selection. The bias is not regularized, so the primal objective is exactly
//! `1/2 |w|^2 + C sum_i max(0, 1 - y_i (w.x_i + b))`.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, TopicId};
use crate::entropy::KeywordSet;
use crate::error::{Error, Result};

/// Ordered `(topic, keyword)` coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureSpace {
    entries: Vec<(TopicId, String)>,
    by_word: HashMap<String, Vec<usize>>,
}

impl FeatureSpace {
    pub fn new(entries: impl IntoIterator<Item = (TopicId, String)>) -> Result<Self> {
        let mut space = FeatureSpace::default();
        for (topic, word) in entries {
            if space.entries.iter().any(|(t, w)| *t == topic && *w == word) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate feature ({topic}, {word})"
                )));
            }
            space
                .by_word
                .entry(word.clone())
                .or_default()
                .push(space.entries.len());
            space.entries.push((topic, word));
        }
        Ok(space)
    }

    /// Union of all keyword sets, ordered by topic then word.
    pub fn from_keywords<'a>(sets: impl IntoIterator<Item = &'a KeywordSet>) -> Self {
        let mut pairs: Vec<(TopicId, String)> = sets
            .into_iter()
            .flat_map(|s| s.keywords.iter().map(|w| (s.topic.clone(), w.clone())))
            .collect();
        pairs.sort();
        pairs.dedup();
        FeatureSpace::new(pairs).expect("deduplicated")
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(TopicId, String)] {
        &self.entries
    }

    pub fn featurize(&self, doc: &Document) -> FeatureVector {
        let mut values = vec![0.0; self.dim()];
        for tok in &doc.tokens {
            if let Some(idx) = self.by_word.get(tok) {
                for &i in idx {
                    values[i] += 1.0;
                }
            }
        }
        FeatureVector {
            doc_id: doc.id.clone(),
            values,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        let err = |e: csv::Error| Error::io(path, e.into());
        w.write_record(["index", "topic_id", "word"]).map_err(err)?;
        for (i, (t, word)) in self.entries.iter().enumerate() {
            w.write_record([i.to_string().as_str(), t.as_str(), word.as_str()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let mut entries = Vec::new();
        for (idx, rec) in reader.records().enumerate() {
            let line = idx + 2;
            let rec = rec.map_err(|e| Error::parse(path, line, e.to_string()))?;
            if rec.len() < 3 {
                return Err(Error::parse(path, line, "expected `index,topic_id,word`"));
            }
            let i: usize = rec[0]
                .parse()
                .map_err(|_| Error::parse(path, line, "bad feature index"))?;
            if i != entries.len() {
                return Err(Error::parse(path, line, "feature indices must be 0..n in order"));
            }
            entries.push((TopicId::new(&rec[1]), rec[2].to_owned()));
        }
        FeatureSpace::new(entries)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub doc_id: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(doc_id: impl Into<String>, values: Vec<f64>) -> Self {
        FeatureVector {
            doc_id: doc_id.into(),
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    /// Soft-margin penalty.
    pub c: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            c: 1.0,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidConfig(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainStats {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    /// Training points with `y f(x) < 1 - tol`.
    pub margin_violations: usize,
    /// Training points with `y f(x) < 0`.
    pub training_errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub hyper: Hyper,
    pub stats: TrainStats,
}

impl LinearModel {
    pub fn decision(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: values.len(),
            });
        }
        Ok(dot(&self.weights, values) + self.bias)
    }

    /// `(label, margin)` with label `+1` on ties.
    pub fn predict(&self, fv: &FeatureVector) -> Result<(i8, f64)> {
        let m = self.decision(&fv.values)?;
        Ok((if m >= 0.0 { 1 } else { -1 }, m))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let err = |e| Error::io(path, e);
        for (i, w) in self.weights.iter().enumerate() {
            writeln!(out, "{i},{w}").map_err(err)?;
        }
        writeln!(out, "bias,{}", self.bias).map_err(err)?;
        out.flush().map_err(err)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut weights = Vec::new();
        let mut bias = None;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(path, line_no, "expected `key,value`"))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line_no, "bad number"))?;
            if key == "bias" {
                bias = Some(value);
            } else {
                let i: usize = key
                    .parse()
                    .map_err(|_| Error::parse(path, line_no, "bad feature index"))?;
                if i != weights.len() {
                    return Err(Error::parse(path, line_no, "weights must be listed in index order"));
                }
                weights.push(value);
            }
        }
        let bias = bias.ok_or_else(|| Error::parse(path, 0, "missing `bias` line"))?;
        Ok(LinearModel {
            weights,
            bias,
            hyper: Hyper::default(),
            stats: TrainStats::default(),
        })
    }
}

pub fn predict(model: &LinearModel, fv: &FeatureVector) -> Result<(i8, f64)> {
    model.predict(fv)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1/2 |w|^2 + C sum hinge`.
pub fn primal_objective(weights: &[f64], bias: f64, xs: &[&[f64]], ys: &[i8], c: f64) -> f64 {
    let reg = 0.5 * dot(weights, weights);
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| (1.0 - f64::from(y) * (dot(weights, x) + bias)).max(0.0))
        .sum();
    reg + c * hinge
}

struct SparseRow {
    idx: Vec<usize>,
    val: Vec<f64>,
}

const TAU: f64 = 1e-12;

pub fn train(features: &[FeatureVector], labels: &[i8], hyper: &Hyper) -> Result<LinearModel> {
    hyper.validate()?;
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: labels.len(),
        });
    }
    if features.is_empty() {
        return Err(Error::SingleClass);
    }
    let dim = features[0].values.len();
    if dim == 0 {
        return Err(Error::EmptyFeatureSpace);
    }
    let mut rows = Vec::with_capacity(features.len());
    for (i, fv) in features.iter().enumerate() {
        if fv.values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: fv.values.len(),
            });
        }
        if fv.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature(i));
        }
        let (idx, val): (Vec<usize>, Vec<f64>) = fv
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .unzip();
        rows.push(SparseRow { idx, val });
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::InvalidConfig("labels must be +1 or -1".into()));
    }
    if !(labels.contains(&1) && labels.contains(&-1)) {
        return Err(Error::SingleClass);
    }

    let n = rows.len();
    let c = hyper.c;
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let diag: Vec<f64> = rows.iter().map(|r| dot(&r.val, &r.val)).collect();

    let mut scratch = vec![0.0; dim];
    // K(i, .) for every training point
    let mut kernel_column = |i: usize, out: &mut Vec<f64>| {
        for (&j, &v) in rows[i].idx.iter().zip(&rows[i].val) {
            scratch[j] = v;
        }
        out.clear();
        out.extend(
            rows.iter()
                .map(|r| r.idx.iter().zip(&r.val).map(|(&j, &v)| scratch[j] * v).sum::<f64>()),
        );
        for &j in &rows[i].idx {
            scratch[j] = 0.0;
        }
    };

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut ki = Vec::with_capacity(n);
    let mut kj = Vec::with_capacity(n);
    let mut iterations = 0;
    let mut converged = false;

    let is_upper = |a: f64| a >= c;
    let is_lower = |a: f64| a <= 0.0;

    while iterations < hyper.max_iter {
        // working set: i maximizes -y G over I_up, j from I_low by second-order gain
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let up = if y[t] > 0.0 { !is_upper(alpha[t]) } else { !is_lower(alpha[t]) };
            if up && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        kernel_column(i, &mut ki);

        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        for t in 0..n {
            let low = if y[t] > 0.0 { !is_lower(alpha[t]) } else { !is_upper(alpha[t]) };
            if !low {
                continue;
            }
            let v = y[t] * grad[t];
            gmax2 = gmax2.max(v);
            let grad_diff = gmax + v;
            if grad_diff > 0.0 {
                let mut quad = diag[i] + diag[t] - 2.0 * ki[t];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let gain = -(grad_diff * grad_diff) / quad;
                if gain <= best {
                    best = gain;
                    j_sel = Some(t);
                }
            }
        }
        if gmax + gmax2 < hyper.tol {
            converged = true;
            break;
        }
        let Some(j) = j_sel else {
            converged = true;
            break;
        };
        iterations += 1;
        kernel_column(j, &mut kj);

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = y[i] * y[j] * ki[j];
        if y[i] != y[j] {
            let mut quad = diag[i] + diag[j] + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = diag[i] + diag[j] - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }

    // offset from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if is_upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if is_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };

    let mut weights = vec![0.0; dim];
    for (t, row) in rows.iter().enumerate() {
        if alpha[t] != 0.0 {
            let coef = alpha[t] * y[t];
            for (&j, &v) in row.idx.iter().zip(&row.val) {
                weights[j] += coef * v;
            }
        }
    }
    let bias = -rho;

    let xs: Vec<&[f64]> = features.iter().map(|f| f.values.as_slice()).collect();
    let mut stats = TrainStats {
        iterations,
        converged,
        objective: primal_objective(&weights, bias, &xs, labels, c),
        ..Default::default()
    };
    for (x, &yy) in xs.iter().zip(&y) {
        let m = yy * (dot(&weights, x) + bias);
        if m < 1.0 - hyper.tol {
            stats.margin_violations += 1;
        }
        if m < 0.0 {
            stats.training_errors += 1;
        }
    }

    Ok(LinearModel {
        weights,
        bias,
        hyper: *hyper,
        stats,
    })
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> Result<f64> {
    for (what, v) in [("precision", precision), ("recall", recall)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange { what, value: v });
        }
    }
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Score {
    /// Positive-class scores; precision (recall) is 0 when nothing is predicted (present) positive.
    pub fn from_predictions(truth: &[i8], predicted: &[i8]) -> Self {
        let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t > 0, p > 0) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fneg += 1,
                (false, false) => {}
            }
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fneg);
        Score {
            precision,
            recall,
            f1: f1(precision, recall).expect("ratios lie in [0, 1]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_fold: Vec<Score>,
}

/// Seeded stratified partition of example indices into `k` folds.
pub fn stratified_folds(labels: &[i8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 folds, got {k}")));
    }
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] > 0).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] <= 0).collect();
    let minority = pos.len().min(neg.len());
    if k > minority {
        return Err(Error::TooManyFolds { k, minority });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (slot, &i) in pos.iter().chain(&neg).enumerate() {
        folds[slot % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

pub fn kfold_evaluate(
    features: &[FeatureVector],
    labels: &[i8],
    k: usize,
    hyper: &Hyper,
    seed: u64,
) -> Result<Metrics> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: labels.len(),
        });
    }
    let folds = stratified_folds(labels, k, seed)?;
    let per_fold: Vec<Score> = std::thread::scope(|s| {
        let handles: Vec<_> = folds
            .iter()
            .map(|test| {
                s.spawn(move || -> Result<Score> {
                    let mut in_test = vec![false; labels.len()];
                    for &i in test {
                        in_test[i] = true;
                    }
                    let (train_x, train_y): (Vec<FeatureVector>, Vec<i8>) = (0..labels.len())
                        .filter(|&i| !in_test[i])
                        .map(|i| (features[i].clone(), labels[i]))
                        .unzip();
                    let model = train(&train_x, &train_y, hyper)?;
                    let truth: Vec<i8> = test.iter().map(|&i| labels[i]).collect();
                    let predicted = test
                        .iter()
                        .map(|&i| model.predict(&features[i]).map(|p| p.0))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Score::from_predictions(&truth, &predicted))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fold worker panicked"))
            .collect::<Result<Vec<_>>>()
    })?;

    let mean = |f: fn(&Score) -> f64| per_fold.iter().map(f).sum::<f64>() / per_fold.len() as f64;
    Ok(Metrics {
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        f1: mean(|s| s.f1),
        per_fold,
    })
}

/// Feature vectors and `±1` labels for one topic of a labeled corpus.
pub fn topic_dataset(
    corpus: &crate::corpus::LabeledCorpus,
    space: &FeatureSpace,
    topic: &TopicId,
) -> (Vec<FeatureVector>, Vec<i8>) {
    corpus
        .documents
        .iter()
        .map(|d| {
            let y = if corpus.is_labeled(&d.id, topic) { 1 } else { -1 };
            (space.featurize(d), y)
        })
        .unzip()
}

/// `topic_id,precision,recall,f1` rows.
pub fn write_metrics_csv(rows: &BTreeMap<TopicId, Metrics>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let err = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["topic_id", "precision", "recall", "f1"])
        .map_err(err)?;
    for (t, m) in rows {
        w.write_record([
            t.to_string(),
            format!("{:.6}", m.precision),
            format!("{:.6}", m.recall),
            format!("{:.6}", m.f1),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
