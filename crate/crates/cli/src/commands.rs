//! Subcommand implementations. Each reads its inputs from files and writes
//! its outputs into the `--out` directory; nothing depends on wall-clock time,
//! so reruns with the same inputs and seed produce identical files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use roadside::classifier::{self, kfold_evaluate, topic_dataset, write_metrics_csv, Metrics};
use roadside::corpus::{self, default_catalog, load_documents, DocumentFormat, SegmenterKind, Topic};
use roadside::entropy::{self, entropy_tables, read_keywords, write_keywords};
use roadside::lingam::{self, check_assumptions, target_effects, write_report, Nonlinearity};
use roadside::pipeline::{self, aggregate, classify_corpus, read_official_accounts, read_sales};
use roadside::synthgen::{generate_corpus, generate_sem, read_simulation_spec, write_matrix_csv};
use roadside::{
    Document, Error, FeatureSpace, Hyper, IcaConfig, KeywordConfig, LabeledCorpus, LingamConfig,
    LinearModel, ObservationMatrix, PipelineConfig, Result, Segmenter, SegmenterSpec, SelectionMode,
    TopicId,
};

use crate::{
    exit_code, CausalArgs, ClassifyArgs, KeywordsArgs, ModeArg, NonlinearityArg, ReportArgs,
    SegmentArgs, SimulateArgs, TrainArgs,
};

pub const FEATURE_SPACE_FILE: &str = "feature_space.csv";
pub const METRICS_FILE: &str = "metrics.csv";

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_owned(),
        source: e,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn keywords_file(dir: &Path, topic: &TopicId) -> PathBuf {
    dir.join(format!("keywords_{topic}.csv"))
}

pub fn model_file(dir: &Path, topic: &TopicId) -> PathBuf {
    dir.join(format!("model_{topic}.txt"))
}

fn segmenter(args: &SegmentArgs) -> Result<Segmenter> {
    let kind = match &args.segmenter {
        Some(cmd) => SegmenterKind::ExternalCommand {
            command: cmd.split_whitespace().map(str::to_owned).collect(),
        },
        None => SegmenterKind::WhitespaceRegex {
            pattern: args.token_pattern.clone(),
        },
    };
    let stop_words: BTreeSet<String> = match &args.stop_words {
        Some(p) => fs::read_to_string(p)
            .map_err(|e| io_err(p, e))?
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .map(str::to_owned)
            .collect(),
        None => BTreeSet::new(),
    };
    Segmenter::new(&SegmenterSpec {
        kind,
        self_sufficient_only: !stop_words.is_empty(),
        stop_words,
    })
}

fn load_segmented(path: &Path, seg: &SegmentArgs) -> Result<Vec<Document>> {
    let mut docs = load_documents(path, DocumentFormat::from_path(path))?;
    segmenter(seg)?.segment_all(&mut docs)?;
    Ok(docs)
}

/// Catalog entries for every topic in the label map, named from the default catalog when known.
fn catalog_for(labels: &BTreeMap<String, BTreeSet<TopicId>>) -> Vec<Topic> {
    let known = default_catalog();
    let mut ids: BTreeSet<TopicId> = known.iter().map(|t| t.id.clone()).collect();
    ids.extend(labels.values().flatten().cloned());
    ids.into_iter()
        .map(|id| {
            let name = known
                .iter()
                .find(|t| t.id == id)
                .map_or_else(|| id.to_string(), |t| t.name.clone());
            Topic { id, name }
        })
        .collect()
}

fn load_corpus(docs: &Path, labels: &Path, seg: &SegmentArgs) -> Result<LabeledCorpus> {
    let documents = load_segmented(docs, seg)?;
    let empty = fs::metadata(labels).map_err(|e| io_err(labels, e))?.len() == 0;
    let label_map = if empty {
        BTreeMap::new()
    } else {
        corpus::read_labels(labels)?
    };
    let catalog = catalog_for(&label_map);
    LabeledCorpus::new(documents, label_map, catalog)
}

/// Requested topics, or every topic carrying at least one label.
fn selected_topics(corpus: &LabeledCorpus, requested: &[String]) -> Result<Vec<TopicId>> {
    if !requested.is_empty() {
        return requested
            .iter()
            .map(|t| {
                let id = TopicId::new(t.trim());
                if corpus.has_topic(&id) {
                    Ok(id)
                } else {
                    Err(Error::UnknownTopic(id.0))
                }
            })
            .collect();
    }
    let used: BTreeSet<TopicId> = corpus.labels.values().flatten().cloned().collect();
    if used.is_empty() {
        return Err(Error::InvalidConfig("label file assigns no topics".into()));
    }
    Ok(used.into_iter().collect())
}

pub fn cmd_keywords(args: &KeywordsArgs) -> Result<()> {
    let config = KeywordConfig {
        alpha: args.alpha,
        alpha_neg: args.alpha_neg,
        mode: match args.mode {
            ModeArg::Binary => SelectionMode::Binary,
            ModeArg::CrossCategory => SelectionMode::CrossCategory,
        },
    };
    config.validate()?;
    let corpus = load_corpus(&args.docs, &args.labels, &args.segment)?;
    let topics = selected_topics(&corpus, &args.topics)?;
    let tables = entropy_tables(&corpus, &topics)?;
    let sets = entropy::select_keywords(&tables, &config)?;

    ensure_dir(&args.out)?;
    let mut summary = String::from("keywords:");
    for (topic, set) in &sets {
        write_keywords([set], &keywords_file(&args.out, topic))?;
        write!(summary, " {topic}={}", set.keywords.len()).expect("string write");
    }
    if args.negative {
        let neg = entropy::select_negative_keywords(&tables, &config)?;
        for (topic, set) in &neg {
            write_keywords([set], &args.out.join(format!("negative_{topic}.csv")))?;
        }
    }
    println!("{summary}");
    Ok(())
}

/// Parse `C=1,tol=1e-3,k=5,max_iter=1000` into hyperparameters and a fold count.
pub fn parse_hyper(spec: &str) -> Result<(Hyper, usize)> {
    let mut hyper = Hyper::default();
    let mut k = 5;
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("hyperparameter `{part}` is not key=value")))?;
        let bad = || Error::InvalidConfig(format!("bad value for hyperparameter `{key}`: {value}"));
        match key.trim() {
            "C" | "c" => hyper.c = value.parse().map_err(|_| bad())?,
            "tol" => hyper.tol = value.parse().map_err(|_| bad())?,
            "k" => k = value.parse().map_err(|_| bad())?,
            "max_iter" | "max-iter" => hyper.max_iter = value.parse().map_err(|_| bad())?,
            other => {
                return Err(Error::InvalidConfig(format!("unknown hyperparameter `{other}`")));
            }
        }
    }
    hyper.validate()?;
    Ok((hyper, k))
}

/// Every `keywords_<topic>.csv` in `dir`, merged.
pub fn read_keyword_dir(dir: &Path) -> Result<BTreeMap<TopicId, roadside::KeywordSet>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("keywords_") && n.ends_with(".csv"))
        })
        .collect();
    paths.sort();
    let mut out = BTreeMap::new();
    for p in paths {
        for (topic, set) in read_keywords(&p)? {
            out.entry(topic)
                .or_insert_with(|| roadside::KeywordSet {
                    topic: set.topic.clone(),
                    keywords: BTreeSet::new(),
                })
                .keywords
                .extend(set.keywords);
        }
    }
    Ok(out)
}

pub fn cmd_train_eval(args: &TrainArgs) -> Result<()> {
    let (hyper, k) = parse_hyper(&args.hyper)?;
    let corpus = load_corpus(&args.docs, &args.labels, &args.segment)?;
    let keywords = read_keyword_dir(&args.keywords)?;
    let space = FeatureSpace::from_keywords(keywords.values());
    if space.dim() == 0 {
        return Err(Error::EmptyFeatureSpace);
    }
    let topics = if args.topics.is_empty() {
        keywords.keys().cloned().collect()
    } else {
        selected_topics(&corpus, &args.topics)?
    };

    ensure_dir(&args.out)?;
    space.write_csv(&args.out.join(FEATURE_SPACE_FILE))?;
    let mut metrics: BTreeMap<TopicId, Metrics> = BTreeMap::new();
    let mut failures: Vec<(TopicId, Error)> = Vec::new();
    for topic in &topics {
        let (features, labels) = topic_dataset(&corpus, &space, topic);
        let outcome = kfold_evaluate(&features, &labels, k, &hyper, args.seed)
            .and_then(|m| Ok((m, classifier::train(&features, &labels, &hyper)?)));
        match outcome {
            Ok((m, model)) => {
                model.write(&model_file(&args.out, topic))?;
                println!(
                    "{topic}: precision={:.3} recall={:.3} f1={:.3}",
                    m.precision, m.recall, m.f1
                );
                metrics.insert(topic.clone(), m);
            }
            Err(e) => {
                eprintln!("{topic}: {e}");
                failures.push((topic.clone(), e));
            }
        }
    }
    write_metrics_csv(&metrics, &args.out.join(METRICS_FILE))?;
    let errors_path = args.out.join("train_errors.csv");
    if failures.is_empty() {
        if errors_path.exists() {
            fs::remove_file(&errors_path).map_err(|e| io_err(&errors_path, e))?;
        }
        return Ok(());
    }
    let mut text = String::from("topic_id,error\n");
    for (t, e) in &failures {
        writeln!(text, "{t},\"{}\"", e.to_string().replace('"', "'")).expect("string write");
    }
    write_text(&errors_path, &text)?;
    // surface the most severe failure after every other topic has been trained
    let (_, worst) = failures
        .into_iter()
        .max_by_key(|(_, e)| exit_code(e) == 2)
        .expect("non-empty");
    Err(worst)
}

/// `topic_id -> f1` from a metrics CSV; rows with an empty f1 are skipped.
pub fn read_f1_scores(path: &Path) -> Result<BTreeMap<TopicId, f64>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = BTreeMap::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 4 || fields[3].trim().is_empty() {
            continue;
        }
        let f1: f64 = fields[3].trim().parse().map_err(|_| Error::Parse {
            path: path.to_owned(),
            line: idx + 1,
            message: "bad f1 value".into(),
        })?;
        out.insert(TopicId::new(fields[0].trim()), f1);
    }
    Ok(out)
}

fn load_models(dir: &Path) -> Result<BTreeMap<TopicId, LinearModel>> {
    let mut models = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(topic) = name.strip_prefix("model_").and_then(|n| n.strip_suffix(".txt")) {
            models.insert(TopicId::new(topic), LinearModel::read(&path)?);
        }
    }
    Ok(models)
}

pub fn cmd_classify_aggregate(args: &ClassifyArgs) -> Result<()> {
    let docs = load_segmented(&args.docs, &args.segment)?;
    let space = FeatureSpace::read_csv(&args.models.join(FEATURE_SPACE_FILE))?;
    let models = load_models(&args.models)?;
    let metrics_path = args.models.join(METRICS_FILE);
    let f1 = if metrics_path.exists() {
        read_f1_scores(&metrics_path)?
    } else {
        BTreeMap::new()
    };
    let spaces = models.keys().map(|t| (t.clone(), space.clone())).collect();
    let mut config = PipelineConfig::new(models, spaces, &f1);
    config.checkin_patterns = args.checkin_patterns.clone();
    if let Some(p) = &args.official_accounts {
        config.official_accounts = read_official_accounts(p)?;
    }

    let sales = read_sales(&args.sales)?;
    let assignments = classify_corpus(&docs, &config)?;
    let count_topics: Vec<TopicId> = args.count_topics.iter().map(|t| TopicId::new(t.trim())).collect();
    let (matrix, report) = aggregate(&assignments, &docs, &sales, &count_topics)?;

    ensure_dir(&args.out)?;
    pipeline::write_assignments(&assignments, &args.out.join("assignments.csv"))?;
    matrix.write_csv(&args.out.join("matrix.csv"))?;
    let mut text = format!(
        "retained_docs {}\ndropped_docs {}\n",
        report.retained_docs,
        report.dropped_docs.len()
    );
    for id in &report.dropped_docs {
        writeln!(text, "{id}").expect("string write");
    }
    write_text(&args.out.join("drop_report.txt"), &text)?;
    println!(
        "{} stations, {} documents counted, {} without station dropped",
        matrix.n_obs(),
        report.retained_docs,
        report.dropped_docs.len()
    );
    Ok(())
}

pub fn cmd_causal(args: &CausalArgs) -> Result<()> {
    let obs = ObservationMatrix::read_csv(&args.matrix)?;
    let diagnostics = check_assumptions(&obs);
    ensure_dir(&args.out)?;
    write_text(&args.out.join("diagnostics.txt"), &diagnostics.to_string())?;

    let cfg = LingamConfig {
        ica: IcaConfig {
            tol: args.tol,
            max_iter: args.max_iter,
            nonlinearity: match args.nonlinearity {
                NonlinearityArg::Tanh => Nonlinearity::Tanh,
                NonlinearityArg::Cube => Nonlinearity::Cube,
            },
            seed: args.seed,
            accept_unconverged: args.accept_unconverged,
        },
        prune_threshold: args.prune,
    };
    let model = match lingam::fit(&obs, &cfg) {
        Ok(m) => m,
        Err(e) => {
            eprint!("{diagnostics}");
            return Err(e);
        }
    };
    if !model.ica_converged {
        eprintln!(
            "warning: ICA stopped after {} iterations without converging; estimates are unreliable",
            model.ica_iterations
        );
    }
    let effects = target_effects(&model, &args.target)?;
    write_report(&effects, &diagnostics, &args.out.join("report.csv"))?;
    model.write_b_csv(&args.out.join("b_matrix.csv"))?;

    for e in &effects.entries {
        println!("{:<8} {:>14.6}  {}", e.variable, e.strength, effects.direction_label(e));
    }
    if diagnostics.gaussian_warning || diagnostics.low_confidence {
        eprint!("{diagnostics}");
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut spec = read_simulation_spec(&args.spec)?;
    ensure_dir(&args.out)?;
    if let Some(mut sem) = spec.sem.take() {
        if let Some(seed) = args.seed {
            sem.seed = seed;
        }
        let (obs, b0) = generate_sem(&sem)?;
        obs.write_csv(&args.out.join("matrix.csv"))?;
        write_matrix_csv(&sem.variable_names(), &b0, &args.out.join("b0.csv"))?;
        println!("{} observations of {} variables", obs.n_obs(), obs.n_vars());
    } else if let Some(mut cs) = spec.corpus.take() {
        if let Some(seed) = args.seed {
            cs.seed = seed;
        }
        let synth = generate_corpus(&cs)?;
        corpus::write_documents_jsonl(&synth.corpus.documents, &args.out.join("docs.jsonl"))?;
        corpus::write_labels(&synth.corpus.labels, &args.out.join("labels.csv"))?;
        let truth: Vec<roadside::KeywordSet> = cs
            .topics
            .iter()
            .map(|t| roadside::KeywordSet {
                topic: t.id.clone(),
                keywords: t.keywords.iter().cloned().collect(),
            })
            .collect();
        write_keywords(&truth, &args.out.join("vocabulary.csv"))?;
        if let Some(sales) = &synth.sales {
            pipeline::write_sales(sales, &args.out.join("sales.csv"))?;
        }
        println!("{} documents", synth.corpus.documents.len());
    }
    Ok(())
}

fn topic_name(id: &str) -> String {
    default_catalog()
        .into_iter()
        .find(|t| t.id.as_str() == id)
        .map_or_else(String::new, |t| t.name)
}

/// Data rows of a CSV file, skipping the header and `#` lines.
fn csv_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect())
}

/// Render the metrics and effects tables as text.
pub fn render_report(metrics: Option<&Path>, effects: Option<&Path>) -> Result<String> {
    let mut out = String::new();
    if let Some(p) = metrics {
        writeln!(out, "{:<6} {:<24} {:>9} {:>9} {:>9}", "topic", "name", "precision", "recall", "f1")
            .expect("string write");
        for row in csv_rows(p)? {
            let cell = |i: usize| row.get(i).map(String::as_str).unwrap_or("");
            writeln!(
                out,
                "{:<6} {:<24} {:>9} {:>9} {:>9}",
                cell(0),
                topic_name(cell(0)),
                cell(1),
                cell(2),
                cell(3)
            )
            .expect("string write");
        }
    }
    if let Some(p) = effects {
        if !out.is_empty() {
            out.push('\n');
        }
        writeln!(out, "{:<8} {:<24} {:>16}  direction", "variable", "topic", "strength")
            .expect("string write");
        for row in csv_rows(p)? {
            let cell = |i: usize| row.get(i).map(String::as_str).unwrap_or("");
            let topic = cell(0)
                .strip_prefix('x')
                .map(|i| topic_name(&format!("T{i}")))
                .unwrap_or_default();
            writeln!(out, "{:<8} {:<24} {:>16}  {}", cell(0), topic, cell(1), cell(2))
                .expect("string write");
        }
    }
    Ok(out)
}

pub fn cmd_report(args: &ReportArgs) -> Result<()> {
    if args.metrics.is_none() && args.effects.is_none() {
        return Err(Error::InvalidConfig("report needs --metrics and/or --effects".into()));
    }
    print!("{}", render_report(args.metrics.as_deref(), args.effects.as_deref())?);
    Ok(())
}
