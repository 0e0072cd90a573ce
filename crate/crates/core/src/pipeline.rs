//! File-based pipeline stages. Each `cmd_*` reads its predecessor's artifact,
//! writes its own atomically and logs counts.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::annotation::{self, AgreementReport, AnnotationStore, LabelClass, LabeledDataset};
use crate::corpus::{self, Dataset, Glossary, TweetFormat};
use crate::error::{Error, Result};
use crate::eval::{self, Cell, EvalReport, Grid};
use crate::features::{
    self, BinaryLabel, ClassCounts, FeatureMethod, FeatureSpace, LabeledVector, SplitResult,
};
use crate::filtering::{self, FilterReport};
use crate::fsutil;
use crate::models::{self, ModelConfig, ModelType, TrainedModel};
use crate::preprocess::{self, StopwordSet, TokenSequence};
use crate::synth::{self, SynthSpec};

/// Fails with a pointer to the stage that produces `path` when it is missing.
pub fn require(path: &Path, what: &str, stage: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::NotFound(format!(
            "{what} {} does not exist; run `misinfo {stage}` first",
            path.display()
        )))
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Where the keyword report of `cmd_filter` goes by default.
pub fn default_report_path(output: &Path) -> PathBuf {
    with_suffix(output, ".keywords.csv")
}

/// Where `cmd_train` stores the feature space for a model file.
pub fn space_path(model: &Path) -> PathBuf {
    with_suffix(model, ".space.json")
}

pub fn load_glossary(path: Option<&Path>) -> Result<Glossary> {
    match path {
        Some(p) => {
            require(p, "glossary", "filter --glossary <file>")?;
            corpus::load_glossary(p)
        }
        None => Glossary::default_bundled(),
    }
}

pub fn load_stopwords(dir: Option<&Path>) -> Result<StopwordSet> {
    match dir {
        Some(d) => StopwordSet::load_dir(d),
        None => StopwordSet::default_bundled(),
    }
}

fn load_dataset(path: &Path, what: &str, stage: &str) -> Result<Dataset> {
    require(path, what, stage)?;
    let (d, report) = corpus::load_tweets(path, TweetFormat::from_path(path))?;
    if report.dropped() > 0 {
        log::warn!(
            "{}: {} of {} rows skipped ({} malformed, {} rejected)",
            path.display(),
            report.dropped(),
            report.rows,
            report.malformed.len(),
            report.rejected.len()
        );
    }
    Ok(d)
}

pub struct FilterArgs {
    pub input: PathBuf,
    pub glossary: Option<PathBuf>,
    pub output: PathBuf,
    pub report: Option<PathBuf>,
}

pub fn cmd_filter(a: &FilterArgs) -> Result<FilterReport> {
    let glossary = load_glossary(a.glossary.as_deref())?;
    let d = load_dataset(&a.input, "tweet file", "filter --input <raw tweets>")?;
    let (kept, report) = filtering::filter_corpus(&d, &glossary);
    corpus::save_dataset(&kept, &a.output, TweetFormat::from_path(&a.output))?;
    let report_path = a.report.clone().unwrap_or_else(|| default_report_path(&a.output));
    report.write_csv(&report_path)?;
    log::info!(
        "filter: {} tweets in, {} kept; keyword report at {}",
        report.tweets_in,
        report.tweets_kept,
        report_path.display()
    );
    Ok(report)
}

pub fn cmd_dedup(input: &Path, output: &Path) -> Result<(usize, usize)> {
    let d = load_dataset(input, "tweet file", "filter")?;
    let out = corpus::dedup(&d);
    corpus::save_dataset(&out, output, TweetFormat::from_path(output))?;
    log::info!("dedup: {} tweets in, {} unique", d.len(), out.len());
    Ok((d.len(), out.len()))
}

/// Whether the first record of a JSONL file carries a `label` field.
fn looks_labeled(path: &Path) -> Result<bool> {
    if TweetFormat::from_path(path) != TweetFormat::Jsonl {
        return Ok(false);
    }
    let text = fsutil::read_to_string(path)?;
    Ok(text
        .lines()
        .find(|l| !l.trim().is_empty())
        .and_then(|l| serde_json::from_str::<serde_json::Value>(l).ok())
        .is_some_and(|v| v.get("label").is_some()))
}

/// Token sequences with their M/T labels.
///
/// `labels` is a finalized labeled dataset whose labels are joined onto
/// `input` by tweet id. Without it, `input` itself may be a labeled dataset;
/// otherwise the tokens come out unlabeled. Tweets labeled I, N or U are
/// dropped from labeled output.
pub fn labeled_tokens(input: &Path, labels: Option<&Path>, sw: &StopwordSet) -> Result<Vec<TokenSequence>> {
    let binary = |l: LabelClass| l == LabelClass::M || l == LabelClass::T;
    let tokens = |rec: &corpus::TweetRecord, label: Option<LabelClass>| TokenSequence {
        label,
        ..preprocess::preprocess_tweet(rec, sw)
    };
    if let Some(lp) = labels {
        require(lp, "labeled dataset", "finalize")?;
        let ld = LabeledDataset::load(lp)?;
        let by_id: HashMap<&str, LabelClass> = ld.entries().iter().map(|e| (e.tweet.id.as_str(), e.label)).collect();
        let d = load_dataset(input, "tweet file", "filter")?;
        let unlabeled = d.records().iter().filter(|r| !by_id.contains_key(r.id.as_str())).count();
        if unlabeled > 0 {
            log::warn!("{unlabeled} tweets have no final label and are skipped");
        }
        return Ok(d
            .records()
            .par_iter()
            .filter_map(|r| by_id.get(r.id.as_str()).filter(|&&l| binary(l)).map(|&l| tokens(r, Some(l))))
            .collect());
    }
    require(input, "input", "filter")?;
    if looks_labeled(input)? {
        let ld = LabeledDataset::load(input)?;
        let out: Vec<TokenSequence> = ld
            .entries()
            .par_iter()
            .filter(|e| binary(e.label))
            .map(|e| tokens(&e.tweet, Some(e.label)))
            .collect();
        log::info!(
            "labeled input: {} tweets, {} with label M or T",
            ld.len(),
            out.len()
        );
        return Ok(out);
    }
    let d = load_dataset(input, "tweet file", "filter")?;
    Ok(d.records().par_iter().map(|r| tokens(r, None)).collect())
}

pub struct PreprocessArgs {
    pub input: PathBuf,
    pub labels: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreprocessSummary {
    pub documents: usize,
    pub empty_documents: usize,
    pub classes: ClassCounts,
    pub vocabulary: usize,
}

pub fn cmd_preprocess(a: &PreprocessArgs) -> Result<PreprocessSummary> {
    let sw = load_stopwords(a.stopwords.as_deref())?;
    let docs = labeled_tokens(&a.input, a.labels.as_deref(), &sw)?;
    preprocess::save_token_sequences(&a.output, &docs)?;
    let stats = features::token_stats(&docs, FeatureMethod::Unigram);
    let summary = PreprocessSummary {
        documents: docs.len(),
        empty_documents: docs.iter().filter(|d| d.is_empty()).count(),
        classes: ClassCounts::of(&docs),
        vocabulary: stats.unique,
    };
    log::info!(
        "preprocess: {} documents ({} M, {} T, {} unlabeled), {} empty, {} distinct stems, tokens per doc {}..{}",
        summary.documents,
        summary.classes.m,
        summary.classes.t,
        summary.classes.other,
        summary.empty_documents,
        summary.vocabulary,
        stats.min_len,
        stats.max_len
    );
    Ok(summary)
}

fn require_binary(docs: &[TokenSequence], path: &Path) -> Result<()> {
    if let Some(d) = docs.iter().find(|d| !matches!(d.label, Some(LabelClass::M | LabelClass::T))) {
        return Err(Error::Validation(format!(
            "{}: document {} has no M/T label; run `misinfo preprocess --labels <labeled dataset>`",
            path.display(),
            d.tweet_id
        )));
    }
    Ok(())
}

pub struct SplitArgs {
    pub input: PathBuf,
    pub ratio: f64,
    pub seed: u64,
    pub train_out: PathBuf,
    pub test_out: PathBuf,
}

pub fn cmd_split(a: &SplitArgs) -> Result<SplitResult<TokenSequence>> {
    require(&a.input, "token file", "preprocess")?;
    let docs = preprocess::load_token_sequences(&a.input)?;
    require_binary(&docs, &a.input)?;
    let split = features::split_train_test(&docs, a.ratio, a.seed)?;
    preprocess::save_token_sequences(&a.train_out, &split.train)?;
    preprocess::save_token_sequences(&a.test_out, &split.test)?;
    log::info!(
        "split (ratio {}, seed {}): train {} ({} M / {} T), test {} ({} M / {} T)",
        a.ratio,
        a.seed,
        split.train.len(),
        split.train_counts.m,
        split.train_counts.t,
        split.test.len(),
        split.test_counts.m,
        split.test_counts.t
    );
    Ok(split)
}

pub struct TrainArgs {
    pub train: PathBuf,
    pub model: ModelType,
    pub method: FeatureMethod,
    pub seed: u64,
    pub overrides: Vec<(String, String)>,
    pub output: PathBuf,
}

pub fn cmd_train(a: &TrainArgs) -> Result<TrainedModel> {
    require(&a.train, "training split", "split")?;
    let docs = preprocess::load_token_sequences(&a.train)?;
    require_binary(&docs, &a.train)?;
    let config = ModelConfig::with_overrides(
        a.model,
        a.seed,
        a.overrides.iter().map(|(k, v)| (k.as_str(), v.as_str())),
    )?;
    let space = features::build_feature_space(&docs, a.method)?;
    let rows = features::vectorize_labeled(&docs, &space)?;
    let model = models::train(&config, &space.info(), &rows)?;
    space.save(&space_path(&a.output))?;
    model.save(&a.output)?;
    log::info!(
        "train: {} on {} ({} rows, {} features) -> {}",
        a.model.display_name(),
        a.method.display_name(),
        rows.len(),
        space.len(),
        a.output.display()
    );
    Ok(model)
}

pub struct EvalArgs {
    pub model: PathBuf,
    pub test: PathBuf,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub model: ModelType,
    pub method: FeatureMethod,
    pub test_rows: usize,
    pub report: EvalReport,
}

fn predict_all(model: &TrainedModel, rows: &[LabeledVector]) -> Result<Vec<BinaryLabel>> {
    rows.iter().map(|r| model.predict(&r.vector).map(|p| p.label)).collect()
}

pub fn cmd_eval(a: &EvalArgs) -> Result<EvalRecord> {
    require(&a.model, "model file", "train")?;
    let sp = space_path(&a.model);
    require(&sp, "feature space", "train")?;
    require(&a.test, "test split", "split")?;
    let model = TrainedModel::load(&a.model)?;
    let space = FeatureSpace::load(&sp)?;
    if space.id() != model.space.digest {
        return Err(Error::SpaceMismatch {
            expected: model.space.digest.to_string(),
            found: format!("{} ({})", space.id(), sp.display()),
        });
    }
    let docs = preprocess::load_token_sequences(&a.test)?;
    require_binary(&docs, &a.test)?;
    let rows = features::vectorize_labeled(&docs, &space)?;
    let preds = predict_all(&model, &rows)?;
    let golds: Vec<BinaryLabel> = rows.iter().map(|r| r.label).collect();
    let record = EvalRecord {
        model: model.model_type,
        method: space.method(),
        test_rows: rows.len(),
        report: EvalReport::evaluate(&preds, &golds)?,
    };
    if let Some(out) = &a.output {
        let mut bytes = serde_json::to_vec_pretty(&record).map_err(|e| Error::Validation(e.to_string()))?;
        bytes.push(b'\n');
        fsutil::write_atomic(out, &bytes)?;
    }
    log::info!(
        "eval: {} / {} on {} test rows: accuracy {:.3}, macro-F1 {:.3}",
        record.model.display_name(),
        record.method.display_name(),
        record.test_rows,
        record.report.accuracy,
        record.report.macro_f1
    );
    Ok(record)
}

#[derive(Debug, Clone)]
pub struct ExperimentArgs {
    pub corpus: PathBuf,
    pub labels: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub ratio: f64,
    pub seed: u64,
    pub models: Vec<ModelType>,
    pub methods: Vec<FeatureMethod>,
    /// Draw a fresh split per method (seed offset by the method's position)
    /// instead of one split shared by all methods.
    pub resplit_per_method: bool,
    pub out_dir: PathBuf,
}

impl ExperimentArgs {
    pub fn new(corpus: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentArgs {
            corpus: corpus.into(),
            labels: None,
            stopwords: None,
            ratio: 0.8,
            seed: 42,
            models: ModelType::ALL.to_vec(),
            methods: FeatureMethod::ALL.to_vec(),
            resplit_per_method: false,
            out_dir: out_dir.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub model: ModelType,
    pub method: FeatureMethod,
    pub message: String,
    pub user_error: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub grid: Grid,
    pub failures: Vec<CellFailure>,
    pub csv_path: PathBuf,
    pub table_path: PathBuf,
    pub table: String,
}

pub const GRID_CSV_FILE: &str = "grid.csv";
pub const GRID_TABLE_FILE: &str = "grid.txt";

/// Error message and whether the input caused it.
type CellResult<T> = std::result::Result<T, (String, bool)>;

fn method_seed(base: u64, method: FeatureMethod, resplit: bool) -> u64 {
    if !resplit {
        return base;
    }
    let pos = FeatureMethod::ALL.iter().position(|&m| m == method).expect("listed method") as u64;
    base.wrapping_add(pos + 1)
}

struct MethodData {
    space: FeatureSpace,
    train: Vec<LabeledVector>,
    test: Vec<LabeledVector>,
}

fn prepare_method(docs: &[TokenSequence], method: FeatureMethod, ratio: f64, seed: u64) -> Result<MethodData> {
    let split = features::split_train_test(docs, ratio, seed)?;
    let space = features::build_feature_space(&split.train, method)?;
    let train = features::vectorize_labeled(&split.train, &space)?;
    let test = features::vectorize_labeled(&split.test, &space)?;
    Ok(MethodData { space, train, test })
}

fn run_cell(data: &MethodData, model: ModelType, seed: u64) -> Result<EvalReport> {
    let trained = models::train(&ModelConfig::new(model, seed), &data.space.info(), &data.train)?;
    let preds = predict_all(&trained, &data.test)?;
    let golds: Vec<BinaryLabel> = data.test.iter().map(|r| r.label).collect();
    EvalReport::evaluate(&preds, &golds)
}

/// Runs every (model, method) combination and writes `grid.csv` and
/// `grid.txt` into the output directory. A failing combination becomes an
/// `error` cell; the others still run.
pub fn cmd_experiment(a: &ExperimentArgs) -> Result<ExperimentOutcome> {
    if !(a.ratio > 0.0 && a.ratio < 1.0) {
        return Err(Error::Validation(format!("split ratio must lie in (0, 1), got {}", a.ratio)));
    }
    if a.models.is_empty() || a.methods.is_empty() {
        return Err(Error::Validation("at least one model and one method are required".into()));
    }
    let sw = load_stopwords(a.stopwords.as_deref())?;
    let docs = labeled_tokens(&a.corpus, a.labels.as_deref(), &sw)?;
    require_binary(&docs, &a.corpus)?;
    let counts = ClassCounts::of(&docs);
    log::info!("experiment: {} labeled documents ({} M / {} T)", docs.len(), counts.m, counts.t);

    let mut methods = a.methods.clone();
    methods.sort();
    methods.dedup();
    let mut model_list = a.models.clone();
    model_list.sort();
    model_list.dedup();

    let prepared: BTreeMap<FeatureMethod, CellResult<MethodData>> = methods
        .par_iter()
        .map(|&m| {
            let data = prepare_method(&docs, m, a.ratio, method_seed(a.seed, m, a.resplit_per_method))
                .map_err(|e| (e.to_string(), e.is_user_error()));
            (m, data)
        })
        .collect();
    for (m, d) in &prepared {
        if let Ok(d) = d {
            log::info!(
                "{}: {} features, train {} / test {}",
                m.display_name(),
                d.space.len(),
                d.train.len(),
                d.test.len()
            );
        }
    }

    let jobs: Vec<(ModelType, FeatureMethod)> = model_list
        .iter()
        .flat_map(|&mt| methods.iter().map(move |&m| (mt, m)))
        .collect();
    let results: Vec<((ModelType, FeatureMethod), CellResult<EvalReport>)> = jobs
        .par_iter()
        .map(|&(mt, m)| {
            let r = match &prepared[&m] {
                Ok(data) => run_cell(data, mt, a.seed).map_err(|e| (e.to_string(), e.is_user_error())),
                Err(e) => Err(e.clone()),
            };
            ((mt, m), r)
        })
        .collect();

    let mut grid = Grid::new();
    let mut failures = Vec::new();
    for ((mt, m), r) in results {
        match r {
            Ok(report) => {
                grid.insert((mt, m), Cell::Report(report));
            }
            Err((message, user_error)) => {
                log::error!("{} / {}: {message}", mt.display_name(), m.display_name());
                failures.push(CellFailure {
                    model: mt,
                    method: m,
                    message: message.clone(),
                    user_error,
                });
                grid.insert((mt, m), Cell::Error(message));
            }
        }
    }

    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::Io {
        path: a.out_dir.clone(),
        source: e,
    })?;
    let (table, csv) = eval::render_grid(&grid);
    let csv_path = a.out_dir.join(GRID_CSV_FILE);
    let table_path = a.out_dir.join(GRID_TABLE_FILE);
    fsutil::write_atomic(&csv_path, csv.as_bytes())?;
    fsutil::write_atomic(&table_path, table.as_bytes())?;
    log::info!(
        "experiment: {} cells, {} failed; grid at {}",
        grid.len(),
        failures.len(),
        csv_path.display()
    );
    Ok(ExperimentOutcome {
        grid,
        failures,
        csv_path,
        table_path,
        table,
    })
}

pub fn cmd_synth(spec: &SynthSpec, output: &Path) -> Result<LabeledDataset> {
    let corpus = synth::generate(spec)?;
    synth::write_corpus(spec, &corpus, output)?;
    log::info!(
        "synth: {} documents ({} M / {} T) -> {}",
        corpus.len(),
        corpus.count(LabelClass::M),
        corpus.count(LabelClass::T),
        output.display()
    );
    Ok(corpus)
}

/// Opens the annotation store for `dataset` with its journal.
pub fn open_store(dataset: &Path, journal: &Path) -> Result<AnnotationStore> {
    let d = load_dataset(dataset, "tweet file", "filter")?;
    AnnotationStore::open(d, journal)
}

/// Resolves the journaled votes (with recorded adjudications) into a labeled dataset.
pub fn cmd_finalize(dataset: &Path, journal: &Path, output: &Path) -> Result<LabeledDataset> {
    require(journal, "annotation journal", "annotate")?;
    let store = open_store(dataset, journal)?;
    let ld = annotation::finalize(&store, store.adjudications())?;
    ld.save(output)?;
    let counts: Vec<String> = ld.class_counts().iter().map(|(l, n)| format!("{l}={n}")).collect();
    log::info!(
        "finalize: {} labeled ({}), {} unlabeled excluded",
        ld.len(),
        counts.join(" "),
        ld.excluded().len()
    );
    Ok(ld)
}

pub fn cmd_agreement(dataset: &Path, journal: &Path) -> Result<AgreementReport> {
    require(journal, "annotation journal", "annotate")?;
    let store = open_store(dataset, journal)?;
    Ok(annotation::agreement_stats(&store))
}
