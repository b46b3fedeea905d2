//! Offline training steps over a working directory of artifacts, and the
//! HTTP query service.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result, bail};
use axum::Json;
use axum::Router;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use serde::Serialize;

use clickrank::clickgraph::{ClickGraphModel, PropagationConfig};
use clickrank::corpus::{self, ClickPair, Stoplist};
use clickrank::deepmodel::{self, DeepConfig};
use clickrank::embeddings::{CbowConfig, EmbeddingTable, train_cbow};
use clickrank::eval::{CvOptions, EvalReport, LatencyStats, benchmark_latency, kfold_split};
use clickrank::exec::Execution;
use clickrank::index::InvertedIndex;
use clickrank::ltr::{self, Algorithm, FeatureMask, RankerModel, RankingSample};
use clickrank::pipeline::{BundleConfig, PipelineBundle, files, load_extractor};
use clickrank::synth::{self, SynthConfig};

/// A directory holding the standard artifact files.
#[derive(Debug, Clone)]
pub struct Workspace {
    dir: PathBuf,
}

impl Workspace {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Workspace { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn pairs(&self) -> Result<Vec<ClickPair>> {
        let p = self.path(files::PAIRS);
        corpus::load_pairs(&p).with_context(|| format!("run `ingest` first ({})", p.display()))
    }
}

#[derive(Serialize)]
struct LatentLabel<'a> {
    kind: &'static str,
    key: &'a str,
    topic: usize,
}

/// Writes the synthetic click log and, separately, its latent topic labels.
pub fn run_synth(ws: &Workspace, config: &SynthConfig) -> Result<usize> {
    let corpus = synth::generate_corpus(config)?;
    let log = synth::generate_clicklog(&corpus, config)?;
    corpus::write_click_log(ws.path(files::CLICKLOG), &log)?;
    let mut labels = String::new();
    for d in &corpus.docs {
        labels.push_str(&serde_json::to_string(&LatentLabel { kind: "doc", key: &d.id, topic: d.topic })?);
        labels.push('\n');
    }
    for q in &corpus.queries {
        labels.push_str(&serde_json::to_string(&LatentLabel { kind: "query", key: &q.text, topic: q.topic })?);
        labels.push('\n');
    }
    std::fs::write(ws.path(files::LATENT_LABELS), labels)?;
    Ok(log.len())
}

pub struct IngestSummary {
    pub records: usize,
    pub pairs: usize,
    pub skipped: usize,
}

pub fn run_ingest(ws: &Workspace, log: Option<&Path>, stops: &Stoplist) -> Result<IngestSummary> {
    let path = log.map(Path::to_path_buf).unwrap_or_else(|| ws.path(files::CLICKLOG));
    let records = corpus::load_click_log(&path)?;
    let agg = corpus::aggregate(&records, stops);
    corpus::write_pairs(ws.path(files::PAIRS), &agg.pairs)?;
    Ok(IngestSummary { records: records.len(), pairs: agg.pairs.len(), skipped: agg.skipped })
}

pub fn run_index(ws: &Workspace) -> Result<usize> {
    let pairs = ws.pairs()?;
    let index = InvertedIndex::build(corpus::documents(&pairs))?;
    index.save(ws.path(files::INDEX))?;
    Ok(index.doc_count())
}

/// Distinct query and title token sequences, in first-appearance order.
pub fn sentences(pairs: &[ClickPair]) -> Vec<Vec<String>> {
    let mut seen = HashSet::new();
    let mut out: Vec<Vec<String>> = pairs
        .iter()
        .filter(|p| seen.insert(p.query.clone()))
        .map(|p| p.query.clone())
        .collect();
    out.extend(corpus::documents(pairs).into_iter().map(|d| d.1));
    out
}

pub fn run_train_embeddings(ws: &Workspace, config: &CbowConfig) -> Result<(usize, Vec<f64>)> {
    let pairs = ws.pairs()?;
    let trained = train_cbow(&sentences(&pairs), config)?;
    trained.table.save(ws.path(files::EMBEDDINGS))?;
    Ok((trained.table.len(), trained.epoch_loss))
}

pub struct GraphSummary {
    pub queries: usize,
    pub docs: usize,
    pub iterations: usize,
    pub converged: bool,
}

pub fn run_build_clickgraph(ws: &Workspace, config: &PropagationConfig, exec: Execution) -> Result<GraphSummary> {
    config.validate()?;
    let pairs = ws.pairs()?;
    let (model, prop) = ClickGraphModel::train(&pairs, config, exec);
    model.save(ws.path(files::CLICKGRAPH))?;
    Ok(GraphSummary {
        queries: prop.queries.len(),
        docs: prop.docs.len(),
        iterations: prop.iterations,
        converged: prop.converged,
    })
}

pub fn run_train_deep(ws: &Workspace, config: &DeepConfig, exec: Execution) -> Result<Vec<f64>> {
    let pairs = ws.pairs()?;
    let train = deepmodel::sample_train_pairs(&pairs, config.negatives, config.seed);
    let table = if config.init_from_embeddings {
        Some(EmbeddingTable::load(ws.path(files::EMBEDDINGS))?)
    } else {
        None
    };
    let trained = deepmodel::train(&train, config, table.as_ref(), exec)?;
    trained.net.save(ws.path(files::DEEP))?;
    Ok(trained.epoch_loss)
}

/// Assembles F1–F9 for every click pair and writes the feature file.
pub fn run_features(ws: &Workspace, config: &BundleConfig, exec: Execution) -> Result<Vec<RankingSample>> {
    let pairs = ws.pairs()?;
    let extractor = load_extractor(ws.dir(), config, exec)?;
    let samples = extractor.assemble_all(&pairs, exec)?;
    ltr::write_feature_file(ws.path(files::FEATURES), &samples)?;
    Ok(samples)
}

/// Trains one ranker on all samples and writes it with the bundle settings.
pub fn run_train_ltr(
    ws: &Workspace,
    config: &BundleConfig,
    algorithm: Algorithm,
    mask: FeatureMask,
    seed: u64,
    exec: Execution,
) -> Result<RankerModel> {
    let samples = run_features(ws, config, exec)?;
    let model = RankerModel::train(&samples, mask, algorithm.trainer(seed).as_ref())?;
    model.save(ws.path(files::MODEL))?;
    std::fs::write(ws.path(files::BUNDLE), config.to_text())?;
    Ok(model)
}

pub struct EvalSettings {
    pub masks: Vec<FeatureMask>,
    pub algorithms: Vec<Algorithm>,
    pub options: CvOptions,
    pub folds: usize,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            masks: FeatureMask::ALL.to_vec(),
            algorithms: Algorithm::ALL.to_vec(),
            options: CvOptions::default(),
            folds: 5,
            seed: 42,
        }
    }
}

/// Cross-validates every mask and algorithm and writes both report files.
pub fn run_evaluate(ws: &Workspace, config: &BundleConfig, settings: &EvalSettings, exec: Execution) -> Result<EvalReport> {
    let samples = run_features(ws, config, exec)?;
    evaluate_samples(ws, &samples, settings, exec)
}

pub fn evaluate_samples(ws: &Workspace, samples: &[RankingSample], settings: &EvalSettings, exec: Execution) -> Result<EvalReport> {
    let ids: Vec<usize> = samples.iter().map(|s| s.query_id).collect();
    let split = kfold_split(&ids, settings.folds, settings.seed)?;
    let trainers: Vec<Box<dyn ltr::Trainer>> = settings.algorithms.iter().map(|a| a.trainer(settings.seed)).collect();
    let refs: Vec<&dyn ltr::Trainer> = trainers.iter().map(|t| t.as_ref()).collect();
    let report = EvalReport::run(samples, &settings.masks, &refs, &settings.options, &split, exec)?;
    std::fs::write(ws.path(files::REPORT_TABLE), report.to_table())?;
    report.write_jsonl(ws.path(files::REPORT_JSONL))?;
    Ok(report)
}

/// The first `limit` distinct logged queries.
pub fn bench_queries(pairs: &[ClickPair], limit: usize) -> Vec<Vec<String>> {
    let mut seen = HashSet::new();
    pairs
        .iter()
        .filter(|p| seen.insert(p.query_key()))
        .take(limit)
        .map(|p| p.query.clone())
        .collect()
}

pub fn run_bench(ws: &Workspace, stops: Stoplist, queries: usize, repetitions: usize, exec: Execution) -> Result<LatencyStats> {
    let bundle = PipelineBundle::load(ws.dir(), stops, exec)?;
    let qs = bench_queries(&ws.pairs()?, queries);
    let k = bundle.candidates().min(10);
    let mut failure = None;
    let stats = benchmark_latency(&qs, repetitions, |q| {
        if let Err(e) = bundle.run_tokens(q, k) {
            failure.get_or_insert(e);
        }
    })?;
    if let Some(e) = failure {
        bail!(e);
    }
    std::fs::write(ws.path(files::LATENCY), serde_json::to_string_pretty(&stats)? + "\n")?;
    Ok(stats)
}

#[derive(Debug, Serialize)]
pub struct ServiceHit {
    pub doc_id: String,
    pub score: f64,
}

#[derive(Debug, Serialize)]
pub struct SearchResponse {
    pub query: String,
    pub took_seconds: f64,
    pub results: Vec<ServiceHit>,
}

fn client_error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn search(State(bundle): State<Arc<PipelineBundle>>, Query(params): Query<HashMap<String, String>>) -> Response {
    let start = Instant::now();
    let Some(q) = params.get("q") else {
        return client_error(StatusCode::BAD_REQUEST, "missing parameter q");
    };
    let k = match params.get("k").map(|k| k.trim().parse::<usize>()) {
        None => bundle.candidates().min(10),
        Some(Ok(k)) => k,
        Some(Err(_)) => return client_error(StatusCode::BAD_REQUEST, "k must be a nonnegative integer"),
    };
    match bundle.run(q, k) {
        Ok(hits) => Json(SearchResponse {
            query: q.clone(),
            took_seconds: start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE),
            results: hits.into_iter().map(|h| ServiceHit { doc_id: h.doc_id, score: h.score }).collect(),
        })
        .into_response(),
        Err(e @ clickrank::pipeline::PipelineError::KTooLarge { .. }) => client_error(StatusCode::BAD_REQUEST, e.to_string()),
        Err(e) => client_error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

/// `/health` and `/search?q=&k=` over a shared read-only bundle.
pub fn router(bundle: Arc<PipelineBundle>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/search", get(search))
        .with_state(bundle)
}

/// Settings for every offline step, defaulting to the documented defaults.
#[derive(Default)]
pub struct PipelineSettings {
    pub synth: SynthConfig,
    pub cbow: CbowConfig,
    pub propagation: PropagationConfig,
    pub deep: DeepConfig,
    pub bundle: BundleConfig,
    pub ranker: Option<(Algorithm, FeatureMask)>,
    pub eval: EvalSettings,
}

/// `synth` through `evaluate` in one call; also trains the serving ranker.
pub fn run_all(ws: &Workspace, settings: &PipelineSettings, stops: &Stoplist, exec: Execution) -> Result<EvalReport> {
    run_synth(ws, &settings.synth)?;
    run_ingest(ws, None, stops)?;
    run_index(ws)?;
    run_train_embeddings(ws, &settings.cbow)?;
    run_build_clickgraph(ws, &settings.propagation, exec)?;
    run_train_deep(ws, &settings.deep, exec)?;
    let (algorithm, mask) = settings.ranker.unwrap_or((Algorithm::CoordinateAscent, FeatureMask::Final));
    let samples = run_features(ws, &settings.bundle, exec)?;
    let model = RankerModel::train(&samples, mask, algorithm.trainer(settings.eval.seed).as_ref())?;
    model.save(ws.path(files::MODEL))?;
    std::fs::write(ws.path(files::BUNDLE), settings.bundle.to_text())?;
    evaluate_samples(ws, &samples, &settings.eval, exec)
}
