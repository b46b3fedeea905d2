//! Retrieve-then-rerank over a loaded bundle of trained artifacts.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::clickgraph::{AbsentEstimationConfig, AbsentEstimator, ClickGraphError, ClickGraphModel, JaccardKind, Side};
use crate::corpus::{Stoplist, normalize};
use crate::deepmodel::{DeepError, SemanticNet};
use crate::embeddings::{EmbeddingError, EmbeddingTable};
use crate::exec::Execution;
use crate::index::{Bm25Params, IndexError, InvertedIndex};
use crate::ltr::{FeatureExtractor, LabelScheme, LtrError, QueryVectors, RankerModel, stable_order};

/// Standard artifact file names inside a working directory.
pub mod files {
    pub const CLICKLOG: &str = "clicklog.jsonl";
    pub const LATENT_LABELS: &str = "latent_labels.jsonl";
    pub const PAIRS: &str = "pairs.jsonl";
    pub const INDEX: &str = "index.txt";
    pub const EMBEDDINGS: &str = "embeddings.txt";
    pub const CLICKGRAPH: &str = "clickgraph.txt";
    pub const DEEP: &str = "deep.bin";
    pub const FEATURES: &str = "features.txt";
    pub const MODEL: &str = "ltr_model.txt";
    pub const BUNDLE: &str = "bundle.txt";
    pub const REPORT_TABLE: &str = "report.txt";
    pub const REPORT_JSONL: &str = "report.jsonl";
    pub const LATENCY: &str = "latency.json";
}

pub const DEFAULT_CANDIDATES: usize = 100;
const BUNDLE_MAGIC: &str = "clickrank-bundle";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("k = {k} exceeds the candidate size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("candidate size must be at least 1")]
    NoCandidates,
    #[error("bundle file: {0}")]
    Format(String),
    #[error("bundle file version {found}, expected {BUNDLE_VERSION}")]
    Version { found: u32 },
    #[error("{path}: {source}")]
    Artifact {
        path: String,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error(transparent)]
    Ltr(#[from] LtrError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn artifact<E: std::error::Error + Send + Sync + 'static>(path: &Path) -> impl FnOnce(E) -> PipelineError + '_ {
    move |e| PipelineError::Artifact { path: path.display().to_string(), source: Box::new(e) }
}

/// Settings that must agree between feature assembly at training time and at
/// query time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BundleConfig {
    pub candidates: usize,
    pub bm25: Bm25Params,
    pub absent: AbsentEstimationConfig,
    pub jaccard: JaccardKind,
    pub labels: LabelScheme,
}

impl Default for BundleConfig {
    fn default() -> Self {
        BundleConfig {
            candidates: DEFAULT_CANDIDATES,
            bm25: Bm25Params::default(),
            absent: AbsentEstimationConfig::default(),
            jaccard: JaccardKind::default(),
            labels: LabelScheme::default(),
        }
    }
}

impl BundleConfig {
    pub fn to_text(&self) -> String {
        let jaccard = match self.jaccard {
            JaccardKind::Weighted => "weighted",
            JaccardKind::Set => "set",
        };
        let labels = match self.labels {
            LabelScheme::Binary => "binary",
            LabelScheme::Graded => "graded",
        };
        format!(
            "{BUNDLE_MAGIC} {BUNDLE_VERSION}\ncandidates {}\nk1 {}\nb {}\nneighbors {}\nsim_threshold {}\nfallback {}\njaccard {jaccard}\nlabels {labels}\n",
            self.candidates,
            self.bm25.k1,
            self.bm25.b,
            self.absent.neighbors,
            self.absent.sim_threshold,
            self.absent.fallback,
        )
    }

    pub fn from_text(text: &str) -> Result<Self, PipelineError> {
        let bad = |m: String| PipelineError::Format(m);
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        let version = header
            .strip_prefix(BUNDLE_MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| bad(format!("bad header {header:?}")))?;
        if version != BUNDLE_VERSION {
            return Err(PipelineError::Version { found: version });
        }
        let mut c = BundleConfig::default();
        let (mut k1, mut b) = (c.bm25.k1, c.bm25.b);
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once(' ').ok_or_else(|| bad(format!("bad line {line:?}")))?;
            let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad(format!("bad number for {k}")));
            match k {
                "candidates" => c.candidates = v.trim().parse().map_err(|_| bad("bad candidates".into()))?,
                "k1" => k1 = num(v)?,
                "b" => b = num(v)?,
                "neighbors" => c.absent.neighbors = v.trim().parse().map_err(|_| bad("bad neighbors".into()))?,
                "sim_threshold" => c.absent.sim_threshold = num(v)?,
                "fallback" => c.absent.fallback = v.trim().parse().map_err(|_| bad("bad fallback".into()))?,
                "jaccard" => {
                    c.jaccard = match v.trim() {
                        "weighted" => JaccardKind::Weighted,
                        "set" => JaccardKind::Set,
                        o => return Err(bad(format!("unknown jaccard {o:?}"))),
                    }
                }
                "labels" => {
                    c.labels = match v.trim() {
                        "binary" => LabelScheme::Binary,
                        "graded" => LabelScheme::Graded,
                        o => return Err(bad(format!("unknown labels {o:?}"))),
                    }
                }
                _ => return Err(bad(format!("unknown key {k:?}"))),
            }
        }
        c.bm25 = Bm25Params::new(k1, b).ok_or_else(|| bad("invalid bm25 parameters".into()))?;
        Ok(c)
    }
}

/// Loads the index, click graph, embeddings and semantic net from `dir` and
/// builds the feature extractor they define.
pub fn load_extractor(dir: &Path, config: &BundleConfig, exec: Execution) -> Result<FeatureExtractor, PipelineError> {
    let p = dir.join(files::INDEX);
    let index = InvertedIndex::load(&p).map_err(artifact::<IndexError>(&p))?;
    let p = dir.join(files::CLICKGRAPH);
    let graph = ClickGraphModel::load(&p).map_err(artifact::<ClickGraphError>(&p))?;
    let p = dir.join(files::EMBEDDINGS);
    let table = EmbeddingTable::load(&p).map_err(artifact::<EmbeddingError>(&p))?;
    let p = dir.join(files::DEEP);
    let net = SemanticNet::load(&p).map_err(artifact::<DeepError>(&p))?;
    let est = AbsentEstimator::new(graph, table, config.absent, exec).map_err(artifact::<ClickGraphError>(&p))?;
    Ok(FeatureExtractor::new(index, config.bm25, Some(est), Some(net), exec)
        .with_jaccard(config.jaccard)
        .with_labels(config.labels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub doc_id: String,
    pub score: f64,
    pub baseline_score: f64,
}

/// Immutable trained components plus a per-query vector cache.
#[derive(Debug)]
pub struct PipelineBundle {
    extractor: FeatureExtractor,
    model: RankerModel,
    stops: Stoplist,
    candidates: usize,
    cache: Mutex<HashMap<String, Arc<QueryVectors>>>,
    estimates: AtomicUsize,
}

impl PipelineBundle {
    pub fn new(extractor: FeatureExtractor, model: RankerModel, stops: Stoplist, candidates: usize) -> Result<Self, PipelineError> {
        if candidates == 0 {
            return Err(PipelineError::NoCandidates);
        }
        Ok(PipelineBundle {
            extractor,
            model,
            stops,
            candidates,
            cache: Mutex::new(HashMap::new()),
            estimates: AtomicUsize::new(0),
        })
    }

    pub fn load(dir: impl AsRef<Path>, stops: Stoplist, exec: Execution) -> Result<Self, PipelineError> {
        let dir = dir.as_ref();
        let p = dir.join(files::BUNDLE);
        let config = BundleConfig::from_text(&std::fs::read_to_string(&p).map_err(artifact::<std::io::Error>(&p))?)?;
        let extractor = load_extractor(dir, &config, exec)?;
        let p = dir.join(files::MODEL);
        let model = RankerModel::load(&p).map_err(artifact::<LtrError>(&p))?;
        Self::new(extractor, model, stops, config.candidates)
    }

    pub fn candidates(&self) -> usize {
        self.candidates
    }

    pub fn model(&self) -> &RankerModel {
        &self.model
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    /// Number of times a click-absent query vector had to be estimated.
    pub fn estimator_invocations(&self) -> usize {
        self.estimates.load(Ordering::Relaxed)
    }

    fn query_vectors(&self, tokens: &[String]) -> Result<Arc<QueryVectors>, PipelineError> {
        let key = tokens.join(" ");
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(v));
        }
        let absent = self
            .extractor
            .estimator()
            .is_some_and(|e| e.model().vector(Side::Query, &key).is_none());
        if absent {
            self.estimates.fetch_add(1, Ordering::Relaxed);
        }
        let v = Arc::new(self.extractor.query_vectors(&key, tokens)?);
        self.cache.lock().expect("cache lock").insert(key, Arc::clone(&v));
        Ok(v)
    }

    /// Normalizes `query`, retrieves the BM25 top N, reranks and keeps `k`.
    pub fn run(&self, query: &str, k: usize) -> Result<Vec<SearchHit>, PipelineError> {
        self.run_tokens(&normalize(query, &self.stops), k)
    }

    pub fn run_tokens(&self, tokens: &[String], k: usize) -> Result<Vec<SearchHit>, PipelineError> {
        if k > self.candidates {
            return Err(PipelineError::KTooLarge { k, n: self.candidates });
        }
        if tokens.is_empty() || k == 0 {
            return Ok(Vec::new());
        }
        let index = self.extractor.index();
        let cands = index.retrieve_topn(tokens, self.extractor.bm25(), self.candidates);
        if cands.is_empty() {
            return Ok(Vec::new());
        }
        let qv = self.query_vectors(tokens)?;
        let mut scores = Vec::with_capacity(cands.len());
        for (doc, _) in &cands {
            let f = self.extractor.features(tokens, &qv, doc)?;
            scores.push(self.model.score(&f));
        }
        Ok(stable_order(&scores)
            .into_iter()
            .take(k)
            .map(|i| SearchHit {
                doc_id: cands[i].0.clone(),
                score: scores[i],
                baseline_score: cands[i].1,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_config_round_trip() {
        let c = BundleConfig {
            candidates: 7,
            jaccard: JaccardKind::Set,
            labels: LabelScheme::Graded,
            ..Default::default()
        };
        assert_eq!(BundleConfig::from_text(&c.to_text()).unwrap(), c);
        assert!(matches!(
            BundleConfig::from_text("clickrank-bundle 9\n"),
            Err(PipelineError::Version { found: 9 })
        ));
        assert!(BundleConfig::from_text("something else\n").is_err());
    }
}
