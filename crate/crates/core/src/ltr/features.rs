use std::collections::HashMap;

use super::{LabelScheme, LtrError, N_FEATURES, RankingSample};
use crate::clickgraph::{AbsentEstimator, JaccardKind, Side, UnitVector, clickgraph_features};
use crate::corpus::ClickPair;
use crate::deepmodel::SemanticNet;
use crate::exec::Execution;
use crate::index::{Bm25Params, InvertedIndex};

/// Computes F1–F9 for (query, document) pairs from the built subsystems.
/// Document-side vectors are computed once up front.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    index: InvertedIndex,
    bm25: Bm25Params,
    estimator: Option<AbsentEstimator>,
    net: Option<SemanticNet>,
    jaccard: JaccardKind,
    labels: LabelScheme,
    doc_vectors: HashMap<String, UnitVector>,
    doc_semantic: HashMap<String, Vec<f64>>,
}

/// Query-side representations reused across that query's candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryVectors {
    pub clickgraph: UnitVector,
    pub semantic: Vec<f64>,
}

impl FeatureExtractor {
    pub fn new(
        index: InvertedIndex,
        bm25: Bm25Params,
        estimator: Option<AbsentEstimator>,
        net: Option<SemanticNet>,
        exec: Execution,
    ) -> Self {
        let ids = index.doc_ids().to_vec();
        let doc_vectors = match &estimator {
            Some(est) => ids
                .iter()
                .cloned()
                .zip(exec.map(&ids, |id| {
                    est.resolve(id, index.doc_tokens(id).unwrap_or_default(), Side::Doc)
                }))
                .collect(),
            None => HashMap::new(),
        };
        let doc_semantic = match &net {
            Some(net) => ids
                .iter()
                .cloned()
                .zip(exec.map(&ids, |id| net.forward(index.doc_tokens(id).unwrap_or_default())))
                .collect(),
            None => HashMap::new(),
        };
        FeatureExtractor {
            index,
            bm25,
            estimator,
            net,
            jaccard: JaccardKind::default(),
            labels: LabelScheme::default(),
            doc_vectors,
            doc_semantic,
        }
    }

    pub fn with_jaccard(mut self, kind: JaccardKind) -> Self {
        self.jaccard = kind;
        self
    }

    pub fn with_labels(mut self, labels: LabelScheme) -> Self {
        self.labels = labels;
        self
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn bm25(&self) -> Bm25Params {
        self.bm25
    }

    pub fn estimator(&self) -> Option<&AbsentEstimator> {
        self.estimator.as_ref()
    }

    pub fn net(&self) -> Option<&SemanticNet> {
        self.net.as_ref()
    }

    fn require(&self) -> Result<(&AbsentEstimator, &SemanticNet), LtrError> {
        let est = self.estimator.as_ref().ok_or(LtrError::MissingSubsystem("click graph"))?;
        let net = self.net.as_ref().ok_or(LtrError::MissingSubsystem("semantic model"))?;
        Ok((est, net))
    }

    /// Query vectors; `key` is the query's identity in the click graph.
    pub fn query_vectors(&self, key: &str, tokens: &[String]) -> Result<QueryVectors, LtrError> {
        let (est, net) = self.require()?;
        Ok(QueryVectors {
            clickgraph: est.resolve(key, tokens, Side::Query),
            semantic: net.forward(tokens),
        })
    }

    /// F1–F9 for one document under precomputed query vectors.
    pub fn features(&self, query: &[String], qv: &QueryVectors, doc_id: &str) -> Result<[f64; N_FEATURES], LtrError> {
        let (est, net) = self.require()?;
        let lex = self.index.lexical_features(query, doc_id, self.bm25)?;
        let doc_tokens = self.index.doc_tokens(doc_id).unwrap_or_default();
        let f7 = match self.doc_semantic.get(doc_id) {
            Some(d) => SemanticNet::score_vectors(&qv.semantic, d),
            None => SemanticNet::score_vectors(&qv.semantic, &net.forward(doc_tokens)),
        };
        let dv = match self.doc_vectors.get(doc_id) {
            Some(v) => v.clone(),
            None => est.resolve(doc_id, doc_tokens, Side::Doc),
        };
        let (f8, f9) = clickgraph_features(&qv.clickgraph, &dv, self.jaccard);
        let out = [
            lex.f1_bm25,
            lex.f2_sum_tf,
            lex.f3_sum_idf,
            lex.f4_sum_tfidf,
            lex.f5_min_docfreq,
            lex.f6_coord,
            f7,
            f8,
            f9,
        ];
        if let Some(i) = out.iter().position(|f| !f.is_finite()) {
            return Err(LtrError::NonFinite { doc_id: doc_id.to_string(), feature: i + 1 });
        }
        Ok(out)
    }

    pub fn assemble(&self, pair: &ClickPair, query_id: usize) -> Result<RankingSample, LtrError> {
        let qv = self.query_vectors(&pair.query_key(), &pair.query)?;
        self.sample(pair, query_id, &qv)
    }

    fn sample(&self, pair: &ClickPair, query_id: usize, qv: &QueryVectors) -> Result<RankingSample, LtrError> {
        Ok(RankingSample {
            query_id,
            doc_id: pair.doc_id.clone(),
            relevance: self.labels.label(pair.click_count),
            features: self.features(&pair.query, qv, &pair.doc_id)?,
        })
    }

    /// One sample per pair. Query ids follow first appearance of each query text.
    pub fn assemble_all(&self, pairs: &[ClickPair], exec: Execution) -> Result<Vec<RankingSample>, LtrError> {
        self.require()?;
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut first: Vec<&ClickPair> = Vec::new();
        let qids: Vec<usize> = pairs
            .iter()
            .map(|p| {
                let n = ids.len();
                *ids.entry(p.query_key()).or_insert_with(|| {
                    first.push(p);
                    n
                })
            })
            .collect();
        let qvs = exec
            .map(&first, |p| self.query_vectors(&p.query_key(), &p.query))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        let idx: Vec<usize> = (0..pairs.len()).collect();
        exec.map(&idx, |&i| self.sample(&pairs[i], qids[i], &qvs[qids[i]]))
            .into_iter()
            .collect()
    }
}
