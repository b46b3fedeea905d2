//! Bipartite click graph with alternating vector propagation.
//!
//! Queries start from their own L2-normalized term-frequency vectors. Each
//! iteration pushes query vectors to documents along click-weighted edges,
//! then pulls them back to queries:
//!
//! ```text
//! D_j <- normalize(top_k(sum_i w_ij * Q_i))
//! Q_i <- normalize(top_k(sum_j w_ij * D_j))
//! ```
//!
//! until the largest per-vertex L2 change drops below `epsilon`. Queries or
//! documents absent from the graph are estimated from their embedding-nearest
//! neighbours on the same side.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::ClickPair;
use crate::embeddings::{self, EmbeddingTable};
use crate::exec::Execution;

const GRAPH_MAGIC: &str = "clickrank-clickgraph";
pub const GRAPH_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ClickGraphError {
    #[error("click graph file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("click graph file version {found}, expected {GRAPH_VERSION}")]
    Version { found: u32 },
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sparse nonnegative term vector, entries sorted by term.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnitVector {
    entries: Vec<(String, f64)>,
}

impl UnitVector {
    pub fn empty() -> Self {
        UnitVector::default()
    }

    /// Builds a vector from raw weights without normalizing. Negative and zero
    /// weights are dropped; duplicate terms are summed.
    pub fn from_weights<S: Into<String>>(weights: impl IntoIterator<Item = (S, f64)>) -> Self {
        let mut map: HashMap<String, f64> = HashMap::new();
        for (t, w) in weights {
            *map.entry(t.into()).or_insert(0.0) += w;
        }
        let mut entries: Vec<(String, f64)> = map.into_iter().filter(|e| e.1 > 0.0).collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        UnitVector { entries }
    }

    /// L2-normalized term-frequency vector of `tokens`.
    pub fn from_tokens(tokens: &[String]) -> Self {
        Self::from_weights(tokens.iter().map(|t| (t.as_str(), 1.0))).normalized()
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, term: &str) -> f64 {
        self.entries
            .binary_search_by(|e| e.0.as_str().cmp(term))
            .map_or(0.0, |i| self.entries[i].1)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return UnitVector::empty();
        }
        self.entries.iter_mut().for_each(|e| e.1 /= n);
        self
    }

    /// Keeps the `k` heaviest entries (ties by term).
    pub fn truncated(mut self, k: usize) -> Self {
        if self.entries.len() > k {
            self.entries
                .sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            self.entries.truncate(k);
            self.entries.sort_by(|a, b| a.0.cmp(&b.0));
        }
        self
    }

    /// Merge-walks the union of both supports.
    fn zip_union(&self, other: &Self, mut f: impl FnMut(f64, f64)) {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) if x.0 == y.0 => {
                    f(x.1, y.1);
                    i += 1;
                    j += 1;
                }
                (Some(x), Some(y)) if x.0 < y.0 => {
                    f(x.1, 0.0);
                    i += 1;
                }
                (Some(x), None) => {
                    f(x.1, 0.0);
                    i += 1;
                }
                (_, Some(y)) => {
                    f(0.0, y.1);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        self.zip_union(other, |x, y| s += (x - y) * (x - y));
        s.sqrt()
    }

    pub fn cosine(&self, other: &Self) -> f64 {
        let (na, nb) = (self.norm(), other.norm());
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        let mut d = 0.0;
        self.zip_union(other, |x, y| d += x * y);
        (d / (na * nb)).clamp(-1.0, 1.0)
    }

    /// Σ min / Σ max over the union of supports; 0.0 when both are empty.
    pub fn weighted_jaccard(&self, other: &Self) -> f64 {
        let (mut lo, mut hi) = (0.0, 0.0);
        self.zip_union(other, |x, y| {
            lo += x.min(y);
            hi += x.max(y);
        });
        if hi == 0.0 { 0.0 } else { lo / hi }
    }

    /// |support ∩| / |support ∪|.
    pub fn set_jaccard(&self, other: &Self) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        self.zip_union(other, |x, y| {
            union += 1;
            if x > 0.0 && y > 0.0 {
                inter += 1;
            }
        });
        if union == 0 { 0.0 } else { inter as f64 / union as f64 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum JaccardKind {
    #[default]
    Weighted,
    Set,
}

/// F8 (cosine) and F9 (jaccard) between a query and a document vector.
pub fn clickgraph_features(q: &UnitVector, d: &UnitVector, kind: JaccardKind) -> (f64, f64) {
    let j = match kind {
        JaccardKind::Weighted => q.weighted_jaccard(d),
        JaccardKind::Set => q.set_jaccard(d),
    };
    (q.cosine(d), j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Query,
    Doc,
}

/// Click graph over aggregated pairs. Only clicked pairs become edges.
#[derive(Debug, Clone, Default)]
pub struct BipartiteClickGraph {
    pub query_keys: Vec<String>,
    pub query_tokens: Vec<Vec<String>>,
    pub doc_ids: Vec<String>,
    pub doc_tokens: Vec<Vec<String>>,
    query_adj: Vec<Vec<(u32, f64)>>,
    doc_adj: Vec<Vec<(u32, f64)>>,
}

impl BipartiteClickGraph {
    pub fn build(pairs: &[ClickPair]) -> Self {
        let mut g = BipartiteClickGraph::default();
        let mut q_lookup: HashMap<String, u32> = HashMap::new();
        let mut d_lookup: HashMap<&str, u32> = HashMap::new();
        for p in pairs.iter().filter(|p| p.is_clicked()) {
            let qi = *q_lookup.entry(p.query_key()).or_insert_with(|| {
                g.query_keys.push(p.query_key());
                g.query_tokens.push(p.query.clone());
                g.query_adj.push(Vec::new());
                (g.query_keys.len() - 1) as u32
            });
            let di = *d_lookup.entry(p.doc_id.as_str()).or_insert_with(|| {
                g.doc_ids.push(p.doc_id.clone());
                g.doc_tokens.push(p.doc_tokens.clone());
                g.doc_adj.push(Vec::new());
                (g.doc_ids.len() - 1) as u32
            });
            let w = f64::from(p.click_count);
            match g.query_adj[qi as usize].iter_mut().find(|e| e.0 == di) {
                Some(e) => e.1 += w,
                None => {
                    g.query_adj[qi as usize].push((di, w));
                    g.doc_adj[di as usize].push((qi, w));
                }
            }
        }
        // aggregated input has unique keys, but keep both adjacency lists in
        // agreement if it does not
        for (qi, adj) in g.query_adj.iter().enumerate() {
            for &(di, w) in adj {
                let back = g.doc_adj[di as usize]
                    .iter_mut()
                    .find(|e| e.0 == qi as u32)
                    .expect("symmetric adjacency");
                back.1 = w;
            }
        }
        g
    }

    /// Graph from explicit `(query, doc, weight)` edges; vertex keys are
    /// `q<i>` / `d<j>` with no tokens.
    pub fn from_edges(n_queries: usize, n_docs: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut g = BipartiteClickGraph {
            query_keys: (0..n_queries).map(|i| format!("q{i}")).collect(),
            query_tokens: vec![Vec::new(); n_queries],
            doc_ids: (0..n_docs).map(|j| format!("d{j}")).collect(),
            doc_tokens: vec![Vec::new(); n_docs],
            query_adj: vec![Vec::new(); n_queries],
            doc_adj: vec![Vec::new(); n_docs],
        };
        for &(q, d, w) in edges {
            g.query_adj[q].push((d as u32, w));
            g.doc_adj[d].push((q as u32, w));
        }
        g
    }

    pub fn n_queries(&self) -> usize {
        self.query_keys.len()
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.query_adj.iter().map(Vec::len).sum()
    }

    /// `(doc index, weight)` neighbours of a query vertex.
    pub fn query_edges(&self, q: usize) -> &[(u32, f64)] {
        &self.query_adj[q]
    }

    pub fn doc_edges(&self, d: usize) -> &[(u32, f64)] {
        &self.doc_adj[d]
    }

    /// Each query's own normalized tf vector.
    pub fn initial_query_vectors(&self) -> Vec<UnitVector> {
        self.query_tokens.iter().map(|t| UnitVector::from_tokens(t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Per-vector truncation; `usize::MAX` disables it.
    pub top_k: usize,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            epsilon: 1e-4,
            max_iters: 30,
            top_k: 20,
        }
    }
}

impl PropagationConfig {
    pub fn validate(&self) -> Result<(), ClickGraphError> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(ClickGraphError::InvalidConfig("epsilon must be positive"));
        }
        if self.max_iters == 0 || self.top_k == 0 {
            return Err(ClickGraphError::InvalidConfig("max_iters and top_k must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub queries: Vec<UnitVector>,
    pub docs: Vec<UnitVector>,
    pub iterations: usize,
    pub converged: bool,
}

fn aggregate_neighbours(edges: &[(u32, f64)], from: &[UnitVector], top_k: usize) -> UnitVector {
    let mut acc: HashMap<&str, f64> = HashMap::new();
    for &(n, w) in edges {
        for (t, x) in from[n as usize].entries() {
            *acc.entry(t.as_str()).or_insert(0.0) += w * x;
        }
    }
    UnitVector::from_weights(acc).truncated(top_k).normalized()
}

fn max_change(new: &[UnitVector], old: &[UnitVector]) -> f64 {
    new.iter()
        .zip(old)
        .map(|(a, b)| a.distance(b))
        .fold(0.0, f64::max)
}

/// Runs vector propagation from `init` (one vector per query vertex).
pub fn propagate(
    graph: &BipartiteClickGraph,
    init: Vec<UnitVector>,
    config: &PropagationConfig,
    exec: Execution,
) -> Propagation {
    assert_eq!(init.len(), graph.n_queries(), "one initial vector per query vertex");
    let mut queries = init;
    let mut docs = vec![UnitVector::empty(); graph.n_docs()];
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=config.max_iters.max(1) {
        iterations = it;
        let new_docs = exec.map_range(graph.n_docs(), |j| {
            aggregate_neighbours(graph.doc_edges(j), &queries, config.top_k)
        });
        let new_queries = exec.map_range(graph.n_queries(), |i| {
            let edges = graph.query_edges(i);
            if edges.is_empty() {
                queries[i].clone()
            } else {
                aggregate_neighbours(edges, &new_docs, config.top_k)
            }
        });
        let delta = max_change(&new_docs, &docs).max(max_change(&new_queries, &queries));
        docs = new_docs;
        queries = new_queries;
        if delta < config.epsilon {
            converged = true;
            break;
        }
    }
    Propagation {
        queries,
        docs,
        iterations,
        converged,
    }
}

#[derive(Debug, Clone)]
pub struct Vertex {
    pub key: String,
    pub tokens: Vec<String>,
    pub vector: UnitVector,
}

/// Propagated vectors for every click-existing query and document.
#[derive(Debug, Clone, Default)]
pub struct ClickGraphModel {
    queries: Vec<Vertex>,
    docs: Vec<Vertex>,
    query_lookup: HashMap<String, usize>,
    doc_lookup: HashMap<String, usize>,
}

impl ClickGraphModel {
    pub fn new(queries: Vec<Vertex>, docs: Vec<Vertex>) -> Self {
        let query_lookup = queries.iter().enumerate().map(|(i, v)| (v.key.clone(), i)).collect();
        let doc_lookup = docs.iter().enumerate().map(|(i, v)| (v.key.clone(), i)).collect();
        ClickGraphModel {
            queries,
            docs,
            query_lookup,
            doc_lookup,
        }
    }

    /// Builds the graph from `pairs` and propagates to convergence.
    pub fn train(pairs: &[ClickPair], config: &PropagationConfig, exec: Execution) -> (Self, Propagation) {
        let graph = BipartiteClickGraph::build(pairs);
        let prop = propagate(&graph, graph.initial_query_vectors(), config, exec);
        let queries = graph
            .query_keys
            .iter()
            .zip(&graph.query_tokens)
            .zip(&prop.queries)
            .map(|((k, t), v)| Vertex { key: k.clone(), tokens: t.clone(), vector: v.clone() })
            .collect();
        let docs = graph
            .doc_ids
            .iter()
            .zip(&graph.doc_tokens)
            .zip(&prop.docs)
            .map(|((k, t), v)| Vertex { key: k.clone(), tokens: t.clone(), vector: v.clone() })
            .collect();
        (Self::new(queries, docs), prop)
    }

    pub fn vertices(&self, side: Side) -> &[Vertex] {
        match side {
            Side::Query => &self.queries,
            Side::Doc => &self.docs,
        }
    }

    pub fn vector(&self, side: Side, key: &str) -> Option<&UnitVector> {
        let (lookup, verts) = match side {
            Side::Query => (&self.query_lookup, &self.queries),
            Side::Doc => (&self.doc_lookup, &self.docs),
        };
        lookup.get(key).map(|&i| &verts[i].vector)
    }

    /// Line format after the `clickrank-clickgraph <version>` header:
    /// `<q|d>\t<key>\t<space-separated tokens>\t<term>:<weight> ...`.
    pub fn write_to(&self, w: impl Write) -> Result<(), ClickGraphError> {
        let mut w = BufWriter::new(w);
        writeln!(w, "{GRAPH_MAGIC} {GRAPH_VERSION}")?;
        for (tag, verts) in [("q", &self.queries), ("d", &self.docs)] {
            for v in verts {
                let weights: Vec<String> =
                    v.vector.entries().iter().map(|(t, x)| format!("{t}:{x}")).collect();
                writeln!(w, "{tag}\t{}\t{}\t{}", v.key, v.tokens.join(" "), weights.join(" "))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(r: impl std::io::Read) -> Result<Self, ClickGraphError> {
        let fmt = |line: usize, message: String| ClickGraphError::Format { line, message };
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().ok_or_else(|| fmt(1, "empty file".into()))??;
        let version = header
            .strip_prefix(GRAPH_MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| fmt(1, format!("bad header {header:?}")))?;
        if version != GRAPH_VERSION {
            return Err(ClickGraphError::Version { found: version });
        }
        let (mut queries, mut docs) = (Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let line = line?;
            let n = i + 2;
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(fmt(n, format!("expected 4 tab-separated columns, got {}", cols.len())));
            }
            let split = |s: &str| s.split(' ').filter(|t| !t.is_empty()).map(String::from).collect::<Vec<_>>();
            let mut entries = Vec::new();
            for item in cols[3].split(' ').filter(|t| !t.is_empty()) {
                let (t, x) = item
                    .rsplit_once(':')
                    .ok_or_else(|| fmt(n, format!("bad entry {item:?}")))?;
                let x: f64 = x.parse().map_err(|_| fmt(n, format!("bad weight {item:?}")))?;
                entries.push((t.to_string(), x));
            }
            let vertex = Vertex {
                key: cols[1].to_string(),
                tokens: split(cols[2]),
                vector: UnitVector::from_weights(entries),
            };
            match cols[0] {
                "q" => queries.push(vertex),
                "d" => docs.push(vertex),
                other => return Err(fmt(n, format!("unknown side {other:?}"))),
            }
        }
        Ok(Self::new(queries, docs))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ClickGraphError> {
        self.write_to(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClickGraphError> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsentEstimationConfig {
    pub neighbors: usize,
    pub sim_threshold: f64,
    pub fallback: bool,
}

impl Default for AbsentEstimationConfig {
    fn default() -> Self {
        AbsentEstimationConfig {
            neighbors: 5,
            sim_threshold: 0.5,
            fallback: true,
        }
    }
}

/// Estimates vectors for click-absent text from embedding-nearest vertices.
#[derive(Debug, Clone)]
pub struct AbsentEstimator {
    model: ClickGraphModel,
    table: EmbeddingTable,
    query_centroids: Vec<Vec<f64>>,
    doc_centroids: Vec<Vec<f64>>,
    config: AbsentEstimationConfig,
}

impl AbsentEstimator {
    pub fn new(
        model: ClickGraphModel,
        table: EmbeddingTable,
        config: AbsentEstimationConfig,
        exec: Execution,
    ) -> Result<Self, ClickGraphError> {
        if config.neighbors == 0 {
            return Err(ClickGraphError::InvalidConfig("neighbors must be at least 1"));
        }
        if !(-1.0..=1.0).contains(&config.sim_threshold) {
            return Err(ClickGraphError::InvalidConfig("sim_threshold must lie in [-1, 1]"));
        }
        let centroids = |side| exec.map(model.vertices(side), |v: &Vertex| table.centroid(&v.tokens));
        let query_centroids = centroids(Side::Query);
        let doc_centroids = centroids(Side::Doc);
        Ok(AbsentEstimator {
            model,
            table,
            query_centroids,
            doc_centroids,
            config,
        })
    }

    pub fn model(&self) -> &ClickGraphModel {
        &self.model
    }

    pub fn table(&self) -> &EmbeddingTable {
        &self.table
    }

    pub fn config(&self) -> &AbsentEstimationConfig {
        &self.config
    }

    /// Existing same-side vertices ranked by centroid cosine, filtered by the
    /// threshold. Only positive similarities qualify so the weighted sum stays
    /// nonnegative.
    pub fn neighbours(&self, tokens: &[String], side: Side) -> Vec<(usize, f64)> {
        let c = self.table.centroid(tokens);
        let pool = match side {
            Side::Query => &self.query_centroids,
            Side::Doc => &self.doc_centroids,
        };
        let mut scored: Vec<(usize, f64)> = pool
            .iter()
            .enumerate()
            .map(|(i, v)| (i, embeddings::cosine(&c, v).unwrap_or(0.0)))
            .filter(|&(_, s)| s > 0.0 && s >= self.config.sim_threshold)
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(self.config.neighbors);
        scored
    }

    pub fn estimate(&self, tokens: &[String], side: Side) -> UnitVector {
        let verts = self.model.vertices(side);
        let mut acc: HashMap<&str, f64> = HashMap::new();
        for (i, sim) in self.neighbours(tokens, side) {
            for (t, x) in verts[i].vector.entries() {
                *acc.entry(t.as_str()).or_insert(0.0) += sim * x;
            }
        }
        let est = UnitVector::from_weights(acc).normalized();
        if est.is_empty() && self.config.fallback {
            UnitVector::from_tokens(tokens)
        } else {
            est
        }
    }

    /// The propagated vector when `key` is in the graph, else an estimate.
    pub fn resolve(&self, key: &str, tokens: &[String], side: Side) -> UnitVector {
        match self.model.vector(side, key) {
            Some(v) => v.clone(),
            None => self.estimate(tokens, side),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uv(entries: &[(&str, f64)]) -> UnitVector {
        UnitVector::from_weights(entries.iter().map(|&(t, w)| (t, w)))
    }

    fn pair(q: &str, d: &str, clicks: u32) -> ClickPair {
        ClickPair {
            query: q.split(' ').map(String::from).collect(),
            doc_id: d.into(),
            doc_tokens: vec![d.into()],
            click_count: clicks,
            nonclick_count: 1,
        }
    }

    #[test]
    fn build_graph_cases() {
        let g = BipartiteClickGraph::build(&[pair("q1", "d1", 3), pair("q2", "d1", 1), pair("q2", "d2", 0)]);
        assert_eq!((g.n_queries(), g.n_docs(), g.edge_count()), (2, 1, 2));
        assert_eq!(g.doc_edges(0), &[(0, 3.0), (1, 1.0)]);
        assert_eq!(BipartiteClickGraph::build(&[]).n_queries(), 0);
        let g = BipartiteClickGraph::build(&[pair("q", "d1", 1), pair("q", "d2", 2)]);
        assert_eq!((g.n_queries(), g.edge_count()), (1, 2));
    }

    #[test]
    fn single_edge_copies_query() {
        let g = BipartiteClickGraph::from_edges(1, 1, &[(0, 0, 5.0)]);
        let q = uv(&[("a", 0.6), ("b", 0.8)]);
        let p = propagate(&g, vec![q.clone()], &PropagationConfig::default(), Execution::Sequential);
        assert_eq!(p.docs[0], q);
        assert!(p.converged);
        assert_eq!(p.iterations, 2);
    }

    #[test]
    fn two_queries_one_doc_half_step() {
        let g = BipartiteClickGraph::from_edges(2, 1, &[(0, 0, 3.0), (1, 0, 1.0)]);
        let init = vec![uv(&[("a", 1.0)]), uv(&[("b", 1.0)])];
        let cfg = PropagationConfig { max_iters: 1, ..Default::default() };
        let p = propagate(&g, init, &cfg, Execution::Sequential);
        let d = &p.docs[0];
        assert!((d.get("a") - 3.0 / 10f64.sqrt()).abs() < 1e-12);
        assert!((d.get("b") - 1.0 / 10f64.sqrt()).abs() < 1e-12);
        assert!((d.get("a") - 0.9487).abs() < 1e-4 && (d.get("b") - 0.3162).abs() < 1e-4);
    }

    #[test]
    fn features_cases() {
        let v = uv(&[("a", 0.6), ("b", 0.8)]);
        let (c, j) = clickgraph_features(&v, &v, JaccardKind::Weighted);
        assert!((c - 1.0).abs() < 1e-12 && (j - 1.0).abs() < 1e-12);
        assert_eq!(clickgraph_features(&uv(&[("a", 1.0)]), &uv(&[("b", 1.0)]), JaccardKind::Weighted), (0.0, 0.0));
        let (c, j) = clickgraph_features(&uv(&[("a", 1.0)]), &v, JaccardKind::Weighted);
        assert!((c - 0.6).abs() < 1e-12);
        assert!((j - 0.6 / 1.8).abs() < 1e-12);
        assert_eq!(clickgraph_features(&UnitVector::empty(), &UnitVector::empty(), JaccardKind::Weighted), (0.0, 0.0));
        let (_, sj) = clickgraph_features(&uv(&[("a", 1.0)]), &v, JaccardKind::Set);
        assert_eq!(sj, 0.5);
    }

    #[test]
    fn jaccard_one_iff_equal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = uv(&[("a", rng.random_range(0.0..1.0)), ("b", rng.random_range(0.0..1.0))]);
            let b = if rng.random_bool(0.3) {
                a.clone()
            } else {
                uv(&[("a", rng.random_range(0.0..1.0)), ("c", rng.random_range(0.0..1.0))])
            };
            let j = a.weighted_jaccard(&b);
            assert!(j <= 1.0);
            assert_eq!(j == 1.0, a == b);
        }
    }

    fn model_fixture() -> (ClickGraphModel, EmbeddingTable) {
        let v = |key: &str, toks: &[&str], vec: UnitVector| Vertex {
            key: key.into(),
            tokens: toks.iter().map(|s| s.to_string()).collect(),
            vector: vec,
        };
        let model = ClickGraphModel::new(
            vec![
                v("alpha", &["alpha"], uv(&[("a", 1.0)])),
                v("beta", &["beta"], uv(&[("b", 1.0)])),
                v("gamma", &["gamma"], uv(&[("c", 1.0)])),
            ],
            vec![v("d1", &["alpha"], uv(&[("a", 1.0)]))],
        );
        // centroid cosines with probe (1,0,0): alpha 0.8, beta 0.4 (after
        // normalising rows), gamma negative
        let table = EmbeddingTable::from_rows(vec![
            ("alpha".into(), vec![0.8, 0.6, 0.0]),
            ("beta".into(), vec![0.4, 0.0, (1.0f64 - 0.16).sqrt()]),
            ("gamma".into(), vec![-1.0, 0.0, 0.0]),
            ("probe".into(), vec![1.0, 0.0, 0.0]),
        ])
        .unwrap();
        (model, table)
    }

    #[test]
    fn estimate_identical_text_copies_vertex() {
        let (model, table) = model_fixture();
        let cfg = AbsentEstimationConfig { neighbors: 1, ..Default::default() };
        let est = AbsentEstimator::new(model.clone(), table.clone(), cfg, Execution::Sequential).unwrap();
        assert_eq!(est.estimate(&["beta".into()], Side::Query), uv(&[("b", 1.0)]));
    }

    #[test]
    fn estimate_weighted_neighbours() {
        let (model, table) = model_fixture();
        let cfg = AbsentEstimationConfig { neighbors: 5, sim_threshold: 0.3, fallback: true };
        let est = AbsentEstimator::new(model.clone(), table.clone(), cfg, Execution::Sequential).unwrap();
        let v = est.estimate(&["probe".into()], Side::Query);
        assert_eq!(v.len(), 2);
        assert!((v.get("a") - 2.0 / 5f64.sqrt()).abs() < 1e-12);
        assert!((v.get("b") - 1.0 / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn estimate_fallback_paths() {
        let (model, table) = model_fixture();
        let toks: Vec<String> = vec!["zz".into(), "yy".into(), "zz".into()];
        let on = AbsentEstimator::new(model.clone(), table.clone(), AbsentEstimationConfig::default(), Execution::Sequential).unwrap();
        let v = on.estimate(&toks, Side::Doc);
        assert!((v.get("zz") - 2.0 / 5f64.sqrt()).abs() < 1e-12);
        let off_cfg = AbsentEstimationConfig { fallback: false, ..Default::default() };
        let off = AbsentEstimator::new(model.clone(), table.clone(), off_cfg, Execution::Sequential).unwrap();
        assert!(off.estimate(&toks, Side::Doc).is_empty());
        assert!(on.estimate(&[], Side::Query).is_empty());
    }

    #[test]
    fn model_round_trip() {
        let (model, _) = model_fixture();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let back = ClickGraphModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.vector(Side::Query, "beta"), Some(&uv(&[("b", 1.0)])));
        assert_eq!(back.vertices(Side::Doc).len(), 1);
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(buf, again);
    }
}
