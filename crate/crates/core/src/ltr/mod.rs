//! Feature vectors F1–F9, feature masks, normalization and the three
//! learning-to-rank trainers.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

mod coordinate_ascent;
mod features;
mod rankboost;
mod ranknet;

pub use coordinate_ascent::{CoordinateAscent, LinearModel};
pub use features::{FeatureExtractor, QueryVectors};
pub use rankboost::{BoostModel, BoostRound, RankBoost};
pub use ranknet::{NetRankModel, RankNet, pair_diffs, ranknet_gradient, ranknet_loss};

use crate::clickgraph::ClickGraphError;
use crate::deepmodel::DeepError;
use crate::index::IndexError;

pub const N_FEATURES: usize = 9;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "bm25",
    "sum_tf",
    "sum_idf",
    "sum_tfidf",
    "min_docfreq",
    "coord",
    "deep_cosine",
    "clickgraph_cosine",
    "clickgraph_jaccard",
];

#[derive(Debug, thiserror::Error)]
pub enum LtrError {
    #[error("no query has two documents of differing relevance")]
    NoPreferencePairs,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("{0} is not built")]
    MissingSubsystem(&'static str),
    #[error("feature {feature} of {doc_id} is not finite")]
    NonFinite { doc_id: String, feature: usize },
    #[error("model file version {found}, expected {MODEL_VERSION}")]
    Version { found: u32 },
    #[error("unknown model kind {0:?}")]
    UnknownKind(String),
    #[error("unknown feature mask {0:?}")]
    UnknownMask(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    ClickGraph(#[from] ClickGraphError),
    #[error(transparent)]
    Deep(#[from] DeepError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_err(line: usize, message: impl Into<String>) -> LtrError {
    LtrError::Format { line, message: message.into() }
}

/// The five feature subsets compared in evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMask {
    Baseline,
    Basic,
    Deep,
    ClickGraph,
    Final,
}

impl FeatureMask {
    pub const ALL: [FeatureMask; 5] = [
        FeatureMask::Baseline,
        FeatureMask::Basic,
        FeatureMask::Deep,
        FeatureMask::ClickGraph,
        FeatureMask::Final,
    ];

    /// Zero-based feature indices selected by the mask.
    pub fn indices(self) -> &'static [usize] {
        match self {
            FeatureMask::Baseline => &[0],
            FeatureMask::Basic => &[1, 2, 3, 4, 5],
            FeatureMask::Deep => &[6],
            FeatureMask::ClickGraph => &[7, 8],
            FeatureMask::Final => &[0, 1, 2, 3, 4, 5, 6, 7, 8],
        }
    }

    pub fn order(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureMask::Baseline => "baseline",
            FeatureMask::Basic => "basic",
            FeatureMask::Deep => "deep",
            FeatureMask::ClickGraph => "clickgraph",
            FeatureMask::Final => "final",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FeatureMask::Baseline => "Baseline",
            FeatureMask::Basic => "Basic",
            FeatureMask::Deep => "Deep",
            FeatureMask::ClickGraph => "ClickGraph",
            FeatureMask::Final => "Final",
        }
    }

    pub fn project(self, features: &[f64; N_FEATURES]) -> Vec<f64> {
        self.indices().iter().map(|&i| features[i]).collect()
    }
}

impl FromStr for FeatureMask {
    type Err = LtrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureMask::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| LtrError::UnknownMask(s.to_string()))
    }
}

/// How click counts become relevance grades.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelScheme {
    #[default]
    Binary,
    /// 0 clicks → 0, 1 → 1, 2–3 → 2, 4+ → 3.
    Graded,
}

impl LabelScheme {
    pub fn label(self, clicks: u32) -> u32 {
        match (self, clicks) {
            (_, 0) => 0,
            (LabelScheme::Binary, _) | (LabelScheme::Graded, 1) => 1,
            (LabelScheme::Graded, 2..=3) => 2,
            (LabelScheme::Graded, _) => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingSample {
    pub query_id: usize,
    pub doc_id: String,
    pub relevance: u32,
    pub features: [f64; N_FEATURES],
}

impl RankingSample {
    /// One line of the LTR text format.
    pub fn to_line(&self) -> String {
        let mut s = format!("{} qid:{}", self.relevance, self.query_id);
        for (i, f) in self.features.iter().enumerate() {
            let _ = write!(s, " {}:{}", i + 1, f);
        }
        let _ = write!(s, " # {}", self.doc_id);
        s
    }

    pub fn parse_line(line: &str, lineno: usize) -> Result<Self, LtrError> {
        let (body, doc_id) = line
            .split_once('#')
            .ok_or_else(|| format_err(lineno, "missing '# doc_id' comment"))?;
        let doc_id = doc_id.trim();
        if doc_id.is_empty() {
            return Err(format_err(lineno, "empty doc id"));
        }
        let mut fields = body.split_whitespace();
        let relevance = fields
            .next()
            .and_then(|r| r.parse::<u32>().ok())
            .ok_or_else(|| format_err(lineno, "bad relevance"))?;
        let query_id = fields
            .next()
            .and_then(|q| q.strip_prefix("qid:"))
            .and_then(|q| q.parse::<usize>().ok())
            .ok_or_else(|| format_err(lineno, "bad qid"))?;
        let mut features = [0.0; N_FEATURES];
        let mut seen = 0;
        for f in fields {
            let (idx, val) = f.split_once(':').ok_or_else(|| format_err(lineno, format!("bad feature {f:?}")))?;
            let idx: usize = idx.parse().map_err(|_| format_err(lineno, format!("bad feature index {idx:?}")))?;
            if idx != seen + 1 || idx > N_FEATURES {
                return Err(format_err(lineno, format!("feature {idx} out of order")));
            }
            let val: f64 = val.parse().map_err(|_| format_err(lineno, format!("bad value {val:?}")))?;
            if !val.is_finite() {
                return Err(format_err(lineno, "non-finite feature"));
            }
            features[idx - 1] = val;
            seen = idx;
        }
        if seen != N_FEATURES {
            return Err(format_err(lineno, format!("expected {N_FEATURES} features, found {seen}")));
        }
        Ok(RankingSample {
            query_id,
            doc_id: doc_id.to_string(),
            relevance,
            features,
        })
    }
}

pub fn write_feature_file(path: impl AsRef<Path>, samples: &[RankingSample]) -> Result<(), LtrError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in samples {
        writeln!(w, "{}", s.to_line())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<Vec<RankingSample>, LtrError> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(RankingSample::parse_line(&line, i + 1)?);
    }
    Ok(out)
}

/// Per-feature min-max extrema from a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub min: [f64; N_FEATURES],
    pub max: [f64; N_FEATURES],
}

impl Default for FeatureStats {
    fn default() -> Self {
        FeatureStats { min: [0.0; N_FEATURES], max: [0.0; N_FEATURES] }
    }
}

impl FeatureStats {
    pub fn fit<'a>(samples: impl IntoIterator<Item = &'a RankingSample>) -> Self {
        let mut min = [f64::INFINITY; N_FEATURES];
        let mut max = [f64::NEG_INFINITY; N_FEATURES];
        let mut any = false;
        for s in samples {
            any = true;
            for (i, &f) in s.features.iter().enumerate() {
                min[i] = min[i].min(f);
                max[i] = max[i].max(f);
            }
        }
        if !any {
            return FeatureStats::default();
        }
        FeatureStats { min, max }
    }

    /// Scales into [0, 1], clamping out-of-range values. Constant features map to 0.
    pub fn apply(&self, features: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        let mut out = [0.0; N_FEATURES];
        for i in 0..N_FEATURES {
            let span = self.max[i] - self.min[i];
            if span > 0.0 {
                out[i] = ((features[i] - self.min[i]) / span).clamp(0.0, 1.0);
            }
        }
        out
    }
}

/// Normalized, mask-projected documents of one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub query_id: usize,
    pub doc_ids: Vec<String>,
    pub labels: Vec<u32>,
    pub features: Vec<Vec<f64>>,
}

impl QueryGroup {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// True when at least two documents differ in relevance.
    pub fn has_preferences(&self) -> bool {
        self.labels.iter().any(|&l| l != self.labels[0])
    }

    /// Labels listed in the order `scores` induce.
    pub fn ranked_labels(&self, scores: &[f64]) -> Vec<u32> {
        stable_order(scores).into_iter().map(|i| self.labels[i]).collect()
    }

    /// `(better, worse)` index pairs.
    pub fn preference_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            for j in 0..self.len() {
                if self.labels[i] > self.labels[j] {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Indices sorted by score descending; equal scores keep input order.
pub fn stable_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Training or evaluation data in trainer-facing form.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub groups: Vec<QueryGroup>,
}

impl Dataset {
    /// Groups by query id in first-appearance order, then normalizes and projects.
    pub fn build(samples: &[&RankingSample], mask: FeatureMask, stats: &FeatureStats) -> Self {
        let mut groups: Vec<QueryGroup> = Vec::new();
        let mut pos = std::collections::HashMap::new();
        for s in samples {
            let g = *pos.entry(s.query_id).or_insert_with(|| {
                groups.push(QueryGroup {
                    query_id: s.query_id,
                    doc_ids: Vec::new(),
                    labels: Vec::new(),
                    features: Vec::new(),
                });
                groups.len() - 1
            });
            let grp = &mut groups[g];
            grp.doc_ids.push(s.doc_id.clone());
            grp.labels.push(s.relevance);
            grp.features.push(mask.project(&stats.apply(&s.features)));
        }
        Dataset { dim: mask.indices().len(), groups }
    }

    /// Raw rows without normalization, one group per inner list of `(label, features)`.
    pub fn from_rows(dim: usize, groups: Vec<Vec<(u32, Vec<f64>)>>) -> Self {
        let groups = groups
            .into_iter()
            .enumerate()
            .map(|(q, rows)| QueryGroup {
                query_id: q,
                doc_ids: (0..rows.len()).map(|i| format!("q{q}d{i}")).collect(),
                labels: rows.iter().map(|r| r.0).collect(),
                features: rows.into_iter().map(|r| r.1).collect(),
            })
            .collect();
        Dataset { dim, groups }
    }

    pub fn score_with(&self, scorer: &Scorer) -> Vec<Vec<f64>> {
        self.groups
            .iter()
            .map(|g| g.features.iter().map(|x| scorer.score(x)).collect())
            .collect()
    }

    /// Fraction of preference pairs the scores misorder (ties count as errors).
    pub fn pairwise_error(&self, scorer: &Scorer) -> f64 {
        let (mut bad, mut total) = (0usize, 0usize);
        for (g, s) in self.groups.iter().zip(self.score_with(scorer)) {
            for (i, j) in g.preference_pairs() {
                total += 1;
                if s[i] <= s[j] {
                    bad += 1;
                }
            }
        }
        if total == 0 { 0.0 } else { bad as f64 / total as f64 }
    }

    pub fn has_preferences(&self) -> bool {
        self.groups.iter().any(QueryGroup::has_preferences)
    }
}

/// A trained scoring function over projected features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scorer {
    Linear(LinearModel),
    Net(NetRankModel),
    Boost(BoostModel),
}

impl Scorer {
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            Scorer::Linear(m) => m.score(x),
            Scorer::Net(m) => m.score(x),
            Scorer::Boost(m) => m.score(x),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Scorer::Linear(_) => "coordinate_ascent",
            Scorer::Net(_) => "ranknet",
            Scorer::Boost(_) => "rankboost",
        }
    }
}

pub trait Trainer: Sync {
    fn name(&self) -> &str;
    fn fit(&self, data: &Dataset) -> Result<Scorer, LtrError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    CoordinateAscent,
    RankBoost,
    RankNet,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::CoordinateAscent, Algorithm::RankBoost, Algorithm::RankNet];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::CoordinateAscent => "CoordinateAscent",
            Algorithm::RankBoost => "RankBoost",
            Algorithm::RankNet => "RankNet",
        }
    }

    /// Trainer with default settings and the given seed.
    pub fn trainer(self, seed: u64) -> Box<dyn Trainer> {
        match self {
            Algorithm::CoordinateAscent => Box::new(CoordinateAscent { seed, ..Default::default() }),
            Algorithm::RankBoost => Box::new(RankBoost::default()),
            Algorithm::RankNet => Box::new(RankNet { seed, ..Default::default() }),
        }
    }
}

impl FromStr for Algorithm {
    type Err = LtrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        match norm.as_str() {
            "coordinateascent" | "ca" => Ok(Algorithm::CoordinateAscent),
            "rankboost" => Ok(Algorithm::RankBoost),
            "ranknet" => Ok(Algorithm::RankNet),
            _ => Err(LtrError::UnknownKind(s.to_string())),
        }
    }
}

const MODEL_MAGIC: &str = "clickrank-ltr";
pub const MODEL_VERSION: u32 = 1;

/// A scorer together with the mask and normalization it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct RankerModel {
    pub mask: FeatureMask,
    pub stats: FeatureStats,
    pub scorer: Scorer,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_floats(line: &str, key: &str, lineno: usize) -> Result<Vec<f64>, LtrError> {
    let rest = line
        .strip_prefix(key)
        .ok_or_else(|| format_err(lineno, format!("expected {key:?}")))?;
    rest.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format_err(lineno, format!("bad number {t:?}"))))
        .collect()
}

impl RankerModel {
    /// Fits normalization on `samples`, projects by `mask`, and trains.
    pub fn train(samples: &[RankingSample], mask: FeatureMask, trainer: &dyn Trainer) -> Result<Self, LtrError> {
        let stats = FeatureStats::fit(samples);
        let refs: Vec<&RankingSample> = samples.iter().collect();
        let data = Dataset::build(&refs, mask, &stats);
        let scorer = trainer.fit(&data)?;
        Ok(RankerModel { mask, stats, scorer })
    }

    pub fn score(&self, features: &[f64; N_FEATURES]) -> f64 {
        self.scorer.score(&self.mask.project(&self.stats.apply(features)))
    }

    /// Candidate indices, best first. Ties keep the candidates' input order.
    pub fn rerank(&self, candidates: &[RankingSample]) -> Vec<usize> {
        let scores: Vec<f64> = candidates.iter().map(|c| self.score(&c.features)).collect();
        stable_order(&scores)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MODEL_MAGIC} {MODEL_VERSION} {}", self.scorer.kind());
        let _ = writeln!(s, "mask {}", self.mask.name());
        let _ = writeln!(s, "min {}", join(&self.stats.min));
        let _ = writeln!(s, "max {}", join(&self.stats.max));
        match &self.scorer {
            Scorer::Linear(m) => {
                let _ = writeln!(s, "weights {}", join(&m.weights));
            }
            Scorer::Net(m) => {
                let _ = writeln!(s, "weights {}", join(&m.weights));
            }
            Scorer::Boost(m) => {
                let _ = writeln!(s, "rounds {}", m.rounds.len());
                for r in &m.rounds {
                    let _ = writeln!(s, "{} {} {} {}", r.feature, r.threshold, r.direction, r.alpha);
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, LtrError> {
        let lines: Vec<&str> = text.lines().collect();
        let line = |i: usize| lines.get(i).copied().ok_or_else(|| format_err(i + 1, "unexpected end of model"));
        let header = line(0)?;
        let mut head = header.split_whitespace();
        if head.next() != Some(MODEL_MAGIC) {
            return Err(format_err(1, format!("bad header {header:?}")));
        }
        let version: u32 = head
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| format_err(1, "missing version"))?;
        if version != MODEL_VERSION {
            return Err(LtrError::Version { found: version });
        }
        let kind = head.next().unwrap_or("");
        if !matches!(kind, "coordinate_ascent" | "ranknet" | "rankboost") {
            return Err(LtrError::UnknownKind(kind.to_string()));
        }
        let mask: FeatureMask = line(1)?
            .strip_prefix("mask ")
            .ok_or_else(|| format_err(2, "expected mask"))?
            .trim()
            .parse()?;
        let dim = mask.indices().len();
        let to_arr = |v: Vec<f64>, i: usize| -> Result<[f64; N_FEATURES], LtrError> {
            v.try_into().map_err(|_| format_err(i, format!("expected {N_FEATURES} values")))
        };
        let stats = FeatureStats {
            min: to_arr(parse_floats(line(2)?, "min", 3)?, 3)?,
            max: to_arr(parse_floats(line(3)?, "max", 4)?, 4)?,
        };
        let weights = |l: &str| -> Result<Vec<f64>, LtrError> {
            let w = parse_floats(l, "weights", 5)?;
            if w.len() != dim {
                return Err(format_err(5, format!("expected {dim} weights, found {}", w.len())));
            }
            Ok(w)
        };
        let scorer = match kind {
            "coordinate_ascent" => Scorer::Linear(LinearModel { weights: weights(line(4)?)? }),
            "ranknet" => Scorer::Net(NetRankModel { weights: weights(line(4)?)? }),
            _ => {
                let n: usize = line(4)?
                    .strip_prefix("rounds ")
                    .and_then(|n| n.trim().parse().ok())
                    .ok_or_else(|| format_err(5, "expected rounds"))?;
                let mut rounds = Vec::with_capacity(n);
                for i in 0..n {
                    let l = line(5 + i)?;
                    let t: Vec<&str> = l.split_whitespace().collect();
                    let bad = || format_err(6 + i, "bad round");
                    if t.len() != 4 {
                        return Err(bad());
                    }
                    let round = BoostRound {
                        feature: t[0].parse().map_err(|_| bad())?,
                        threshold: t[1].parse().map_err(|_| bad())?,
                        direction: t[2].parse().map_err(|_| bad())?,
                        alpha: t[3].parse().map_err(|_| bad())?,
                    };
                    if round.feature >= dim || !matches!(round.direction, 1 | -1) || !round.alpha.is_finite() {
                        return Err(bad());
                    }
                    rounds.push(round);
                }
                Scorer::Boost(BoostModel { rounds })
            }
        };
        Ok(RankerModel { mask, stats, scorer })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LtrError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LtrError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(q: usize, doc: &str, rel: u32, f: [f64; 9]) -> RankingSample {
        RankingSample { query_id: q, doc_id: doc.into(), relevance: rel, features: f }
    }

    #[test]
    fn normalization_cases() {
        let mut lo = [0.0; 9];
        let mut hi = [3.0; 9];
        hi[0] = 10.0;
        lo[1] = 3.0;
        let stats = FeatureStats::fit(&[sample(0, "a", 0, lo), sample(0, "b", 1, hi)]);
        let mut probe = [0.0; 9];
        probe[0] = 5.0;
        assert_eq!(stats.apply(&probe)[0], 0.5);
        probe[0] = 12.0;
        assert_eq!(stats.apply(&probe)[0], 1.0);
        probe[0] = -1.0;
        assert_eq!(stats.apply(&probe)[0], 0.0);
        assert_eq!(stats.apply(&probe)[1], 0.0);
        assert_eq!(stats.apply(&hi)[1], 0.0);
    }

    #[test]
    fn masks_follow_table_order() {
        let names: Vec<&str> = FeatureMask::ALL.iter().map(|m| m.name()).collect();
        assert_eq!(names, ["baseline", "basic", "deep", "clickgraph", "final"]);
        assert_eq!(FeatureMask::Basic.indices(), &[1, 2, 3, 4, 5]);
        assert_eq!("ClickGraph".parse::<FeatureMask>().unwrap(), FeatureMask::ClickGraph);
        assert!("f10".parse::<FeatureMask>().is_err());
        let f: [f64; 9] = std::array::from_fn(|i| i as f64);
        assert_eq!(FeatureMask::ClickGraph.project(&f), vec![7.0, 8.0]);
    }

    #[test]
    fn labels() {
        assert_eq!((0..6).map(|c| LabelScheme::Binary.label(c)).collect::<Vec<_>>(), [0, 1, 1, 1, 1, 1]);
        assert_eq!((0..6).map(|c| LabelScheme::Graded.label(c)).collect::<Vec<_>>(), [0, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn feature_line_round_trip() {
        let s = sample(7, "doc-1", 1, [0.1, 1.0 / 3.0, 2.5e-17, 4.0, 5.0, 0.5, -0.25, 0.9, 1e300]);
        let line = s.to_line();
        assert!(line.starts_with("1 qid:7 1:0.1 2:"));
        assert!(line.ends_with("# doc-1"));
        assert_eq!(RankingSample::parse_line(&line, 1).unwrap(), s);
        assert!(RankingSample::parse_line("1 qid:1 1:0 # d", 3).is_err());
        assert!(RankingSample::parse_line("x qid:1 # d", 1).is_err());
    }

    #[test]
    fn rerank_ties_and_order() {
        let mut f = [0.0; 9];
        let cands: Vec<RankingSample> = (0..4)
            .map(|i| {
                f[0] = [1.0, 3.0, 2.0, 3.0][i];
                sample(0, &format!("d{i}"), 0, f)
            })
            .collect();
        let stats = FeatureStats::fit(&cands);
        let mut w = vec![0.0; 9];
        let flat = RankerModel {
            mask: FeatureMask::Final,
            stats: stats.clone(),
            scorer: Scorer::Linear(LinearModel { weights: w.clone() }),
        };
        assert_eq!(flat.rerank(&cands), [0, 1, 2, 3]);
        w[0] = 1.0;
        let bm25 = RankerModel { scorer: Scorer::Linear(LinearModel { weights: w.clone() }), ..flat.clone() };
        assert_eq!(bm25.rerank(&cands), [1, 3, 2, 0]);
        w[0] = -1.0;
        let neg = RankerModel { scorer: Scorer::Linear(LinearModel { weights: w }), ..flat };
        assert_eq!(neg.rerank(&cands), [0, 2, 1, 3]);
    }

    #[test]
    fn unknown_kind_rejected() {
        let err = RankerModel::from_text("clickrank-ltr 1 lambdamart\nmask final\n").unwrap_err();
        assert!(matches!(err, LtrError::UnknownKind(k) if k == "lambdamart"));
        let err = RankerModel::from_text("clickrank-ltr 2 ranknet\nmask final\n").unwrap_err();
        assert!(matches!(err, LtrError::Version { found: 2 }));
        assert!(RankerModel::from_text("ranknet\nmask final\n").is_err());
    }
}
