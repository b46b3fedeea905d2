//! NDCG@k, query-level k-fold cross-validation and latency statistics.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::ltr::{Dataset, FeatureMask, FeatureStats, LtrError, RankingSample, Trainer};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("negative relevance label {0}")]
    NegativeRelevance(i64),
    #[error("cutoff k must be at least 1")]
    ZeroCutoff,
    #[error("{queries} distinct queries cannot fill {folds} folds")]
    TooFewQueries { queries: usize, folds: usize },
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: LtrError,
    },
    #[error("fold {0} trains on a query it evaluates")]
    Leak(usize),
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// DCG@k with exponential gain `2^rel − 1`.
pub fn dcg_at_k(relevances: &[u32], k: usize) -> f64 {
    relevances
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &r)| ((1u64 << r.min(62)) as f64 - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG@k of labels listed in ranked order; `None` when the ideal DCG is 0.
pub fn ndcg_labels(relevances: &[u32], k: usize) -> Option<f64> {
    let mut ideal = relevances.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg_at_k(&ideal, k);
    (idcg > 0.0).then(|| dcg_at_k(relevances, k) / idcg)
}

/// NDCG@k with input validation. `Ok(None)` is the undefined (zero-ideal) case.
pub fn ndcg_at_k(relevances: &[i64], k: usize) -> Result<Option<f64>, EvalError> {
    if k == 0 {
        return Err(EvalError::ZeroCutoff);
    }
    let labels = relevances
        .iter()
        .map(|&r| u32::try_from(r).map_err(|_| EvalError::NegativeRelevance(r)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ndcg_labels(&labels, k))
}

/// Query-to-fold assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub folds: usize,
    pub assignment: BTreeMap<usize, usize>,
}

impl FoldSplit {
    pub fn fold_of(&self, query_id: usize) -> Option<usize> {
        self.assignment.get(&query_id).copied()
    }

    pub fn queries_in(&self, fold: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .filter(|&(_, &f)| f == fold)
            .map(|(&q, _)| q)
            .collect()
    }
}

/// Seeded shuffle of the distinct query ids, then round-robin assignment.
pub fn kfold_split(query_ids: &[usize], folds: usize, seed: u64) -> Result<FoldSplit, EvalError> {
    let mut ids: Vec<usize> = query_ids.iter().copied().collect::<HashSet<_>>().into_iter().collect();
    ids.sort_unstable();
    if folds == 0 || ids.len() < folds {
        return Err(EvalError::TooFewQueries { queries: ids.len(), folds });
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let assignment = ids.into_iter().enumerate().map(|(i, q)| (q, i % folds)).collect();
    Ok(FoldSplit { folds, assignment })
}

/// Treatment of queries whose ideal DCG is 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroIdeal {
    #[default]
    Exclude,
    Zero,
}

/// Cutoffs and averaging policy shared by every cross-validation run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvOptions {
    pub ks: Vec<usize>,
    pub zero_ideal: ZeroIdeal,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions { ks: vec![5, 10], zero_ideal: ZeroIdeal::Exclude }
    }
}

/// Mean NDCG@k of `scores` over the groups of `data`.
pub fn mean_ndcg(data: &Dataset, scores: &[Vec<f64>], k: usize, zero_ideal: ZeroIdeal) -> Option<f64> {
    let vals: Vec<f64> = data
        .groups
        .iter()
        .zip(scores)
        .filter_map(|(g, s)| match (ndcg_labels(&g.ranked_labels(s), k), zero_ideal) {
            (None, ZeroIdeal::Zero) => Some(0.0),
            (v, _) => v,
        })
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub k: usize,
    pub ndcg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub algorithm: String,
    pub mask: FeatureMask,
    pub per_fold: Vec<FoldScore>,
    /// `(k, unweighted mean over folds with a defined value)`.
    pub mean: Vec<(usize, f64)>,
}

impl CvResult {
    pub fn mean_at(&self, k: usize) -> Option<f64> {
        self.mean.iter().find(|m| m.0 == k).map(|m| m.1)
    }
}

/// Trains on all folds but one (normalization fitted there) and scores the
/// held-out fold, for every fold.
pub fn cross_validate(
    samples: &[RankingSample],
    trainer: &dyn Trainer,
    mask: FeatureMask,
    opts: &CvOptions,
    split: &FoldSplit,
    exec: Execution,
) -> Result<CvResult, EvalError> {
    let ks = &opts.ks;
    let per_fold = exec.map_range(split.folds, |fold| -> Result<Vec<FoldScore>, EvalError> {
        let (train, test): (Vec<&RankingSample>, Vec<&RankingSample>) = samples
            .iter()
            .partition(|s| split.fold_of(s.query_id) != Some(fold));
        let train_q: HashSet<usize> = train.iter().map(|s| s.query_id).collect();
        if test.iter().any(|s| train_q.contains(&s.query_id)) {
            return Err(EvalError::Leak(fold));
        }
        let stats = FeatureStats::fit(train.iter().copied());
        let train_set = Dataset::build(&train, mask, &stats);
        let test_set = Dataset::build(&test, mask, &stats);
        let scorer = trainer
            .fit(&train_set)
            .map_err(|source| EvalError::Fold { fold, source })?;
        let scores = test_set.score_with(&scorer);
        Ok(ks
            .iter()
            .map(|&k| FoldScore { fold, k, ndcg: mean_ndcg(&test_set, &scores, k, opts.zero_ideal) })
            .collect())
    });
    let per_fold: Vec<FoldScore> = per_fold.into_iter().collect::<Result<Vec<_>, _>>()?.into_iter().flatten().collect();
    let mean = ks
        .iter()
        .map(|&k| {
            let vals: Vec<f64> = per_fold.iter().filter(|f| f.k == k).filter_map(|f| f.ndcg).collect();
            let m = if vals.is_empty() { 0.0 } else { vals.iter().sum::<f64>() / vals.len() as f64 };
            (k, m)
        })
        .collect();
    Ok(CvResult {
        algorithm: trainer.name().to_string(),
        mask,
        per_fold,
        mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub min: f64,
    pub max: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles over raw per-query seconds.
    pub fn from_seconds(raw: &[f64]) -> Option<Self> {
        if raw.is_empty() {
            return None;
        }
        let mut v = raw.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |p: f64| v[((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Some(LatencyStats {
            samples: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p50: rank(0.50),
            p95: rank(0.95),
            min: v[0],
            max: v[v.len() - 1],
        })
    }
}

/// Times `run` on every query `repetitions` times after one untimed warm-up
/// pass.
pub fn benchmark_latency<Q>(
    queries: &[Q],
    repetitions: usize,
    mut run: impl FnMut(&Q),
) -> Result<LatencyStats, EvalError> {
    if repetitions == 0 {
        return Err(EvalError::NoRepetitions);
    }
    queries.iter().for_each(&mut run);
    let mut raw = Vec::with_capacity(queries.len() * repetitions);
    for _ in 0..repetitions {
        for q in queries {
            let t = std::time::Instant::now();
            run(q);
            raw.push(t.elapsed().as_secs_f64());
        }
    }
    LatencyStats::from_seconds(&raw).ok_or(EvalError::NoRepetitions)
}

/// Cross-validated NDCG for feature-mask rows × algorithm columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    pub rows: Vec<CvResult>,
    pub latency: Option<LatencyStats>,
}

#[derive(Serialize)]
struct ReportRecord<'a> {
    mask: &'a str,
    algorithm: &'a str,
    k: usize,
    ndcg: f64,
    folds: Vec<Option<f64>>,
}

impl EvalReport {
    /// Runs every `(mask, trainer)` combination on one shared split. Rows are
    /// kept in mask order, then algorithm name order.
    pub fn run(
        samples: &[RankingSample],
        masks: &[FeatureMask],
        trainers: &[&dyn Trainer],
        opts: &CvOptions,
        split: &FoldSplit,
        exec: Execution,
    ) -> Result<Self, EvalError> {
        let mut trainers = trainers.to_vec();
        trainers.sort_by(|a, b| a.name().cmp(b.name()));
        let mut masks = masks.to_vec();
        masks.sort_by_key(|m| m.order());
        let mut rows = Vec::new();
        for &mask in &masks {
            for &t in &trainers {
                rows.push(cross_validate(samples, t, mask, opts, split, exec)?);
            }
        }
        Ok(EvalReport { ks: opts.ks.clone(), rows, latency: None })
    }

    pub fn get(&self, mask: FeatureMask, algorithm: &str) -> Option<&CvResult> {
        self.rows.iter().find(|r| r.mask == mask && r.algorithm == algorithm)
    }

    fn masks(&self) -> Vec<FeatureMask> {
        let mut m: Vec<FeatureMask> = Vec::new();
        for r in &self.rows {
            if !m.contains(&r.mask) {
                m.push(r.mask);
            }
        }
        m
    }

    fn algorithms(&self) -> Vec<&str> {
        let mut a: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !a.contains(&r.algorithm.as_str()) {
                a.push(&r.algorithm);
            }
        }
        a
    }

    /// Aligned text table, one block per cutoff.
    pub fn to_table(&self) -> String {
        let algos = self.algorithms();
        let width = algos.iter().map(|a| a.len()).max().unwrap_or(0).max(8) + 2;
        let mut out = String::new();
        for &k in &self.ks {
            let _ = write!(out, "{:<12}", format!("NDCG@{k}"));
            for a in &algos {
                let _ = write!(out, "{a:>width$}");
            }
            out.push('\n');
            for m in self.masks() {
                let _ = write!(out, "{:<12}", m.label());
                for a in &algos {
                    match self.get(m, a).and_then(|r| r.mean_at(k)) {
                        Some(v) => {
                            let _ = write!(out, "{v:>width$.4}");
                        }
                        None => {
                            let _ = write!(out, "{:>width$}", "-");
                        }
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
        if let Some(l) = &self.latency {
            let _ = writeln!(
                out,
                "latency (s/query, n={}): mean {:.5}  p50 {:.5}  p95 {:.5}",
                l.samples, l.mean, l.p50, l.p95
            );
        }
        out
    }

    /// One JSON record per `(mask, algorithm, k)`, in table order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            for &(k, mean) in &r.mean {
                let rec = ReportRecord {
                    mask: r.mask.name(),
                    algorithm: &r.algorithm,
                    k,
                    ndcg: mean,
                    folds: r.per_fold.iter().filter(|f| f.k == k).map(|f| f.ndcg).collect(),
                };
                out.push_str(&serde_json::to_string(&rec).expect("plain record"));
                out.push('\n');
            }
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }
}
