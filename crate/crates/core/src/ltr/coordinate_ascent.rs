use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, LtrError, QueryGroup, Scorer, Trainer, stable_order};
use crate::eval::{dcg_at_k, ndcg_labels};
use crate::exec::Execution;

/// Weighted sum of features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
}

impl LinearModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum()
    }
}

/// Cyclic coordinate search maximizing training NDCG@k.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateAscent {
    pub k: usize,
    pub restarts: usize,
    pub step: f64,
    pub step_doublings: u32,
    pub tolerance: f64,
    pub max_cycles: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for CoordinateAscent {
    fn default() -> Self {
        CoordinateAscent {
            k: 10,
            restarts: 5,
            step: 0.05,
            step_doublings: 10,
            tolerance: 1e-6,
            max_cycles: 25,
            seed: 42,
            exec: Execution::default(),
        }
    }
}

/// Groups with at least one preference pair and their ideal DCG.
struct Objective<'a> {
    groups: Vec<(&'a QueryGroup, f64)>,
    k: usize,
}

impl<'a> Objective<'a> {
    fn new(data: &'a Dataset, k: usize) -> Self {
        let groups = data
            .groups
            .iter()
            .filter(|g| g.has_preferences())
            .map(|g| {
                let mut ideal = g.labels.clone();
                ideal.sort_unstable_by(|a, b| b.cmp(a));
                (g, dcg_at_k(&ideal, k))
            })
            .collect();
        Objective { groups, k }
    }

    fn scores(&self, w: &[f64]) -> Vec<Vec<f64>> {
        self.groups
            .iter()
            .map(|(g, _)| g.features.iter().map(|x| w.iter().zip(x).map(|(a, b)| a * b).sum()).collect())
            .collect()
    }

    fn eval(&self, scores: &[Vec<f64>]) -> f64 {
        let total: f64 = self
            .groups
            .iter()
            .zip(scores)
            .map(|((g, idcg), s)| dcg_at_k(&g.ranked_labels(s), self.k) / idcg)
            .sum();
        total / self.groups.len() as f64
    }
}

impl CoordinateAscent {
    fn grid(&self) -> Vec<f64> {
        let mut g = vec![0.0];
        for k in 0..self.step_doublings {
            let s = self.step * f64::from(1u32 << k);
            g.push(s);
            g.push(-s);
        }
        g
    }

    fn initial(&self, restart: usize, dim: usize) -> Vec<f64> {
        if restart == 0 {
            return vec![1.0 / dim as f64; dim];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(restart as u64));
        let w: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    }

    fn climb(&self, obj: &Objective, mut w: Vec<f64>) -> (Vec<f64>, f64) {
        let grid = self.grid();
        let mut scores = obj.scores(&w);
        let mut best = obj.eval(&scores);
        for _ in 0..self.max_cycles {
            let mut improved = false;
            for j in 0..w.len() {
                let mut pick = (0.0, best);
                for &delta in &grid[1..] {
                    let trial: Vec<Vec<f64>> = obj
                        .groups
                        .iter()
                        .zip(&scores)
                        .map(|((g, _), s)| s.iter().zip(&g.features).map(|(v, x)| v + delta * x[j]).collect())
                        .collect();
                    let m = obj.eval(&trial);
                    if m > pick.1 {
                        pick = (delta, m);
                    }
                }
                if pick.1 > best + self.tolerance {
                    w[j] += pick.0;
                    for ((g, _), s) in obj.groups.iter().zip(scores.iter_mut()) {
                        for (v, x) in s.iter_mut().zip(&g.features) {
                            *v += pick.0 * x[j];
                        }
                    }
                    best = pick.1;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        let l1: f64 = w.iter().map(|x| x.abs()).sum();
        if l1 > 0.0 {
            w.iter_mut().for_each(|x| *x /= l1);
        }
        (w, best)
    }

    /// Training NDCG@k of `weights`, averaged over groups with preferences.
    pub fn objective(&self, data: &Dataset, weights: &[f64]) -> Option<f64> {
        let vals: Vec<f64> = data
            .groups
            .iter()
            .filter(|g| g.has_preferences())
            .filter_map(|g| {
                let s: Vec<f64> = g.features.iter().map(|x| LinearModel { weights: weights.to_vec() }.score(x)).collect();
                ndcg_labels(&stable_order(&s).into_iter().map(|i| g.labels[i]).collect::<Vec<_>>(), self.k)
            })
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn train(&self, data: &Dataset) -> Result<LinearModel, LtrError> {
        if self.restarts == 0 || self.k == 0 || self.step <= 0.0 {
            return Err(LtrError::InvalidConfig("restarts, k and step must be positive"));
        }
        if data.dim == 0 {
            return Err(LtrError::InvalidConfig("no features selected"));
        }
        let obj = Objective::new(data, self.k);
        if obj.groups.is_empty() {
            return Err(LtrError::NoPreferencePairs);
        }
        let runs = self.exec.map_range(self.restarts, |r| self.climb(&obj, self.initial(r, data.dim)));
        let mut best = 0;
        for (i, run) in runs.iter().enumerate() {
            if run.1 > runs[best].1 {
                best = i;
            }
        }
        Ok(LinearModel { weights: runs.into_iter().nth(best).map(|r| r.0).unwrap_or_default() })
    }
}

impl Trainer for CoordinateAscent {
    fn name(&self) -> &str {
        "CoordinateAscent"
    }

    fn fit(&self, data: &Dataset) -> Result<Scorer, LtrError> {
        self.train(data).map(Scorer::Linear)
    }
}
