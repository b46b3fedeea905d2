use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, LtrError, Scorer, Trainer};

/// Linear scorer trained on pairwise logistic loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetRankModel {
    pub weights: Vec<f64>,
}

impl NetRankModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankNet {
    pub learning_rate: f64,
    pub epochs: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for RankNet {
    fn default() -> Self {
        RankNet {
            learning_rate: 1.0,
            epochs: 300,
            init_scale: 0.01,
            seed: 42,
        }
    }
}

/// `x_better − x_worse` for every within-query preference pair.
pub fn pair_diffs(data: &Dataset) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for g in &data.groups {
        for (i, j) in g.preference_pairs() {
            out.push(g.features[i].iter().zip(&g.features[j]).map(|(a, b)| a - b).collect());
        }
    }
    out
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 { 1.0 / (1.0 + (-x).exp()) } else { x.exp() / (1.0 + x.exp()) }
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Mean of `ln(1 + exp(−(s_i − s_j)))` over preference pairs.
pub fn ranknet_loss(weights: &[f64], diffs: &[Vec<f64>]) -> f64 {
    diffs.iter().map(|d| softplus(-dot(weights, d))).sum::<f64>() / diffs.len() as f64
}

pub fn ranknet_gradient(weights: &[f64], diffs: &[Vec<f64>]) -> Vec<f64> {
    let mut g = vec![0.0; weights.len()];
    for d in diffs {
        let c = -sigmoid(-dot(weights, d));
        for (gi, di) in g.iter_mut().zip(d) {
            *gi += c * di;
        }
    }
    let n = diffs.len() as f64;
    g.iter_mut().for_each(|x| *x /= n);
    g
}

impl RankNet {
    pub fn train(&self, data: &Dataset) -> Result<NetRankModel, LtrError> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(LtrError::InvalidConfig("learning_rate must be positive"));
        }
        let diffs = pair_diffs(data);
        if diffs.is_empty() {
            return Err(LtrError::NoPreferencePairs);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut w: Vec<f64> = (0..data.dim)
            .map(|_| rng.random_range(-self.init_scale..=self.init_scale))
            .collect();
        for _ in 0..self.epochs {
            let g = ranknet_gradient(&w, &diffs);
            for (wi, gi) in w.iter_mut().zip(g) {
                *wi -= self.learning_rate * gi;
            }
        }
        Ok(NetRankModel { weights: w })
    }
}

impl Trainer for RankNet {
    fn name(&self) -> &str {
        "RankNet"
    }

    fn fit(&self, data: &Dataset) -> Result<Scorer, LtrError> {
        self.train(data).map(Scorer::Net)
    }
}
