use serde::{Deserialize, Serialize};

use super::{Dataset, LtrError, Scorer, Trainer};

/// `alpha · h(x)` where `h = 1[x_f > θ]` for direction 1 and `1 − that` for −1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostRound {
    pub feature: usize,
    pub threshold: f64,
    pub direction: i8,
    pub alpha: f64,
}

impl BoostRound {
    pub fn weak(&self, x: &[f64]) -> f64 {
        let above = x[self.feature] > self.threshold;
        if above == (self.direction > 0) { 1.0 } else { 0.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub rounds: Vec<BoostRound>,
}

impl BoostModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.rounds.iter().map(|r| r.alpha * r.weak(x)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankBoost {
    pub rounds: usize,
}

impl Default for RankBoost {
    fn default() -> Self {
        RankBoost { rounds: 100 }
    }
}

const R_CAP: f64 = 1.0 - 1e-10;
const R_MIN: f64 = 1e-12;

/// State of a boosting run, exposed so the pair distribution can be observed.
pub struct BoostState {
    docs: Vec<Vec<f64>>,
    pairs: Vec<(usize, usize)>,
    pub distribution: Vec<f64>,
    sorted: Vec<Vec<usize>>,
}

impl BoostState {
    pub fn new(data: &Dataset) -> Result<Self, LtrError> {
        let mut docs = Vec::new();
        let mut pairs = Vec::new();
        for g in &data.groups {
            let base = docs.len();
            docs.extend(g.features.iter().cloned());
            pairs.extend(g.preference_pairs().into_iter().map(|(i, j)| (base + i, base + j)));
        }
        if pairs.is_empty() {
            return Err(LtrError::NoPreferencePairs);
        }
        let sorted = (0..data.dim)
            .map(|f| {
                let mut idx: Vec<usize> = (0..docs.len()).collect();
                idx.sort_by(|&a, &b| docs[b][f].total_cmp(&docs[a][f]));
                idx
            })
            .collect();
        let n = pairs.len() as f64;
        Ok(BoostState { distribution: vec![1.0 / n; pairs.len()], docs, pairs, sorted })
    }

    /// Best weak ranker under the current distribution, with its `r`.
    fn best_weak(&self) -> Option<(usize, f64, i8, f64)> {
        let mut pi = vec![0.0; self.docs.len()];
        for (&(top, bottom), &d) in self.pairs.iter().zip(&self.distribution) {
            pi[top] += d;
            pi[bottom] -= d;
        }
        let mut best: Option<(usize, f64, i8, f64)> = None;
        for (f, order) in self.sorted.iter().enumerate() {
            let mut cum = 0.0;
            let mut i = 0;
            while i < order.len() {
                let v = self.docs[order[i]][f];
                while i < order.len() && self.docs[order[i]][f] == v {
                    cum += pi[order[i]];
                    i += 1;
                }
                if i == order.len() {
                    break;
                }
                let theta = self.docs[order[i]][f];
                let (dir, r) = if cum >= 0.0 { (1, cum) } else { (-1, -cum) };
                if best.is_none_or(|b| r > b.3) {
                    best = Some((f, theta, dir, r));
                }
            }
        }
        best
    }

    /// One boosting round; `None` when no weak ranker has positive `r`.
    pub fn step(&mut self) -> Option<BoostRound> {
        let (feature, threshold, direction, r) = self.best_weak()?;
        if r <= R_MIN {
            return None;
        }
        let r = r.min(R_CAP);
        let alpha = 0.5 * ((1.0 + r) / (1.0 - r)).ln();
        let round = BoostRound { feature, threshold, direction, alpha };
        for (d, &(top, bottom)) in self.distribution.iter_mut().zip(&self.pairs) {
            *d *= (-alpha * (round.weak(&self.docs[top]) - round.weak(&self.docs[bottom]))).exp();
        }
        let z: f64 = self.distribution.iter().sum();
        self.distribution.iter_mut().for_each(|d| *d /= z);
        Some(round)
    }
}

impl RankBoost {
    pub fn train(&self, data: &Dataset) -> Result<BoostModel, LtrError> {
        let mut state = BoostState::new(data)?;
        let mut rounds = Vec::with_capacity(self.rounds);
        for _ in 0..self.rounds {
            match state.step() {
                Some(r) => rounds.push(r),
                None => break,
            }
        }
        Ok(BoostModel { rounds })
    }
}

impl Trainer for RankBoost {
    fn name(&self) -> &str {
        "RankBoost"
    }

    fn fit(&self, data: &Dataset) -> Result<Scorer, LtrError> {
        self.train(data).map(Scorer::Boost)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups = (0..8)
            .map(|_| {
                (0..5)
                    .map(|_| (rng.random_range(0..3u32), (0..3).map(|_| rng.random_range(0..4) as f64).collect()))
                    .collect()
            })
            .collect();
        Dataset::from_rows(3, groups)
    }

    #[test]
    fn perfect_weak_ranker() {
        let data = Dataset::from_rows(
            2,
            vec![vec![(1, vec![0.9, 0.3]), (0, vec![0.2, 0.5]), (0, vec![0.1, 0.1])], vec![(1, vec![0.7, 0.0]), (0, vec![0.4, 0.9])]],
        );
        let m = RankBoost { rounds: 1 }.train(&data).unwrap();
        assert_eq!(m.rounds.len(), 1);
        assert_eq!(m.rounds[0].feature, 0);
        assert!(m.rounds[0].alpha.is_finite());
        assert!((m.rounds[0].alpha - 0.5 * ((2.0 - 1e-10) / 1e-10f64).ln()).abs() < 1e-6);
        assert_eq!(data.pairwise_error(&Scorer::Boost(m)), 0.0);
    }

    #[test]
    fn distribution_stays_normalized() {
        let data = random_data(4);
        let mut state = BoostState::new(&data).unwrap();
        for _ in 0..30 {
            if state.step().is_none() {
                break;
            }
            let s: f64 = state.distribution.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_rounds_scores_flat() {
        let m = RankBoost { rounds: 0 }.train(&random_data(1)).unwrap();
        assert!(m.rounds.is_empty());
        assert_eq!(m.score(&[1.0, 2.0, 3.0]), 0.0);
    }

    #[test]
    fn chosen_r_matches_brute_force() {
        let data = random_data(9);
        let state = BoostState::new(&data).unwrap();
        let (f, theta, dir, r) = state.best_weak().unwrap();
        let round = BoostRound { feature: f, threshold: theta, direction: dir, alpha: 1.0 };
        let brute: f64 = state
            .pairs
            .iter()
            .zip(&state.distribution)
            .map(|(&(t, b), d)| d * (round.weak(&state.docs[t]) - round.weak(&state.docs[b])))
            .sum();
        assert!((brute - r).abs() < 1e-12);
        for f in 0..3 {
            for v in 0..4 {
                for dir in [1, -1] {
                    let h = BoostRound { feature: f, threshold: f64::from(v), direction: dir, alpha: 1.0 };
                    let rr: f64 = state
                        .pairs
                        .iter()
                        .zip(&state.distribution)
                        .map(|(&(t, b), d)| d * (h.weak(&state.docs[t]) - h.weak(&state.docs[b])))
                        .sum();
                    assert!(rr <= r + 1e-12);
                }
            }
        }
    }
}
