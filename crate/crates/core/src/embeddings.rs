//! CBOW word embeddings with negative sampling, centroids and cosine.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, weighted::WeightedIndex};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("no trainable contexts: need a sentence with at least two in-vocabulary tokens")]
    NoTrainableContexts,
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("embedding file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbowConfig {
    pub dim: usize,
    /// Context radius on each side of the target.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Starting rate; decays linearly to 1e-4 of itself over training.
    pub learning_rate: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for CbowConfig {
    fn default() -> Self {
        CbowConfig {
            dim: 64,
            window: 4,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 2,
            seed: 42,
        }
    }
}

impl CbowConfig {
    fn validate(&self) -> Result<(), EmbeddingError> {
        let checks = [
            (self.dim > 0, "dim must be positive"),
            (self.window > 0, "window must be positive"),
            (self.negatives > 0, "negatives must be positive"),
            (self.epochs > 0, "epochs must be positive"),
            (self.learning_rate > 0.0, "learning_rate must be positive"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(EmbeddingError::InvalidConfig(msg)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: HashMap<String, usize>,
    words: Vec<String>,
    vectors: Vec<f64>,
    dim: usize,
}

impl EmbeddingTable {
    /// Builds a table directly from rows; mostly useful for fixtures.
    pub fn from_rows(rows: Vec<(String, Vec<f64>)>) -> Result<Self, EmbeddingError> {
        let dim = rows.first().map_or(0, |r| r.1.len());
        let mut table = EmbeddingTable {
            vocab: HashMap::new(),
            words: Vec::new(),
            vectors: Vec::new(),
            dim,
        };
        for (word, row) in rows {
            if row.len() != dim {
                return Err(EmbeddingError::LengthMismatch(row.len(), dim));
            }
            table.vocab.insert(word.clone(), table.words.len());
            table.words.push(word);
            table.vectors.extend(row);
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vocab.contains_key(token)
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vocab
            .get(token)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Mean of the in-vocabulary rows; the zero vector when none are present.
    pub fn centroid(&self, tokens: &[String]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let mut n = 0usize;
        for row in tokens.iter().filter_map(|t| self.get(t)) {
            for (o, x) in out.iter_mut().zip(row) {
                *o += x;
            }
            n += 1;
        }
        if n > 0 {
            let inv = n as f64;
            out.iter_mut().for_each(|o| *o /= inv);
        }
        out
    }

    /// Text vector format: `<vocab_size> <dim>` then `token v1 v2 ...` per line.
    pub fn write_to(&self, w: impl Write) -> Result<(), EmbeddingError> {
        let mut w = BufWriter::new(w);
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (i, word) in self.words.iter().enumerate() {
            write!(w, "{word}")?;
            for x in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(r: impl std::io::Read) -> Result<Self, EmbeddingError> {
        let fmt = |line: usize, message: String| EmbeddingError::Format { line, message };
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().ok_or_else(|| fmt(1, "empty file".into()))??;
        let (n, dim) = header
            .split_once(' ')
            .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
            .ok_or_else(|| fmt(1, format!("bad header {header:?}")))?;
        let mut rows = Vec::with_capacity(n);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let mut parts = line.split(' ');
            let word = parts.next().unwrap_or_default().to_string();
            let row = parts
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| fmt(i + 2, e.to_string()))?;
            if row.len() != dim {
                return Err(fmt(i + 2, format!("expected {dim} values, got {}", row.len())));
            }
            rows.push((word, row));
        }
        if rows.len() != n {
            return Err(fmt(1, format!("header declares {n} rows, found {}", rows.len())));
        }
        let mut table = Self::from_rows(rows)?;
        table.dim = dim;
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
        self.write_to(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Cosine similarity; 0.0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::LengthMismatch(u.len(), v.len()));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct TrainedEmbeddings {
    pub table: EmbeddingTable,
    /// Mean negative-sampling loss per target, one entry per epoch.
    pub epoch_loss: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Trains CBOW embeddings: the averaged context vector predicts the target
/// against `negatives` noise words drawn from the unigram^0.75 distribution.
pub fn train_cbow(
    sentences: &[Vec<String>],
    config: &CbowConfig,
) -> Result<TrainedEmbeddings, EmbeddingError> {
    config.validate()?;
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in sentences {
        for t in s {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut vocab: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= config.min_count.max(1))
        .collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let lookup: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (w.0, i)).collect();

    let corpus: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().filter_map(|t| lookup.get(t.as_str()).copied()).collect())
        .filter(|s: &Vec<usize>| s.len() >= 2)
        .collect();
    if corpus.is_empty() {
        return Err(EmbeddingError::NoTrainableContexts);
    }

    let dim = config.dim;
    let v = vocab.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut input: Vec<f64> = (0..v * dim)
        .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut output = vec![0.0f64; v * dim];
    let noise = WeightedIndex::new(vocab.iter().map(|w| (w.1 as f64).powf(0.75)))
        .expect("vocabulary weights are positive");

    let total_steps = (config.epochs * corpus.iter().map(Vec::len).sum::<usize>()) as f64;
    let mut step = 0usize;
    let mut hidden = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut epoch_loss = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let mut loss = 0.0;
        let mut targets = 0usize;
        for sent in &corpus {
            for pos in 0..sent.len() {
                let lr = config.learning_rate * (1.0 - step as f64 / total_steps).max(1e-4);
                step += 1;
                let shrink = rng.random_range(0..config.window);
                let radius = config.window - shrink;
                let lo = pos.saturating_sub(radius);
                let hi = (pos + radius + 1).min(sent.len());
                let context: Vec<usize> = (lo..hi).filter(|&c| c != pos).map(|c| sent[c]).collect();
                if context.is_empty() {
                    continue;
                }
                hidden.iter_mut().for_each(|h| *h = 0.0);
                for &c in &context {
                    for (h, x) in hidden.iter_mut().zip(&input[c * dim..(c + 1) * dim]) {
                        *h += x;
                    }
                }
                let inv = 1.0 / context.len() as f64;
                hidden.iter_mut().for_each(|h| *h *= inv);
                grad.iter_mut().for_each(|g| *g = 0.0);

                let target = sent[pos];
                for k in 0..=config.negatives {
                    let (word, label) = if k == 0 {
                        (target, 1.0)
                    } else {
                        let w = noise.sample(&mut rng);
                        if w == target {
                            continue;
                        }
                        (w, 0.0)
                    };
                    let row = &mut output[word * dim..(word + 1) * dim];
                    let f = sigmoid(dot(&hidden, row));
                    loss -= if label > 0.0 { f.max(1e-12).ln() } else { (1.0 - f).max(1e-12).ln() };
                    let g = (label - f) * lr;
                    for ((e, o), h) in grad.iter_mut().zip(row.iter_mut()).zip(&hidden) {
                        *e += g * *o;
                        *o += g * h;
                    }
                }
                for &c in &context {
                    for (x, e) in input[c * dim..(c + 1) * dim].iter_mut().zip(&grad) {
                        *x += e;
                    }
                }
                targets += 1;
            }
        }
        epoch_loss.push(loss / targets.max(1) as f64);
    }

    let rows = vocab
        .iter()
        .enumerate()
        .map(|(i, w)| (w.0.to_string(), input[i * dim..(i + 1) * dim].to_vec()))
        .collect();
    Ok(TrainedEmbeddings {
        table: EmbeddingTable::from_rows(rows)?,
        epoch_loss,
    })
}
