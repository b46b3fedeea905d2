//! Convolutional siamese semantic scorer over word embeddings (F7).
//!
//! `tokens -> embedding lookup -> window conv (tanh) -> max-pool -> dense (tanh)`
//! maps a query or a document into a semantic vector; the feature is the
//! cosine between the two vectors. Training maximizes the softmax likelihood
//! of the clicked document against `J` unclicked ones:
//!
//! `P(d+|q) = exp(γ cos(q, d+)) / Σ_d exp(γ cos(q, d))`.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::ClickPair;
use crate::embeddings::EmbeddingTable;
use crate::exec::Execution;

const MODEL_MAGIC: &str = "clickrank-deep";
pub const MODEL_VERSION: u32 = 1;
const PAD: u32 = 0;
const UNK: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DeepError {
    #[error("no training pairs")]
    EmptyTrainingSet,
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
    #[error("model file: {0}")]
    Format(String),
    #[error("model signature {found} does not match expected {expected}")]
    SignatureMismatch { found: Signature, expected: Signature },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Architecture dimensions; two models are interchangeable only when equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub word_dim: usize,
    pub window: usize,
    pub conv_dim: usize,
    pub sem_dim: usize,
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "d_w={} w={} d_c={} d_s={}",
            self.word_dim, self.window, self.conv_dim, self.sem_dim
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepConfig {
    pub word_dim: usize,
    /// Convolution window, odd.
    pub window: usize,
    pub conv_dim: usize,
    pub sem_dim: usize,
    pub gamma: f64,
    /// Negatives per clicked pair (J).
    pub negatives: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Copy rows from a trained [`EmbeddingTable`] into the word table when
    /// dimensions agree.
    pub init_from_embeddings: bool,
}

impl Default for DeepConfig {
    fn default() -> Self {
        DeepConfig {
            word_dim: 64,
            window: 3,
            conv_dim: 128,
            sem_dim: 64,
            gamma: 10.0,
            negatives: 4,
            learning_rate: 1.0,
            epochs: 5,
            batch_size: 16,
            seed: 42,
            init_from_embeddings: false,
        }
    }
}

/// Four shipped `(conv_dim, sem_dim)` presets, selectable by number 1–4.
pub const PRESETS: [(usize, usize); 4] = [(128, 64), (64, 32), (256, 128), (128, 32)];

impl DeepConfig {
    pub fn preset(n: usize) -> Option<Self> {
        let &(conv_dim, sem_dim) = PRESETS.get(n.checked_sub(1)?)?;
        Some(DeepConfig {
            conv_dim,
            sem_dim,
            ..Default::default()
        })
    }

    pub fn signature(&self) -> Signature {
        Signature {
            word_dim: self.word_dim,
            window: self.window,
            conv_dim: self.conv_dim,
            sem_dim: self.sem_dim,
        }
    }

    fn validate(&self) -> Result<(), DeepError> {
        let s = self.signature();
        if s.word_dim == 0 || s.conv_dim == 0 || s.sem_dim == 0 {
            return Err(DeepError::InvalidConfig("dimensions must be positive"));
        }
        if s.window.is_multiple_of(2) {
            return Err(DeepError::InvalidConfig("window must be odd"));
        }
        if self.negatives == 0 || self.batch_size == 0 {
            return Err(DeepError::InvalidConfig("negatives and batch_size must be positive"));
        }
        if !(self.gamma > 0.0 && self.learning_rate > 0.0) {
            return Err(DeepError::InvalidConfig("gamma and learning_rate must be positive"));
        }
        Ok(())
    }
}

/// One clicked query/document with its sampled negatives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainPair {
    pub query: Vec<String>,
    pub positive: Vec<String>,
    pub negatives: Vec<Vec<String>>,
}

/// Builds one [`TrainPair`] per clicked pair. Negatives come from the query's
/// recorded unclicked documents first, topped up with uniform random documents.
pub fn sample_train_pairs(pairs: &[ClickPair], negatives: usize, seed: u64) -> Vec<TrainPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs = crate::corpus::documents(pairs);
    let mut unclicked: HashMap<String, Vec<usize>> = HashMap::new();
    let doc_pos: HashMap<&str, usize> =
        docs.iter().enumerate().map(|(i, d)| (d.0.as_str(), i)).collect();
    for p in pairs.iter().filter(|p| !p.is_clicked()) {
        unclicked.entry(p.query_key()).or_default().push(doc_pos[p.doc_id.as_str()]);
    }
    let mut out = Vec::new();
    for p in pairs.iter().filter(|p| p.is_clicked()) {
        let pos = doc_pos[p.doc_id.as_str()];
        let mut chosen: Vec<usize> = unclicked.get(&p.query_key()).cloned().unwrap_or_default();
        chosen.shuffle(&mut rng);
        chosen.truncate(negatives);
        let mut taken: HashSet<usize> = chosen.iter().copied().collect();
        taken.insert(pos);
        let mut attempts = 0;
        while chosen.len() < negatives && docs.len() > 1 && attempts < 100 * negatives {
            attempts += 1;
            let d = rng.random_range(0..docs.len());
            if taken.insert(d) || (taken.len() >= docs.len() && d != pos) {
                chosen.push(d);
            }
        }
        out.push(TrainPair {
            query: p.query.clone(),
            positive: p.doc_tokens.clone(),
            negatives: chosen.into_iter().map(|d| docs[d].1.clone()).collect(),
        });
    }
    out
}

/// All trainable parameters, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// `rows × word_dim`; row 0 is padding, row 1 is unknown.
    pub embedding: Vec<f64>,
    /// `conv_dim × (window · word_dim)`.
    pub conv_w: Vec<f64>,
    pub conv_b: Vec<f64>,
    /// `sem_dim × conv_dim`.
    pub proj_w: Vec<f64>,
    pub proj_b: Vec<f64>,
}

impl Params {
    fn zeros_like(&self) -> Self {
        Params {
            embedding: vec![0.0; self.embedding.len()],
            conv_w: vec![0.0; self.conv_w.len()],
            conv_b: vec![0.0; self.conv_b.len()],
            proj_w: vec![0.0; self.proj_w.len()],
            proj_b: vec![0.0; self.proj_b.len()],
        }
    }

    pub fn groups(&self) -> [&Vec<f64>; 5] {
        [&self.embedding, &self.conv_w, &self.conv_b, &self.proj_w, &self.proj_b]
    }

    pub fn groups_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.embedding,
            &mut self.conv_w,
            &mut self.conv_b,
            &mut self.proj_w,
            &mut self.proj_b,
        ]
    }

    pub fn len(&self) -> usize {
        self.groups().iter().map(|g| g.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn is_finite(&self) -> bool {
        self.groups().iter().all(|g| g.iter().all(|x| x.is_finite()))
    }
}

/// Gradient of the loss for one pair. Embedding rows are sparse.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub embedding: HashMap<u32, Vec<f64>>,
    pub conv_w: Vec<f64>,
    pub conv_b: Vec<f64>,
    pub proj_w: Vec<f64>,
    pub proj_b: Vec<f64>,
}

impl Gradient {
    fn zeros(p: &Params) -> Self {
        let z = p.zeros_like();
        Gradient {
            embedding: HashMap::new(),
            conv_w: z.conv_w,
            conv_b: z.conv_b,
            proj_w: z.proj_w,
            proj_b: z.proj_b,
        }
    }

    fn add(&mut self, other: &Gradient) {
        for (row, g) in &other.embedding {
            let dst = self
                .embedding
                .entry(*row)
                .or_insert_with(|| vec![0.0; g.len()]);
            dst.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        for (a, b) in [
            (&mut self.conv_w, &other.conv_w),
            (&mut self.conv_b, &other.conv_b),
            (&mut self.proj_w, &other.proj_w),
            (&mut self.proj_b, &other.proj_b),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    /// Dense view in the same order as [`Params::groups`].
    pub fn to_dense(&self, like: &Params, word_dim: usize) -> Params {
        let mut emb = vec![0.0; like.embedding.len()];
        for (&row, g) in &self.embedding {
            let r = row as usize * word_dim;
            emb[r..r + word_dim].copy_from_slice(g);
        }
        Params {
            embedding: emb,
            conv_w: self.conv_w.clone(),
            conv_b: self.conv_b.clone(),
            proj_w: self.proj_w.clone(),
            proj_b: self.proj_b.clone(),
        }
    }
}

struct Trace {
    ids: Vec<u32>,
    conv: Vec<f64>,
    argmax: Vec<usize>,
    pooled: Vec<f64>,
    out: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticNet {
    sig: Signature,
    gamma: f64,
    vocab: HashMap<String, u32>,
    words: Vec<String>,
    params: Params,
}

#[derive(Debug, Clone)]
pub struct TrainedNet {
    pub net: SemanticNet,
    pub epoch_loss: Vec<f64>,
}

fn cosine_with_grad(a: &[f64], b: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return (0.0, vec![0.0; a.len()], vec![0.0; b.len()]);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let c = dot / (na * nb);
    let ga = a.iter().zip(b).map(|(x, y)| y / (na * nb) - c * x / (na * na)).collect();
    let gb = a.iter().zip(b).map(|(x, y)| x / (na * nb) - c * y / (nb * nb)).collect();
    (c, ga, gb)
}

impl SemanticNet {
    /// Randomly initialized network over `words` (padding and unknown rows are
    /// added in front).
    pub fn init(words: Vec<String>, config: &DeepConfig, rng: &mut impl Rng) -> Result<Self, DeepError> {
        config.validate()?;
        let sig = config.signature();
        let rows = words.len() + 2;
        let fan_in = sig.window * sig.word_dim;
        let conv_scale = (6.0 / (fan_in + sig.conv_dim) as f64).sqrt();
        let proj_scale = (6.0 / (sig.conv_dim + sig.sem_dim) as f64).sqrt();
        let mut uniform = |n: usize, s: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(-s..s)).collect() };
        let mut embedding = uniform(rows * sig.word_dim, 0.5);
        embedding[..sig.word_dim].iter_mut().for_each(|x| *x = 0.0);
        let params = Params {
            embedding,
            conv_w: uniform(sig.conv_dim * fan_in, conv_scale),
            conv_b: vec![0.0; sig.conv_dim],
            proj_w: uniform(sig.sem_dim * sig.conv_dim, proj_scale),
            proj_b: vec![0.0; sig.sem_dim],
        };
        Self::from_parts(words, sig, config.gamma, params)
    }

    pub fn from_parts(words: Vec<String>, sig: Signature, gamma: f64, params: Params) -> Result<Self, DeepError> {
        let rows = words.len() + 2;
        let expect = [
            rows * sig.word_dim,
            sig.conv_dim * sig.window * sig.word_dim,
            sig.conv_dim,
            sig.sem_dim * sig.conv_dim,
            sig.sem_dim,
        ];
        let got = params.groups().map(|g| g.len());
        if expect != got {
            return Err(DeepError::Format(format!(
                "parameter sizes {got:?} do not fit signature {sig} with {rows} rows"
            )));
        }
        let vocab = words.iter().enumerate().map(|(i, w)| (w.clone(), i as u32 + 2)).collect();
        Ok(SemanticNet {
            sig,
            gamma,
            vocab,
            words,
            params,
        })
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn vocab_len(&self) -> usize {
        self.words.len()
    }

    fn encode(&self, tokens: &[String]) -> Vec<u32> {
        let mut ids: Vec<u32> = tokens
            .iter()
            .map(|t| self.vocab.get(t).copied().unwrap_or(UNK))
            .collect();
        let w = self.sig.window;
        if ids.len() < w {
            let pad = w - ids.len();
            let left = pad / 2;
            let mut padded = vec![PAD; left];
            padded.extend(ids);
            padded.resize(w, PAD);
            ids = padded;
        }
        ids
    }

    fn trace(&self, tokens: &[String]) -> Trace {
        let Signature { word_dim: dw, window: w, conv_dim: dc, sem_dim: ds } = self.sig;
        let p = &self.params;
        let ids = self.encode(tokens);
        let positions = ids.len() - w + 1;
        let fan_in = w * dw;
        let mut window = vec![0.0; fan_in];
        let mut conv = vec![0.0; positions * dc];
        for pos in 0..positions {
            for (k, &id) in ids[pos..pos + w].iter().enumerate() {
                let r = id as usize * dw;
                window[k * dw..(k + 1) * dw].copy_from_slice(&p.embedding[r..r + dw]);
            }
            for c in 0..dc {
                let row = &p.conv_w[c * fan_in..(c + 1) * fan_in];
                let z: f64 = row.iter().zip(&window).map(|(a, b)| a * b).sum::<f64>() + p.conv_b[c];
                conv[pos * dc + c] = z.tanh();
            }
        }
        let mut argmax = vec![0usize; dc];
        let mut pooled = vec![f64::NEG_INFINITY; dc];
        for pos in 0..positions {
            for c in 0..dc {
                if conv[pos * dc + c] > pooled[c] {
                    pooled[c] = conv[pos * dc + c];
                    argmax[c] = pos;
                }
            }
        }
        let out = (0..ds)
            .map(|s| {
                let row = &p.proj_w[s * dc..(s + 1) * dc];
                (row.iter().zip(&pooled).map(|(a, b)| a * b).sum::<f64>() + p.proj_b[s]).tanh()
            })
            .collect();
        Trace { ids, conv, argmax, pooled, out }
    }

    #[allow(clippy::needless_range_loop)]
    fn backward(&self, t: &Trace, d_out: &[f64], grad: &mut Gradient) {
        let Signature { word_dim: dw, window: w, conv_dim: dc, sem_dim: ds } = self.sig;
        let p = &self.params;
        let fan_in = w * dw;
        let mut d_pooled = vec![0.0; dc];
        for s in 0..ds {
            let dz = d_out[s] * (1.0 - t.out[s] * t.out[s]);
            if dz == 0.0 {
                continue;
            }
            grad.proj_b[s] += dz;
            let row = s * dc;
            for c in 0..dc {
                grad.proj_w[row + c] += dz * t.pooled[c];
                d_pooled[c] += dz * p.proj_w[row + c];
            }
        }
        for c in 0..dc {
            let pos = t.argmax[c];
            let h = t.conv[pos * dc + c];
            let dh = d_pooled[c] * (1.0 - h * h);
            if dh == 0.0 {
                continue;
            }
            grad.conv_b[c] += dh;
            let wrow = c * fan_in;
            for (k, &id) in t.ids[pos..pos + w].iter().enumerate() {
                let e = id as usize * dw;
                let demb = grad.embedding.entry(id).or_insert_with(|| vec![0.0; dw]);
                for j in 0..dw {
                    grad.conv_w[wrow + k * dw + j] += dh * p.embedding[e + j];
                    demb[j] += dh * p.conv_w[wrow + k * dw + j];
                }
            }
        }
    }

    /// Semantic vector of a token sequence; components lie in (−1, 1).
    pub fn forward(&self, tokens: &[String]) -> Vec<f64> {
        self.trace(tokens).out
    }

    /// Cosine between two semantic vectors (F7).
    pub fn score_vectors(q: &[f64], d: &[f64]) -> f64 {
        cosine_with_grad(q, d).0.clamp(-1.0, 1.0)
    }

    pub fn score(&self, query: &[String], doc: &[String]) -> f64 {
        Self::score_vectors(&self.forward(query), &self.forward(doc))
    }

    /// Probability of the positive under the γ-smoothed softmax, and the
    /// per-candidate cosines (positive first).
    pub fn posterior(&self, pair: &TrainPair) -> (f64, Vec<f64>) {
        let q = self.forward(&pair.query);
        let cos: Vec<f64> = std::iter::once(&pair.positive)
            .chain(&pair.negatives)
            .map(|d| Self::score_vectors(&q, &self.forward(d)))
            .collect();
        (softmax(&cos, self.gamma)[0], cos)
    }

    /// `−ln P(d+|q)` and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, pair: &TrainPair) -> (f64, Gradient) {
        let mut grad = Gradient::zeros(&self.params);
        let tq = self.trace(&pair.query);
        let docs: Vec<Trace> = std::iter::once(&pair.positive)
            .chain(&pair.negatives)
            .map(|d| self.trace(d))
            .collect();
        let parts: Vec<(f64, Vec<f64>, Vec<f64>)> =
            docs.iter().map(|d| cosine_with_grad(&tq.out, &d.out)).collect();
        let cos: Vec<f64> = parts.iter().map(|p| p.0).collect();
        let probs = softmax(&cos, self.gamma);
        let loss = -probs[0].max(f64::MIN_POSITIVE).ln();

        let mut d_q = vec![0.0; self.sig.sem_dim];
        for (i, ((_, ga, gb), doc)) in parts.iter().zip(&docs).enumerate() {
            let dcos = self.gamma * (probs[i] - if i == 0 { 1.0 } else { 0.0 });
            if dcos == 0.0 {
                continue;
            }
            d_q.iter_mut().zip(ga).for_each(|(a, g)| *a += dcos * g);
            let d_doc: Vec<f64> = gb.iter().map(|g| dcos * g).collect();
            self.backward(doc, &d_doc, &mut grad);
        }
        self.backward(&tq, &d_q, &mut grad);
        (loss, grad)
    }

    fn apply(&mut self, grad: &Gradient, step: f64) {
        let dw = self.sig.word_dim;
        let mut rows: Vec<_> = grad.embedding.iter().collect();
        rows.sort_by_key(|(r, _)| **r);
        for (&row, g) in rows {
            let r = row as usize * dw;
            self.params.embedding[r..r + dw]
                .iter_mut()
                .zip(g)
                .for_each(|(x, d)| *x -= step * d);
        }
        for (x, g) in [
            (&mut self.params.conv_w, &grad.conv_w),
            (&mut self.params.conv_b, &grad.conv_b),
            (&mut self.params.proj_w, &grad.proj_w),
            (&mut self.params.proj_b, &grad.proj_b),
        ] {
            x.iter_mut().zip(g).for_each(|(a, d)| *a -= step * d);
        }
    }

    /// Writes a plain-text header (`key=value` lines and the vocabulary), a
    /// `params=<count>` line, then `count` little-endian f64 values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        let s = self.sig;
        out.push_str(&format!("{MODEL_MAGIC} {MODEL_VERSION}\n"));
        out.push_str(&format!("word_dim={}\nwindow={}\nconv_dim={}\nsem_dim={}\n", s.word_dim, s.window, s.conv_dim, s.sem_dim));
        out.push_str(&format!("gamma={}\nvocab={}\n", self.gamma, self.words.len()));
        for w in &self.words {
            out.push_str(w);
            out.push('\n');
        }
        out.push_str(&format!("params={}\n", self.params.len()));
        let mut bytes = out.into_bytes();
        for g in self.params.groups() {
            for x in g {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DeepError> {
        let bad = |m: &str| DeepError::Format(m.to_string());
        let mut cursor = 0usize;
        let header = read_line(bytes, &mut cursor)?;
        let version: u32 = header
            .strip_prefix(MODEL_MAGIC)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad("bad magic"))?;
        if version != MODEL_VERSION {
            return Err(DeepError::Format(format!("model version {version}, expected {MODEL_VERSION}")));
        }
        let field = |name: &str, cursor: &mut usize| -> Result<String, DeepError> {
            let line = read_line(bytes, cursor)?;
            line.strip_prefix(name)
                .and_then(|r| r.strip_prefix('='))
                .map(String::from)
                .ok_or_else(|| DeepError::Format(format!("expected {name}=, got {line:?}")))
        };
        let num = |s: String| s.parse::<usize>().map_err(|_| bad("bad integer"));
        let sig = Signature {
            word_dim: num(field("word_dim", &mut cursor)?)?,
            window: num(field("window", &mut cursor)?)?,
            conv_dim: num(field("conv_dim", &mut cursor)?)?,
            sem_dim: num(field("sem_dim", &mut cursor)?)?,
        };
        let gamma: f64 = field("gamma", &mut cursor)?.parse().map_err(|_| bad("bad gamma"))?;
        let n_vocab = num(field("vocab", &mut cursor)?)?;
        let mut words = Vec::with_capacity(n_vocab);
        for _ in 0..n_vocab {
            words.push(read_line(bytes, &mut cursor)?.to_string());
        }
        let n_params = num(field("params", &mut cursor)?)?;
        let blob = &bytes[cursor..];
        if blob.len() != n_params * 8 {
            return Err(DeepError::Format(format!(
                "expected {} parameter bytes, found {}",
                n_params * 8,
                blob.len()
            )));
        }
        let mut values = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        let rows = n_vocab + 2;
        let sizes = [
            rows * sig.word_dim,
            sig.conv_dim * sig.window * sig.word_dim,
            sig.conv_dim,
            sig.sem_dim * sig.conv_dim,
            sig.sem_dim,
        ];
        if sizes.iter().sum::<usize>() != n_params {
            return Err(DeepError::Format(format!("parameter count {n_params} does not fit signature {sig}")));
        }
        let mut take = |n: usize| values.by_ref().take(n).collect::<Vec<f64>>();
        let params = Params {
            embedding: take(sizes[0]),
            conv_w: take(sizes[1]),
            conv_b: take(sizes[2]),
            proj_w: take(sizes[3]),
            proj_b: take(sizes[4]),
        };
        Self::from_parts(words, sig, gamma, params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DeepError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DeepError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Loads and refuses a model whose dimensions differ from `expected`.
    pub fn load_expecting(path: impl AsRef<Path>, expected: Signature) -> Result<Self, DeepError> {
        let net = Self::load(path)?;
        if net.sig != expected {
            return Err(DeepError::SignatureMismatch { found: net.sig, expected });
        }
        Ok(net)
    }
}

fn read_line<'a>(bytes: &'a [u8], cursor: &mut usize) -> Result<&'a str, DeepError> {
    let rest = &bytes[*cursor..];
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| DeepError::Format("truncated header".into()))?;
    let line = std::str::from_utf8(&rest[..end]).map_err(|_| DeepError::Format("header is not UTF-8".into()))?;
    *cursor += end + 1;
    Ok(line)
}

fn softmax(cos: &[f64], gamma: f64) -> Vec<f64> {
    let m = cos.iter().fold(f64::NEG_INFINITY, |a, &c| a.max(gamma * c));
    let e: Vec<f64> = cos.iter().map(|&c| (gamma * c - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

/// Vocabulary of a training set, sorted for determinism.
fn training_vocab(pairs: &[TrainPair]) -> Vec<String> {
    let mut words: Vec<String> = pairs
        .iter()
        .flat_map(|p| {
            p.query
                .iter()
                .chain(&p.positive)
                .chain(p.negatives.iter().flatten())
        })
        .cloned()
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    words.sort();
    words
}

/// Mini-batch SGD on the softmax loss. Per-pair gradients within a batch are
/// computed with `exec` and summed in pair order.
pub fn train(
    pairs: &[TrainPair],
    config: &DeepConfig,
    init: Option<&EmbeddingTable>,
    exec: Execution,
) -> Result<TrainedNet, DeepError> {
    if pairs.is_empty() {
        return Err(DeepError::EmptyTrainingSet);
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = SemanticNet::init(training_vocab(pairs), config, &mut rng)?;
    if let Some(table) = init.filter(|t| config.init_from_embeddings && t.dim() == config.word_dim) {
        let dw = config.word_dim;
        for (i, w) in net.words.clone().iter().enumerate() {
            if let Some(row) = table.get(w) {
                let r = (i + 2) * dw;
                net.params.embedding[r..r + dw].copy_from_slice(row);
            }
        }
    }

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut epoch_loss = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let results = exec.map(batch, |&i| net.loss_and_gradient(&pairs[i]));
            let mut grad = Gradient::zeros(&net.params);
            for (loss, g) in &results {
                total += loss;
                grad.add(g);
            }
            net.apply(&grad, config.learning_rate / batch.len() as f64);
        }
        epoch_loss.push(total / pairs.len() as f64);
        if !net.params.is_finite() {
            return Err(DeepError::InvalidConfig("training diverged; lower the learning rate"));
        }
    }
    Ok(TrainedNet { net, epoch_loss })
}
