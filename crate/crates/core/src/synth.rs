//! Seeded bilingual corpus and click-log generator with planted topics.

use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use rand::distr::{Distribution, weighted::WeightedIndex};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::RawClickRecord;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_topics: usize,
    pub n_docs: usize,
    pub n_queries: usize,
    pub latin_vocab: usize,
    pub cjk_vocab: usize,
    /// Probability that a content word is drawn from the CJK sub-vocabulary.
    pub cjk_ratio: f64,
    /// Probability that a content word comes from a random other topic.
    pub token_noise: f64,
    pub doc_length: usize,
    pub query_length: usize,
    /// Impressions shown per query.
    pub clicks_per_query: usize,
    /// Share of each impression list drawn from the query's own topic.
    pub on_topic_share: f64,
    pub p_rel: f64,
    pub p_noise: f64,
    pub position_decay: f64,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_topics: 20,
            n_docs: 2000,
            n_queries: 500,
            latin_vocab: 2000,
            cjk_vocab: 1000,
            cjk_ratio: 0.3,
            token_noise: 0.1,
            doc_length: 10,
            query_length: 3,
            clicks_per_query: 10,
            on_topic_share: 0.5,
            p_rel: 0.7,
            p_noise: 0.05,
            position_decay: 0.85,
            zipf_exponent: 1.0,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        let counts = [
            self.n_topics,
            self.n_docs,
            self.n_queries,
            self.latin_vocab,
            self.cjk_vocab,
            self.doc_length,
            self.query_length,
            self.clicks_per_query,
        ];
        if counts.contains(&0) {
            return bad("all counts must be positive");
        }
        if self.latin_vocab < self.n_topics || self.cjk_vocab < self.n_topics {
            return bad("every topic needs at least one latin and one cjk word");
        }
        if self.cjk_vocab * 2 > 0x51A5 {
            return bad("cjk_vocab exceeds the ideograph block");
        }
        if !(0.0 <= self.p_noise && self.p_noise < self.p_rel && self.p_rel <= 1.0) {
            return bad("need 0 <= p_noise < p_rel <= 1");
        }
        for (name, v) in [
            ("cjk_ratio", self.cjk_ratio),
            ("token_noise", self.token_noise),
            ("on_topic_share", self.on_topic_share),
            ("position_decay", self.position_decay),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SynthError::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.zipf_exponent.is_nan() || self.zipf_exponent < 0.0 {
            return bad("zipf_exponent must be nonnegative");
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment, unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let mut c = SynthConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| SynthError::Parse { line: i + 1, message };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            let (k, v) = (k.trim(), v.trim());
            fn num<T: FromStr>(v: &str) -> Result<T, String> {
                v.parse().map_err(|_| format!("bad value {v:?}"))
            }
            match k {
                "n_topics" => c.n_topics = num(v).map_err(err)?,
                "n_docs" => c.n_docs = num(v).map_err(err)?,
                "n_queries" => c.n_queries = num(v).map_err(err)?,
                "latin_vocab" => c.latin_vocab = num(v).map_err(err)?,
                "cjk_vocab" => c.cjk_vocab = num(v).map_err(err)?,
                "cjk_ratio" => c.cjk_ratio = num(v).map_err(err)?,
                "token_noise" => c.token_noise = num(v).map_err(err)?,
                "doc_length" => c.doc_length = num(v).map_err(err)?,
                "query_length" => c.query_length = num(v).map_err(err)?,
                "clicks_per_query" => c.clicks_per_query = num(v).map_err(err)?,
                "on_topic_share" => c.on_topic_share = num(v).map_err(err)?,
                "p_rel" => c.p_rel = num(v).map_err(err)?,
                "p_noise" => c.p_noise = num(v).map_err(err)?,
                "position_decay" => c.position_decay = num(v).map_err(err)?,
                "zipf_exponent" => c.zipf_exponent = num(v).map_err(err)?,
                "seed" => c.seed = num(v).map_err(err)?,
                _ => return Err(err(format!("unknown key {k:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthDoc {
    pub id: String,
    pub title: String,
    pub topic: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthQuery {
    pub text: String,
    pub topic: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthCorpus {
    pub docs: Vec<SynthDoc>,
    pub queries: Vec<SynthQuery>,
    /// Per topic, its latin and cjk content words.
    pub vocab: Vec<(Vec<String>, Vec<String>)>,
}

const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st"];
const NUCLEI: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];
const STOPS: [&str; 8] = ["the", "of", "and", "for", "to", "in", "的", "和"];
const PUNCT: [&str; 5] = [",", ":", "-", "/", "。"];

/// Distinct pseudo-words built from syllables; the i-th word is a fixed
/// function of i.
fn latin_word(mut i: usize) -> String {
    let syll = ONSETS.len() * NUCLEI.len();
    let mut w = String::new();
    loop {
        let s = i % syll;
        w.push_str(ONSETS[s / NUCLEI.len()]);
        w.push_str(NUCLEI[s % NUCLEI.len()]);
        i /= syll;
        if i == 0 {
            break;
        }
        i -= 1;
    }
    if w.len() < 4 {
        w.push('x');
    }
    w
}

/// Two-ideograph word from the CJK unified block.
fn cjk_word(i: usize) -> String {
    let base = 0x4E00 + 2 * i as u32;
    [base, base + 1].iter().filter_map(|&c| char::from_u32(c)).collect()
}

struct Sampler {
    zipf: WeightedIndex<f64>,
}

impl Sampler {
    fn new(n: usize, s: f64) -> Self {
        let w: Vec<f64> = (1..=n).map(|r| (r as f64).powf(-s)).collect();
        Sampler { zipf: WeightedIndex::new(w).expect("nonempty positive weights") }
    }
}

fn split_vocab(words: Vec<String>, topics: usize) -> Vec<Vec<String>> {
    let per = words.len() / topics;
    words.chunks(per).take(topics).map(|c| c.to_vec()).collect()
}

fn render(words: &[(String, bool)], rng: &mut ChaCha8Rng, decorate: bool) -> String {
    let mut out = String::new();
    let mut prev_cjk = false;
    for (i, (w, cjk)) in words.iter().enumerate() {
        if i > 0 {
            if decorate && rng.random_bool(0.15) {
                out.push(' ');
                out.push_str(STOPS.choose(rng).expect("nonempty"));
                out.push(' ');
            } else if decorate && rng.random_bool(0.1) {
                out.push_str(PUNCT.choose(rng).expect("nonempty"));
                out.push(' ');
            } else if !(prev_cjk && *cjk) {
                out.push(' ');
            }
        }
        if decorate && !cjk && rng.random_bool(0.1) {
            let mut c = w.chars();
            if let Some(f) = c.next() {
                out.extend(f.to_uppercase());
                out.push_str(c.as_str());
            }
        } else {
            out.push_str(w);
        }
        prev_cjk = *cjk;
    }
    out
}

/// Documents and queries with latent topics.
pub fn generate_corpus(config: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let latin = split_vocab((0..config.latin_vocab).map(latin_word).collect(), config.n_topics);
    let cjk = split_vocab((0..config.cjk_vocab).map(cjk_word).collect(), config.n_topics);
    let vocab: Vec<(Vec<String>, Vec<String>)> = latin.into_iter().zip(cjk).collect();
    let samplers: Vec<(Sampler, Sampler)> = vocab
        .iter()
        .map(|(l, c)| (Sampler::new(l.len(), config.zipf_exponent), Sampler::new(c.len(), config.zipf_exponent)))
        .collect();

    let draw = |topic: usize, n: usize, rng: &mut ChaCha8Rng| -> Vec<(String, bool)> {
        (0..n)
            .map(|_| {
                let t = if config.n_topics > 1 && rng.random_bool(config.token_noise) {
                    rng.random_range(0..config.n_topics)
                } else {
                    topic
                };
                let cjk = rng.random_bool(config.cjk_ratio);
                let (l, c) = &vocab[t];
                let (ls, cs) = &samplers[t];
                if cjk {
                    (c[cs.zipf.sample(rng)].clone(), true)
                } else {
                    (l[ls.zipf.sample(rng)].clone(), false)
                }
            })
            .collect()
    };

    let width = config.n_docs.to_string().len();
    let docs = (0..config.n_docs)
        .map(|i| {
            let topic = i % config.n_topics;
            let words = draw(topic, config.doc_length, &mut rng);
            SynthDoc {
                id: format!("doc-{i:0width$}"),
                title: render(&words, &mut rng, true),
                topic,
            }
        })
        .collect();
    let queries = (0..config.n_queries)
        .map(|i| {
            let topic = i % config.n_topics;
            let mut words = draw(topic, config.query_length, &mut rng);
            let mut seen = HashSet::new();
            words.retain(|w| seen.insert(w.0.clone()));
            SynthQuery { text: render(&words, &mut rng, false), topic }
        })
        .collect();
    Ok(SynthCorpus { docs, queries, vocab })
}

/// One record per impression; same-topic documents are clicked with
/// `p_rel · decay^position`, others with `p_noise · decay^position`.
pub fn generate_clicklog(corpus: &SynthCorpus, config: &SynthConfig) -> Result<Vec<RawClickRecord>, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_c11c);
    let mut by_topic: Vec<Vec<usize>> = vec![Vec::new(); config.n_topics];
    for (i, d) in corpus.docs.iter().enumerate() {
        by_topic[d.topic].push(i);
    }
    let n_docs = corpus.docs.len();
    let shown = config.clicks_per_query.min(n_docs);
    let mut out = Vec::with_capacity(corpus.queries.len() * shown);
    for (qi, q) in corpus.queries.iter().enumerate() {
        let own = &by_topic[q.topic];
        let n_on = ((shown as f64 * config.on_topic_share).round() as usize).min(own.len());
        let mut list: Vec<usize> = own.choose_multiple(&mut rng, n_on).copied().collect();
        let mut chosen: HashSet<usize> = list.iter().copied().collect();
        while list.len() < shown {
            let d = rng.random_range(0..n_docs);
            if chosen.insert(d) {
                list.push(d);
            }
        }
        list.shuffle(&mut rng);
        let user = format!("u{:03}", qi % 97);
        for (pos, &d) in list.iter().enumerate() {
            let doc = &corpus.docs[d];
            let base = if doc.topic == q.topic { config.p_rel } else { config.p_noise };
            let p = base * config.position_decay.powi(pos as i32);
            out.push(RawClickRecord {
                user_id: user.clone(),
                query: q.text.clone(),
                doc_title: doc.title.clone(),
                doc_url: doc.id.clone(),
                clicked: rng.random_bool(p.clamp(0.0, 1.0)),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Stoplist, aggregate, is_cjk, normalize};

    fn small() -> SynthConfig {
        SynthConfig {
            n_topics: 4,
            n_docs: 80,
            n_queries: 40,
            latin_vocab: 200,
            cjk_vocab: 100,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_and_sized() {
        let c = small();
        let a = generate_corpus(&c).unwrap();
        assert_eq!(a, generate_corpus(&c).unwrap());
        assert_eq!(a.docs.len(), 80);
        assert_eq!(a.queries.len(), 40);
        let log = generate_clicklog(&a, &c).unwrap();
        assert_eq!(log, generate_clicklog(&a, &c).unwrap());
        assert_eq!(log.len(), 40 * 10);
        assert!(a.docs.iter().any(|d| d.title.chars().any(is_cjk)));
    }

    #[test]
    fn vocabularies_are_disjoint() {
        let corpus = generate_corpus(&SynthConfig::default()).unwrap();
        let mut seen = HashSet::new();
        for (l, c) in &corpus.vocab {
            for w in l.iter().chain(c) {
                assert!(seen.insert(w.clone()), "{w} repeated");
            }
        }
        assert_eq!(seen.len(), 3000);
    }

    #[test]
    fn same_topic_overlap_is_higher() {
        let corpus = generate_corpus(&small()).unwrap();
        let stops = Stoplist::default_bilingual();
        let sets: Vec<HashSet<String>> = corpus.docs.iter().map(|d| normalize(&d.title, &stops).into_iter().collect()).collect();
        let (mut same, mut ns, mut cross, mut nc) = (0.0, 0, 0.0, 0);
        for i in 0..sets.len() {
            for j in i + 1..sets.len() {
                let inter = sets[i].intersection(&sets[j]).count() as f64;
                let uni = sets[i].union(&sets[j]).count().max(1) as f64;
                if corpus.docs[i].topic == corpus.docs[j].topic {
                    same += inter / uni;
                    ns += 1;
                } else {
                    cross += inter / uni;
                    nc += 1;
                }
            }
        }
        assert!(same / ns as f64 > cross / nc as f64);
    }

    #[test]
    fn degenerate_click_model() {
        let c = SynthConfig { p_rel: 1.0, p_noise: 0.0, position_decay: 1.0, ..small() };
        let corpus = generate_corpus(&c).unwrap();
        let topic_of = |id: &str| corpus.docs.iter().find(|d| d.id == id).unwrap().topic;
        for r in generate_clicklog(&corpus, &c).unwrap() {
            let q = corpus.queries.iter().find(|q| q.text == r.query).unwrap();
            assert_eq!(r.clicked, topic_of(&r.doc_url) == q.topic);
        }
    }

    #[test]
    fn click_rates_separate() {
        let c = SynthConfig::default();
        let corpus = generate_corpus(&c).unwrap();
        let log = generate_clicklog(&corpus, &c).unwrap();
        let topic: std::collections::HashMap<&str, usize> = corpus.docs.iter().map(|d| (d.id.as_str(), d.topic)).collect();
        let qtopic: std::collections::HashMap<&str, usize> = corpus.queries.iter().map(|q| (q.text.as_str(), q.topic)).collect();
        let (mut on, mut on_c, mut off, mut off_c) = (0f64, 0f64, 0f64, 0f64);
        for r in &log {
            if topic[r.doc_url.as_str()] == qtopic[r.query.as_str()] {
                on += 1.0;
                on_c += f64::from(u8::from(r.clicked));
            } else {
                off += 1.0;
                off_c += f64::from(u8::from(r.clicked));
            }
        }
        let (p1, p2) = (on_c / on, off_c / off);
        let pooled = (on_c + off_c) / (on + off);
        let z = (p1 - p2) / (pooled * (1.0 - pooled) * (1.0 / on + 1.0 / off)).sqrt();
        assert!(z > 2.326, "z = {z}");
        let agg = aggregate(&log, &Stoplist::default_bilingual());
        assert_eq!(agg.skipped, 0);
    }

    #[test]
    fn config_file() {
        let c = SynthConfig::parse("# demo\nn_docs = 50\nseed=7  # inline\n\n").unwrap();
        assert_eq!(c.n_docs, 50);
        assert_eq!(c.seed, 7);
        assert_eq!(c.n_queries, 500);
        assert!(matches!(SynthConfig::parse("colour = red"), Err(SynthError::Parse { line: 1, .. })));
        assert!(SynthConfig::parse("p_rel = 0.01\np_noise = 0.05").is_err());
        assert!(matches!(SynthConfig::parse("n_docs = many"), Err(SynthError::Parse { .. })));
    }

    #[test]
    fn pseudo_words_are_distinct() {
        let words: HashSet<String> = (0..5000).map(latin_word).collect();
        assert_eq!(words.len(), 5000);
        assert!(words.iter().all(|w| w.chars().all(|c| c.is_ascii_lowercase())));
    }
}
