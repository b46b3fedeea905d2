//! Title inverted index: BM25 candidate retrieval and lexical features.
//!
//! The five tf·idf-style features mirror the classic explain components of a
//! tf·idf engine, computed over the *distinct* query terms that occur in the
//! document:
//!
//! | feature | value |
//! |---|---|
//! | F2 | Σ tf(t, d) |
//! | F3 | Σ idf(t) |
//! | F4 | Σ tf(t, d) · idf(t) |
//! | F5 | min df(t) (0 when nothing matches) |
//! | F6 | matched distinct terms / distinct query terms |
//!
//! `idf(t) = ln(1 + (N − df + 0.5) / (df + 0.5))`, shared with BM25.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

const INDEX_MAGIC: &str = "clickrank-index";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("duplicate document id: {0}")]
    DuplicateDoc(String),
    #[error("unknown document id: {0}")]
    UnknownDoc(String),
    #[error("document id {0:?} contains a tab or newline")]
    InvalidDocId(String),
    #[error("index file: {0}")]
    Format(String),
    #[error("index file version {found}, expected {INDEX_VERSION}")]
    Version { found: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Option<Self> {
        (k1 >= 0.0 && (0.0..=1.0).contains(&b)).then_some(Bm25Params { k1, b })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LexicalFeatures {
    pub f1_bm25: f64,
    pub f2_sum_tf: f64,
    pub f3_sum_idf: f64,
    pub f4_sum_tfidf: f64,
    pub f5_min_docfreq: f64,
    pub f6_coord: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, Default)]
pub struct InvertedIndex {
    postings: HashMap<String, Vec<Posting>>,
    doc_ids: Vec<String>,
    doc_lookup: HashMap<String, u32>,
    doc_lengths: Vec<u32>,
    doc_tokens: Vec<Vec<String>>,
    avg_doc_length: f64,
}

/// Distinct tokens in first-occurrence order.
pub fn distinct_terms(query: &[String]) -> Vec<&str> {
    let mut seen = HashSet::new();
    query
        .iter()
        .map(String::as_str)
        .filter(|t| seen.insert(*t))
        .collect()
}

impl InvertedIndex {
    pub fn build<I, S>(docs: I) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = (S, Vec<String>)>,
        S: Into<String>,
    {
        let mut idx = InvertedIndex::default();
        for (id, tokens) in docs {
            let id: String = id.into();
            if id.contains(['\t', '\n', '\r']) {
                return Err(IndexError::InvalidDocId(id));
            }
            let doc = idx.doc_ids.len() as u32;
            if idx.doc_lookup.insert(id.clone(), doc).is_some() {
                return Err(IndexError::DuplicateDoc(id));
            }
            let mut tf: Vec<(&str, u32)> = Vec::new();
            for t in &tokens {
                match tf.iter_mut().find(|(term, _)| *term == t.as_str()) {
                    Some((_, n)) => *n += 1,
                    None => tf.push((t, 1)),
                }
            }
            for (term, n) in tf {
                idx.postings
                    .entry(term.to_string())
                    .or_default()
                    .push(Posting { doc, tf: n });
            }
            idx.doc_ids.push(id);
            idx.doc_lengths.push(tokens.len() as u32);
            idx.doc_tokens.push(tokens);
        }
        let total: u64 = idx.doc_lengths.iter().map(|&l| u64::from(l)).sum();
        idx.avg_doc_length = if idx.doc_ids.is_empty() {
            0.0
        } else {
            total as f64 / idx.doc_ids.len() as f64
        };
        Ok(idx)
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_index(&self, doc_id: &str) -> Option<u32> {
        self.doc_lookup.get(doc_id).copied()
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<u32> {
        self.doc_index(doc_id).map(|d| self.doc_lengths[d as usize])
    }

    pub fn doc_tokens(&self, doc_id: &str) -> Option<&[String]> {
        self.doc_index(doc_id)
            .map(|d| self.doc_tokens[d as usize].as_slice())
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_freq(&self, term: &str, doc: u32) -> u32 {
        let p = self.postings(term);
        p.binary_search_by_key(&doc, |x| x.doc)
            .map_or(0, |i| p[i].tf)
    }

    fn require(&self, doc_id: &str) -> Result<u32, IndexError> {
        self.doc_index(doc_id)
            .ok_or_else(|| IndexError::UnknownDoc(doc_id.to_string()))
    }

    fn bm25_term(&self, idf: f64, tf: u32, doc: u32, params: Bm25Params) -> f64 {
        let tf = f64::from(tf);
        let len = f64::from(self.doc_lengths[doc as usize]);
        let norm = if self.avg_doc_length > 0.0 {
            len / self.avg_doc_length
        } else {
            0.0
        };
        idf * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm))
    }

    /// Okapi BM25 of `query` against one document (F1).
    pub fn bm25_score(
        &self,
        query: &[String],
        doc_id: &str,
        params: Bm25Params,
    ) -> Result<f64, IndexError> {
        let doc = self.require(doc_id)?;
        let mut score = 0.0;
        for term in distinct_terms(query) {
            let tf = self.term_freq(term, doc);
            if tf > 0 {
                score += self.bm25_term(self.idf(term), tf, doc, params);
            }
        }
        Ok(score)
    }

    /// BM25 plus the five tf·idf features (F1–F6).
    pub fn lexical_features(
        &self,
        query: &[String],
        doc_id: &str,
        params: Bm25Params,
    ) -> Result<LexicalFeatures, IndexError> {
        let doc = self.require(doc_id)?;
        let terms = distinct_terms(query);
        let mut f = LexicalFeatures::default();
        let mut matched = 0usize;
        let mut min_df = f64::INFINITY;
        for term in &terms {
            let tf = self.term_freq(term, doc);
            if tf == 0 {
                continue;
            }
            matched += 1;
            let idf = self.idf(term);
            f.f1_bm25 += self.bm25_term(idf, tf, doc, params);
            f.f2_sum_tf += f64::from(tf);
            f.f3_sum_idf += idf;
            f.f4_sum_tfidf += f64::from(tf) * idf;
            min_df = min_df.min(self.doc_freq(term) as f64);
        }
        if matched > 0 {
            f.f5_min_docfreq = min_df;
            f.f6_coord = matched as f64 / terms.len() as f64;
        }
        Ok(f)
    }

    /// F2–F6 only, as `[sum_tf, sum_idf, sum_tfidf, min_docfreq, coord]`.
    pub fn tfidf_features(&self, query: &[String], doc_id: &str) -> Result<[f64; 5], IndexError> {
        let f = self.lexical_features(query, doc_id, Bm25Params::default())?;
        Ok([
            f.f2_sum_tf,
            f.f3_sum_idf,
            f.f4_sum_tfidf,
            f.f5_min_docfreq,
            f.f6_coord,
        ])
    }

    /// Top `n` documents by BM25, ties broken by ascending doc id. Only
    /// documents sharing at least one term with the query are returned.
    pub fn retrieve_topn(
        &self,
        query: &[String],
        params: Bm25Params,
        n: usize,
    ) -> Vec<(String, f64)> {
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for term in distinct_terms(query) {
            let postings = self.postings(term);
            if postings.is_empty() {
                continue;
            }
            let idf = self.idf(term);
            for p in postings {
                *acc.entry(p.doc).or_insert(0.0) += self.bm25_term(idf, p.tf, p.doc, params);
            }
        }
        let mut hits: Vec<(u32, f64)> = acc.into_iter().collect();
        hits.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.doc_ids[a.0 as usize].cmp(&self.doc_ids[b.0 as usize]))
        });
        hits.truncate(n);
        hits.into_iter()
            .map(|(d, s)| (self.doc_ids[d as usize].clone(), s))
            .collect()
    }

    /// Line format: a header `clickrank-index <version> <doc count>`, then one
    /// line per document, `<doc_id>\t<space-separated tokens>`, in insertion
    /// order. Postings are rebuilt on load, so the file is stable for a given
    /// input order.
    pub fn write_to(&self, w: impl Write) -> Result<(), IndexError> {
        let mut w = BufWriter::new(w);
        writeln!(w, "{INDEX_MAGIC} {INDEX_VERSION} {}", self.doc_count())?;
        for (id, toks) in self.doc_ids.iter().zip(&self.doc_tokens) {
            writeln!(w, "{id}\t{}", toks.join(" "))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(r: impl std::io::Read) -> Result<Self, IndexError> {
        let mut lines = BufReader::new(r).lines();
        let header = lines
            .next()
            .ok_or_else(|| IndexError::Format("empty file".into()))??;
        let mut parts = header.split(' ');
        if parts.next() != Some(INDEX_MAGIC) {
            return Err(IndexError::Format("bad magic".into()));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| IndexError::Format("bad version".into()))?;
        if version != INDEX_VERSION {
            return Err(IndexError::Version { found: version });
        }
        let count: usize = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| IndexError::Format("bad document count".into()))?;
        let mut docs = Vec::with_capacity(count);
        for line in lines {
            let line = line?;
            let (id, toks) = line
                .split_once('\t')
                .ok_or_else(|| IndexError::Format(format!("bad document line {line:?}")))?;
            let toks = toks.split(' ').filter(|t| !t.is_empty()).map(String::from);
            docs.push((id.to_string(), toks.collect()));
        }
        if docs.len() != count {
            return Err(IndexError::Format(format!(
                "header declares {count} documents, found {}",
                docs.len()
            )));
        }
        Self::build(docs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        self.write_to(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IndexError> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn three_docs() -> InvertedIndex {
        InvertedIndex::build(vec![
            ("d1", t(&["a", "b"])),
            ("d2", t(&["b", "c"])),
            ("d3", t(&["c"])),
        ])
        .unwrap()
    }

    #[test]
    fn build_small_corpus() {
        let idx = InvertedIndex::build(vec![("d1", t(&["a", "b"])), ("d2", t(&["b"]))]).unwrap();
        assert_eq!(idx.postings("a"), &[Posting { doc: 0, tf: 1 }]);
        assert_eq!(
            idx.postings("b"),
            &[Posting { doc: 0, tf: 1 }, Posting { doc: 1, tf: 1 }]
        );
        assert_eq!(idx.doc_count(), 2);
        assert_eq!(idx.avg_doc_length(), 1.5);

        let idx = InvertedIndex::build(vec![("d", t(&["a", "a"]))]).unwrap();
        assert_eq!(idx.postings("a")[0].tf, 2);
    }

    #[test]
    fn empty_and_duplicate() {
        let idx = InvertedIndex::build(Vec::<(String, Vec<String>)>::new()).unwrap();
        assert_eq!(idx.doc_count(), 0);
        assert!(idx.retrieve_topn(&t(&["a"]), Bm25Params::default(), 10).is_empty());

        let err = InvertedIndex::build(vec![("x", t(&["a"])), ("x", t(&["b"]))]).unwrap_err();
        assert!(matches!(err, IndexError::DuplicateDoc(id) if id == "x"));

        let idx = InvertedIndex::build(vec![("z", vec![])]).unwrap();
        assert_eq!(idx.doc_length("z"), Some(0));
    }

    #[test]
    fn bm25_hand_values() {
        let idx = three_docs();
        let p = Bm25Params::default();
        assert_eq!(idx.bm25_score(&[], "d1", p).unwrap(), 0.0);
        let s = idx.bm25_score(&t(&["a"]), "d1", p).unwrap();
        assert!((s - 0.9066488893385706).abs() < 1e-12);
        assert!(matches!(
            idx.bm25_score(&t(&["a"]), "nope", p),
            Err(IndexError::UnknownDoc(_))
        ));
        // a term present in every document still scores positive
        let all = InvertedIndex::build(vec![
            ("x", t(&["z"])),
            ("y", t(&["z"])),
            ("w", t(&["z"])),
        ])
        .unwrap();
        assert!((all.idf("z") - 0.13353139262452257).abs() < 1e-12);
        assert!(all.bm25_score(&t(&["z"]), "x", p).unwrap() > 0.0);
    }

    #[test]
    fn tfidf_cases() {
        let idx = three_docs();
        assert_eq!(idx.tfidf_features(&t(&["zz"]), "d1").unwrap(), [0.0; 5]);
        let f = idx.tfidf_features(&t(&["a", "b"]), "d1").unwrap();
        assert_eq!(f[4], 1.0);
        assert_eq!(f[3], 1.0);
        assert_eq!(f[0], 2.0);

        let one = InvertedIndex::build(vec![("d", t(&["x", "y", "z"]))]).unwrap();
        let f = one.tfidf_features(&t(&["x", "y", "z", "x"]), "d").unwrap();
        assert_eq!(f[0], 3.0);
        assert_eq!(f[4], 1.0);
        assert_eq!(one.tfidf_features(&[], "d").unwrap()[4], 0.0);
    }

    #[test]
    fn retrieve_prefers_shorter_doc() {
        let idx = three_docs();
        let hits = idx.retrieve_topn(&t(&["c"]), Bm25Params::default(), 1);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].0, "d3");
        assert!((hits[0].1 - 0.561960861054684).abs() < 1e-12);
        assert_eq!(idx.retrieve_topn(&t(&["c"]), Bm25Params::default(), 10).len(), 2);
        assert!(idx.retrieve_topn(&t(&["oov"]), Bm25Params::default(), 10).is_empty());
        assert!(idx.retrieve_topn(&[], Bm25Params::default(), 10).is_empty());
    }

    #[test]
    fn persistence_round_trip() {
        let idx = three_docs();
        let mut buf = Vec::new();
        idx.write_to(&mut buf).unwrap();
        let back = InvertedIndex::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.doc_ids(), idx.doc_ids());
        assert_eq!(back.postings("c"), idx.postings("c"));
        let mut again = Vec::new();
        back.write_to(&mut again).unwrap();
        assert_eq!(buf, again);

        let bad = b"clickrank-index 9 0\n";
        assert!(matches!(
            InvertedIndex::read_from(&bad[..]),
            Err(IndexError::Version { found: 9 })
        ));
    }

    fn corpus_strategy() -> impl Strategy<Value = Vec<Vec<String>>> {
        proptest::collection::vec(
            proptest::collection::vec(prop_oneof!["a", "b", "c", "d", "e"], 0..6),
            1..20,
        )
    }

    proptest! {
        #[test]
        fn topn_prefix_property(docs in corpus_strategy(), q in proptest::collection::vec(prop_oneof!["a", "b", "c", "x"], 0..3), n in 0usize..10) {
            let idx = InvertedIndex::build(docs.into_iter().enumerate().map(|(i, d)| (format!("d{i:02}"), d))).unwrap();
            let p = Bm25Params::default();
            let short = idx.retrieve_topn(&q, p, n);
            let long = idx.retrieve_topn(&q, p, n + 1);
            prop_assert_eq!(&long[..short.len()], &short[..]);
        }

        #[test]
        fn coord_zero_iff_tfidf_zero(docs in corpus_strategy(), q in proptest::collection::vec(prop_oneof!["a", "b", "x"], 0..4)) {
            let idx = InvertedIndex::build(docs.into_iter().enumerate().map(|(i, d)| (format!("d{i}"), d))).unwrap();
            for id in idx.doc_ids().to_vec() {
                let f = idx.tfidf_features(&q, &id).unwrap();
                prop_assert_eq!(f[2] == 0.0, f[4] == 0.0);
            }
        }

        #[test]
        fn bm25_nondecreasing_in_tf(extra in 0usize..6, k1 in 0.0f64..3.0, b in 0.0f64..1.0) {
            let p = Bm25Params::new(k1, b).unwrap();
            let base = vec![t(&["a", "b", "c"]), t(&["b", "c"]), t(&["c", "d"])];
            let mut more = base.clone();
            more[0].extend(std::iter::repeat_n("a".to_string(), extra + 1));
            let mut fewer = base.clone();
            fewer[0].extend(std::iter::repeat_n("a".to_string(), extra));
            // hold document length fixed so only tf changes
            fewer[0].push("pad".into());
            let s_more = InvertedIndex::build(more.into_iter().enumerate().map(|(i, d)| (format!("d{i}"), d))).unwrap()
                .bm25_score(&t(&["a"]), "d0", p).unwrap();
            let s_fewer = InvertedIndex::build(fewer.into_iter().enumerate().map(|(i, d)| (format!("d{i}"), d))).unwrap()
                .bm25_score(&t(&["a"]), "d0", p).unwrap();
            prop_assert!(s_more >= s_fewer - 1e-12);
        }
    }
}
