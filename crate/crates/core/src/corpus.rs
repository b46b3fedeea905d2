//! Click-log ingestion, bilingual tokenization and pair aggregation.
//!
//! Latin, digit and other alphabetic text is split on whitespace. CJK text has
//! no delimiters, so each maximal CJK run is indexed as overlapping character
//! bigrams (a run of one character emits the character itself). Characters in
//! the Unicode punctuation (P*) and symbol (S*) categories are dropped and act
//! as token boundaries.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unicode_general_category::get_general_category;

const DEFAULT_STOPWORDS_EN: &str = include_str!("../data/stopwords_en.txt");
const DEFAULT_STOPWORDS_CJK: &str = include_str!("../data/stopwords_cjk.txt");

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("click log not found: {0}")]
    NotFound(PathBuf),
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            CorpusError::NotFound(path.to_path_buf())
        } else {
            CorpusError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

/// One line of the raw click log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawClickRecord {
    pub user_id: String,
    pub query: String,
    pub doc_title: String,
    pub doc_url: String,
    pub clicked: bool,
}

/// A unique (normalized query, document) pair with accumulated counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickPair {
    pub query: Vec<String>,
    pub doc_id: String,
    pub doc_tokens: Vec<String>,
    pub click_count: u32,
    pub nonclick_count: u32,
}

impl ClickPair {
    /// Key identifying the query side: its tokens joined by single spaces.
    pub fn query_key(&self) -> String {
        self.query.join(" ")
    }

    pub fn is_clicked(&self) -> bool {
        self.click_count > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Boundary,
    Cjk,
    Word,
}

/// Han ideographs plus kana and hangul syllables.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xAC00..=0xD7AF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2FFFF)
}

fn classify(c: char) -> CharClass {
    if c.is_whitespace() || c.is_control() {
        return CharClass::Boundary;
    }
    let abbr = get_general_category(c).abbreviation();
    if abbr.starts_with('P') || abbr.starts_with('S') {
        CharClass::Boundary
    } else if is_cjk(c) {
        CharClass::Cjk
    } else {
        CharClass::Word
    }
}

fn flush_run(class: CharClass, run: &mut Vec<char>, out: &mut Vec<String>) {
    match class {
        CharClass::Word if !run.is_empty() => out.push(run.iter().collect()),
        CharClass::Cjk if run.len() == 1 => out.push(run[0].to_string()),
        CharClass::Cjk => out.extend(run.windows(2).map(|w| w.iter().collect::<String>())),
        _ => {}
    }
    run.clear();
}

/// Lowercases and splits `text` into tokens; see the module docs for the rules.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut run: Vec<char> = Vec::new();
    let mut run_class = CharClass::Boundary;
    for c in text.chars().flat_map(char::to_lowercase) {
        let class = classify(c);
        if class != run_class {
            flush_run(run_class, &mut run, &mut out);
            run_class = class;
        }
        if class != CharClass::Boundary {
            run.push(c);
        }
    }
    flush_run(run_class, &mut run, &mut out);
    out
}

/// Set of normalized tokens removed before indexing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stoplist {
    entries: HashSet<String>,
}

impl Stoplist {
    /// Builds a stoplist from raw words, normalizing each through [`tokenize`].
    /// Words that do not normalize to exactly one token are ignored.
    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let entries = words
            .into_iter()
            .filter_map(|w| {
                let mut toks = tokenize(w);
                (toks.len() == 1).then(|| toks.remove(0))
            })
            .collect();
        Stoplist { entries }
    }

    /// Parses the stoplist file format: one token per line, `#` lines ignored.
    pub fn parse(text: &str) -> Self {
        Self::from_words(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    /// Loads and merges several stoplist files.
    pub fn load(paths: &[impl AsRef<Path>]) -> Result<Self, CorpusError> {
        let mut merged = Stoplist::default();
        for p in paths {
            let p = p.as_ref();
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            merged.entries.extend(Self::parse(&text).entries);
        }
        Ok(merged)
    }

    /// The shipped English and CJK lists.
    pub fn default_bilingual() -> Self {
        let mut s = Self::parse(DEFAULT_STOPWORDS_EN);
        s.entries.extend(Self::parse(DEFAULT_STOPWORDS_CJK).entries);
        s
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains(token)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn remove_stopwords(tokens: Vec<String>, stops: &Stoplist) -> Vec<String> {
    tokens.into_iter().filter(|t| !stops.contains(t)).collect()
}

/// Tokenize followed by stopword removal.
pub fn normalize(text: &str, stops: &Stoplist) -> Vec<String> {
    remove_stopwords(tokenize(text), stops)
}

/// Result of [`aggregate`]: unique pairs in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Aggregated {
    pub pairs: Vec<ClickPair>,
    /// Records rejected for an empty query or empty document url.
    pub skipped: usize,
}

/// Collapses raw records into unique (normalized query, doc_url) pairs,
/// ignoring user ids.
pub fn aggregate(records: &[RawClickRecord], stops: &Stoplist) -> Aggregated {
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    let mut out = Aggregated::default();
    for rec in records {
        if rec.query.trim().is_empty() || rec.doc_url.is_empty() {
            out.skipped += 1;
            continue;
        }
        let query = normalize(&rec.query, stops);
        let key = (query.join(" "), rec.doc_url.clone());
        let slot = *index.entry(key).or_insert_with(|| {
            out.pairs.push(ClickPair {
                query,
                doc_id: rec.doc_url.clone(),
                doc_tokens: normalize(&rec.doc_title, stops),
                click_count: 0,
                nonclick_count: 0,
            });
            out.pairs.len() - 1
        });
        let pair = &mut out.pairs[slot];
        if rec.clicked {
            pair.click_count += 1;
        } else {
            pair.nonclick_count += 1;
        }
    }
    out
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("serializing plain data");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a JSON-lines click log. Blank lines are ignored.
pub fn load_click_log(path: impl AsRef<Path>) -> Result<Vec<RawClickRecord>, CorpusError> {
    read_jsonl(path.as_ref())
}

pub fn write_click_log(
    path: impl AsRef<Path>,
    records: &[RawClickRecord],
) -> Result<(), CorpusError> {
    write_jsonl(path.as_ref(), records)
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<ClickPair>, CorpusError> {
    read_jsonl(path.as_ref())
}

pub fn write_pairs(path: impl AsRef<Path>, pairs: &[ClickPair]) -> Result<(), CorpusError> {
    write_jsonl(path.as_ref(), pairs)
}

/// Unique documents of a pair collection, in first-appearance order.
pub fn documents(pairs: &[ClickPair]) -> Vec<(String, Vec<String>)> {
    let mut seen = HashSet::new();
    pairs
        .iter()
        .filter(|p| seen.insert(p.doc_id.as_str()))
        .map(|p| (p.doc_id.clone(), p.doc_tokens.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn rec(q: &str, url: &str, clicked: bool) -> RawClickRecord {
        RawClickRecord {
            user_id: "u".into(),
            query: q.into(),
            doc_title: "title".into(),
            doc_url: url.into(),
            clicked,
        }
    }

    #[test]
    fn tokenize_latin_and_punctuation() {
        assert_eq!(tokenize("Hello, World!"), toks(&["hello", "world"]));
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(tokenize("?!... ,,"), Vec::<String>::new());
        assert_eq!(tokenize("tab\tseparated  Words"), toks(&["tab", "separated", "words"]));
    }

    #[test]
    fn tokenize_cjk_bigrams() {
        assert_eq!(tokenize("VPN 连接失败"), toks(&["vpn", "连接", "接失", "失败"]));
        assert_eq!(tokenize("的"), toks(&["的"]));
        // full-width punctuation splits runs
        assert_eq!(tokenize("连接，失败。"), toks(&["连接", "失败"]));
        // script change is a boundary
        assert_eq!(tokenize("vpn连接"), toks(&["vpn", "连接"]));
    }

    #[test]
    fn stopword_removal() {
        let stops = Stoplist::from_words(["the", "is"]);
        assert_eq!(
            remove_stopwords(toks(&["the", "vpn", "is", "down"]), &stops),
            toks(&["vpn", "down"])
        );
        assert!(remove_stopwords(vec![], &stops).is_empty());
        assert!(remove_stopwords(toks(&["the", "is"]), &stops).is_empty());
    }

    #[test]
    fn stoplist_file_format() {
        let s = Stoplist::parse("# comment\nThe\n\n 的 \n");
        assert!(s.contains("the"));
        assert!(s.contains("的"));
        assert_eq!(s.len(), 2);
        let d = Stoplist::default_bilingual();
        assert!(d.contains("the") && d.contains("的") && d.contains("我们"));
    }

    #[test]
    fn aggregate_counts() {
        let stops = Stoplist::default();
        let records = vec![rec("q", "d", true), rec("q", "d", true), rec("q", "d", false)];
        let agg = aggregate(&records, &stops);
        assert_eq!(agg.pairs.len(), 1);
        assert_eq!(agg.pairs[0].click_count, 2);
        assert_eq!(agg.pairs[0].nonclick_count, 1);

        let records = vec![rec("q", "d1", true), rec("q", "d2", false)];
        assert_eq!(aggregate(&records, &stops).pairs.len(), 2);
    }

    #[test]
    fn aggregate_merges_queries_that_normalize_equal() {
        let stops = Stoplist::from_words(["the"]);
        let records = vec![rec("The VPN", "d", true), rec("vpn!", "d", false)];
        let agg = aggregate(&records, &stops);
        assert_eq!(agg.pairs.len(), 1);
        assert_eq!(agg.pairs[0].query, toks(&["vpn"]));
    }

    #[test]
    fn aggregate_reports_skipped() {
        let stops = Stoplist::default();
        let records = vec![rec("  ", "d", true), rec("q", "", true), rec("q", "d", true)];
        let agg = aggregate(&records, &stops);
        assert_eq!(agg.skipped, 2);
        assert_eq!(agg.pairs.len(), 1);
    }

    #[test]
    fn load_click_log_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.jsonl");
        std::fs::write(
            &p,
            "{\"user_id\":\"u\",\"query\":\"q\",\"doc_title\":\"t\",\"doc_url\":\"d\",\"clicked\":true}\n\
             {\"user_id\":\"u\",\"query\":\"q\",\"doc_title\":\"t\",\"doc_url\":\"d\"}\n",
        )
        .unwrap();
        match load_click_log(&p) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        std::fs::write(&p, "").unwrap();
        assert!(load_click_log(&p).unwrap().is_empty());
        assert!(matches!(
            load_click_log(dir.path().join("missing.jsonl")),
            Err(CorpusError::NotFound(_))
        ));
    }

    #[test]
    fn click_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("log.jsonl");
        let records = vec![rec("a", "d1", true), rec("VPN 连接", "d2", false)];
        write_click_log(&p, &records).unwrap();
        assert_eq!(load_click_log(&p).unwrap(), records);
    }

    proptest! {
        #[test]
        fn tokenize_idempotent_on_latin(s in "[a-zA-Z0-9 ,.!?\t-]{0,40}") {
            let once = tokenize(&s);
            prop_assert_eq!(tokenize(&once.join(" ")), once);
        }

        #[test]
        fn cjk_run_emits_len_minus_one_bigrams(chars in proptest::collection::vec(0x4E00u32..0x9FFF, 2..12)) {
            let run: String = chars.iter().map(|&c| char::from_u32(c).unwrap()).collect();
            let toks = tokenize(&run);
            prop_assert_eq!(toks.len(), chars.len() - 1);
            prop_assert!(toks.iter().all(|t| t.chars().count() == 2));
        }

        #[test]
        fn aggregate_conserves_records(rows in proptest::collection::vec((0usize..4, 0usize..4, any::<bool>(), any::<bool>()), 0..60)) {
            let records: Vec<_> = rows.iter().map(|&(q, d, c, blank)| {
                let q = if blank { " ".to_string() } else { format!("q{q}") };
                rec(&q, &format!("d{d}"), c)
            }).collect();
            let agg = aggregate(&records, &Stoplist::default());
            let total: u32 = agg.pairs.iter().map(|p| p.click_count + p.nonclick_count).sum();
            prop_assert_eq!(total as usize + agg.skipped, records.len());
            let keys: HashSet<_> = agg.pairs.iter().map(|p| (p.query_key(), p.doc_id.clone())).collect();
            prop_assert_eq!(keys.len(), agg.pairs.len());
        }
    }
}
