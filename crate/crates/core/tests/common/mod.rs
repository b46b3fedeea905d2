#![allow(dead_code)]

use clickrank::clickgraph::{AbsentEstimationConfig, AbsentEstimator, ClickGraphModel, PropagationConfig};
use clickrank::corpus::{self, ClickPair, Stoplist};
use clickrank::deepmodel::{self, DeepConfig};
use clickrank::embeddings::{CbowConfig, train_cbow};
use clickrank::exec::Execution;
use clickrank::index::{Bm25Params, InvertedIndex};
use clickrank::ltr::FeatureExtractor;
use clickrank::synth::{SynthConfig, generate_clicklog, generate_corpus};

pub fn t(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

pub fn pair(query: &[&str], doc: &str, tokens: &[&str], clicks: u32, skips: u32) -> ClickPair {
    ClickPair {
        query: t(query),
        doc_id: doc.to_string(),
        doc_tokens: t(tokens),
        click_count: clicks,
        nonclick_count: skips,
    }
}

pub fn small_synth() -> SynthConfig {
    SynthConfig {
        n_topics: 4,
        n_docs: 80,
        n_queries: 40,
        latin_vocab: 120,
        cjk_vocab: 60,
        ..Default::default()
    }
}

pub fn synth_pairs(config: &SynthConfig) -> Vec<ClickPair> {
    let corpus = generate_corpus(config).expect("corpus");
    let log = generate_clicklog(&corpus, config).expect("log");
    corpus::aggregate(&log, &Stoplist::default_bilingual()).pairs
}

pub fn tiny_deep() -> DeepConfig {
    DeepConfig {
        word_dim: 8,
        conv_dim: 12,
        sem_dim: 6,
        epochs: 2,
        ..Default::default()
    }
}

/// Builds every subsystem from `pairs` with small dimensions.
pub fn extractor(pairs: &[ClickPair], exec: Execution) -> FeatureExtractor {
    let index = InvertedIndex::build(corpus::documents(pairs)).expect("index");
    let sents: Vec<Vec<String>> = pairs
        .iter()
        .flat_map(|p| [p.query.clone(), p.doc_tokens.clone()])
        .collect();
    let cbow = CbowConfig { dim: 8, epochs: 2, min_count: 1, ..Default::default() };
    let table = train_cbow(&sents, &cbow).expect("cbow").table;
    let (graph, _) = ClickGraphModel::train(pairs, &PropagationConfig::default(), exec);
    let est = AbsentEstimator::new(graph, table, AbsentEstimationConfig::default(), exec).expect("estimator");
    let cfg = tiny_deep();
    let tp = deepmodel::sample_train_pairs(pairs, cfg.negatives, cfg.seed);
    let net = deepmodel::train(&tp, &cfg, None, exec).expect("deep").net;
    FeatureExtractor::new(index, Bm25Params::default(), Some(est), Some(net), exec)
}
