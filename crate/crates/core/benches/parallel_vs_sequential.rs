use std::hint::black_box;

use clickrank::clickgraph::{AbsentEstimationConfig, AbsentEstimator, ClickGraphModel, PropagationConfig};
use clickrank::corpus::{self, ClickPair, Stoplist};
use clickrank::deepmodel::{self, DeepConfig};
use clickrank::embeddings::{CbowConfig, train_cbow};
use clickrank::eval::{CvOptions, cross_validate, kfold_split};
use clickrank::exec::Execution;
use clickrank::index::{Bm25Params, InvertedIndex};
use clickrank::ltr::{Algorithm, FeatureExtractor, FeatureMask};
use clickrank::synth::{SynthConfig, generate_clicklog, generate_corpus};
use criterion::{BenchmarkId, Criterion, criterion_group, criterion_main};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn pairs() -> Vec<ClickPair> {
    let cfg = SynthConfig { n_docs: 600, n_queries: 200, ..Default::default() };
    let corpus = generate_corpus(&cfg).unwrap();
    corpus::aggregate(&generate_clicklog(&corpus, &cfg).unwrap(), &Stoplist::default_bilingual()).pairs
}

fn deep_config() -> DeepConfig {
    DeepConfig { word_dim: 32, conv_dim: 64, sem_dim: 32, epochs: 1, ..Default::default() }
}

fn extractor(pairs: &[ClickPair]) -> FeatureExtractor {
    let exec = Execution::Parallel;
    let index = InvertedIndex::build(corpus::documents(pairs)).unwrap();
    let sents: Vec<Vec<String>> = pairs.iter().flat_map(|p| [p.query.clone(), p.doc_tokens.clone()]).collect();
    let table = train_cbow(&sents, &CbowConfig { dim: 32, epochs: 1, ..Default::default() }).unwrap().table;
    let (graph, _) = ClickGraphModel::train(pairs, &PropagationConfig::default(), exec);
    let est = AbsentEstimator::new(graph, table, AbsentEstimationConfig::default(), exec).unwrap();
    let cfg = deep_config();
    let net = deepmodel::train(&deepmodel::sample_train_pairs(pairs, cfg.negatives, cfg.seed), &cfg, None, exec)
        .unwrap()
        .net;
    FeatureExtractor::new(index, Bm25Params::default(), Some(est), Some(net), exec)
}

fn benches(c: &mut Criterion) {
    let pairs = pairs();
    let ex = extractor(&pairs);
    let samples = ex.assemble_all(&pairs, Execution::Parallel).unwrap();
    let qids: Vec<usize> = samples.iter().map(|s| s.query_id).collect();
    let split = kfold_split(&qids, 5, 42).unwrap();
    let train_pairs = deepmodel::sample_train_pairs(&pairs[..pairs.len().min(400)], 4, 42);
    let trainer = Algorithm::CoordinateAscent.trainer(42);

    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("propagation", name), &exec, |b, &exec| {
            b.iter(|| black_box(ClickGraphModel::train(&pairs, &PropagationConfig::default(), exec)))
        });
        g.bench_with_input(BenchmarkId::new("deep_epoch", name), &exec, |b, &exec| {
            b.iter(|| black_box(deepmodel::train(&train_pairs, &deep_config(), None, exec).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("feature_assembly", name), &exec, |b, &exec| {
            b.iter(|| black_box(ex.assemble_all(&pairs, exec).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("cross_validation", name), &exec, |b, &exec| {
            b.iter(|| {
                black_box(
                    cross_validate(&samples, trainer.as_ref(), FeatureMask::Final, &CvOptions::default(), &split, exec)
                        .unwrap(),
                )
            })
        });
    }
    g.finish();
}

criterion_group!(parallel_vs_sequential, benches);
criterion_main!(parallel_vs_sequential);
