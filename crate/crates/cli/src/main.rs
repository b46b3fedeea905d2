use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result, bail};
use clap::{Args, Parser, Subcommand, ValueEnum};

use clickrank::clickgraph::{AbsentEstimationConfig, JaccardKind, PropagationConfig};
use clickrank::corpus::Stoplist;
use clickrank::deepmodel::DeepConfig;
use clickrank::embeddings::CbowConfig;
use clickrank::eval::{CvOptions, ZeroIdeal};
use clickrank::exec::Execution;
use clickrank::index::Bm25Params;
use clickrank::ltr::{Algorithm, FeatureMask, LabelScheme};
use clickrank::pipeline::{BundleConfig, DEFAULT_CANDIDATES, PipelineBundle, files};
use clickrank::synth::SynthConfig;
use clickrank_cli::*;

#[derive(Parser)]
#[command(name = "clickrank", version, about = "Click-graph and semantic re-ranking over BM25 retrieval")]
struct Cli {
    /// Working directory for all artifacts.
    #[arg(long, global = true, default_value = "work")]
    dir: PathBuf,
    /// Run data-parallel stages on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Stopword files replacing the built-in English and CJK lists.
    #[arg(long = "stopwords", global = true)]
    stopwords: Vec<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic bilingual click log.
    Synth {
        /// key = value config file; unset keys keep their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Aggregate a raw click log into unique click pairs.
    Ingest {
        /// Click log to read instead of the workspace one.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Build the inverted index over clicked and shown documents.
    Index,
    /// Train CBOW word embeddings on queries and titles.
    TrainEmbeddings {
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 4)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        negatives: usize,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 0.025)]
        lr: f64,
        #[arg(long, default_value_t = 2)]
        min_count: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Propagate term vectors over the bipartite click graph.
    BuildClickgraph {
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
        #[arg(long, default_value_t = 30)]
        max_iters: usize,
        /// Terms kept per vector; 0 keeps all.
        #[arg(long, default_value_t = 20)]
        top_k: usize,
    },
    /// Train the convolutional semantic model on click pairs.
    TrainDeep(DeepArgs),
    /// Train a ranker on all pairs and write the serving bundle.
    TrainLtr {
        #[arg(long, default_value = "coordinate-ascent")]
        algorithm: AlgorithmArg,
        #[arg(long, default_value = "final")]
        mask: MaskArg,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        bundle: BundleArgs,
    },
    /// Cross-validate feature masks and algorithms and write the report.
    Evaluate {
        /// Masks to evaluate; repeat for several. Defaults to all five.
        #[arg(long = "mask")]
        masks: Vec<MaskArg>,
        /// Algorithms to evaluate; repeat for several. Defaults to all three.
        #[arg(long = "algorithm")]
        algorithms: Vec<AlgorithmArg>,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Score queries without any relevant document as 0 instead of skipping them.
        #[arg(long)]
        zero_ideal_as_zero: bool,
        #[command(flatten)]
        bundle: BundleArgs,
    },
    /// Measure end-to-end per-query latency of the serving bundle.
    Bench {
        #[arg(long, default_value_t = 200)]
        queries: usize,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
    },
    /// Serve /search and /health over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Run one query and print tab-separated doc_id, score, baseline score.
    Search {
        #[arg(long)]
        q: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
}

#[derive(Args)]
struct DeepArgs {
    /// Architecture preset 1-4.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    preset: Option<u8>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Initialize word vectors from the trained embeddings.
    #[arg(long)]
    init_from_embeddings: bool,
}

#[derive(Args)]
struct BundleArgs {
    /// BM25 candidates re-ranked per query.
    #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
    candidates: usize,
    #[arg(long, default_value_t = 1.2)]
    k1: f64,
    #[arg(long, default_value_t = 0.75)]
    b: f64,
    /// Neighbors used to estimate click-absent vectors.
    #[arg(long, default_value_t = 5)]
    neighbors: usize,
    #[arg(long, default_value_t = 0.5)]
    sim_threshold: f64,
    /// Leave click-absent vectors empty when no neighbor qualifies.
    #[arg(long)]
    no_fallback: bool,
    /// Use set instead of weighted Jaccard for F9.
    #[arg(long)]
    set_jaccard: bool,
    /// Grade relevance by click-count buckets instead of clicked/not.
    #[arg(long)]
    graded: bool,
}

impl BundleArgs {
    fn config(&self) -> Result<BundleConfig> {
        Ok(BundleConfig {
            candidates: self.candidates,
            bm25: Bm25Params::new(self.k1, self.b).context("k1 must be nonnegative and b in [0, 1]")?,
            absent: AbsentEstimationConfig {
                neighbors: self.neighbors,
                sim_threshold: self.sim_threshold,
                fallback: !self.no_fallback,
            },
            jaccard: if self.set_jaccard { JaccardKind::Set } else { JaccardKind::Weighted },
            labels: if self.graded { LabelScheme::Graded } else { LabelScheme::Binary },
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    CoordinateAscent,
    Rankboost,
    Ranknet,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::CoordinateAscent => Algorithm::CoordinateAscent,
            AlgorithmArg::Rankboost => Algorithm::RankBoost,
            AlgorithmArg::Ranknet => Algorithm::RankNet,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MaskArg {
    Baseline,
    Basic,
    Deep,
    Clickgraph,
    Final,
}

impl From<MaskArg> for FeatureMask {
    fn from(m: MaskArg) -> Self {
        match m {
            MaskArg::Baseline => FeatureMask::Baseline,
            MaskArg::Basic => FeatureMask::Basic,
            MaskArg::Deep => FeatureMask::Deep,
            MaskArg::Clickgraph => FeatureMask::ClickGraph,
            MaskArg::Final => FeatureMask::Final,
        }
    }
}

fn stoplist(paths: &[PathBuf]) -> Result<Stoplist> {
    if paths.is_empty() {
        Ok(Stoplist::default_bilingual())
    } else {
        Ok(Stoplist::load(paths)?)
    }
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let ws = Workspace::new(&cli.dir)?;
    match cli.command {
        Command::Synth { config, seed } => {
            let mut cfg = match config {
                Some(p) => SynthConfig::load(&p).with_context(|| format!("reading {}", p.display()))?,
                None => SynthConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let n = run_synth(&ws, &cfg)?;
            println!("wrote {n} records to {}", ws.path(files::CLICKLOG).display());
        }
        Command::Ingest { log } => {
            let s = run_ingest(&ws, log.as_deref(), &stoplist(&cli.stopwords)?)?;
            println!("{} records -> {} pairs ({} skipped)", s.records, s.pairs, s.skipped);
        }
        Command::Index => {
            let n = run_index(&ws)?;
            println!("indexed {n} documents");
        }
        Command::TrainEmbeddings { dim, window, negatives, epochs, lr, min_count, seed } => {
            let cfg = CbowConfig { dim, window, negatives, epochs, learning_rate: lr, min_count, seed };
            let (words, loss) = run_train_embeddings(&ws, &cfg)?;
            println!("{words} words, final epoch loss {:.4}", loss.last().copied().unwrap_or(f64::NAN));
        }
        Command::BuildClickgraph { epsilon, max_iters, top_k } => {
            let cfg = PropagationConfig {
                epsilon,
                max_iters,
                top_k: if top_k == 0 { usize::MAX } else { top_k },
            };
            let s = run_build_clickgraph(&ws, &cfg, exec)?;
            println!(
                "{} queries, {} docs, {} iterations ({})",
                s.queries,
                s.docs,
                s.iterations,
                if s.converged { "converged" } else { "iteration cap reached" }
            );
        }
        Command::TrainDeep(a) => {
            let mut cfg = match a.preset {
                Some(p) => DeepConfig::preset(usize::from(p)).context("unknown preset")?,
                None => DeepConfig::default(),
            };
            cfg.epochs = a.epochs.unwrap_or(cfg.epochs);
            cfg.learning_rate = a.lr.unwrap_or(cfg.learning_rate);
            cfg.gamma = a.gamma.unwrap_or(cfg.gamma);
            cfg.negatives = a.negatives.unwrap_or(cfg.negatives);
            cfg.batch_size = a.batch_size.unwrap_or(cfg.batch_size);
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            cfg.init_from_embeddings = a.init_from_embeddings;
            let loss = run_train_deep(&ws, &cfg, exec)?;
            for (i, l) in loss.iter().enumerate() {
                println!("epoch {}: loss {l:.4}", i + 1);
            }
        }
        Command::TrainLtr { algorithm, mask, seed, bundle } => {
            let m = run_train_ltr(&ws, &bundle.config()?, algorithm.into(), mask.into(), seed, exec)?;
            println!("trained {} on mask {}", m.scorer.kind(), m.mask.name());
        }
        Command::Evaluate { masks, algorithms, folds, seed, zero_ideal_as_zero, bundle } => {
            let mut settings = EvalSettings {
                folds,
                seed,
                options: CvOptions {
                    zero_ideal: if zero_ideal_as_zero { ZeroIdeal::Zero } else { ZeroIdeal::Exclude },
                    ..Default::default()
                },
                ..Default::default()
            };
            if !masks.is_empty() {
                settings.masks = masks.into_iter().map(Into::into).collect();
            }
            if !algorithms.is_empty() {
                settings.algorithms = algorithms.into_iter().map(Into::into).collect();
            }
            let report = run_evaluate(&ws, &bundle.config()?, &settings, exec)?;
            print!("{}", report.to_table());
        }
        Command::Bench { queries, repetitions } => {
            let s = run_bench(&ws, stoplist(&cli.stopwords)?, queries, repetitions, exec)?;
            println!(
                "{} runs: mean {:.5}s  p50 {:.5}s  p95 {:.5}s  min {:.5}s  max {:.5}s",
                s.samples, s.mean, s.p50, s.p95, s.min, s.max
            );
        }
        Command::Serve { addr } => {
            let bundle = Arc::new(PipelineBundle::load(ws.dir(), stoplist(&cli.stopwords)?, exec)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr)
                    .await
                    .with_context(|| format!("binding {addr}"))?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                axum::serve(listener, router(bundle)).await?;
                anyhow::Ok(())
            })?;
        }
        Command::Search { q, k } => {
            let bundle = PipelineBundle::load(ws.dir(), stoplist(&cli.stopwords)?, exec)?;
            if k > bundle.candidates() {
                bail!("k = {k} exceeds the candidate size {}", bundle.candidates());
            }
            for h in bundle.run(&q, k)? {
                println!("{}\t{}\t{}", h.doc_id, h.score, h.baseline_score);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
