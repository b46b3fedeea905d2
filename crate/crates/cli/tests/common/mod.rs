#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use clickrank::corpus::Stoplist;
use clickrank::deepmodel::DeepConfig;
use clickrank::embeddings::CbowConfig;
use clickrank::exec::Execution;
use clickrank::synth::SynthConfig;
use clickrank_cli::{EvalSettings, PipelineSettings, Workspace, run_all};

/// A small fully built working directory shared by the tests of one binary.
pub fn workspace() -> &'static Workspace {
    static WS: OnceLock<(tempfile::TempDir, Workspace)> = OnceLock::new();
    &WS.get_or_init(|| {
        let tmp = tempfile::tempdir().expect("tempdir");
        let ws = Workspace::new(PathBuf::from(tmp.path())).expect("workspace");
        let settings = PipelineSettings {
            synth: SynthConfig { n_topics: 4, n_docs: 120, n_queries: 60, latin_vocab: 200, cjk_vocab: 80, ..Default::default() },
            cbow: CbowConfig { dim: 16, epochs: 2, ..Default::default() },
            deep: DeepConfig { word_dim: 16, conv_dim: 16, sem_dim: 8, epochs: 2, ..Default::default() },
            eval: EvalSettings { algorithms: vec![clickrank::ltr::Algorithm::CoordinateAscent], ..Default::default() },
            ..Default::default()
        };
        run_all(&ws, &settings, &Stoplist::default_bilingual(), Execution::default()).expect("pipeline");
        (tmp, ws)
    })
    .1
}
