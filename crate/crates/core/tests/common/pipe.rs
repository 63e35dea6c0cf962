//! Small end-to-end runs of the pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tokopt::corpus::Split;
use tokopt::metrics::EvalReport;
use tokopt::pipeline::{self, ExperimentConfig, Layout};
use tokopt::retok::TrainConfig;
use tokopt::synth::SynthSpec;
use tokopt::tokenizers::TokenizerKind;

pub fn tiny_spec() -> SynthSpec {
    SynthSpec {
        train: 120,
        valid: 30,
        test: 30,
        ..SynthSpec::default()
    }
}

/// Generate the tiny corpus under `root/data` and return a config for it
/// with networks and epochs cut down to a few seconds of work.
pub fn tiny_setup(root: &Path, seed: u64, kind: TokenizerKind) -> ExperimentConfig {
    let data = root.join("data");
    pipeline::gen_synth(&tiny_spec(), seed, &data).unwrap();
    let mut cfg = ExperimentConfig::load(&data.join("config.json")).unwrap();
    cfg.tokenizer.kind = kind;
    cfg.tokenizer.vocab_size = 120;
    cfg.classifier.embed_dim = 6;
    cfg.classifier.hidden = 6;
    cfg.classifier.epochs = 2;
    cfg.candidates.n = 4;
    cfg.opt.trials = 1;
    let train = TrainConfig {
        epochs: 2,
        patience: None,
        ..TrainConfig::default()
    };
    cfg.opt.span.char_dim = 4;
    cfg.opt.span.hidden = 4;
    cfg.opt.span.mlp_hidden = 4;
    cfg.opt.span.proj_dim = 4;
    cfg.opt.span.train = train;
    cfg.opt.bitag.char_dim = 4;
    cfg.opt.bitag.hidden = 4;
    cfg.opt.bitag.train = train;
    cfg.sweep.ns = vec![1, 2];
    cfg
}

pub fn out_layout(root: &Path) -> Layout {
    Layout::new(root.join("out"))
}

/// Every stage up to `evaluate` on the test split.
pub fn run_all(cfg: &ExperimentConfig, layout: &Layout) -> EvalReport {
    pipeline::train_tokenizer(cfg, layout).unwrap();
    pipeline::train_downstream(cfg, layout, false).unwrap();
    pipeline::collect(cfg, layout, false).unwrap();
    pipeline::train_opt(cfg, layout, false).unwrap();
    pipeline::sweep_n(cfg, layout, Split::Test, &cfg.sweep.ns, false).unwrap();
    pipeline::evaluate(cfg, layout, Split::Test, false).unwrap().1
}

/// Relative path to contents of every file below `dir`, skipping run
/// manifests (they record wall-clock time).
pub fn artifacts(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                if p.file_name().is_some_and(|n| n == "manifests") {
                    continue;
                }
                walk(base, &p, out);
            } else {
                out.insert(p.strip_prefix(base).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
