//! Pipeline stages behind the command-line verbs. Every stage reads its
//! inputs from an output directory, writes its artifacts atomically and
//! records a manifest with content hashes.

mod config;
mod manifest;

pub use config::{
    EvalSettings, ExperimentConfig, OptKind, OptSettings, SweepSettings, TokenizerSettings, CONFIG_VERSION,
};
pub use manifest::{RunManifest, MANIFEST_VERSION};

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::{self, ClassifierMeta, ClassifierModel, CLASSIFIER_FORMAT_VERSION};
use crate::corpus::{build_char_table, CharTable, Dataset, LabeledExample, LoadOptions, Split};
use crate::error::{Error, Result};
use crate::exec;
use crate::fsutil;
use crate::lattice::Segmentation;
use crate::metrics::{self, Conventions, EvalReport, MethodScores, PerplexityMode};
use crate::retok::{self, BiTagTokenizer, CandidateOptions, RetokDataset, SpanTokenizer};
use crate::rng;
use crate::synth::{self, SynthSpec};
use crate::tokenizers::{Tokenizer, UnigramModel};

/// File names inside an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub out: PathBuf,
}

impl Layout {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Layout { out: out.into() }
    }

    pub fn tokenizer(&self) -> PathBuf {
        self.out.join("tokenizer.json")
    }

    pub const CLASSIFIER_STEM: &'static str = "classifier";

    pub fn classifier_files(&self) -> [PathBuf; 3] {
        let s = Self::CLASSIFIER_STEM;
        [
            self.out.join(format!("{s}.json")),
            self.out.join(format!("{s}.weights.json")),
            self.out.join(format!("{s}.weights.bin")),
        ]
    }

    pub fn dprime(&self) -> PathBuf {
        self.out.join("dprime.jsonl")
    }

    pub fn opt_dir(&self) -> PathBuf {
        self.out.join("opt")
    }

    pub fn unigram_opt(&self) -> PathBuf {
        self.opt_dir().join("unigram_opt.json")
    }

    pub fn neural_stem(kind: OptKind, trial: usize) -> String {
        match kind {
            OptKind::Span => format!("span.trial{trial}"),
            OptKind::Bitag => format!("bitag.trial{trial}"),
            OptKind::UnigramOpt => "unigram_opt".into(),
        }
    }

    pub fn neural_files(&self, kind: OptKind, trial: usize) -> [PathBuf; 3] {
        let s = Self::neural_stem(kind, trial);
        let d = self.opt_dir();
        [
            d.join(format!("{s}.json")),
            d.join(format!("{s}.weights.json")),
            d.join(format!("{s}.weights.bin")),
        ]
    }

    pub fn report(&self, split: Split) -> PathBuf {
        self.out.join(format!("eval.{}.json", split.as_str()))
    }

    pub fn sweep(&self, split: Split) -> PathBuf {
        self.out.join(format!("sweep.{}.json", split.as_str()))
    }

    pub fn manifest(&self, command: &str) -> PathBuf {
        self.out.join("manifests").join(format!("{command}.json"))
    }
}

fn config_value(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(cfg)?)
}

fn dataset_files(cfg: &ExperimentConfig) -> Vec<PathBuf> {
    [Split::Train, Split::Valid, Split::Test]
        .iter()
        .map(|s| cfg.dataset_dir.join(s.file_name()))
        .collect()
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    for f in dataset_files(cfg) {
        if !f.exists() {
            return Err(Error::MissingArtifact {
                path: f,
                command: "gen-synth",
            });
        }
    }
    Dataset::load_dir(
        &cfg.dataset_dir,
        LoadOptions {
            nfkc: cfg.nfkc,
            num_labels: None,
        },
    )
}

/// Refuse to run on top of upstream stages whose inputs or outputs changed
/// after they ran.
fn check_upstream(layout: &Layout, commands: &[&str], force: bool) -> Result<()> {
    if force {
        return Ok(());
    }
    for cmd in commands {
        let Some(m) = RunManifest::load(&layout.manifest(cmd))? else {
            continue;
        };
        let mut stale = m.stale_inputs();
        for (path, hash) in &m.outputs {
            let p = Path::new(path);
            if fsutil::hash_file(p).map_or(true, |h| &h != hash) {
                stale.push(p.to_path_buf());
            }
        }
        if let Some(p) = stale.first() {
            return Err(Error::Stale(format!(
                "{} changed since `tokopt {cmd}` ran",
                p.display()
            )));
        }
    }
    Ok(())
}

struct Stage {
    manifest: RunManifest,
    started: Instant,
    path: PathBuf,
}

impl Stage {
    fn begin(layout: &Layout, command: &str, cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Stage {
            manifest: RunManifest::new(command, config_value(cfg)?),
            started: Instant::now(),
            path: layout.manifest(command),
        })
    }

    fn finish(mut self) -> Result<RunManifest> {
        self.manifest.wall_clock_secs = self.started.elapsed().as_secs_f64();
        self.manifest.save(&self.path)?;
        Ok(self.manifest)
    }
}

pub fn load_tokenizer(layout: &Layout) -> Result<Tokenizer> {
    Tokenizer::load(&layout.tokenizer())
}

pub fn load_downstream(layout: &Layout, tokenizer: &Tokenizer) -> Result<(ClassifierModel, ClassifierMeta)> {
    let (model, meta) = classifier::load_classifier(&layout.out, Layout::CLASSIFIER_STEM, tokenizer.vocab().clone())?;
    Ok((model, meta))
}

/// `train-tokenizer`
pub fn train_tokenizer(cfg: &ExperimentConfig, layout: &Layout) -> Result<RunManifest> {
    let mut stage = Stage::begin(layout, "train-tokenizer", cfg)?;
    let data = load_dataset(cfg)?;
    let texts: Vec<&str> = data.train.iter().map(|e| e.text.as_str()).collect();
    let tok = Tokenizer::train(cfg.tokenizer.kind, &texts, cfg.tokenizer.vocab_size)?;
    tok.save(&layout.tokenizer())?;
    for f in dataset_files(cfg) {
        stage.manifest.add_input(&f)?;
    }
    stage.manifest.add_output(&layout.tokenizer())?;
    stage.finish()
}

/// `train-downstream`
pub fn train_downstream(cfg: &ExperimentConfig, layout: &Layout, force: bool) -> Result<(RunManifest, ClassifierMeta)> {
    let mut stage = Stage::begin(layout, "train-downstream", cfg)?;
    check_upstream(layout, &["train-tokenizer"], force)?;
    let tok = load_tokenizer(layout)?;
    let data = load_dataset(cfg)?;
    let (model, log) = classifier::train_classifier(&cfg.classifier, &data, &tok, cfg.seed)?;
    let meta = ClassifierMeta {
        format_version: CLASSIFIER_FORMAT_VERSION,
        config: cfg.classifier.clone(),
        num_labels: data.num_labels,
        vocab_size: tok.vocab().len(),
        tokenizer_sha256: fsutil::hash_file(&layout.tokenizer())?,
        best_epoch: log.best_epoch,
        valid_macro_f1: log.best_valid_f1(),
        log,
    };
    classifier::save_classifier(&model, &meta, &layout.out, Layout::CLASSIFIER_STEM)?;
    stage.manifest.add_input(&layout.tokenizer())?;
    for f in dataset_files(cfg) {
        stage.manifest.add_input(&f)?;
    }
    for f in layout.classifier_files() {
        stage.manifest.add_output(&f)?;
    }
    Ok((stage.finish()?, meta))
}

fn load_frozen(layout: &Layout, force: bool) -> Result<(Tokenizer, ClassifierModel)> {
    let tok = load_tokenizer(layout)?;
    let (model, meta) = load_downstream(layout, &tok)?;
    if !force && meta.tokenizer_sha256 != fsutil::hash_file(&layout.tokenizer())? {
        return Err(Error::Stale(format!(
            "{} was retrained after the classifier",
            layout.tokenizer().display()
        )));
    }
    Ok((tok, model))
}

/// `collect`: D̂′ over the training split.
pub fn collect(cfg: &ExperimentConfig, layout: &Layout, force: bool) -> Result<(RunManifest, RetokDataset)> {
    let mut stage = Stage::begin(layout, "collect", cfg)?;
    check_upstream(layout, &["train-tokenizer", "train-downstream"], force)?;
    let (tok, model) = load_frozen(layout, force)?;
    let data = load_dataset(cfg)?;
    let dprime = retok::collect_best(&data.train, &model, &tok, &cfg.candidates, cfg.seed)?;
    dprime.save(&layout.dprime())?;
    stage.manifest.add_input(&layout.tokenizer())?;
    for f in layout.classifier_files() {
        stage.manifest.add_input(&f)?;
    }
    stage.manifest.add_input(&cfg.dataset_dir.join(Split::Train.file_name()))?;
    stage.manifest.add_output(&layout.dprime())?;
    Ok((stage.finish()?, dprime))
}

/// Seed of one training run of an optimized tokenizer.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    rng::derive(seed, "trial", trial as u64)
}

/// The tokenizers fitted on one D̂′.
#[derive(Debug, Clone, Default)]
pub struct OptTokenizers {
    pub unigram_opt: Option<UnigramModel>,
    pub span: Vec<SpanTokenizer>,
    pub bitag: Vec<BiTagTokenizer>,
}

pub fn fit_opt(
    cfg: &ExperimentConfig,
    dprime: &RetokDataset,
    tok: &Tokenizer,
    chars: &CharTable,
) -> Result<OptTokenizers> {
    let mut out = OptTokenizers::default();
    for kind in &cfg.opt.kinds {
        match kind {
            OptKind::UnigramOpt => {
                out.unigram_opt = Some(retok::build_unigram_opt(dprime, tok.vocab(), chars)?);
            }
            OptKind::Span => {
                for t in 0..cfg.opt.trials {
                    out.span.push(retok::train_span_tokenizer(
                        dprime,
                        tok.vocab(),
                        chars,
                        &cfg.opt.span,
                        trial_seed(cfg.seed, t),
                    )?);
                }
            }
            OptKind::Bitag => {
                for t in 0..cfg.opt.trials {
                    out.bitag.push(retok::train_bitag(dprime, chars, &cfg.opt.bitag, trial_seed(cfg.seed, t))?);
                }
            }
        }
    }
    Ok(out)
}

/// `train-opt`
pub fn train_opt(cfg: &ExperimentConfig, layout: &Layout, force: bool) -> Result<(RunManifest, OptTokenizers)> {
    let mut stage = Stage::begin(layout, "train-opt", cfg)?;
    check_upstream(layout, &["train-tokenizer", "collect"], force)?;
    let tok = load_tokenizer(layout)?;
    let dprime = RetokDataset::load(&layout.dprime())?;
    let data = load_dataset(cfg)?;
    let chars = build_char_table(&data.train);
    let fitted = fit_opt(cfg, &dprime, &tok, &chars)?;
    let dir = layout.opt_dir();
    if let Some(u) = &fitted.unigram_opt {
        Tokenizer::Unigram(u.clone()).save(&layout.unigram_opt())?;
        stage.manifest.add_output(&layout.unigram_opt())?;
    }
    for (t, s) in fitted.span.iter().enumerate() {
        s.save(&dir, &Layout::neural_stem(OptKind::Span, t))?;
        for f in layout.neural_files(OptKind::Span, t) {
            stage.manifest.add_output(&f)?;
        }
    }
    for (t, b) in fitted.bitag.iter().enumerate() {
        b.save(&dir, &Layout::neural_stem(OptKind::Bitag, t))?;
        for f in layout.neural_files(OptKind::Bitag, t) {
            stage.manifest.add_output(&f)?;
        }
    }
    stage.manifest.add_input(&layout.tokenizer())?;
    stage.manifest.add_input(&layout.dprime())?;
    stage.manifest.add_input(&cfg.dataset_dir.join(Split::Train.file_name()))?;
    Ok((stage.finish()?, fitted))
}

pub fn load_opt(cfg: &ExperimentConfig, layout: &Layout) -> Result<OptTokenizers> {
    let mut out = OptTokenizers::default();
    let dir = layout.opt_dir();
    for kind in &cfg.opt.kinds {
        match kind {
            OptKind::UnigramOpt => match Tokenizer::load(&layout.unigram_opt()) {
                Ok(Tokenizer::Unigram(u)) => out.unigram_opt = Some(u),
                Ok(_) => return Err(Error::Schema("unigram_opt.json does not hold a unigram model".into())),
                Err(Error::MissingArtifact { path, .. }) => {
                    return Err(Error::MissingArtifact {
                        path,
                        command: "train-opt",
                    })
                }
                Err(e) => return Err(e),
            },
            OptKind::Span => {
                for t in 0..cfg.opt.trials {
                    out.span.push(SpanTokenizer::load(&dir, &Layout::neural_stem(OptKind::Span, t))?);
                }
            }
            OptKind::Bitag => {
                for t in 0..cfg.opt.trials {
                    out.bitag.push(BiTagTokenizer::load(&dir, &Layout::neural_stem(OptKind::Bitag, t))?);
                }
            }
        }
    }
    Ok(out)
}

/// Everything evaluation needs, already loaded.
pub struct EvalInputs<'a> {
    pub cfg: &'a ExperimentConfig,
    pub dataset: &'a Dataset,
    pub tokenizer: &'a Tokenizer,
    pub model: &'a ClassifierModel,
    pub dprime: &'a RetokDataset,
    pub opt: &'a OptTokenizers,
}

fn perplexity(
    mode: PerplexityMode,
    sentences: &[(Vec<char>, Segmentation)],
    reference: &[(Vec<char>, Segmentation)],
) -> Result<f64> {
    let tokens = |s: &[(Vec<char>, Segmentation)]| -> Vec<String> {
        s.iter().flat_map(|(c, seg)| seg.tokens(c)).collect()
    };
    let toks = tokens(sentences);
    match mode {
        PerplexityMode::Entropy => metrics::unigram_perplexity(toks.iter().map(String::as_str)),
        PerplexityMode::CrossEntropy => {
            let r = tokens(reference);
            metrics::cross_perplexity(toks.iter().map(String::as_str), r.iter().map(String::as_str))
        }
    }
}

/// Scores of one tokenization of a split.
pub fn score_tokenization(
    inputs: &EvalInputs,
    method: &str,
    examples: &[LabeledExample],
    tokenize: &(dyn Fn(&[char]) -> Segmentation + Sync),
    chars: &CharTable,
    reference: &[(Vec<char>, Segmentation)],
) -> Result<MethodScores> {
    let sentences: Vec<(Vec<char>, Segmentation)> = exec::map(examples, |ex| {
        let c = ex.chars();
        let s = tokenize(&c);
        (c, s)
    });
    let predictions = exec::map(&sentences, |(c, s)| inputs.model.predict_label(c, s))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let gold: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let mut m = MethodScores::named(method);
    m.per_label_f1 = metrics::per_label_f1(&predictions, &gold, inputs.model.num_labels())?;
    m.macro_f1 = Some(metrics::macro_f1(&predictions, &gold, inputs.model.num_labels())?);
    let vocab = inputs.tokenizer.vocab();
    m.unk_ratio = Some(metrics::unk_ratio(
        &sentences,
        vocab,
        chars,
        inputs.cfg.evaluate.exclude_unknown_chars,
    )?);
    let segs: Vec<Segmentation> = sentences.iter().map(|(_, s)| s.clone()).collect();
    m.avg_tokens = Some(metrics::avg_tokens(&segs)?);
    m.perplexity = Some(perplexity(inputs.cfg.evaluate.perplexity, &sentences, reference)?);
    if !inputs.dprime.is_empty() {
        let pairs = exec::map(&inputs.dprime.records, |r| -> Result<(Segmentation, Segmentation)> {
            Ok((tokenize(&r.chars()), r.segmentation()?))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        m.bi_tag_accuracy = Some(metrics::corpus_bi_tag_accuracy(&pairs)?);
    }
    Ok(m)
}

/// Original, the optimized tokenizers and the oracle on one split.
pub fn evaluate_split(inputs: &EvalInputs, split: Split, oracle: &CandidateOptions) -> Result<EvalReport> {
    let cfg = inputs.cfg;
    let examples = inputs.dataset.split(split);
    let chars = build_char_table(&inputs.dataset.train);
    let train_original: Vec<(Vec<char>, Segmentation)> = exec::map(&inputs.dataset.train, |ex| {
        let c = ex.chars();
        let s = inputs.tokenizer.encode(&c);
        (c, s)
    });
    let tok = inputs.tokenizer;
    let mut methods = vec![score_tokenization(
        inputs,
        "Original",
        examples,
        &|c: &[char]| tok.encode(c),
        &chars,
        &train_original,
    )?];
    for kind in &cfg.opt.kinds {
        match kind {
            OptKind::UnigramOpt => {
                if let Some(u) = &inputs.opt.unigram_opt {
                    methods.push(score_tokenization(
                        inputs,
                        kind.display(),
                        examples,
                        &|c: &[char]| u.encode(c),
                        &chars,
                        &train_original,
                    )?);
                }
            }
            OptKind::Bitag => {
                let trials = inputs
                    .opt
                    .bitag
                    .iter()
                    .enumerate()
                    .map(|(t, b)| {
                        score_tokenization(
                            inputs,
                            &format!("{} #{t}", kind.display()),
                            examples,
                            &|c: &[char]| b.tokenize(c),
                            &chars,
                            &train_original,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                if !trials.is_empty() {
                    methods.push(MethodScores::mean_of(kind.display(), trials));
                }
            }
            OptKind::Span => {
                let trials = inputs
                    .opt
                    .span
                    .iter()
                    .enumerate()
                    .map(|(t, s)| {
                        score_tokenization(
                            inputs,
                            &format!("{} #{t}", kind.display()),
                            examples,
                            &|c: &[char]| s.tokenize(c),
                            &chars,
                            &train_original,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                if !trials.is_empty() {
                    methods.push(MethodScores::mean_of(kind.display(), trials));
                }
            }
        }
    }
    let oracle_result = retok::oracle_select(examples, inputs.model, tok, oracle, cfg.seed)?;
    let gold: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let mut o = MethodScores::named("Oracle");
    o.macro_f1 = Some(oracle_result.macro_f1);
    o.per_label_f1 = metrics::per_label_f1(&oracle_result.predictions, &gold, inputs.model.num_labels())?;
    o.avg_tokens = Some(metrics::avg_tokens(&oracle_result.segmentations)?);
    methods.push(o);

    let mut train_statistics = Vec::new();
    let mut warnings = Vec::new();
    if !inputs.dprime.is_empty() {
        let mut org = MethodScores::named("Original");
        let org_segs: Vec<Segmentation> = train_original.iter().map(|(_, s)| s.clone()).collect();
        org.avg_tokens = Some(metrics::avg_tokens(&org_segs)?);
        org.perplexity = Some(perplexity(cfg.evaluate.perplexity, &train_original, &train_original)?);
        let dp: Vec<(Vec<char>, Segmentation)> = inputs
            .dprime
            .records
            .iter()
            .map(|r| Ok((r.chars(), r.segmentation()?)))
            .collect::<Result<_>>()?;
        let mut d = MethodScores::named("D'");
        let d_segs: Vec<Segmentation> = dp.iter().map(|(_, s)| s.clone()).collect();
        d.avg_tokens = Some(metrics::avg_tokens(&d_segs)?);
        d.perplexity = Some(perplexity(cfg.evaluate.perplexity, &dp, &train_original)?);
        if d.avg_tokens < org.avg_tokens {
            warnings.push(format!(
                "D' has fewer tokens per training sentence ({:.3}) than the original tokenization ({:.3})",
                d.avg_tokens.unwrap_or_default(),
                org.avg_tokens.unwrap_or_default()
            ));
        }
        train_statistics = vec![org, d];
    }
    let mut conventions = Conventions::default();
    if cfg.evaluate.perplexity == PerplexityMode::CrossEntropy {
        conventions.perplexity = "exp of the cross-entropy against the add-one smoothed unigram distribution of the original training tokenization".into();
    }
    if !cfg.evaluate.exclude_unknown_chars {
        conventions.unk_ratio = "every token outside the vocabulary counts as unknown".into();
    }
    Ok(EvalReport {
        split: split.as_str().into(),
        tokenizer_kind: tok.kind().as_str().into(),
        seeds: (0..cfg.opt.trials).map(|t| trial_seed(cfg.seed, t)).collect(),
        n: oracle.n,
        methods,
        train_statistics,
        conventions,
        warnings,
    })
}

/// `evaluate`
pub fn evaluate(cfg: &ExperimentConfig, layout: &Layout, split: Split, force: bool) -> Result<(RunManifest, EvalReport)> {
    let mut stage = Stage::begin(layout, "evaluate", cfg)?;
    check_upstream(layout, &["train-tokenizer", "train-downstream", "collect", "train-opt"], force)?;
    let (tok, model) = load_frozen(layout, force)?;
    let dataset = load_dataset(cfg)?;
    let dprime = RetokDataset::load(&layout.dprime())?;
    let opt = load_opt(cfg, layout)?;
    let inputs = EvalInputs {
        cfg,
        dataset: &dataset,
        tokenizer: &tok,
        model: &model,
        dprime: &dprime,
        opt: &opt,
    };
    let report = evaluate_split(&inputs, split, &cfg.candidates)?;
    fsutil::write_atomic(&layout.report(split), fsutil::to_sorted_json(&report)?.as_bytes())?;
    stage.manifest.add_input(&layout.tokenizer())?;
    for f in layout.classifier_files() {
        stage.manifest.add_input(&f)?;
    }
    stage.manifest.add_input(&layout.dprime())?;
    stage.manifest.add_output(&layout.report(split))?;
    Ok((stage.finish()?, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub original_f1: f64,
    pub oracle_f1: f64,
    /// Optimized tokenizers refitted on this N's D̂′ (empty without retraining).
    pub methods: Vec<MethodScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub split: String,
    pub tokenizer_kind: String,
    pub points: Vec<SweepPoint>,
}

/// Oracle (and optionally refitted tokenizers) for every N in `ns`.
pub fn sweep_points(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    tokenizer: &Tokenizer,
    model: &ClassifierModel,
    split: Split,
    ns: &[usize],
    retrain: bool,
) -> Result<SweepReport> {
    let examples = dataset.split(split);
    let original_f1 = classifier::evaluate_split(model, tokenizer, examples)?;
    let chars = build_char_table(&dataset.train);
    let mut points = Vec::new();
    for &n in ns {
        let options = CandidateOptions { n, ..cfg.candidates };
        let oracle = retok::oracle_select(examples, model, tokenizer, &options, cfg.seed)?;
        let mut methods = Vec::new();
        if retrain {
            let dprime = retok::collect_best(&dataset.train, model, tokenizer, &options, cfg.seed)?;
            let opt = fit_opt(cfg, &dprime, tokenizer, &chars)?;
            let inputs = EvalInputs {
                cfg,
                dataset,
                tokenizer,
                model,
                dprime: &dprime,
                opt: &opt,
            };
            let report = evaluate_split(&inputs, split, &options)?;
            methods = report
                .methods
                .into_iter()
                .filter(|m| m.method != "Original" && m.method != "Oracle")
                .collect();
        }
        points.push(SweepPoint {
            n,
            original_f1,
            oracle_f1: oracle.macro_f1,
            methods,
        });
    }
    Ok(SweepReport {
        split: split.as_str().into(),
        tokenizer_kind: tokenizer.kind().as_str().into(),
        points,
    })
}

/// `sweep-n`
pub fn sweep_n(
    cfg: &ExperimentConfig,
    layout: &Layout,
    split: Split,
    ns: &[usize],
    force: bool,
) -> Result<(RunManifest, SweepReport)> {
    let mut stage = Stage::begin(layout, "sweep-n", cfg)?;
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::Config("sweep-n: every N must be at least 1".into()));
    }
    check_upstream(layout, &["train-tokenizer", "train-downstream"], force)?;
    let (tok, model) = load_frozen(layout, force)?;
    let dataset = load_dataset(cfg)?;
    let report = sweep_points(cfg, &dataset, &tok, &model, split, ns, cfg.sweep.retrain)?;
    fsutil::write_atomic(&layout.sweep(split), fsutil::to_sorted_json(&report)?.as_bytes())?;
    stage.manifest.add_input(&layout.tokenizer())?;
    for f in layout.classifier_files() {
        stage.manifest.add_input(&f)?;
    }
    stage.manifest.add_output(&layout.sweep(split))?;
    Ok((stage.finish()?, report))
}

/// `gen-synth`: the corpus plus a desk-scale config pointing at it.
pub fn gen_synth(spec: &SynthSpec, seed: u64, out: &Path) -> Result<RunManifest> {
    spec.validate()?;
    let started = Instant::now();
    let corpus = synth::generate(spec, seed)?;
    let written = corpus.dataset.write_dir(out)?;
    let cfg = ExperimentConfig {
        dataset_dir: PathBuf::from("."),
        seed,
        ..ExperimentConfig::desk()
    };
    let cfg_path = out.join("config.json");
    fsutil::write_atomic(&cfg_path, cfg.to_json()?.as_bytes())?;
    let signals_path = out.join("signals.json");
    fsutil::write_atomic(&signals_path, fsutil::to_sorted_json(&corpus.signals)?.as_bytes())?;
    let mut manifest = RunManifest::new("gen-synth", serde_json::to_value(spec)?);
    for f in written.iter().chain([&cfg_path, &signals_path]) {
        manifest.add_output(f)?;
    }
    manifest.wall_clock_secs = started.elapsed().as_secs_f64();
    manifest.save(&out.join("manifests").join("gen-synth.json"))?;
    Ok(manifest)
}
