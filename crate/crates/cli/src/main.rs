use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tokopt::corpus::Split;
use tokopt::pipeline::{self, ExperimentConfig, Layout};
use tokopt::synth::SynthSpec;
use tokopt::{exec, Error, Result};

#[derive(Parser)]
#[command(name = "tokopt", version, about = "Tokenization optimization for frozen text classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Valid,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Valid => Split::Valid,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// Run even if upstream artifacts changed after their manifests were written.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train the downstream tokenizer on the training split.
    TrainTokenizer(Common),
    /// Train the downstream classifier.
    TrainDownstream(Common),
    /// Harvest minimum-loss tokenizations of the training split.
    Collect(Common),
    /// Fit the optimized tokenizers on the harvested data.
    TrainOpt(Common),
    /// Compare Original, optimized tokenizers and Oracle on a split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Oracle (and refitted tokenizers) for several candidate counts.
    SweepN {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Comma-separated N values; defaults to the config's sweep list.
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Generate the planted-ambiguity synthetic corpus and a matching config.
    GenSynth {
        /// Generator settings (JSON); defaults apply when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.threads {
        exec::set_threads(t);
    }
    Ok(cfg)
}

fn load_spec(path: Option<&Path>) -> Result<SynthSpec> {
    let Some(path) = path else {
        return Ok(SynthSpec::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let spec: SynthSpec = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainTokenizer(c) => {
            let cfg = load_config(&c)?;
            pipeline::train_tokenizer(&cfg, &Layout::new(&c.out))?;
            println!("wrote {}", Layout::new(&c.out).tokenizer().display());
        }
        Command::TrainDownstream(c) => {
            let cfg = load_config(&c)?;
            let (_, meta) = pipeline::train_downstream(&cfg, &Layout::new(&c.out), c.force)?;
            match (meta.best_epoch, meta.valid_macro_f1) {
                (Some(e), Some(f)) => println!("best epoch {e}, valid macro-F1 {:.2}", 100.0 * f),
                _ => println!("no training epochs run"),
            }
        }
        Command::Collect(c) => {
            let cfg = load_config(&c)?;
            let layout = Layout::new(&c.out);
            let (_, d) = pipeline::collect(&cfg, &layout, c.force)?;
            println!("wrote {} records to {}", d.len(), layout.dprime().display());
        }
        Command::TrainOpt(c) => {
            let cfg = load_config(&c)?;
            let layout = Layout::new(&c.out);
            pipeline::train_opt(&cfg, &layout, c.force)?;
            println!("wrote optimized tokenizers to {}", layout.opt_dir().display());
        }
        Command::Evaluate { common, split, format } => {
            let cfg = load_config(&common)?;
            let (_, report) = pipeline::evaluate(&cfg, &Layout::new(&common.out), split.into(), common.force)?;
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
                Format::Table => print!("{}", report.render_table()),
            }
        }
        Command::SweepN {
            common,
            split,
            ns,
            format,
        } => {
            let cfg = load_config(&common)?;
            let ns = ns.unwrap_or_else(|| cfg.sweep.ns.clone());
            let (_, report) = pipeline::sweep_n(&cfg, &Layout::new(&common.out), split.into(), &ns, common.force)?;
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
                Format::Table => {
                    println!("{:>6} {:>12} {:>12} {:>12}", "N", "Original", "Oracle", "Proposed");
                    for p in &report.points {
                        let proposed = p
                            .methods
                            .iter()
                            .find(|m| m.method == "Proposed")
                            .and_then(|m| m.macro_f1)
                            .map_or("-".to_string(), |f| format!("{:.2}", 100.0 * f));
                        println!(
                            "{:>6} {:>12.2} {:>12.2} {:>12}",
                            p.n,
                            100.0 * p.original_f1,
                            100.0 * p.oracle_f1,
                            proposed
                        );
                    }
                }
            }
        }
        Command::GenSynth { spec, seed, out } => {
            let spec = load_spec(spec.as_deref())?;
            pipeline::gen_synth(&spec, seed, &out)?;
            println!("wrote corpus and config.json to {}", out.display());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Stale(_) => 2,
        Error::MissingArtifact { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
