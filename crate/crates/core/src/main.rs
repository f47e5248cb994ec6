use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use affect_mtl::config::RunConfig;
use affect_mtl::eval::Task;
use affect_mtl::model::TaskMode;
use affect_mtl::normalize::NormalizeOptions;
use affect_mtl::pipeline;
use affect_mtl::shallow::HeadKind;

#[derive(Parser)]
#[command(name = "affect-mtl", version, about = "Tweet valence classification and intensity regression")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    StlClass,
    StlIntensity,
    Mtl,
}

impl From<Mode> for TaskMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::StlClass => TaskMode::StlClass,
            Mode::StlIntensity => TaskMode::StlIntensity,
            Mode::Mtl => TaskMode::Mtl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Head {
    Svm,
    Svr,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Class,
    Intensity,
}

#[derive(Subcommand)]
enum Command {
    /// Normalise the tweets of a dataset file.
    Normalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Takes lexicons and options from this run config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Word frequency lexicon (overrides the config).
        #[arg(long)]
        freq: Option<PathBuf>,
        /// Emoji replacement lexicon (overrides the config).
        #[arg(long)]
        emoji: Option<PathBuf>,
    },
    /// Report how each tweet of a split is embedded.
    Encode {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "train")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; writes checkpoint, history and dev/test reports.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Seeds to train; defaults to the config's seed list.
        #[arg(long)]
        seed: Vec<u64>,
        /// Run directory (single seed only).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export shared representations from a trained run.
    Repr {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        run: PathBuf,
        /// Splits to export; defaults to every configured split.
        #[arg(long)]
        split: Vec<String>,
        #[arg(long)]
        force: bool,
    },
    /// Train an SVM or SVR head on a run's representations.
    Shallow {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum)]
        head: Head,
        /// Split to evaluate on; defaults to test when configured, else dev.
        #[arg(long)]
        split: Option<String>,
        /// Overrides the run's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a predictions file (`id<TAB>value`) against gold labels.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "report")]
        name: String,
    },
    /// Compare MTL and STL runs across seeds.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        mtl: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        stl: Vec<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
        /// Compare runs even when their config hashes differ.
        #[arg(long)]
        force: bool,
    },
}

fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Normalize {
            input,
            out,
            config,
            freq,
            emoji,
        } => {
            let (mut f, mut e, mut opts) = (None, None, NormalizeOptions::default());
            if let Some(c) = &config {
                let cfg = load_config(c)?;
                f = cfg.resources.freq_lexicon;
                e = cfg.resources.emoji_lexicon;
                opts = cfg.normalize;
            }
            f = freq.or(f);
            e = emoji.or(e);
            let normalizer = pipeline::load_normalizer(f.as_deref(), e.as_deref(), opts)?;
            let n = pipeline::normalize_file(&input, &out, &normalizer)?;
            println!("normalized {n} tweets into {}", out.display());
        }
        Command::Encode { config, split, out } => {
            let cfg = load_config(&config)?;
            let s = pipeline::encode_split_report(&cfg, &split, &out)?;
            println!(
                "{} tweets, {} tokens ({} glove, {} emoji, {} character fallback), {} truncated, feature width {}",
                s.tweets, s.tokens, s.glove, s.emoji, s.characters, s.truncated, s.feature_width
            );
        }
        Command::Train {
            config,
            mode,
            seed,
            out,
        } => {
            let cfg = load_config(&config)?;
            let seeds = if seed.is_empty() { cfg.seeds.clone() } else { seed };
            if out.is_some() && seeds.len() != 1 {
                bail!("--out needs exactly one seed");
            }
            let mode = TaskMode::from(mode);
            for s in seeds {
                let dir = out.clone().unwrap_or_else(|| pipeline::run_dir(&cfg, mode, s));
                let info = pipeline::train_run(&cfg, mode, s, &dir)?;
                println!(
                    "{} seed {}: best epoch {} of {} -> {}",
                    mode,
                    s,
                    info.best_epoch,
                    info.epochs_run,
                    dir.display()
                );
            }
        }
        Command::Repr {
            config,
            run,
            split,
            force,
        } => {
            let cfg = load_config(&config)?;
            let splits = if split.is_empty() {
                cfg.data.splits().iter().map(|(n, _)| n.to_string()).collect()
            } else {
                split
            };
            for p in pipeline::export_representations(&cfg, &run, &splits, force)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Shallow {
            config,
            run,
            head,
            split,
            seed,
        } => {
            let cfg = load_config(&config)?;
            let split = split.unwrap_or_else(|| if cfg.data.test.is_some() { "test" } else { "dev" }.into());
            let seed = match seed {
                Some(s) => s,
                None => pipeline::load_run_info(&run)?.seed,
            };
            let head = match head {
                Head::Svm => HeadKind::Svm,
                Head::Svr => HeadKind::Svr,
            };
            let r = pipeline::shallow_run(&cfg, &run, head, &split, seed)?;
            println!(
                "{split} pearson {:.4}{}",
                r.pearson,
                if r.pearson_defined { "" } else { " (undefined)" }
            );
        }
        Command::Eval {
            predictions,
            gold,
            task,
            out,
            name,
        } => {
            let task = match task {
                TaskArg::Class => Task::Classification,
                TaskArg::Intensity => Task::Intensity,
            };
            let r = pipeline::evaluate_files(&predictions, &gold, task, &out, &name)?;
            println!(
                "n={} pearson {:.4}{}",
                r.n,
                r.pearson,
                if r.pearson_defined { "" } else { " (undefined)" }
            );
        }
        Command::Compare {
            mtl,
            stl,
            split,
            out,
            force,
        } => {
            let c = pipeline::compare_dirs(&mtl, &stl, &split, force, &out)?;
            print!("{}", c.table.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
