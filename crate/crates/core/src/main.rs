//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use d4d::localizer::{evaluate, Batchable, Localizer};
use d4d::nn::{Dataset, ModelConfig};
use d4d::pipeline::{
    build_corpus, diagnose, run_experiment, train_localizer, Corpus, ExperimentConfig, SeedModel, SeedRef, TaskSpec,
    SPLIT_NAMES,
};
use d4d::probe::FeatureMatrix;
use d4d::rng::SeedTree;
use d4d::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "d4d", version, about = "Fault localization for small neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mutate the configured seed models and write a labeled trace corpus.
    GenCorpus {
        #[command(flatten)]
        common: Common,
        /// Output directory for the corpus.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one localizer on a corpus and save a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        /// Output directory for `model.ckpt` and `history.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on a corpus, or run the repeated experiment.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        /// Score this checkpoint instead of training new classifiers.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Classifier trainings to average; the config's value when absent.
        #[arg(long)]
        runs: Option<usize>,
        /// Directory for `report.json` and `report.txt`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a model once with instrumentation and report likely faults.
    Diagnose {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Model JSON (a model config, or a seed document with a task), or a
        /// bundled seed name.
        model: String,
        /// Dataset CSV (features then integer label per row) or a bundled
        /// task name; the model document's task when absent.
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long, env = "D4D_SEED")]
        seed: Option<u64>,
        /// Classes listed in the ranking.
        #[arg(long, default_value_t = 5)]
        top: usize,
        /// Directory for `diagnosis.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pretty-print a feature-matrix CSV with its column names.
    InspectTrace {
        trace: PathBuf,
        /// Only columns whose name contains this text.
        #[arg(long)]
        filter: Option<String>,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Global seed; the config's seed (default 42) when absent.
    #[arg(long, env = "D4D_SEED")]
    seed: Option<u64>,
    /// Worker threads for parallel jobs.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create --out {}: {e}", dir.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        None => f(),
        Some(0) => Err(Error::Config("--jobs must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("--jobs {n}: {e}")))?
            .install(f),
    }
}

/// Seed used for the single classifier of `train`; it matches the first run
/// of `eval`.
fn classifier_seed(seed: u64) -> u64 {
    SeedTree::new(seed).child("classifier").index(0).seed()
}

fn read_model(arg: &str, epochs: usize) -> Result<(ModelConfig, Option<TaskSpec>)> {
    let path = Path::new(arg);
    if !path.exists() {
        let seed = SeedRef::Named(arg.to_string())
            .resolve(epochs)
            .map_err(|_| Error::Config(format!("model '{arg}' is neither a file nor a bundled seed name")))?;
        return Ok((seed.model, Some(seed.task)));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{arg}: {e}")))?;
    if let Ok(seed) = serde_json::from_str::<SeedModel>(&text) {
        return Ok((seed.model, Some(seed.task)));
    }
    let model: ModelConfig = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{arg}: {e}")))?;
    Ok((model, None))
}

fn read_dataset(arg: Option<&str>, task: Option<TaskSpec>, model: &ModelConfig, seed: u64) -> Result<Dataset> {
    let stream = SeedTree::new(seed).child("dataset");
    match arg {
        Some(a) if Path::new(a).exists() => Dataset::from_csv(Path::new(a), &model.spec.input_shape),
        Some(a) => TaskSpec::builtin(a)
            .ok_or_else(|| Error::Config(format!("--dataset '{a}' is neither a file nor a bundled task")))?
            .generate(stream),
        None => task
            .ok_or_else(|| Error::Config("the model file names no task; pass --dataset".into()))?
            .generate(stream),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenCorpus { common, out } => {
            let cfg = common.load()?;
            create_dir(&out)?;
            let rows = with_jobs(common.jobs, || build_corpus(&cfg, &out))?;
            let corpus_counts = d4d::pipeline::CorpusCounts::of(&rows);
            println!(
                "wrote {} records ({} correct, {} single-fault, {} dual-fault) to {}",
                rows.len(),
                corpus_counts.correct,
                corpus_counts.single,
                corpus_counts.multi,
                out.display()
            );
        }
        Command::Train { common, corpus, out } => {
            let cfg = common.load()?;
            let corpus = Corpus::load(&corpus)?;
            create_dir(&out)?;
            let (loc, history) =
                with_jobs(common.jobs, || train_localizer(&corpus, cfg.classifier, &cfg.fit, classifier_seed(cfg.seed)))?;
            let ckpt = out.join("model.ckpt");
            loc.save(&ckpt)?;
            write(&out.join("history.json"), &serde_json::to_string_pretty(&history).expect("history serializes"))?;
            let last = &history.epochs[history.selected_epoch];
            println!(
                "saved {} (epoch {} selected, val accuracy {})",
                ckpt.display(),
                history.selected_epoch + 1,
                last.val.map_or("n/a".to_string(), |v| format!("{:.4}", v.accuracy))
            );
        }
        Command::Eval { common, corpus, checkpoint, runs, out } => {
            let cfg = common.load()?;
            let corpus = Corpus::load(&corpus)?;
            let text = match checkpoint {
                Some(path) => {
                    let loc = Localizer::load(&path)?;
                    let mut s = String::from("split   accuracy precision    recall\n");
                    for name in SPLIT_NAMES {
                        let set = Batchable::new(&corpus.split(name), loc.classifier.spec().steps)?;
                        if set.is_empty() {
                            continue;
                        }
                        let sc = evaluate(&loc.classifier, &set)?;
                        s += &format!("{name:<6} {:>9.4} {:>9.4} {:>9.4}\n", sc.accuracy, sc.precision, sc.recall);
                    }
                    s
                }
                None => {
                    let report = with_jobs(common.jobs, || {
                        run_experiment(&corpus, cfg.classifier, &cfg.fit, runs.unwrap_or(cfg.runs), cfg.seed)
                    })?;
                    if let Some(dir) = &out {
                        create_dir(dir)?;
                        write(&dir.join("report.json"), &report.to_json())?;
                    }
                    report.to_text()
                }
            };
            if let Some(dir) = &out {
                create_dir(dir)?;
                write(&dir.join("report.txt"), &text)?;
            }
            print!("{text}");
        }
        Command::Diagnose { checkpoint, model, dataset, seed, top, out } => {
            let loc = Localizer::load(&checkpoint)?;
            let seed = seed.unwrap_or(d4d::pipeline::DEFAULT_SEED);
            let (mut model, task) = read_model(&model, loc.epochs())?;
            // Traces must span the epochs the localizer was trained on.
            model.train.epochs = loc.epochs();
            let data = read_dataset(dataset.as_deref(), task, &model, seed)?;
            let t = std::time::Instant::now();
            let d = diagnose(&loc, &model, &data, seed)?;
            log::info!("diagnosis took {:.2}s", t.elapsed().as_secs_f64());
            if let Some(dir) = &out {
                create_dir(dir)?;
                write(&dir.join("diagnosis.json"), &serde_json::to_string_pretty(&d).expect("diagnosis serializes"))?;
            }
            print!("{}", d.report(top));
        }
        Command::InspectTrace { trace, filter } => {
            let fm = FeatureMatrix::read_csv(&trace)?;
            let names = FeatureMatrix::column_names(fm.max_layers());
            let width = names.iter().map(String::len).max().unwrap_or(0);
            print!("{:<width$}", "column");
            for e in 0..fm.epochs() {
                print!(" {:>11}", format!("epoch {}", e + 1));
            }
            println!();
            for (c, name) in names.iter().enumerate() {
                if filter.as_ref().is_some_and(|f| !name.contains(f.as_str())) {
                    continue;
                }
                print!("{name:<width$}");
                for e in 0..fm.epochs() {
                    print!(" {:>11.4e}", fm.get(e, c));
                }
                println!();
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
