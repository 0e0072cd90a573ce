use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use misinfo_core::features::FeatureMethod;
use misinfo_core::models::ModelType;
use misinfo_core::pipeline::{self, EvalArgs, ExperimentArgs, FilterArgs, PreprocessArgs, SplitArgs, TrainArgs};
use misinfo_core::service;
use misinfo_core::synth::SynthSpec;
use misinfo_core::{Error, Result};

/// Health-misinformation tweet workbench.
///
/// Fixture files (glossary, stopword lists) are bundled; set MISINFO_DATA_DIR
/// to read them from another directory.
#[derive(Parser)]
#[command(name = "misinfo", version)]
struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Keep tweets that mention a glossary keyword.
    Filter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        glossary: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Keyword hit report (default: <output>.keywords.csv).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Drop tweets whose normalized text repeats an earlier one.
    Dedup {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Serve the annotation API (and optional static UI) over a tweet file.
    Annotate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        journal: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory of built UI assets served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Where POST /api/finalize writes the labeled dataset.
        #[arg(long)]
        finalize_output: Option<PathBuf>,
    },
    /// Resolve journaled votes and adjudications into a labeled dataset.
    Finalize {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        journal: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Print inter-annotator agreement as JSON.
    Agreement {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        journal: PathBuf,
    },
    /// Clean, tokenize, remove stopwords and stem.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        /// Labeled dataset whose M/T labels are attached by tweet id.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Directory holding stopwords.english and stopwords.trivial.
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Seeded train/test split of labeled token sequences.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "train.jsonl")]
        train_out: PathBuf,
        #[arg(long, default_value = "test.jsonl")]
        test_out: PathBuf,
    },
    /// Train one classifier on the training split.
    Train {
        #[arg(long, default_value = "train.jsonl")]
        train: PathBuf,
        #[arg(long)]
        model: ModelType,
        #[arg(long)]
        method: FeatureMethod,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Hyperparameter override, repeatable: --set max_depth=10
        #[arg(long = "set", value_parser = parse_key_val)]
        overrides: Vec<(String, String)>,
        /// Model file; the feature space is written next to it.
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluate a trained model on the test split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "test.jsonl")]
        test: PathBuf,
        /// Report JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the model x method grid and write grid.csv and grid.txt.
    Experiment(ExperimentFlags),
    /// Generate a synthetic labeled corpus.
    Synth(SynthFlags),
}

#[derive(Args)]
struct ExperimentFlags {
    /// Labeled dataset, or a tweet file together with --labels.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    ratio: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated subset of nb,dt,mem,rf,svm.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelType>>,
    /// Comma-separated subset of bow,unigram,bigram,trigram.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<FeatureMethod>>,
    #[arg(long)]
    resplit_per_method: bool,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SynthFlags {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 210)]
    n_m: usize,
    #[arg(long, default_value_t = 314)]
    n_t: usize,
    #[arg(long, default_value_t = 400)]
    vocab_shared: usize,
    #[arg(long, default_value_t = 80)]
    vocab_m: usize,
    #[arg(long, default_value_t = 80)]
    vocab_t: usize,
    #[arg(long, default_value_t = 0.8)]
    signal: f64,
    #[arg(long, default_value_t = 2)]
    min_len: usize,
    #[arg(long, default_value_t = 32)]
    max_len: usize,
    #[arg(long)]
    output: PathBuf,
}

fn parse_key_val(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got {s:?}"))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Validation(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn annotate(
    dataset: PathBuf,
    journal: PathBuf,
    addr: SocketAddr,
    static_dir: Option<PathBuf>,
    finalize_output: Option<PathBuf>,
) -> Result<()> {
    let store = pipeline::open_store(&dataset, &journal)?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Io {
        path: PathBuf::from("tokio runtime"),
        source: e,
    })?;
    rt.block_on(async move {
        let listener = service::bind(addr).await?;
        log::info!(
            "annotation service on http://{} ({} tweets, journal {})",
            listener.local_addr().map(|a| a.to_string()).unwrap_or_default(),
            store.dataset().len(),
            journal.display()
        );
        let app = service::router(service::AppState::new(store, finalize_output), static_dir);
        service::serve(listener, app, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })
}

/// Exit status 1 when every failed cell was caused by its input, 2 otherwise.
fn experiment(f: ExperimentFlags) -> Result<ExitCode> {
    let mut args = ExperimentArgs::new(f.corpus, f.out_dir);
    args.labels = f.labels;
    args.stopwords = f.stopwords;
    args.ratio = f.ratio;
    args.seed = f.seed;
    args.resplit_per_method = f.resplit_per_method;
    if let Some(m) = f.models {
        args.models = m;
    }
    if let Some(m) = f.methods {
        args.methods = m;
    }
    let out = pipeline::cmd_experiment(&args)?;
    print!("{}", out.table);
    if out.failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for f in &out.failures {
        eprintln!("error: {} / {}: {}", f.model.display_name(), f.method.display_name(), f.message);
    }
    Ok(if out.failures.iter().all(|f| f.user_error) {
        ExitCode::from(1)
    } else {
        ExitCode::from(2)
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Filter {
            input,
            glossary,
            output,
            report,
        } => {
            pipeline::cmd_filter(&FilterArgs {
                input,
                glossary,
                output,
                report,
            })?;
        }
        Command::Dedup { input, output } => {
            pipeline::cmd_dedup(&input, &output)?;
        }
        Command::Annotate {
            dataset,
            journal,
            port,
            host,
            static_dir,
            finalize_output,
        } => {
            let ip = host
                .parse()
                .map_err(|_| Error::Validation(format!("invalid host address {host:?}")))?;
            annotate(dataset, journal, SocketAddr::new(ip, port), static_dir, finalize_output)?;
        }
        Command::Finalize {
            dataset,
            journal,
            output,
        } => {
            pipeline::cmd_finalize(&dataset, &journal, &output)?;
        }
        Command::Agreement { dataset, journal } => print_json(&pipeline::cmd_agreement(&dataset, &journal)?)?,
        Command::Preprocess {
            input,
            labels,
            stopwords,
            output,
        } => {
            pipeline::cmd_preprocess(&PreprocessArgs {
                input,
                labels,
                stopwords,
                output,
            })?;
        }
        Command::Split {
            input,
            ratio,
            seed,
            train_out,
            test_out,
        } => {
            pipeline::cmd_split(&SplitArgs {
                input,
                ratio,
                seed,
                train_out,
                test_out,
            })?;
        }
        Command::Train {
            train,
            model,
            method,
            seed,
            overrides,
            output,
        } => {
            pipeline::cmd_train(&TrainArgs {
                train,
                model,
                method,
                seed,
                overrides,
                output,
            })?;
        }
        Command::Eval { model, test, output } => {
            let rec = pipeline::cmd_eval(&EvalArgs { model, test, output })?;
            let mut grid = misinfo_core::eval::Grid::new();
            grid.insert((rec.model, rec.method), misinfo_core::eval::Cell::Report(rec.report));
            print!("{}", misinfo_core::eval::render_table(&grid));
        }
        Command::Experiment(f) => return experiment(f),
        Command::Synth(f) => {
            let spec = SynthSpec {
                seed: f.seed,
                n_m: f.n_m,
                n_t: f.n_t,
                vocab_shared: f.vocab_shared,
                vocab_m: f.vocab_m,
                vocab_t: f.vocab_t,
                signal: f.signal,
                length_range: (f.min_len, f.max_len),
            };
            pipeline::cmd_synth(&spec, &f.output)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}
