use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use warpmetric::cli::{
    cmd_evaluate, cmd_relevance, cmd_sweep, cmd_synth, cmd_table, cmd_train, RunConfig,
};
use warpmetric::eval::{Method, RegularizePolicy};
use warpmetric::seqdata::SyntheticSpec;
use warpmetric::Error;

#[derive(Parser)]
#[command(
    name = "warpmetric",
    about = "Metric learning over per-channel DTW distance vectors for time-series classification"
)]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus manifest path.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed for the CV plan and the optimizer.
    #[arg(long)]
    seed: Option<u64>,
    /// Rank restriction for the learned transform.
    #[arg(long)]
    rank: Option<usize>,
    /// Regularize onto the training-distance span (numerical-rank policy).
    #[arg(long)]
    regularize: bool,
    /// Manual effective dimension for regularization (implies --regularize).
    #[arg(long)]
    effective_dim: Option<usize>,
    /// Comma-separated methods: dtw-lmnn,dtw-knn,euclidean-lmnn,pca-dtw-knn.
    #[arg(long)]
    methods: Option<String>,
    /// Worker-thread cap for table building and training sums.
    #[arg(long)]
    threads: Option<usize>,
    /// Cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Cross-validation repetitions.
    #[arg(long)]
    repetitions: Option<usize>,
}

#[derive(Args, Clone)]
struct SynthArgs {
    /// Sample count.
    #[arg(long, default_value_t = 60)]
    samples: usize,
    /// Channel count.
    #[arg(long, default_value_t = 5)]
    channels: usize,
    /// Class count.
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 15)]
    len_min: usize,
    #[arg(long, default_value_t = 25)]
    len_max: usize,
    /// Comma-separated informative channel indices.
    #[arg(long, default_value = "0")]
    informative: String,
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    /// Duplicate channels as dst:src pairs, e.g. "3:1,4:2".
    #[arg(long)]
    duplicates: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build (or reuse) the distance-vector table cache.
    Table {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train the metric on the full corpus and write model + trace.
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Cross-validate the configured methods and write reports.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Per-fold relevance profiles and the feature-selection sweep.
    Relevance {
        #[command(flatten)]
        common: CommonArgs,
        /// Trained model JSON (defaults to <out>/model.json).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Feature-selection sweep only.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Generate a synthetic corpus.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        synth: SynthArgs,
    },
}

fn parse_index_list(text: &str) -> Result<Vec<usize>, Error> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Validation(format!("bad index {s:?}")))
        })
        .collect()
}

fn parse_duplicates(text: &str) -> Result<Vec<(usize, usize)>, Error> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (dst, src) = pair
                .split_once(':')
                .ok_or_else(|| Error::Validation(format!("bad duplicate pair {pair:?}")))?;
            Ok((
                dst.trim()
                    .parse()
                    .map_err(|_| Error::Validation(format!("bad index {dst:?}")))?,
                src.trim()
                    .parse()
                    .map_err(|_| Error::Validation(format!("bad index {src:?}")))?,
            ))
        })
        .collect()
}

fn build_config(common: &CommonArgs) -> Result<RunConfig, Error> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(manifest) = &common.manifest {
        config.manifest = Some(manifest.clone());
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        config.cv.seed = seed;
        config.lmnn.seed = seed;
        if let Some(synth) = &mut config.synth {
            synth.seed = seed;
        }
    }
    if let Some(rank) = common.rank {
        config.lmnn.rank = Some(rank);
    }
    if let Some(j) = common.effective_dim {
        config.regularize = RegularizePolicy::Manual(j);
    } else if common.regularize {
        config.regularize = RegularizePolicy::Threshold(1e-8);
    }
    if let Some(methods) = &common.methods {
        config.methods = methods
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(Method::from_str)
            .collect::<Result<_, _>>()?;
    }
    if let Some(threads) = common.threads {
        config.threads = Some(threads);
    }
    if let Some(folds) = common.folds {
        config.cv.folds = folds;
    }
    if let Some(reps) = common.repetitions {
        config.cv.repetitions = reps;
    }
    if let Some(threads) = config.threads {
        // ignore failure when a pool was already installed in this process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(config)
}

fn model_path_or_default(config: &RunConfig, model: &Option<PathBuf>) -> PathBuf {
    model.clone().unwrap_or_else(|| config.model_path())
}

fn run() -> Result<(), Error> {
    let args = CliArgs::parse();
    match args.command {
        Command::Table { common } => {
            let config = build_config(&common)?;
            let outcome = cmd_table(&config)?;
            if outcome.reused {
                println!(
                    "reusing cached distance table {} (fingerprint {})",
                    outcome.path.display(),
                    outcome.fingerprint
                );
            } else {
                println!(
                    "wrote distance table {} (fingerprint {})",
                    outcome.path.display(),
                    outcome.fingerprint
                );
            }
        }
        Command::Train { common } => {
            let config = build_config(&common)?;
            let outcome = cmd_train(&config)?;
            println!("wrote model {}", outcome.model_path.display());
            println!("wrote trace {}", outcome.trace_path.display());
            if let Some(path) = outcome.spectrum_path {
                println!(
                    "wrote spectrum {} (effective dimension {})",
                    path.display(),
                    outcome.effective_dim.unwrap_or(0)
                );
            }
        }
        Command::Evaluate { common } => {
            let config = build_config(&common)?;
            let outcome = cmd_evaluate(&config)?;
            print!("{}", outcome.report.render_summary());
            println!("wrote report {}", outcome.json_path.display());
            println!("wrote report {}", outcome.csv_path.display());
        }
        Command::Relevance { common, model } => {
            let config = build_config(&common)?;
            let model_path = model_path_or_default(&config, &model);
            let outcome = cmd_relevance(&config, &model_path)?;
            println!("total profile variance {}", outcome.total_variance);
            println!("wrote profiles {}", outcome.profiles_path.display());
            println!("wrote sweep {}", outcome.sweep_path.display());
        }
        Command::Sweep { common, model } => {
            let config = build_config(&common)?;
            let model_path = model_path_or_default(&config, &model);
            let path = cmd_sweep(&config, &model_path)?;
            println!("wrote sweep {}", path.display());
        }
        Command::Synth { common, synth } => {
            let mut config = build_config(&common)?;
            if config.synth.is_none() {
                let mut spec = SyntheticSpec::new(
                    synth.samples,
                    synth.channels,
                    synth.classes,
                    (synth.len_min, synth.len_max),
                    parse_index_list(&synth.informative)?,
                    synth.separation,
                    synth.noise,
                    common.seed.unwrap_or(0),
                );
                if let Some(dups) = &synth.duplicates {
                    spec = spec.with_duplicates(parse_duplicates(dups)?);
                }
                config.synth = Some(spec);
            }
            let manifest = cmd_synth(&config)?;
            println!("wrote corpus manifest {}", manifest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
