//! Experiment runner behind the command-line interface: configuration,
//! cache management and file outputs. All arithmetic happens in the library
//! layers; this module only wires them together, so CLI results equal direct
//! API calls exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dtw::{build_distance_table, table_fingerprint, DistanceVectorTable, DtwConfig};
use crate::error::{Error, Result};
use crate::eval::{
    compare_methods, evaluate_dtw_knn, evaluate_dtw_lmnn, evaluate_euclidean_lmnn,
    evaluate_pca_dtw_knn, feature_selection_sweep, CvPlan, EvalReport, Method, MethodEval,
    PairingUnit, RegularizePolicy, SweepMode,
};
use crate::lmnn::{train, LmnnConfig};
use crate::nullspace::{choose_effective_dim, correlation_spectrum, profile_variance, regularize};
use crate::quadform::MetricModel;
use crate::seqdata::{generate_synthetic, load_corpus, Corpus, SyntheticSpec};

pub use crate::seqdata::write_corpus;

/// Cross-validation shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvSpec {
    pub folds: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for CvSpec {
    fn default() -> Self {
        CvSpec {
            folds: 10,
            repetitions: 10,
            seed: 0,
        }
    }
}

/// One experiment run: corpus, distance and training configuration, CV
/// plan, methods and output directory. Loadable from JSON; flags override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub dtw: DtwConfig,
    pub lmnn: LmnnConfig,
    pub regularize: RegularizePolicy,
    pub cv: CvSpec,
    pub methods: Vec<Method>,
    pub knn_k: usize,
    pub pairing: PairingUnit,
    pub sweep_mode: SweepMode,
    pub synth: Option<SyntheticSpec>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest: None,
            out_dir: PathBuf::from("out"),
            dtw: DtwConfig::default(),
            lmnn: LmnnConfig::default(),
            regularize: RegularizePolicy::Off,
            cv: CvSpec::default(),
            methods: Method::all().to_vec(),
            knn_k: 3,
            pairing: PairingUnit::Repetition,
            sweep_mode: SweepMode::Reuse,
            synth: None,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Validation(format!("bad config: {e}")))
    }

    fn manifest(&self) -> Result<&Path> {
        self.manifest
            .as_deref()
            .ok_or_else(|| Error::Validation("no corpus manifest given".into()))
    }

    pub fn table_path(&self) -> PathBuf {
        self.out_dir.join("table.bin")
    }

    pub fn model_path(&self) -> PathBuf {
        self.out_dir.join("model.json")
    }

    pub fn trace_path(&self) -> PathBuf {
        self.out_dir.join("trace.csv")
    }

    pub fn spectrum_path(&self) -> PathBuf {
        self.out_dir.join("spectrum.csv")
    }

    pub fn report_json_path(&self) -> PathBuf {
        self.out_dir.join("report.json")
    }

    pub fn report_csv_path(&self) -> PathBuf {
        self.out_dir.join("report.csv")
    }

    pub fn profiles_path(&self) -> PathBuf {
        self.out_dir.join("profiles.csv")
    }

    pub fn sweep_path(&self) -> PathBuf {
        self.out_dir.join("sweep.csv")
    }

    fn ensure_out_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir).map_err(|source| Error::Io {
            path: self.out_dir.clone(),
            source,
        })
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Outcome of `table`: where the cache lives and whether it was reused.
#[derive(Debug)]
pub struct TableOutcome {
    pub path: PathBuf,
    pub reused: bool,
    pub fingerprint: String,
}

/// Load the cached table when its fingerprint matches the corpus + config;
/// rebuild and rewrite otherwise.
pub fn ensure_table(config: &RunConfig, corpus: &Corpus) -> Result<(DistanceVectorTable, TableOutcome)> {
    config.ensure_out_dir()?;
    let expected = table_fingerprint(corpus, &config.dtw, "dtw");
    let path = config.table_path();
    if path.exists() {
        if let Ok(table) = DistanceVectorTable::load(&path) {
            if table.validate_fingerprint(&expected).is_ok() {
                return Ok((
                    table,
                    TableOutcome {
                        path,
                        reused: true,
                        fingerprint: expected,
                    },
                ));
            }
        }
    }
    let table = build_distance_table(corpus, &config.dtw)?;
    table.save(&path)?;
    Ok((
        table,
        TableOutcome {
            path,
            reused: false,
            fingerprint: expected,
        },
    ))
}

/// `synth`: generate the configured synthetic corpus and persist it.
pub fn cmd_synth(config: &RunConfig) -> Result<PathBuf> {
    let spec = config
        .synth
        .as_ref()
        .ok_or_else(|| Error::Validation("no synthetic spec configured".into()))?;
    let corpus = generate_synthetic(spec)?;
    write_corpus(&corpus, &config.out_dir)?;
    Ok(config.out_dir.join("manifest.json"))
}

/// `table`: materialize (or reuse) the distance-vector cache.
pub fn cmd_table(config: &RunConfig) -> Result<TableOutcome> {
    let corpus = load_corpus(config.manifest()?)?;
    let (_, outcome) = ensure_table(config, &corpus)?;
    Ok(outcome)
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model_path: PathBuf,
    pub trace_path: PathBuf,
    pub spectrum_path: Option<PathBuf>,
    pub effective_dim: Option<usize>,
}

/// `train`: fit the metric on the whole corpus, optionally regularize onto
/// the full-table spectrum, write model + trace (+ spectrum).
pub fn cmd_train(config: &RunConfig) -> Result<TrainOutcome> {
    let corpus = load_corpus(config.manifest()?)?;
    let (table, _) = ensure_table(config, &corpus)?;
    let (mut model, trace) = train(&table, corpus.labels(), &config.lmnn)?;

    let mut spectrum_path = None;
    let mut effective_dim = None;
    if let Some(policy) = config.regularize.dimension_policy() {
        let all: Vec<usize> = (0..table.m()).collect();
        let spectrum = correlation_spectrum(&table, &all)?;
        let j = choose_effective_dim(&spectrum, policy);
        model = regularize(&model, &spectrum, j)?;
        effective_dim = Some(j);
        let path = config.spectrum_path();
        write_text(&path, &spectrum.to_csv_string())?;
        spectrum_path = Some(path);
    }

    model.save(&config.model_path())?;
    trace.save_csv(&config.trace_path(), model.fingerprint(), config.lmnn.seed)?;
    Ok(TrainOutcome {
        model_path: config.model_path(),
        trace_path: config.trace_path(),
        spectrum_path,
        effective_dim,
    })
}

#[derive(Debug)]
pub struct EvaluateOutcome {
    pub report: EvalReport,
    pub json_path: PathBuf,
    pub csv_path: PathBuf,
}

/// `evaluate`: run every configured method on one shared plan, compare
/// against the main pipeline, write JSON + CSV reports.
pub fn cmd_evaluate(config: &RunConfig) -> Result<EvaluateOutcome> {
    if config.methods.is_empty() {
        return Err(Error::Validation("empty method list".into()));
    }
    let corpus = load_corpus(config.manifest()?)?;
    let (table, outcome) = ensure_table(config, &corpus)?;
    let plan = CvPlan::stratified(
        corpus.labels(),
        config.cv.folds,
        config.cv.repetitions,
        config.cv.seed,
    )?;
    let mut evals: Vec<MethodEval> = Vec::new();
    for &method in &config.methods {
        let eval = match method {
            Method::DtwLmnn => evaluate_dtw_lmnn(
                &table,
                corpus.labels(),
                &config.lmnn,
                &plan,
                config.regularize,
                config.knn_k,
                false,
            )?,
            Method::DtwKnn => evaluate_dtw_knn(&table, corpus.labels(), &plan, config.knn_k)?,
            Method::EuclideanLmnn => {
                evaluate_euclidean_lmnn(&corpus, &config.lmnn, &plan, config.knn_k)?
            }
            Method::PcaDtwKnn => {
                evaluate_pca_dtw_knn(&corpus, &config.dtw, &plan, 3, config.knn_k)?
            }
        };
        evals.push(eval);
    }
    let report = compare_methods(
        evals,
        Method::DtwLmnn,
        config.pairing,
        outcome.fingerprint,
        config.cv.seed,
    )?;
    config.ensure_out_dir()?;
    write_text(&config.report_json_path(), &report.to_json_string())?;
    write_text(&config.report_csv_path(), &report.to_csv_string())?;
    Ok(EvaluateOutcome {
        report,
        json_path: config.report_json_path(),
        csv_path: config.report_csv_path(),
    })
}

#[derive(Debug)]
pub struct RelevanceOutcome {
    pub profiles_path: PathBuf,
    pub sweep_path: PathBuf,
    pub total_variance: f64,
}

/// A stored model carries the fingerprint of the table it was trained on;
/// refuse to interpret it against a different corpus or DTW config.
fn load_model_checked(table: &DistanceVectorTable, model_path: &Path) -> Result<MetricModel> {
    let model = MetricModel::load(model_path)?;
    if model.n() != table.n() {
        return Err(Error::Dimension {
            expected: table.n(),
            found: model.n(),
        });
    }
    if model.fingerprint() != table.fingerprint() {
        return Err(Error::Fingerprint {
            expected: table.fingerprint().to_string(),
            found: model.fingerprint().to_string(),
        });
    }
    Ok(model)
}

/// `relevance`: per-fold profiles from the configured pipeline, their
/// mean/variance per channel, the total profile variance, and the sweep
/// curve of the supplied model.
pub fn cmd_relevance(config: &RunConfig, model_path: &Path) -> Result<RelevanceOutcome> {
    let corpus = load_corpus(config.manifest()?)?;
    let (table, outcome) = ensure_table(config, &corpus)?;
    let model = load_model_checked(&table, model_path)?;
    let plan = CvPlan::stratified(
        corpus.labels(),
        config.cv.folds,
        config.cv.repetitions,
        config.cv.seed,
    )?;
    let eval = evaluate_dtw_lmnn(
        &table,
        corpus.labels(),
        &config.lmnn,
        &plan,
        config.regularize,
        config.knn_k,
        true,
    )?;
    let profiles = eval.profiles.as_ref().expect("profiles were requested");
    let total_variance = profile_variance(profiles)?;

    let count = profiles.len() as f64;
    let n = table.n();
    let mut lines = format!(
        "# fingerprint={} seed={} regularized={} effective_dim={} total_variance={}\n",
        outcome.fingerprint,
        config.cv.seed,
        model.regularized(),
        model
            .effective_dim()
            .map(|j| j.to_string())
            .unwrap_or_else(|| "none".into()),
        total_variance
    );
    lines.push_str("channel_name,mean,variance\n");
    for k in 0..n {
        let values: Vec<f64> = profiles.iter().map(|p| p.values[k]).collect();
        let mean = values.iter().sum::<f64>() / count;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0)
        } else {
            0.0
        };
        lines.push_str(&format!("{},{},{}\n", corpus.channel_names()[k], mean, var));
    }
    config.ensure_out_dir()?;
    write_text(&config.profiles_path(), &lines)?;

    let curve = feature_selection_sweep(
        &table,
        corpus.labels(),
        &model,
        &plan,
        config.knn_k,
        config.sweep_mode,
        &config.lmnn,
        config.regularize,
    )?;
    write_text(
        &config.sweep_path(),
        &curve.to_csv_string(&outcome.fingerprint, config.cv.seed),
    )?;
    Ok(RelevanceOutcome {
        profiles_path: config.profiles_path(),
        sweep_path: config.sweep_path(),
        total_variance,
    })
}

/// `sweep`: just the feature-selection curve for a stored model.
pub fn cmd_sweep(config: &RunConfig, model_path: &Path) -> Result<PathBuf> {
    let corpus = load_corpus(config.manifest()?)?;
    let (table, outcome) = ensure_table(config, &corpus)?;
    let model = load_model_checked(&table, model_path)?;
    let plan = CvPlan::stratified(
        corpus.labels(),
        config.cv.folds,
        config.cv.repetitions,
        config.cv.seed,
    )?;
    let curve = feature_selection_sweep(
        &table,
        corpus.labels(),
        &model,
        &plan,
        config.knn_k,
        config.sweep_mode,
        &config.lmnn,
        config.regularize,
    )?;
    config.ensure_out_dir()?;
    write_text(
        &config.sweep_path(),
        &curve.to_csv_string(&outcome.fingerprint, config.cv.seed),
    )?;
    Ok(config.sweep_path())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn synth_config(dir: &Path, seed: u64) -> RunConfig {
        RunConfig {
            out_dir: dir.to_path_buf(),
            synth: Some(SyntheticSpec::new(
                16,
                3,
                2,
                (5, 8),
                vec![0],
                4.0,
                0.5,
                seed,
            )),
            cv: CvSpec {
                folds: 4,
                repetitions: 2,
                seed,
            },
            ..RunConfig::default()
        }
    }

    #[test]
    fn synth_then_table_cache_hits() {
        let dir = tempdir().unwrap();
        let mut config = synth_config(dir.path(), 1);
        let manifest = cmd_synth(&config).unwrap();
        config.manifest = Some(manifest);
        let first = cmd_table(&config).unwrap();
        assert!(!first.reused);
        let second = cmd_table(&config).unwrap();
        assert!(second.reused);
        assert_eq!(first.fingerprint, second.fingerprint);

        // cache invalidated by a config change
        config.dtw.local_cost = crate::dtw::LocalCost::Squared;
        let third = cmd_table(&config).unwrap();
        assert!(!third.reused);
        assert_ne!(third.fingerprint, first.fingerprint);
    }

    #[test]
    fn cached_table_decodes_to_fresh_build() {
        let dir = tempdir().unwrap();
        let mut config = synth_config(dir.path(), 2);
        config.manifest = Some(cmd_synth(&config).unwrap());
        cmd_table(&config).unwrap();
        let corpus = load_corpus(config.manifest.as_ref().unwrap()).unwrap();
        let fresh = build_distance_table(&corpus, &config.dtw).unwrap();
        let cached = DistanceVectorTable::load(&config.table_path()).unwrap();
        assert_eq!(fresh, cached);
    }

    #[test]
    fn train_is_reproducible_and_rank_respected() {
        let dir = tempdir().unwrap();
        let mut config = synth_config(dir.path(), 3);
        config.manifest = Some(cmd_synth(&config).unwrap());
        cmd_train(&config).unwrap();
        let first = fs::read_to_string(config.model_path()).unwrap();
        cmd_train(&config).unwrap();
        let second = fs::read_to_string(config.model_path()).unwrap();
        assert_eq!(first, second);

        config.lmnn.rank = Some(2);
        cmd_train(&config).unwrap();
        let model = MetricModel::load(&config.model_path()).unwrap();
        assert_eq!(model.projection_rows(), 2);
    }

    #[test]
    fn train_with_regularization_writes_spectrum() {
        let dir = tempdir().unwrap();
        let mut config = synth_config(dir.path(), 4);
        config.manifest = Some(cmd_synth(&config).unwrap());
        config.regularize = RegularizePolicy::Threshold(1e-8);
        let outcome = cmd_train(&config).unwrap();
        assert!(outcome.spectrum_path.is_some());
        let model = MetricModel::load(&config.model_path()).unwrap();
        assert!(model.regularized());
        assert_eq!(model.effective_dim(), outcome.effective_dim);
        let spectrum = fs::read_to_string(config.spectrum_path()).unwrap();
        assert!(spectrum.starts_with("index,eigenvalue"));
    }
}
