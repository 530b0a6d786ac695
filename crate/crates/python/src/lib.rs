//! Python bindings for the warpmetric pipeline: corpora, distance tables,
//! metric training, regularization and cross-validated evaluation.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use warpmetric::dtw::{DistanceVectorTable, DtwConfig, LocalCost};
use warpmetric::eval::{
    CvPlan, Method, MethodEval, RegularizePolicy, SweepMode,
};
use warpmetric::lmnn::{LmnnConfig, LowRankMode};
use warpmetric::nullspace::DimensionPolicy;
use warpmetric::quadform::{MetricModel, RelevanceProfile};
use warpmetric::seqdata::{Corpus, SyntheticSpec};
use warpmetric::Error;

fn to_py_err(err: Error) -> PyErr {
    match &err {
        Error::Io { .. } | Error::TableCache { .. } => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse_local_cost(name: &str) -> PyResult<LocalCost> {
    match name {
        "absolute" => Ok(LocalCost::Absolute),
        "squared" => Ok(LocalCost::Squared),
        other => Err(PyValueError::new_err(format!(
            "unknown local cost {other:?} (expected 'absolute' or 'squared')"
        ))),
    }
}

fn dtw_config(local_cost: &str, band_radius: Option<usize>, z_normalize: bool) -> PyResult<DtwConfig> {
    Ok(DtwConfig {
        local_cost: parse_local_cost(local_cost)?,
        band_radius,
        z_normalize,
    })
}

#[allow(clippy::too_many_arguments)]
fn lmnn_config(
    k: usize,
    push_weight: f64,
    max_iters: usize,
    rank: Option<usize>,
    low_rank_mode: &str,
    init_noise: f64,
    seed: u64,
) -> PyResult<LmnnConfig> {
    let low_rank_mode = match low_rank_mode {
        "truncate" => LowRankMode::Truncate,
        "direct_l" => LowRankMode::DirectL,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown low-rank mode {other:?} (expected 'truncate' or 'direct_l')"
            )))
        }
    };
    Ok(LmnnConfig {
        k,
        push_weight,
        max_iters,
        rank,
        low_rank_mode,
        init_noise,
        seed,
        ..LmnnConfig::default()
    })
}

fn regularize_policy(policy: &str, value: f64) -> PyResult<RegularizePolicy> {
    match policy {
        "off" => Ok(RegularizePolicy::Off),
        "threshold" => Ok(RegularizePolicy::Threshold(value)),
        "energy" => Ok(RegularizePolicy::Energy(value)),
        "manual" => Ok(RegularizePolicy::Manual(value as usize)),
        other => Err(PyValueError::new_err(format!(
            "unknown regularize policy {other:?}"
        ))),
    }
}

/// A labeled multichannel time-series corpus.
#[pyclass(name = "Corpus")]
struct PyCorpus {
    inner: Corpus,
}

#[pymethods]
impl PyCorpus {
    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    fn channel_names(&self) -> Vec<String> {
        self.inner.channel_names().to_vec()
    }

    fn class_names(&self) -> Vec<String> {
        self.inner.class_names().to_vec()
    }

    /// Channel-major values of sample i: a list of n channels of length T.
    fn sequence(&self, i: usize) -> PyResult<Vec<Vec<f64>>> {
        if i >= self.inner.m() {
            return Err(PyValueError::new_err(format!("sample {i} out of range")));
        }
        Ok(self.inner.sequence(i).channels().to_vec())
    }

    fn sequence_id(&self, i: usize) -> PyResult<String> {
        if i >= self.inner.m() {
            return Err(PyValueError::new_err(format!("sample {i} out of range")));
        }
        Ok(self.inner.sequence(i).id().to_string())
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    fn __repr__(&self) -> String {
        format!(
            "Corpus(m={}, n={}, classes={})",
            self.inner.m(),
            self.inner.n(),
            self.inner.num_classes()
        )
    }
}

/// Per-pair per-channel distance vectors for a whole corpus.
#[pyclass(name = "DistanceTable")]
struct PyTable {
    inner: DistanceVectorTable,
}

#[pymethods]
impl PyTable {
    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint().to_string()
    }

    fn vector(&self, i: usize, j: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.m() || j >= self.inner.m() {
            return Err(PyValueError::new_err("pair index out of range"));
        }
        Ok(self.inner.vector(i, j).to_vec())
    }

    fn norm(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.inner.m() || j >= self.inner.m() {
            return Err(PyValueError::new_err("pair index out of range"));
        }
        Ok(self.inner.norm(i, j))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path.as_ref()).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!("DistanceTable(m={}, n={})", self.inner.m(), self.inner.n())
    }
}

/// A trained (optionally regularized) metric.
#[pyclass(name = "MetricModel")]
struct PyModel {
    inner: MetricModel,
}

#[pymethods]
impl PyModel {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn projection_rows(&self) -> usize {
        self.inner.projection_rows()
    }

    #[getter]
    fn regularized(&self) -> bool {
        self.inner.regularized()
    }

    #[getter]
    fn effective_dim(&self) -> Option<usize> {
        self.inner.effective_dim()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint().to_string()
    }

    fn channel_names(&self) -> Vec<String> {
        self.inner.channel_names().to_vec()
    }

    /// Rows of the transform L.
    fn l(&self) -> Vec<Vec<f64>> {
        let l = self.inner.l();
        (0..l.nrows())
            .map(|r| (0..l.ncols()).map(|c| l[(r, c)]).collect())
            .collect()
    }

    /// ||L d||^2 for a distance vector d.
    fn pair_distance(&self, d: Vec<f64>) -> PyResult<f64> {
        self.inner.pair_distance(&d).map_err(to_py_err)
    }

    /// Per-channel relevance profile (diagonal of L^T L).
    #[pyo3(signature = (normalize = true))]
    fn relevance(&self, normalize: bool) -> Vec<f64> {
        self.inner.relevance_profile(normalize).values
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path.as_ref()).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "MetricModel(rows={}, n={}, regularized={})",
            self.inner.projection_rows(),
            self.inner.n(),
            self.inner.regularized()
        )
    }
}

/// Objective trace of one training run.
#[pyclass(name = "TrainTrace")]
struct PyTrace {
    objectives: Vec<f64>,
    active_counts: Vec<usize>,
    min_eigs: Vec<f64>,
    converged: bool,
}

#[pymethods]
impl PyTrace {
    fn objectives(&self) -> Vec<f64> {
        self.objectives.clone()
    }

    fn active_counts(&self) -> Vec<usize> {
        self.active_counts.clone()
    }

    fn min_eigenvalues(&self) -> Vec<f64> {
        self.min_eigs.clone()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.converged
    }

    fn __len__(&self) -> usize {
        self.objectives.len()
    }
}

/// Eigendecomposition of the training-distance correlation matrix.
#[pyclass(name = "CorrelationSpectrum")]
struct PySpectrum {
    inner: warpmetric::nullspace::CorrelationSpectrum,
}

#[pymethods]
impl PySpectrum {
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }
}

/// Cross-validated accuracies of one pipeline.
#[pyclass(name = "MethodReport")]
struct PyMethodReport {
    inner: MethodEval,
}

#[pymethods]
impl PyMethodReport {
    #[getter]
    fn method(&self) -> String {
        self.inner.method.name().to_string()
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.inner.mean
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.inner.variance
    }

    fn rep_accuracies(&self) -> Vec<f64> {
        self.inner.rep_accuracies.clone()
    }

    /// (repetition, fold, accuracy) rows.
    fn fold_accuracies(&self) -> Vec<(usize, usize, f64)> {
        self.inner
            .fold_results
            .iter()
            .map(|f| (f.repetition, f.fold, f.accuracy))
            .collect()
    }

    /// Per-fold normalized relevance profiles when collected.
    fn profiles(&self) -> Option<Vec<Vec<f64>>> {
        self.inner
            .profiles
            .as_ref()
            .map(|ps| ps.iter().map(|p| p.values.clone()).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "MethodReport(method='{}', mean={:.2}, variance={:.4})",
            self.inner.method.name(),
            self.inner.mean,
            self.inner.variance
        )
    }
}

#[pyfunction]
fn load_corpus(path: &str) -> PyResult<PyCorpus> {
    Ok(PyCorpus {
        inner: warpmetric::seqdata::load_corpus(path.as_ref()).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn write_corpus(corpus: &PyCorpus, dir: &str) -> PyResult<()> {
    warpmetric::seqdata::write_corpus(&corpus.inner, dir.as_ref()).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (
    samples, channels, classes, len_min, len_max, informative, separation, noise,
    seed = 0, duplicates = None, channel_noise = None
))]
#[allow(clippy::too_many_arguments)]
fn synthetic_corpus(
    samples: usize,
    channels: usize,
    classes: usize,
    len_min: usize,
    len_max: usize,
    informative: Vec<usize>,
    separation: f64,
    noise: f64,
    seed: u64,
    duplicates: Option<Vec<(usize, usize)>>,
    channel_noise: Option<Vec<f64>>,
) -> PyResult<PyCorpus> {
    let mut spec = SyntheticSpec::new(
        samples,
        channels,
        classes,
        (len_min, len_max),
        informative,
        separation,
        noise,
        seed,
    );
    if let Some(dups) = duplicates {
        spec = spec.with_duplicates(dups);
    }
    if let Some(per) = channel_noise {
        spec = spec.with_channel_noise(per);
    }
    Ok(PyCorpus {
        inner: warpmetric::seqdata::generate_synthetic(&spec).map_err(to_py_err)?,
    })
}

/// DTW distance between two scalar sequences.
#[pyfunction]
#[pyo3(signature = (a, b, local_cost = "absolute", band_radius = None))]
fn dtw_distance(a: Vec<f64>, b: Vec<f64>, local_cost: &str, band_radius: Option<usize>) -> PyResult<f64> {
    let cfg = dtw_config(local_cost, band_radius, false)?;
    warpmetric::dtw::dtw_scalar(&a, &b, &cfg).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (corpus, local_cost = "absolute", band_radius = None, z_normalize = false))]
fn build_table(
    corpus: &PyCorpus,
    local_cost: &str,
    band_radius: Option<usize>,
    z_normalize: bool,
) -> PyResult<PyTable> {
    let cfg = dtw_config(local_cost, band_radius, z_normalize)?;
    Ok(PyTable {
        inner: warpmetric::dtw::build_distance_table(&corpus.inner, &cfg).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn load_table(path: &str) -> PyResult<PyTable> {
    Ok(PyTable {
        inner: DistanceVectorTable::load(path.as_ref()).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn build_euclidean_table(corpus: &PyCorpus) -> PyResult<PyTable> {
    Ok(PyTable {
        inner: warpmetric::eval::build_euclidean_table(&corpus.inner).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn load_model(path: &str) -> PyResult<PyModel> {
    Ok(PyModel {
        inner: MetricModel::load(path.as_ref()).map_err(to_py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (
    table, labels, k = 3, push_weight = 0.5, max_iters = 1000, rank = None,
    low_rank_mode = "truncate", init_noise = 0.0, seed = 0
))]
#[allow(clippy::too_many_arguments)]
fn train_lmnn(
    table: &PyTable,
    labels: Vec<usize>,
    k: usize,
    push_weight: f64,
    max_iters: usize,
    rank: Option<usize>,
    low_rank_mode: &str,
    init_noise: f64,
    seed: u64,
) -> PyResult<(PyModel, PyTrace)> {
    let cfg = lmnn_config(k, push_weight, max_iters, rank, low_rank_mode, init_noise, seed)?;
    let (model, trace) = warpmetric::lmnn::train(&table.inner, &labels, &cfg).map_err(to_py_err)?;
    Ok((
        PyModel { inner: model },
        PyTrace {
            objectives: trace.rows.iter().map(|r| r.objective).collect(),
            active_counts: trace.rows.iter().map(|r| r.active_count).collect(),
            min_eigs: trace.rows.iter().map(|r| r.min_eig).collect(),
            converged: trace.converged,
        },
    ))
}

#[pyfunction]
fn correlation_spectrum(table: &PyTable, train_indices: Vec<usize>) -> PyResult<PySpectrum> {
    Ok(PySpectrum {
        inner: warpmetric::nullspace::correlation_spectrum(&table.inner, &train_indices)
            .map_err(to_py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (spectrum, policy = "threshold", value = 1e-8))]
fn choose_effective_dim(spectrum: &PySpectrum, policy: &str, value: f64) -> PyResult<usize> {
    let policy = match policy {
        "threshold" => DimensionPolicy::Threshold(value),
        "energy" => DimensionPolicy::Energy(value),
        "manual" => DimensionPolicy::Manual(value as usize),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown dimension policy {other:?}"
            )))
        }
    };
    Ok(warpmetric::nullspace::choose_effective_dim(&spectrum.inner, policy))
}

#[pyfunction]
fn regularize_model(model: &PyModel, spectrum: &PySpectrum, dim: usize) -> PyResult<PyModel> {
    Ok(PyModel {
        inner: warpmetric::nullspace::regularize(&model.inner, &spectrum.inner, dim)
            .map_err(to_py_err)?,
    })
}

#[pyfunction]
fn profile_variance(profiles: Vec<Vec<f64>>) -> PyResult<f64> {
    let wrapped: Vec<RelevanceProfile> = profiles
        .into_iter()
        .map(|values| RelevanceProfile {
            values,
            normalized: false,
        })
        .collect();
    warpmetric::nullspace::profile_variance(&wrapped).map_err(to_py_err)
}

#[pyfunction]
fn knn_classify(distances: Vec<f64>, labels: Vec<usize>, k: usize) -> PyResult<usize> {
    warpmetric::eval::knn_classify(&distances, &labels, k).map_err(to_py_err)
}

/// Two-sided paired t-test; returns (t, p, degenerate).
#[pyfunction]
fn paired_ttest(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, bool)> {
    let t = warpmetric::eval::paired_ttest(&a, &b).map_err(to_py_err)?;
    Ok((t.t, t.p, t.degenerate))
}

fn plan_for(labels: &[usize], folds: usize, repetitions: usize, seed: u64) -> PyResult<CvPlan> {
    CvPlan::stratified(labels, folds, repetitions, seed).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (
    table, labels, folds = 10, repetitions = 10, seed = 0, k = 3, lmnn_k = 3,
    push_weight = 0.5, max_iters = 1000, rank = None, init_noise = 0.0,
    regularize = "off", regularize_value = 1e-8, collect_profiles = false
))]
#[allow(clippy::too_many_arguments)]
fn evaluate_dtw_lmnn(
    table: &PyTable,
    labels: Vec<usize>,
    folds: usize,
    repetitions: usize,
    seed: u64,
    k: usize,
    lmnn_k: usize,
    push_weight: f64,
    max_iters: usize,
    rank: Option<usize>,
    init_noise: f64,
    regularize: &str,
    regularize_value: f64,
    collect_profiles: bool,
) -> PyResult<PyMethodReport> {
    let plan = plan_for(&labels, folds, repetitions, seed)?;
    let mut cfg = lmnn_config(lmnn_k, push_weight, max_iters, rank, "truncate", init_noise, seed)?;
    cfg.seed = seed;
    let reg = regularize_policy(regularize, regularize_value)?;
    Ok(PyMethodReport {
        inner: warpmetric::eval::evaluate_dtw_lmnn(
            &table.inner,
            &labels,
            &cfg,
            &plan,
            reg,
            k,
            collect_profiles,
        )
        .map_err(to_py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (table, labels, folds = 10, repetitions = 10, seed = 0, k = 3))]
fn evaluate_dtw_knn(
    table: &PyTable,
    labels: Vec<usize>,
    folds: usize,
    repetitions: usize,
    seed: u64,
    k: usize,
) -> PyResult<PyMethodReport> {
    let plan = plan_for(&labels, folds, repetitions, seed)?;
    Ok(PyMethodReport {
        inner: warpmetric::eval::evaluate_dtw_knn(&table.inner, &labels, &plan, k)
            .map_err(to_py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (
    corpus, folds = 10, repetitions = 10, seed = 0, k = 3, lmnn_k = 3,
    push_weight = 0.5, max_iters = 1000, rank = None
))]
#[allow(clippy::too_many_arguments)]
fn evaluate_euclidean_lmnn(
    corpus: &PyCorpus,
    folds: usize,
    repetitions: usize,
    seed: u64,
    k: usize,
    lmnn_k: usize,
    push_weight: f64,
    max_iters: usize,
    rank: Option<usize>,
) -> PyResult<PyMethodReport> {
    let labels = corpus.inner.labels().to_vec();
    let plan = plan_for(&labels, folds, repetitions, seed)?;
    let mut cfg = lmnn_config(lmnn_k, push_weight, max_iters, rank, "truncate", 0.0, seed)?;
    cfg.seed = seed;
    Ok(PyMethodReport {
        inner: warpmetric::eval::evaluate_euclidean_lmnn(&corpus.inner, &cfg, &plan, k)
            .map_err(to_py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (corpus, folds = 10, repetitions = 10, seed = 0, components = 3, k = 3))]
fn evaluate_pca_dtw_knn(
    corpus: &PyCorpus,
    folds: usize,
    repetitions: usize,
    seed: u64,
    components: usize,
    k: usize,
) -> PyResult<PyMethodReport> {
    let labels = corpus.inner.labels().to_vec();
    let plan = plan_for(&labels, folds, repetitions, seed)?;
    Ok(PyMethodReport {
        inner: warpmetric::eval::evaluate_pca_dtw_knn(
            &corpus.inner,
            &DtwConfig::default(),
            &plan,
            components,
            k,
        )
        .map_err(to_py_err)?,
    })
}

/// Feature-selection sweep; returns (features, accuracy_mean, accuracy_var)
/// rows in ascending feature count, reusing the model's restricted transform.
#[pyfunction]
#[pyo3(signature = (table, labels, model, folds = 10, repetitions = 10, seed = 0, k = 3))]
fn feature_selection_sweep(
    table: &PyTable,
    labels: Vec<usize>,
    model: &PyModel,
    folds: usize,
    repetitions: usize,
    seed: u64,
    k: usize,
) -> PyResult<(Vec<(usize, f64, f64)>, Vec<usize>, usize)> {
    let plan = plan_for(&labels, folds, repetitions, seed)?;
    let curve = warpmetric::eval::feature_selection_sweep(
        &table.inner,
        &labels,
        &model.inner,
        &plan,
        k,
        SweepMode::Reuse,
        &LmnnConfig::default(),
        RegularizePolicy::Off,
    )
    .map_err(to_py_err)?;
    Ok((
        curve
            .points
            .iter()
            .map(|p| (p.features, p.accuracy_mean, p.accuracy_var))
            .collect(),
        curve.order,
        curve.best_feature_count,
    ))
}

#[pyfunction]
fn method_names() -> Vec<String> {
    Method::all().iter().map(|m| m.name().to_string()).collect()
}

#[pymodule]
fn warpmetric_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyTable>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PySpectrum>()?;
    m.add_class::<PyMethodReport>()?;
    m.add_function(wrap_pyfunction!(load_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(write_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(dtw_distance, m)?)?;
    m.add_function(wrap_pyfunction!(build_table, m)?)?;
    m.add_function(wrap_pyfunction!(load_table, m)?)?;
    m.add_function(wrap_pyfunction!(build_euclidean_table, m)?)?;
    m.add_function(wrap_pyfunction!(load_model, m)?)?;
    m.add_function(wrap_pyfunction!(train_lmnn, m)?)?;
    m.add_function(wrap_pyfunction!(correlation_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(choose_effective_dim, m)?)?;
    m.add_function(wrap_pyfunction!(regularize_model, m)?)?;
    m.add_function(wrap_pyfunction!(profile_variance, m)?)?;
    m.add_function(wrap_pyfunction!(knn_classify, m)?)?;
    m.add_function(wrap_pyfunction!(paired_ttest, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_dtw_lmnn, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_dtw_knn, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_euclidean_lmnn, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_pca_dtw_knn, m)?)?;
    m.add_function(wrap_pyfunction!(feature_selection_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(method_names, m)?)?;
    Ok(())
}
