//! KNN classification over learned distances, the cross-validation
//! comparison protocol, baselines and feature-selection sweeps.
//!
//! Every pipeline consumes the same [`CvPlan`] so accuracies pair up for the
//! t-test. The distance-vector table is computed once on the full corpus
//! (DTW values involve no labels); only metric training and spectrum
//! estimation are restricted to training indices.

pub mod cv;
pub mod euclid;
pub mod knn;
pub mod pca;
pub mod sweep;
pub mod ttest;

pub use cv::CvPlan;
pub use euclid::build_euclidean_table;
pub use knn::knn_classify;
pub use pca::PcaBasis;
pub use sweep::{feature_selection_sweep, SweepCurve, SweepMode, SweepPoint};
pub use ttest::{paired_ttest, TTest};

use serde::{Deserialize, Serialize};

use crate::dtw::{build_distance_table, DistanceVectorTable, DtwConfig};
use crate::error::{Error, Result};
use crate::lmnn::{train, LmnnConfig};
use crate::nullspace::{choose_effective_dim, correlation_spectrum, regularize, DimensionPolicy};
use crate::quadform::RelevanceProfile;
use crate::seqdata::Corpus;

/// The four pipelines under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DtwLmnn,
    DtwKnn,
    EuclideanLmnn,
    PcaDtwKnn,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::DtwLmnn => "dtw-lmnn",
            Method::DtwKnn => "dtw-knn",
            Method::EuclideanLmnn => "euclidean-lmnn",
            Method::PcaDtwKnn => "pca-dtw-knn",
        }
    }

    pub fn all() -> [Method; 4] {
        [
            Method::DtwLmnn,
            Method::DtwKnn,
            Method::EuclideanLmnn,
            Method::PcaDtwKnn,
        ]
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dtw-lmnn" => Ok(Method::DtwLmnn),
            "dtw-knn" => Ok(Method::DtwKnn),
            "euclidean-lmnn" => Ok(Method::EuclideanLmnn),
            "pca-dtw-knn" => Ok(Method::PcaDtwKnn),
            other => Err(Error::Validation(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether and how to pick the effective dimension for regularization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "value", rename_all = "snake_case")]
pub enum RegularizePolicy {
    Off,
    /// Numerical rank: eigenvalues >= value * lambda_max.
    Threshold(f64),
    /// Smallest dimension reaching the given eigenvalue-mass fraction.
    Energy(f64),
    /// Fixed dimension.
    Manual(usize),
}

impl Default for RegularizePolicy {
    fn default() -> Self {
        RegularizePolicy::Off
    }
}

impl RegularizePolicy {
    pub fn dimension_policy(&self) -> Option<DimensionPolicy> {
        match *self {
            RegularizePolicy::Off => None,
            RegularizePolicy::Threshold(v) => Some(DimensionPolicy::Threshold(v)),
            RegularizePolicy::Energy(v) => Some(DimensionPolicy::Energy(v)),
            RegularizePolicy::Manual(j) => Some(DimensionPolicy::Manual(j)),
        }
    }
}

/// Accuracy of one test fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repetition: usize,
    pub fold: usize,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// One pipeline's cross-validated accuracies. Per-repetition accuracy is
/// total correct over all folds of the repetition, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEval {
    pub method: Method,
    pub fold_results: Vec<FoldResult>,
    pub rep_accuracies: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    /// Per-fold normalized relevance profiles, when collected.
    pub profiles: Option<Vec<RelevanceProfile>>,
}

fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64
}

fn assemble_eval(
    method: Method,
    fold_results: Vec<FoldResult>,
    plan: &CvPlan,
    profiles: Option<Vec<RelevanceProfile>>,
) -> MethodEval {
    let mut rep_accuracies = Vec::with_capacity(plan.repetitions());
    for rep in 0..plan.repetitions() {
        let (correct, total) = fold_results
            .iter()
            .filter(|f| f.repetition == rep)
            .fold((0usize, 0usize), |(c, t), f| (c + f.correct, t + f.total));
        rep_accuracies.push(100.0 * correct as f64 / total as f64);
    }
    let mean = rep_accuracies.iter().sum::<f64>() / rep_accuracies.len() as f64;
    let variance = sample_variance(&rep_accuracies);
    MethodEval {
        method,
        fold_results,
        rep_accuracies,
        mean,
        variance,
        profiles,
    }
}

/// Run the plan with a per-fold distance closure: `dist(q, train_indices)`
/// returns the query's distances to each training sample, in order.
fn run_plan<F>(
    plan: &CvPlan,
    labels: &[usize],
    k: usize,
    mut fold_distances: F,
) -> Result<Vec<FoldResult>>
where
    F: FnMut(usize, usize, &[usize], &[usize]) -> Result<Vec<Vec<f64>>>,
{
    let m = labels.len();
    let mut results = Vec::with_capacity(plan.repetitions() * plan.folds());
    for rep in 0..plan.repetitions() {
        for fold in 0..plan.folds() {
            let train_idx = plan.train_indices(rep, fold, m);
            let test_idx = plan.test_indices(rep, fold).to_vec();
            let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
            let distance_rows = fold_distances(rep, fold, &train_idx, &test_idx)?;
            let mut correct = 0usize;
            for (row, &q) in distance_rows.iter().zip(&test_idx) {
                let predicted = knn_classify(row, &train_labels, k)?;
                if predicted == labels[q] {
                    correct += 1;
                }
            }
            results.push(FoldResult {
                repetition: rep,
                fold,
                correct,
                total: test_idx.len(),
                accuracy: 100.0 * correct as f64 / test_idx.len() as f64,
            });
        }
    }
    Ok(results)
}

/// Plain KNN on unweighted distance-vector norms; the no-training baseline.
pub fn evaluate_dtw_knn(
    table: &DistanceVectorTable,
    labels: &[usize],
    plan: &CvPlan,
    k: usize,
) -> Result<MethodEval> {
    let fold_results = run_plan(plan, labels, k, |_, _, train_idx, test_idx| {
        Ok(test_idx
            .iter()
            .map(|&q| train_idx.iter().map(|&j| table.norm(q, j)).collect())
            .collect())
    })?;
    Ok(assemble_eval(Method::DtwKnn, fold_results, plan, None))
}

fn evaluate_lmnn_table(
    method: Method,
    table: &DistanceVectorTable,
    labels: &[usize],
    cfg: &LmnnConfig,
    plan: &CvPlan,
    reg: RegularizePolicy,
    k: usize,
    collect_profiles: bool,
) -> Result<MethodEval> {
    let mut profiles = Vec::new();
    let fold_results = run_plan(plan, labels, k, |rep, fold, train_idx, test_idx| {
        let sub = table.subtable(train_idx);
        let sub_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        let (model, _) = train(&sub, &sub_labels, cfg).map_err(|e| {
            Error::Training(format!("repetition {rep} fold {fold}: {e}"))
        })?;
        let model = match reg.dimension_policy() {
            None => model,
            Some(policy) => {
                let spectrum = correlation_spectrum(table, train_idx)?;
                let j = choose_effective_dim(&spectrum, policy);
                regularize(&model, &spectrum, j)?
            }
        };
        if collect_profiles {
            profiles.push(model.relevance_profile(true));
        }
        test_idx
            .iter()
            .map(|&q| {
                train_idx
                    .iter()
                    .map(|&j| model.pair_distance(table.vector(q, j)))
                    .collect()
            })
            .collect()
    })?;
    let profiles = if collect_profiles { Some(profiles) } else { None };
    Ok(assemble_eval(method, fold_results, plan, profiles))
}

/// The principal pipeline: per fold, train the metric on training indices
/// only, optionally regularize onto the training-pair spectrum, classify
/// test samples through the learned quadratic form.
pub fn evaluate_dtw_lmnn(
    table: &DistanceVectorTable,
    labels: &[usize],
    cfg: &LmnnConfig,
    plan: &CvPlan,
    reg: RegularizePolicy,
    k: usize,
    collect_profiles: bool,
) -> Result<MethodEval> {
    evaluate_lmnn_table(
        Method::DtwLmnn,
        table,
        labels,
        cfg,
        plan,
        reg,
        k,
        collect_profiles,
    )
}

/// Identical training pipeline over per-channel Euclidean vectors.
pub fn evaluate_euclidean_lmnn(
    corpus: &Corpus,
    cfg: &LmnnConfig,
    plan: &CvPlan,
    k: usize,
) -> Result<MethodEval> {
    let table = build_euclidean_table(corpus)?;
    evaluate_lmnn_table(
        Method::EuclideanLmnn,
        &table,
        corpus.labels(),
        cfg,
        plan,
        RegularizePolicy::Off,
        k,
        false,
    )
}

/// PCA fit on pooled training timesteps, component-wise DTW over projected
/// sequences, unweighted KNN.
pub fn evaluate_pca_dtw_knn(
    corpus: &Corpus,
    dtw_cfg: &DtwConfig,
    plan: &CvPlan,
    components: usize,
    k: usize,
) -> Result<MethodEval> {
    use crate::dtw::dtw_component_vector;
    let fold_results = run_plan(plan, corpus.labels(), k, |_, _, train_idx, test_idx| {
        let basis = PcaBasis::fit(corpus, train_idx, components)?;
        let projected: Vec<_> = corpus.sequences().iter().map(|s| basis.project(s)).collect();
        test_idx
            .iter()
            .map(|&q| {
                train_idx
                    .iter()
                    .map(|&j| {
                        let v = dtw_component_vector(&projected[q], &projected[j], dtw_cfg)?;
                        Ok(v.iter().map(|x| x * x).sum::<f64>().sqrt())
                    })
                    .collect()
            })
            .collect()
    })?;
    Ok(assemble_eval(Method::PcaDtwKnn, fold_results, plan, None))
}

/// Convenience wrapper that also builds the DTW table.
pub fn evaluate_method(
    method: Method,
    corpus: &Corpus,
    dtw_cfg: &DtwConfig,
    lmnn_cfg: &LmnnConfig,
    plan: &CvPlan,
    reg: RegularizePolicy,
    k: usize,
) -> Result<MethodEval> {
    match method {
        Method::DtwLmnn => {
            let table = build_distance_table(corpus, dtw_cfg)?;
            evaluate_dtw_lmnn(&table, corpus.labels(), lmnn_cfg, plan, reg, k, false)
        }
        Method::DtwKnn => {
            let table = build_distance_table(corpus, dtw_cfg)?;
            evaluate_dtw_knn(&table, corpus.labels(), plan, k)
        }
        Method::EuclideanLmnn => evaluate_euclidean_lmnn(corpus, lmnn_cfg, plan, k),
        Method::PcaDtwKnn => evaluate_pca_dtw_knn(corpus, dtw_cfg, plan, 3, k),
    }
}

/// Pairing unit for the t-test: per-repetition means (N = reps) or per-fold
/// accuracies (N = reps x folds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingUnit {
    #[default]
    Repetition,
    Fold,
}

/// One baseline-vs-method t-test entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestEntry {
    pub baseline: Method,
    pub method: Method,
    pub ttest: TTest,
}

/// Full comparison report: per-method evaluations plus pairwise t-tests
/// against a baseline, all on the same plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fingerprint: String,
    pub seed: u64,
    pub pairing: PairingUnit,
    pub methods: Vec<MethodEval>,
    pub ttests: Vec<TTestEntry>,
}

fn pairing_series(eval: &MethodEval, pairing: PairingUnit) -> Vec<f64> {
    match pairing {
        PairingUnit::Repetition => eval.rep_accuracies.clone(),
        PairingUnit::Fold => eval.fold_results.iter().map(|f| f.accuracy).collect(),
    }
}

/// Combine per-method evaluations into a report, testing every method
/// against `baseline` with the chosen pairing.
pub fn compare_methods(
    methods: Vec<MethodEval>,
    baseline: Method,
    pairing: PairingUnit,
    fingerprint: String,
    seed: u64,
) -> Result<EvalReport> {
    if methods.is_empty() {
        return Err(Error::Validation("no method evaluations to compare".into()));
    }
    let mut ttests = Vec::new();
    if let Some(base) = methods.iter().find(|e| e.method == baseline) {
        let base_series = pairing_series(base, pairing);
        for eval in &methods {
            if eval.method == baseline {
                continue;
            }
            let series = pairing_series(eval, pairing);
            ttests.push(TTestEntry {
                baseline,
                method: eval.method,
                ttest: paired_ttest(&base_series, &series)?,
            });
        }
    }
    Ok(EvalReport {
        fingerprint,
        seed,
        pairing,
        methods,
        ttests,
    })
}

impl EvalReport {
    /// Flat CSV: method, repetition, fold, accuracy.
    pub fn to_csv_string(&self) -> String {
        let mut out = format!("# fingerprint={} seed={}\n", self.fingerprint, self.seed);
        out.push_str("method,repetition,fold,accuracy\n");
        for eval in &self.methods {
            for fr in &eval.fold_results {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    eval.method, fr.repetition, fr.fold, fr.accuracy
                ));
            }
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    /// Human-readable comparison table: method, mean, variance, p-value
    /// against the baseline.
    pub fn render_summary(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:>8} {:>10} {:>14}\n",
            "method", "mean", "variance", "p-vs-baseline"
        ));
        for eval in &self.methods {
            let p = self
                .ttests
                .iter()
                .find(|t| t.method == eval.method)
                .map(|t| {
                    if t.ttest.degenerate {
                        format!("{:.4}*", t.ttest.p)
                    } else {
                        format!("{:.4}", t.ttest.p)
                    }
                })
                .unwrap_or_else(|| "--".into());
            out.push_str(&format!(
                "{:<16} {:>8.2} {:>10.4} {:>14}\n",
                eval.method.name(),
                eval.mean,
                eval.variance,
                p
            ));
        }
        if self.ttests.iter().any(|t| t.ttest.degenerate) {
            out.push_str("* degenerate pairing: constant nonzero difference\n");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdata::{generate_synthetic, SyntheticSpec};

    fn small_corpus(seed: u64) -> Corpus {
        let spec = SyntheticSpec::new(24, 3, 2, (6, 10), vec![0], 4.0, 0.5, seed);
        generate_synthetic(&spec).unwrap()
    }

    #[test]
    fn dtw_knn_with_identical_twin_is_correct() {
        // duplicate sample -> zero-distance neighbor dominates
        let corpus = small_corpus(3);
        let table = build_distance_table(&corpus, &DtwConfig::default()).unwrap();
        let plan = CvPlan::stratified(corpus.labels(), 4, 1, 0).unwrap();
        let eval = evaluate_dtw_knn(&table, corpus.labels(), &plan, 1).unwrap();
        assert!(eval.mean > 0.0);
        assert_eq!(eval.fold_results.len(), 4);
    }

    #[test]
    fn separable_corpus_classifies_well() {
        let corpus = small_corpus(5);
        let table = build_distance_table(&corpus, &DtwConfig::default()).unwrap();
        let plan = CvPlan::stratified(corpus.labels(), 4, 2, 1).unwrap();
        let knn = evaluate_dtw_knn(&table, corpus.labels(), &plan, 3).unwrap();
        assert!(knn.mean >= 90.0, "dtw-knn mean {}", knn.mean);
        let lmnn = evaluate_dtw_lmnn(
            &table,
            corpus.labels(),
            &LmnnConfig::default(),
            &plan,
            RegularizePolicy::Off,
            3,
            false,
        )
        .unwrap();
        assert!(lmnn.mean >= 90.0, "dtw-lmnn mean {}", lmnn.mean);
    }

    #[test]
    fn rep_accuracy_pools_folds() {
        let corpus = small_corpus(7);
        let table = build_distance_table(&corpus, &DtwConfig::default()).unwrap();
        let plan = CvPlan::stratified(corpus.labels(), 4, 2, 2).unwrap();
        let eval = evaluate_dtw_knn(&table, corpus.labels(), &plan, 3).unwrap();
        for rep in 0..2 {
            let (c, t) = eval
                .fold_results
                .iter()
                .filter(|f| f.repetition == rep)
                .fold((0, 0), |(c, t), f| (c + f.correct, t + f.total));
            assert_eq!(t, corpus.m(), "every sample tested once per repetition");
            assert_eq!(eval.rep_accuracies[rep], 100.0 * c as f64 / t as f64);
        }
    }

    #[test]
    fn euclidean_baseline_runs() {
        let corpus = small_corpus(9);
        let plan = CvPlan::stratified(corpus.labels(), 4, 1, 3).unwrap();
        let eval = evaluate_euclidean_lmnn(&corpus, &LmnnConfig::default(), &plan, 3).unwrap();
        assert_eq!(eval.method, Method::EuclideanLmnn);
        assert!(eval.mean > 50.0);
    }

    #[test]
    fn pca_pipeline_projects_to_three_channels() {
        let spec = SyntheticSpec::new(24, 5, 2, (6, 10), vec![0], 4.0, 1.0, 11);
        let corpus = generate_synthetic(&spec).unwrap();
        let plan = CvPlan::stratified(corpus.labels(), 4, 1, 4).unwrap();
        let eval =
            evaluate_pca_dtw_knn(&corpus, &DtwConfig::default(), &plan, 3, 3).unwrap();
        assert_eq!(eval.method, Method::PcaDtwKnn);
        assert!(eval.mean > 50.0);
    }

    #[test]
    fn shuffled_training_presentation_does_not_change_predictions() {
        // the pipelines canonicalize training order to ascending index, so a
        // permuted plan-internal order cannot flip tie-breaks
        let corpus = small_corpus(13);
        let table = build_distance_table(&corpus, &DtwConfig::default()).unwrap();
        let plan = CvPlan::stratified(corpus.labels(), 4, 1, 5).unwrap();
        let train_idx = plan.train_indices(0, 0, corpus.m());
        let mut shuffled = train_idx.clone();
        shuffled.reverse();
        let q = plan.test_indices(0, 0)[0];
        let labels = corpus.labels();

        let canonical = |idx: &[usize]| {
            let mut sorted = idx.to_vec();
            sorted.sort_unstable();
            let dists: Vec<f64> = sorted.iter().map(|&j| table.norm(q, j)).collect();
            let l: Vec<usize> = sorted.iter().map(|&j| labels[j]).collect();
            knn_classify(&dists, &l, 3).unwrap()
        };
        assert_eq!(canonical(&train_idx), canonical(&shuffled));
    }

    #[test]
    fn compare_methods_builds_ttests() {
        let corpus = small_corpus(17);
        let table = build_distance_table(&corpus, &DtwConfig::default()).unwrap();
        let plan = CvPlan::stratified(corpus.labels(), 4, 3, 6).unwrap();
        let knn = evaluate_dtw_knn(&table, corpus.labels(), &plan, 3).unwrap();
        let lmnn = evaluate_dtw_lmnn(
            &table,
            corpus.labels(),
            &LmnnConfig::default(),
            &plan,
            RegularizePolicy::Off,
            3,
            false,
        )
        .unwrap();
        let report = compare_methods(
            vec![lmnn, knn],
            Method::DtwLmnn,
            PairingUnit::Repetition,
            "fp".into(),
            6,
        )
        .unwrap();
        assert_eq!(report.ttests.len(), 1);
        assert_eq!(report.ttests[0].method, Method::DtwKnn);
        let summary = report.render_summary();
        assert!(summary.contains("dtw-lmnn"));
        assert!(summary.contains("dtw-knn"));
        let csv = report.to_csv_string();
        assert!(csv.contains("method,repetition,fold,accuracy"));
    }

    #[test]
    fn report_json_roundtrip() {
        let corpus = small_corpus(19);
        let table = build_distance_table(&corpus, &DtwConfig::default()).unwrap();
        let plan = CvPlan::stratified(corpus.labels(), 4, 2, 7).unwrap();
        let knn = evaluate_dtw_knn(&table, corpus.labels(), &plan, 3).unwrap();
        let report = compare_methods(
            vec![knn],
            Method::DtwLmnn,
            PairingUnit::Fold,
            "fp".into(),
            7,
        )
        .unwrap();
        let text = report.to_json_string();
        let back: EvalReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back);
    }
}
