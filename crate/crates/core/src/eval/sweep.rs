//! Relevance-ordered feature-selection sweeps: keep only the top-f channels
//! and re-evaluate accuracy for every f.

use serde::{Deserialize, Serialize};

use crate::dtw::DistanceVectorTable;
use crate::error::{Error, Result};
use crate::lmnn::LmnnConfig;
use crate::quadform::MetricModel;

use super::cv::CvPlan;
use super::{run_plan, Method, RegularizePolicy};

/// Whether the sweep reuses the trained transform restricted to the kept
/// channels, or retrains from scratch on the restricted table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    #[default]
    Reuse,
    Retrain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub features: usize,
    pub accuracy_mean: f64,
    pub accuracy_var: f64,
}

/// Accuracy as a function of the retained feature count, plus the relevance
/// order used and the smallest count reaching the curve's maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
    /// Channels sorted by descending relevance (ties to the lower index).
    pub order: Vec<usize>,
    pub best_feature_count: usize,
}

impl SweepCurve {
    /// CSV rows (features, accuracy_mean, accuracy_var).
    pub fn to_csv_string(&self, fingerprint: &str, seed: u64) -> String {
        let order: Vec<String> = self.order.iter().map(|k| k.to_string()).collect();
        let mut out = format!(
            "# fingerprint={fingerprint} seed={seed} order={} best={}\n",
            order.join(";"),
            self.best_feature_count
        );
        out.push_str("features,accuracy_mean,accuracy_var\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{}\n",
                p.features, p.accuracy_mean, p.accuracy_var
            ));
        }
        out
    }
}

/// Channels of the model sorted by descending relevance.
pub fn relevance_order(model: &MetricModel) -> Vec<usize> {
    let profile = model.relevance_profile(false);
    let mut order: Vec<usize> = (0..profile.len()).collect();
    order.sort_by(|&a, &b| {
        profile.values[b]
            .partial_cmp(&profile.values[a])
            .expect("finite relevance")
            .then(a.cmp(&b))
    });
    order
}

/// Sweep f = 1..=n over the plan. In [`SweepMode::Reuse`] the given model's
/// transform is restricted to the kept channels; in [`SweepMode::Retrain`]
/// a fresh metric is trained per fold on the restricted table using
/// `lmnn_cfg` and `reg`. At f = n the reuse sweep reproduces the full
/// model's accuracy exactly.
#[allow(clippy::too_many_arguments)]
pub fn feature_selection_sweep(
    table: &DistanceVectorTable,
    labels: &[usize],
    model: &MetricModel,
    plan: &CvPlan,
    k: usize,
    mode: SweepMode,
    lmnn_cfg: &LmnnConfig,
    reg: RegularizePolicy,
) -> Result<SweepCurve> {
    let n = table.n();
    if model.n() != n {
        return Err(Error::Dimension {
            expected: n,
            found: model.n(),
        });
    }
    let order = relevance_order(model);
    let mut points = Vec::with_capacity(n);
    for f in 1..=n {
        // ascending selection keeps the summation order of the full
        // distance, so f = n is bitwise identical to the unrestricted model
        let mut selected: Vec<usize> = order[..f].to_vec();
        selected.sort_unstable();
        let eval = match mode {
            SweepMode::Reuse => {
                let fold_results = run_plan(plan, labels, k, |_, _, train_idx, test_idx| {
                    test_idx
                        .iter()
                        .map(|&q| {
                            train_idx
                                .iter()
                                .map(|&j| model.restricted_distance(table.vector(q, j), &selected))
                                .collect()
                        })
                        .collect()
                })?;
                super::assemble_eval(Method::DtwLmnn, fold_results, plan, None)
            }
            SweepMode::Retrain => {
                let restricted = table.restrict_channels(&selected);
                super::evaluate_lmnn_table(
                    Method::DtwLmnn,
                    &restricted,
                    labels,
                    lmnn_cfg,
                    plan,
                    reg,
                    k,
                    false,
                )?
            }
        };
        points.push(SweepPoint {
            features: f,
            accuracy_mean: eval.mean,
            accuracy_var: eval.variance,
        });
    }
    let best = points
        .iter()
        .map(|p| p.accuracy_mean)
        .fold(f64::NEG_INFINITY, f64::max);
    let best_feature_count = points
        .iter()
        .find(|p| p.accuracy_mean >= best - 1e-9)
        .map(|p| p.features)
        .unwrap_or(n);
    Ok(SweepCurve {
        points,
        order,
        best_feature_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtw::{build_distance_table, DtwConfig};
    use crate::eval::evaluate_dtw_lmnn;
    use crate::lmnn::train;
    use crate::seqdata::{generate_synthetic, SyntheticSpec};

    fn sweep_setup() -> (DistanceVectorTable, Vec<usize>, MetricModel, CvPlan) {
        // one informative channel, two pure-noise channels
        let spec = SyntheticSpec::new(24, 3, 2, (6, 10), vec![0], 4.0, 2.0, 27);
        let corpus = generate_synthetic(&spec).unwrap();
        let table = build_distance_table(&corpus, &DtwConfig::default()).unwrap();
        let labels = corpus.labels().to_vec();
        let (model, _) = train(&table, &labels, &LmnnConfig::default()).unwrap();
        let plan = CvPlan::stratified(&labels, 4, 2, 1).unwrap();
        (table, labels, model, plan)
    }

    #[test]
    fn full_selection_reproduces_model_accuracy_exactly() {
        let (table, labels, model, plan) = sweep_setup();
        let curve = feature_selection_sweep(
            &table,
            &labels,
            &model,
            &plan,
            3,
            SweepMode::Reuse,
            &LmnnConfig::default(),
            RegularizePolicy::Off,
        )
        .unwrap();
        // evaluate the same fixed model over the same plan
        let fold_results = run_plan(&plan, &labels, 3, |_, _, train_idx, test_idx| {
            test_idx
                .iter()
                .map(|&q| {
                    train_idx
                        .iter()
                        .map(|&j| model.pair_distance(table.vector(q, j)))
                        .collect()
                })
                .collect()
        })
        .unwrap();
        let full = super::super::assemble_eval(Method::DtwLmnn, fold_results, &plan, None);
        let last = curve.points.last().unwrap();
        assert_eq!(last.features, 3);
        assert_eq!(last.accuracy_mean, full.mean);
    }

    #[test]
    fn informative_channel_ranks_first_and_suffices() {
        let (table, labels, model, plan) = sweep_setup();
        let curve = feature_selection_sweep(
            &table,
            &labels,
            &model,
            &plan,
            3,
            SweepMode::Reuse,
            &LmnnConfig::default(),
            RegularizePolicy::Off,
        )
        .unwrap();
        assert_eq!(curve.order[0], 0, "order {:?}", curve.order);
        assert!(
            curve.best_feature_count <= 2,
            "best count {} curve {:?}",
            curve.best_feature_count,
            curve.points
        );
    }

    #[test]
    fn retrain_mode_runs_and_full_count_matches_pipeline() {
        let (table, labels, model, plan) = sweep_setup();
        let curve = feature_selection_sweep(
            &table,
            &labels,
            &model,
            &plan,
            3,
            SweepMode::Retrain,
            &LmnnConfig::default(),
            RegularizePolicy::Off,
        )
        .unwrap();
        let full = evaluate_dtw_lmnn(
            &table,
            &labels,
            &LmnnConfig::default(),
            &plan,
            RegularizePolicy::Off,
            3,
            false,
        )
        .unwrap();
        let last = curve.points.last().unwrap();
        assert!((last.accuracy_mean - full.mean).abs() < 1e-9);
    }
}
