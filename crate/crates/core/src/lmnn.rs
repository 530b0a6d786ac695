//! Large-margin metric learning over distance vectors: minimize the hinge
//! objective over PSD matrices M by projected subgradient descent with an
//! adaptive accept/reject step.
//!
//! Target neighbors are fixed once under the unweighted distance-vector norm;
//! every differently-labeled sample is an impostor candidate. The optimizer
//! iterate is M itself; the model factor L is extracted at finalization.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtw::DistanceVectorTable;
use crate::error::{Error, Result};
use crate::quadform::{factor_l, psd_project, sorted_symmetric_eigen, MetricModel};

/// Fixed same-class target neighbors for every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborStructure {
    targets: Vec<Vec<usize>>,
    k: usize,
}

impl NeighborStructure {
    pub fn targets(&self, i: usize) -> &[usize] {
        &self.targets[i]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// How a rank restriction is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowRankMode {
    /// Optimize full M, truncate to the top eigenpairs at finalization.
    #[default]
    Truncate,
    /// Optimize an explicit n' x n factor L by subgradient steps (nonconvex,
    /// no PSD projection needed).
    DirectL,
}

/// Optimizer configuration. Defaults: k = 3, c = 0.5, 1000 iterations,
/// relative tolerance 1e-7 over a 10-iteration patience window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmnnConfig {
    /// Target-neighbor count.
    pub k: usize,
    /// Push-weight trade-off c > 0.
    pub push_weight: f64,
    pub max_iters: usize,
    /// `None` = 1e-7 * n / ||G0||_F.
    pub initial_step: Option<f64>,
    pub step_growth: f64,
    pub step_decay: f64,
    /// Relative objective-change tolerance.
    pub tolerance: f64,
    /// Consecutive stalled iterations before declaring convergence.
    pub patience: usize,
    /// Rows of the final L; `None` = full rank.
    pub rank: Option<usize>,
    pub low_rank_mode: LowRankMode,
    /// Full impostor rescan period; `None` = exact scan every iteration.
    pub active_set_refresh: Option<usize>,
    /// Scale of a seeded random PSD perturbation added to the initial
    /// (scaled identity) M. Zero keeps the deterministic identity start;
    /// nonzero values expose the null-space arbitrariness of the optimum
    /// that regularization is meant to remove.
    pub init_noise: f64,
    pub seed: u64,
}

impl Default for LmnnConfig {
    fn default() -> Self {
        LmnnConfig {
            k: 3,
            push_weight: 0.5,
            max_iters: 1000,
            initial_step: None,
            step_growth: 1.1,
            step_decay: 0.5,
            tolerance: 1e-7,
            patience: 10,
            rank: None,
            low_rank_mode: LowRankMode::Truncate,
            active_set_refresh: None,
            init_noise: 0.0,
            seed: 0,
        }
    }
}

impl LmnnConfig {
    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Validation("k must be at least 1".into()));
        }
        if !(self.push_weight > 0.0) {
            return Err(Error::Validation("push weight c must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Validation("tolerance must be positive".into()));
        }
        if self.patience == 0 {
            return Err(Error::Validation("patience must be at least 1".into()));
        }
        if !(self.step_growth > 1.0) || !(self.step_decay > 0.0 && self.step_decay < 1.0) {
            return Err(Error::Validation(
                "need step_growth > 1 and 0 < step_decay < 1".into(),
            ));
        }
        if let Some(rank) = self.rank {
            if rank == 0 || rank > n {
                return Err(Error::Validation(format!(
                    "rank {rank} out of range for {n} channels"
                )));
            }
        }
        if self.init_noise < 0.0 {
            return Err(Error::Validation("init_noise must be nonnegative".into()));
        }
        Ok(())
    }
}

/// One optimizer iteration as recorded in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub step: f64,
    pub active_count: usize,
    pub min_eig: f64,
    pub max_eig: f64,
}

/// Per-iteration record of the descent. The objective column is the running
/// accepted value, so it is non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
    pub hit_max_iters: bool,
}

impl TrainTrace {
    /// CSV with columns iter, objective, step, active_count, min_eig.
    pub fn to_csv_string(&self, fingerprint: &str, seed: u64) -> String {
        let mut out = format!("# fingerprint={fingerprint} seed={seed}\n");
        out.push_str("iter,objective,step,active_count,min_eig\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.iter, row.objective, row.step, row.active_count, row.min_eig
            ));
        }
        out
    }

    pub fn save_csv(&self, path: &Path, fingerprint: &str, seed: u64) -> Result<()> {
        fs::write(path, self.to_csv_string(fingerprint, seed)).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Pick each sample's k same-class neighbors by smallest unweighted
/// distance-vector norm; ties break toward the lower sample index. Lists are
/// truncated when a class has fewer than k other members.
pub fn select_targets(table: &DistanceVectorTable, labels: &[usize], k: usize) -> NeighborStructure {
    let m = table.m();
    assert_eq!(m, labels.len(), "labels must match table size");
    let mut targets = Vec::with_capacity(m);
    for i in 0..m {
        let mut candidates: Vec<(f64, usize)> = (0..m)
            .filter(|&j| j != i && labels[j] == labels[i])
            .map(|j| (table.norm(i, j), j))
            .collect();
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite norms").then(a.1.cmp(&b.1)));
        candidates.truncate(k);
        targets.push(candidates.into_iter().map(|(_, j)| j).collect());
    }
    NeighborStructure { targets, k }
}

/// d^T M d for every ordered pair, row-parallel, deterministic layout.
fn all_pair_distances(m_mat: &DMatrix<f64>, table: &DistanceVectorTable) -> Vec<f64> {
    let m = table.m();
    let n = table.n();
    (0..m)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut row = Vec::with_capacity(m);
            for j in 0..m {
                let d = table.vector(i, j);
                let mut acc = 0.0;
                for p in 0..n {
                    let mut s = 0.0;
                    for q in 0..n {
                        s += m_mat[(p, q)] * d[q];
                    }
                    acc += d[p] * s;
                }
                row.push(acc);
            }
            row
        })
        .collect()
}

/// Margin slack below which an inactive triple still participates in the
/// optimizer's subgradient selection (distances are scaled so the margin is
/// an O(1) quantity). Contributes nothing to the objective itself.
const NEAR_MARGIN: f64 = 1e-3;

struct ObjectiveParts {
    value: f64,
    active: Vec<(usize, usize, usize)>,
    /// Triples with margin in (-NEAR_MARGIN, 0]: sitting on the kink.
    near: Vec<(usize, usize, usize)>,
}

/// Hinge objective over either the exact impostor set or a cached candidate
/// triple list.
fn objective_parts(
    m_mat: &DMatrix<f64>,
    table: &DistanceVectorTable,
    labels: &[usize],
    nbrs: &NeighborStructure,
    c: f64,
    candidates: Option<&[(usize, usize, usize)]>,
) -> ObjectiveParts {
    let m = table.m();
    let dists = all_pair_distances(m_mat, table);
    let mut pull = 0.0;
    for i in 0..m {
        for &j in nbrs.targets(i) {
            pull += dists[i * m + j];
        }
    }
    let mut hinge = 0.0;
    let mut active = Vec::new();
    let mut near = Vec::new();
    let mut consider = |i: usize, j: usize, l: usize| {
        let margin = 1.0 + dists[i * m + j] - dists[i * m + l];
        if margin > 0.0 {
            hinge += margin;
            active.push((i, j, l));
        } else if margin > -NEAR_MARGIN {
            near.push((i, j, l));
        }
    };
    match candidates {
        None => {
            for i in 0..m {
                for &j in nbrs.targets(i) {
                    for l in 0..m {
                        if labels[l] != labels[i] {
                            consider(i, j, l);
                        }
                    }
                }
            }
        }
        Some(cands) => {
            for &(i, j, l) in cands {
                consider(i, j, l);
            }
        }
    }
    ObjectiveParts {
        value: pull + c * hinge,
        active,
        near,
    }
}

/// LMNN cost of M: the pull term over target pairs plus c times the summed
/// hinge violations. Also returns the strictly active impostor triples.
pub fn lmnn_objective(
    m_mat: &DMatrix<f64>,
    table: &DistanceVectorTable,
    labels: &[usize],
    nbrs: &NeighborStructure,
    c: f64,
) -> Result<(f64, Vec<(usize, usize, usize)>)> {
    check_dims(m_mat, table, labels, nbrs)?;
    let parts = objective_parts(m_mat, table, labels, nbrs, c, None);
    Ok((parts.value, parts.active))
}

fn check_dims(
    m_mat: &DMatrix<f64>,
    table: &DistanceVectorTable,
    labels: &[usize],
    nbrs: &NeighborStructure,
) -> Result<()> {
    if m_mat.nrows() != table.n() || m_mat.ncols() != table.n() {
        return Err(Error::Dimension {
            expected: table.n(),
            found: m_mat.nrows().max(m_mat.ncols()),
        });
    }
    if labels.len() != table.m() || nbrs.len() != table.m() {
        return Err(Error::Dimension {
            expected: table.m(),
            found: labels.len().min(nbrs.len()),
        });
    }
    Ok(())
}

/// Weighted sum of outer products D D^T, upper triangle mirrored so the
/// result is symmetric exactly.
fn weighted_outer_sum(table: &DistanceVectorTable, weights: &[f64]) -> DMatrix<f64> {
    let n = table.n();
    let m = table.m();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..m {
        for j in 0..m {
            let w = weights[i * m + j];
            if w == 0.0 {
                continue;
            }
            let d = table.vector(i, j);
            for p in 0..n {
                for q in p..n {
                    g[(p, q)] += w * (d[p] * d[q]);
                }
            }
        }
    }
    for p in 0..n {
        for q in (p + 1)..n {
            g[(q, p)] = g[(p, q)];
        }
    }
    g
}

/// Subgradient of the objective with respect to M: a weighted sum of outer
/// products D D^T over target pairs and active impostor triples. Exactly
/// symmetric by construction; zero contribution at the hinge boundary.
fn gradient_from_active(
    table: &DistanceVectorTable,
    nbrs: &NeighborStructure,
    c: f64,
    active: &[(usize, usize, usize)],
) -> DMatrix<f64> {
    let m = table.m();
    let mut weights = vec![0.0f64; m * m];
    for i in 0..m {
        for &j in nbrs.targets(i) {
            weights[i * m + j] += 1.0;
        }
    }
    for &(i, j, l) in active {
        weights[i * m + j] += c;
        weights[i * m + l] -= c;
    }
    weighted_outer_sum(table, weights.as_slice())
}

/// Hinge contribution alone of a set of triples.
fn hinge_gradient(
    table: &DistanceVectorTable,
    c: f64,
    triples: &[(usize, usize, usize)],
) -> DMatrix<f64> {
    let m = table.m();
    let mut weights = vec![0.0f64; m * m];
    for &(i, j, l) in triples {
        weights[i * m + j] += c;
        weights[i * m + l] -= c;
    }
    weighted_outer_sum(table, weights.as_slice())
}

/// Minimum-norm combination G + theta * H over theta in [0, 1]. At a hinge
/// kink this is the steepest-descent subgradient selection: it cancels the
/// component of G that drives straight into the boundary.
fn min_norm_blend(g: &DMatrix<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
    let hh = h.dot(h);
    if hh <= 0.0 {
        return g.clone();
    }
    let theta = (-g.dot(h) / hh).clamp(0.0, 1.0);
    g + h * theta
}

/// All impostor triples (i, j in targets(i), l with a different label).
fn impostor_triples(labels: &[usize], nbrs: &NeighborStructure) -> Vec<(usize, usize, usize)> {
    let m = labels.len();
    let mut triples = Vec::new();
    for i in 0..m {
        for &j in nbrs.targets(i) {
            for l in 0..m {
                if labels[l] != labels[i] {
                    triples.push((i, j, l));
                }
            }
        }
    }
    triples
}

/// Subgradient selection for the step about to be taken: start from the
/// strict subgradient blended with on-kink triples, then fold in every
/// inactive triple whose margin the step `M - step * d` would cross (to
/// first order), re-estimating once. Far from any kink this is exactly the
/// strict subgradient.
struct DirectionPicker<'a> {
    table: &'a DistanceVectorTable,
    nbrs: &'a NeighborStructure,
    c: f64,
    triples: Vec<(usize, usize, usize)>,
}

impl<'a> DirectionPicker<'a> {
    fn new(
        table: &'a DistanceVectorTable,
        labels: &[usize],
        nbrs: &'a NeighborStructure,
        c: f64,
    ) -> Self {
        DirectionPicker {
            table,
            nbrs,
            c,
            triples: impostor_triples(labels, nbrs),
        }
    }

    fn pick(&self, m_mat: &DMatrix<f64>, parts: &ObjectiveParts, step: f64) -> DMatrix<f64> {
        let m = self.table.m();
        let strict = gradient_from_active(self.table, self.nbrs, self.c, &parts.active);
        let mut direction = if parts.near.is_empty() {
            strict.clone()
        } else {
            min_norm_blend(
                &strict,
                &hinge_gradient(self.table, self.c, &parts.near),
            )
        };
        if step <= 0.0 || self.triples.is_empty() {
            return direction;
        }
        let dists = all_pair_distances(m_mat, self.table);
        for _ in 0..2 {
            let rates = all_pair_distances(&direction, self.table);
            let mut blend_set = parts.near.clone();
            let mut grew = false;
            for &(i, j, l) in &self.triples {
                let margin = 1.0 + dists[i * m + j] - dists[i * m + l];
                if margin > 0.0 {
                    continue; // already in the strict term
                }
                let rate = rates[i * m + l] - rates[i * m + j];
                if margin + step * rate > 0.0 && !parts.near.contains(&(i, j, l)) {
                    blend_set.push((i, j, l));
                    grew = true;
                }
            }
            if !grew {
                break;
            }
            blend_set.sort_unstable();
            blend_set.dedup();
            direction = min_norm_blend(
                &strict,
                &hinge_gradient(self.table, self.c, &blend_set),
            );
        }
        direction
    }
}

/// Subgradient of [`lmnn_objective`] at M.
pub fn lmnn_gradient(
    m_mat: &DMatrix<f64>,
    table: &DistanceVectorTable,
    labels: &[usize],
    nbrs: &NeighborStructure,
    c: f64,
) -> Result<DMatrix<f64>> {
    check_dims(m_mat, table, labels, nbrs)?;
    let parts = objective_parts(m_mat, table, labels, nbrs, c, None);
    Ok(gradient_from_active(table, nbrs, c, &parts.active))
}

fn random_psd_perturbation(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let p = &r * r.transpose();
    let norm = p.norm();
    if norm > 0.0 {
        p / norm * (n as f64).sqrt()
    } else {
        p
    }
}

fn eig_extremes(m_mat: &DMatrix<f64>) -> (f64, f64) {
    match sorted_symmetric_eigen(m_mat) {
        Ok((values, _)) => (*values.last().unwrap_or(&0.0), *values.first().unwrap_or(&0.0)),
        Err(_) => (f64::NAN, f64::NAN),
    }
}

/// Train a metric on a distance-vector table by projected subgradient
/// descent from a scaled identity, with accept/reject step adaptation.
/// Deterministic for a fixed config.
pub fn train(
    table: &DistanceVectorTable,
    labels: &[usize],
    cfg: &LmnnConfig,
) -> Result<(MetricModel, TrainTrace)> {
    let n = table.n();
    cfg.validate(n)?;
    if labels.len() != table.m() {
        return Err(Error::Dimension {
            expected: table.m(),
            found: labels.len(),
        });
    }
    let nbrs = select_targets(table, labels, cfg.k);

    // Scale the identity start so the mean target distance is 1.
    let mut pull_sum = 0.0;
    let mut pull_count = 0usize;
    for i in 0..table.m() {
        for &j in nbrs.targets(i) {
            let d = table.vector(i, j);
            pull_sum += d.iter().map(|v| v * v).sum::<f64>();
            pull_count += 1;
        }
    }
    if pull_count == 0 {
        return Err(Error::Training(
            "no target neighbors: every class has a single member".into(),
        ));
    }
    let mean_pull = pull_sum / pull_count as f64;
    let scale = if mean_pull > 0.0 { 1.0 / mean_pull } else { 1.0 };

    let mut m_mat = DMatrix::identity(n, n) * scale;
    if cfg.init_noise > 0.0 {
        m_mat += random_psd_perturbation(n, cfg.seed) * (scale * cfg.init_noise);
    }

    match cfg.low_rank_mode {
        LowRankMode::Truncate => train_full(table, labels, &nbrs, cfg, m_mat),
        LowRankMode::DirectL => train_direct_l(table, labels, &nbrs, cfg, m_mat),
    }
}

fn finalize_model(
    l: DMatrix<f64>,
    table: &DistanceVectorTable,
    labels: &[usize],
    cfg: &LmnnConfig,
) -> Result<MetricModel> {
    let _ = labels;
    let channel_names = (0..table.n()).map(|k| format!("ch_{k}")).collect();
    MetricModel::new(l, channel_names, table.fingerprint().to_string(), cfg.seed)
}

struct DescentState {
    objective: f64,
    step: f64,
    stall: usize,
    seen_reject: bool,
    converged: bool,
    iters_done: usize,
}

fn train_full(
    table: &DistanceVectorTable,
    labels: &[usize],
    nbrs: &NeighborStructure,
    cfg: &LmnnConfig,
    mut m_mat: DMatrix<f64>,
) -> Result<(MetricModel, TrainTrace)> {
    let c = cfg.push_weight;
    let mut candidates: Option<Vec<(usize, usize, usize)>> = None;
    let scan = |m: &DMatrix<f64>, cands: Option<&[(usize, usize, usize)]>| {
        objective_parts(m, table, labels, nbrs, c, cands)
    };
    let picker = DirectionPicker::new(table, labels, nbrs, c);

    let mut current = scan(&m_mat, None);
    if !current.value.is_finite() {
        return Err(Error::Training(format!(
            "non-finite objective {} at initialization (bad scaling)",
            current.value
        )));
    }
    let g0 = picker.pick(&m_mat, &current, 0.0).norm();
    let mut state = DescentState {
        objective: current.value,
        step: cfg
            .initial_step
            .unwrap_or(1e-7 * table.n() as f64 / g0.max(f64::MIN_POSITIVE)),
        stall: 0,
        seen_reject: false,
        converged: g0 == 0.0,
        iters_done: 0,
    };

    let mut rows = Vec::with_capacity(cfg.max_iters + 1);
    let (min_eig, max_eig) = eig_extremes(&m_mat);
    rows.push(TraceRow {
        iter: 0,
        objective: state.objective,
        step: state.step,
        active_count: current.active.len(),
        min_eig,
        max_eig,
    });

    if !state.converged {
        for iter in 1..=cfg.max_iters {
            state.iters_done = iter;
            if let Some(period) = cfg.active_set_refresh {
                if (iter - 1) % period == 0 {
                    current = scan(&m_mat, None);
                    state.objective = current.value;
                    candidates = Some(current.active.clone());
                }
            }
            // cap the movement at the iterate norm so a grown step cannot
            // throw the iterate across the whole feasible region
            let grad = picker.pick(&m_mat, &current, state.step);
            let grad_norm = grad.norm();
            if grad_norm == 0.0 {
                state.converged = true;
                break;
            }
            let eff_step = state.step.min(m_mat.norm().max(1e-12) / grad_norm);
            let proposal = psd_project(&(&m_mat - &grad * eff_step))?;
            let parts = scan(&proposal, candidates.as_deref());
            if !parts.value.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite objective {} at iteration {iter}",
                    parts.value
                )));
            }
            if parts.value < state.objective {
                let improvement =
                    (state.objective - parts.value) / state.objective.abs().max(f64::MIN_POSITIVE);
                m_mat = proposal;
                state.objective = parts.value;
                current = parts;
                state.step *= cfg.step_growth;
                if state.seen_reject && improvement < cfg.tolerance {
                    state.stall += 1;
                } else if improvement >= cfg.tolerance {
                    state.stall = 0;
                }
            } else {
                state.step *= cfg.step_decay;
                state.seen_reject = true;
                state.stall += 1;
            }
            let (min_eig, max_eig) = eig_extremes(&m_mat);
            rows.push(TraceRow {
                iter,
                objective: state.objective,
                step: state.step,
                active_count: current.active.len(),
                min_eig,
                max_eig,
            });
            if state.stall >= cfg.patience || state.step < 1e-18 {
                state.converged = true;
                break;
            }
        }
    }

    let l = factor_l(&m_mat, cfg.rank)?;
    let model = finalize_model(l, table, labels, cfg)?;
    let trace = TrainTrace {
        rows,
        converged: state.converged,
        hit_max_iters: !state.converged && state.iters_done == cfg.max_iters,
    };
    Ok((model, trace))
}

fn train_direct_l(
    table: &DistanceVectorTable,
    labels: &[usize],
    nbrs: &NeighborStructure,
    cfg: &LmnnConfig,
    m_init: DMatrix<f64>,
) -> Result<(MetricModel, TrainTrace)> {
    let c = cfg.push_weight;
    let mut l = factor_l(&m_init, cfg.rank)?;
    let gram = |l: &DMatrix<f64>| l.transpose() * l;
    let picker = DirectionPicker::new(table, labels, nbrs, c);

    let mut m_mat = gram(&l);
    let mut current = objective_parts(&m_mat, table, labels, nbrs, c, None);
    if !current.value.is_finite() {
        return Err(Error::Training(
            "non-finite objective at initialization".into(),
        ));
    }
    // dE/dL = 2 L G with G the same weighted outer-product sum as for M
    let g0 = (&l * picker.pick(&m_mat, &current, 0.0) * 2.0).norm();
    let mut state = DescentState {
        objective: current.value,
        step: cfg
            .initial_step
            .unwrap_or(1e-7 * table.n() as f64 / g0.max(f64::MIN_POSITIVE)),
        stall: 0,
        seen_reject: false,
        converged: g0 == 0.0,
        iters_done: 0,
    };

    let mut rows = Vec::with_capacity(cfg.max_iters + 1);
    let (min_eig, max_eig) = eig_extremes(&m_mat);
    rows.push(TraceRow {
        iter: 0,
        objective: state.objective,
        step: state.step,
        active_count: current.active.len(),
        min_eig,
        max_eig,
    });

    if !state.converged {
        for iter in 1..=cfg.max_iters {
            state.iters_done = iter;
            let grad_l = &l * picker.pick(&m_mat, &current, state.step) * 2.0;
            let grad_norm = grad_l.norm();
            if grad_norm == 0.0 {
                state.converged = true;
                break;
            }
            let eff_step = state.step.min(l.norm().max(1e-12) / grad_norm);
            let proposal = &l - &grad_l * eff_step;
            let m_prop = gram(&proposal);
            let parts = objective_parts(&m_prop, table, labels, nbrs, c, None);
            if !parts.value.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite objective at iteration {iter}"
                )));
            }
            if parts.value < state.objective {
                let improvement =
                    (state.objective - parts.value) / state.objective.abs().max(f64::MIN_POSITIVE);
                l = proposal;
                m_mat = m_prop;
                state.objective = parts.value;
                current = parts;
                state.step *= cfg.step_growth;
                if state.seen_reject && improvement < cfg.tolerance {
                    state.stall += 1;
                } else if improvement >= cfg.tolerance {
                    state.stall = 0;
                }
            } else {
                state.step *= cfg.step_decay;
                state.seen_reject = true;
                state.stall += 1;
            }
            let (min_eig, max_eig) = eig_extremes(&m_mat);
            rows.push(TraceRow {
                iter,
                objective: state.objective,
                step: state.step,
                active_count: current.active.len(),
                min_eig,
                max_eig,
            });
            if state.stall >= cfg.patience || state.step < 1e-18 {
                state.converged = true;
                break;
            }
        }
    }

    let model = finalize_model(l, table, labels, cfg)?;
    let trace = TrainTrace {
        rows,
        converged: state.converged,
        hit_max_iters: !state.converged && state.iters_done == cfg.max_iters,
    };
    Ok((model, trace))
}
