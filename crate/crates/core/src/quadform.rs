//! The learned quadratic form over distance vectors, relevance profiles and
//! PSD / low-rank matrix utilities.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear transform L (rows = projection dimensions, columns = channels)
/// inducing the PSD form M = L^T L, plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricModel {
    l: DMatrix<f64>,
    regularized: bool,
    effective_dim: Option<usize>,
    channel_names: Vec<String>,
    fingerprint: String,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    channel_names: Vec<String>,
    rows: usize,
    cols: usize,
    /// Row-major entries of L.
    l: Vec<f64>,
    regularized: bool,
    effective_dim: Option<usize>,
    fingerprint: String,
    seed: u64,
}

impl MetricModel {
    pub fn new(
        l: DMatrix<f64>,
        channel_names: Vec<String>,
        fingerprint: String,
        seed: u64,
    ) -> Result<Self> {
        if channel_names.len() != l.ncols() {
            return Err(Error::Dimension {
                expected: l.ncols(),
                found: channel_names.len(),
            });
        }
        if l.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite entry in L".into()));
        }
        Ok(MetricModel {
            l,
            regularized: false,
            effective_dim: None,
            channel_names,
            fingerprint,
            seed,
        })
    }

    /// The identity transform: plain unweighted distance-vector geometry.
    pub fn identity(channel_names: Vec<String>) -> Self {
        let n = channel_names.len();
        MetricModel {
            l: DMatrix::identity(n, n),
            regularized: false,
            effective_dim: None,
            channel_names,
            fingerprint: String::new(),
            seed: 0,
        }
    }

    /// Same provenance, new transform; used by regularization.
    pub(crate) fn with_transform(
        &self,
        l: DMatrix<f64>,
        regularized: bool,
        effective_dim: Option<usize>,
    ) -> Self {
        MetricModel {
            l,
            regularized,
            effective_dim,
            channel_names: self.channel_names.clone(),
            fingerprint: self.fingerprint.clone(),
            seed: self.seed,
        }
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Channel count n (columns of L).
    pub fn n(&self) -> usize {
        self.l.ncols()
    }

    /// Projection dimension n' (rows of L).
    pub fn projection_rows(&self) -> usize {
        self.l.nrows()
    }

    pub fn regularized(&self) -> bool {
        self.regularized
    }

    pub fn effective_dim(&self) -> Option<usize> {
        self.effective_dim
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// ||L d||^2 = d^T M d.
    pub fn pair_distance(&self, d: &[f64]) -> Result<f64> {
        if d.len() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                found: d.len(),
            });
        }
        Ok(projected_sq_norm(&self.l, d, None))
    }

    /// ||L d||^2 with non-selected channels zeroed; `selected` indexes
    /// columns of L. Bitwise-identical to `pair_distance` when all channels
    /// are selected.
    pub fn restricted_distance(&self, d: &[f64], selected: &[usize]) -> Result<f64> {
        if d.len() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                found: d.len(),
            });
        }
        Ok(projected_sq_norm(&self.l, d, Some(selected)))
    }

    /// The transformed vector L d.
    pub fn transform(&self, d: &[f64]) -> Result<DVector<f64>> {
        if d.len() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                found: d.len(),
            });
        }
        Ok(&self.l * DVector::from_column_slice(d))
    }

    /// Per-channel relevance: entry k is the column sum of squares of L,
    /// i.e. the k-th diagonal entry of M = L^T L. Normalization divides by
    /// the maximum entry (all-zero profiles stay zero).
    pub fn relevance_profile(&self, normalize: bool) -> RelevanceProfile {
        let mut values: Vec<f64> = (0..self.n())
            .map(|k| self.l.column(k).iter().map(|v| v * v).sum())
            .collect();
        if normalize {
            let max = values.iter().cloned().fold(0.0f64, f64::max);
            if max > 0.0 {
                for v in &mut values {
                    *v /= max;
                }
            }
        }
        RelevanceProfile {
            values,
            normalized: normalize,
        }
    }

    pub fn to_json_string(&self) -> String {
        let file = ModelFile {
            channel_names: self.channel_names.clone(),
            rows: self.l.nrows(),
            cols: self.l.ncols(),
            l: (0..self.l.nrows())
                .flat_map(|r| (0..self.l.ncols()).map(move |c| (r, c)))
                .map(|(r, c)| self.l[(r, c)])
                .collect(),
            regularized: self.regularized,
            effective_dim: self.effective_dim,
            fingerprint: self.fingerprint.clone(),
            seed: self.seed,
        };
        let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
        text.push('\n');
        text
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Validation(format!("bad model: {e}")))?;
        if file.l.len() != file.rows * file.cols {
            return Err(Error::Validation(format!(
                "model matrix has {} entries for {}x{}",
                file.l.len(),
                file.rows,
                file.cols
            )));
        }
        let l = DMatrix::from_row_slice(file.rows, file.cols, &file.l);
        let mut model = MetricModel::new(l, file.channel_names, file.fingerprint, file.seed)?;
        model.regularized = file.regularized;
        model.effective_dim = file.effective_dim;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json_string()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        MetricModel::from_json_str(&text)
    }
}

/// Row-wise accumulation of ||L d||^2, optionally restricted to a channel
/// subset. Single code path keeps full and restricted evaluations bitwise
/// consistent.
fn projected_sq_norm(l: &DMatrix<f64>, d: &[f64], selected: Option<&[usize]>) -> f64 {
    let mut acc = 0.0;
    for r in 0..l.nrows() {
        let mut s = 0.0;
        match selected {
            None => {
                for (k, dk) in d.iter().enumerate() {
                    s += l[(r, k)] * dk;
                }
            }
            Some(sel) => {
                for &k in sel {
                    s += l[(r, k)] * d[k];
                }
            }
        }
        acc += s * s;
    }
    acc
}

/// Per-channel relevance values; normalized profiles scale the max to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceProfile {
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl RelevanceProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Eigenvalues sorted descending with matching eigenvector columns.
pub(crate) fn sorted_symmetric_eigen(sym: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite input".into()));
    }
    let eig = sym.clone().symmetric_eigen();
    let n = sym.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
            .then(a.cmp(&b))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Frobenius-nearest PSD matrix: symmetrize, eigendecompose, clamp negative
/// eigenvalues to zero, reconstruct.
pub fn psd_project(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if s.nrows() != s.ncols() {
        return Err(Error::Dimension {
            expected: s.nrows(),
            found: s.ncols(),
        });
    }
    let sym = (s + s.transpose()) * 0.5;
    let (values, vectors) = sorted_symmetric_eigen(&sym)?;
    let n = s.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (idx, &lambda) in values.iter().enumerate() {
        if lambda <= 0.0 {
            continue;
        }
        let u = vectors.column(idx);
        for p in 0..n {
            for q in 0..n {
                out[(p, q)] += lambda * u[p] * u[q];
            }
        }
    }
    // reconstruction is symmetric up to rounding; force it exactly
    for p in 0..n {
        for q in (p + 1)..n {
            let v = 0.5 * (out[(p, q)] + out[(q, p)]);
            out[(p, q)] = v;
            out[(q, p)] = v;
        }
    }
    Ok(out)
}

/// Factor a PSD matrix as L = sqrt(diag(lambda)) U^T restricted to the top
/// `rank` eigenpairs (all n when absent). L^T L reproduces M exactly when
/// rank >= rank(M).
pub fn factor_l(m: &DMatrix<f64>, rank: Option<usize>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let n = m.nrows();
    let rank = rank.unwrap_or(n).min(n);
    if rank == 0 {
        return Err(Error::Validation("rank must be at least 1".into()));
    }
    let sym = (m + m.transpose()) * 0.5;
    let (values, vectors) = sorted_symmetric_eigen(&sym)?;
    let tol = 1e-8 * m.norm();
    if let Some(&worst) = values.last() {
        if worst < -tol {
            return Err(Error::Eigen(format!(
                "matrix is not PSD: eigenvalue {worst} below -{tol}"
            )));
        }
    }
    let mut l = DMatrix::zeros(rank, n);
    for r in 0..rank {
        let lambda = values[r].max(0.0);
        let scale = lambda.sqrt();
        for c in 0..n {
            l[(r, c)] = scale * vectors[(c, r)];
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model_from(l: DMatrix<f64>) -> MetricModel {
        let names = (0..l.ncols()).map(|k| format!("ch_{k}")).collect();
        MetricModel::new(l, names, "test".into(), 0).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-2.0..2.0))
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = random_matrix(rng, n, n);
        (&a + a.transpose()) * 0.5
    }

    fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let a = random_matrix(rng, n, n);
        &a * a.transpose()
    }

    #[test]
    fn identity_gives_squared_norm() {
        let model = model_from(DMatrix::identity(3, 3));
        let d = [1.0, 2.0, 3.0];
        assert_eq!(model.pair_distance(&d).unwrap(), 14.0);
    }

    #[test]
    fn zero_transform_gives_zero() {
        let model = model_from(DMatrix::zeros(2, 2));
        assert_eq!(model.pair_distance(&[5.0, -3.0]).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_pair_distance() {
        // L = [[1,2],[0,3]], d = [1,1] -> Ld = (3,3), squared norm 18.
        let model = model_from(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]));
        assert_eq!(model.pair_distance(&[1.0, 1.0]).unwrap(), 18.0);
    }

    #[test]
    fn pair_distance_dimension_mismatch() {
        let model = model_from(DMatrix::identity(2, 2));
        assert!(matches!(
            model.pair_distance(&[1.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn quadratic_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = model_from(random_matrix(&mut rng, 3, 4));
        let d: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let scaled: Vec<f64> = d.iter().map(|v| 2.5 * v).collect();
        assert_relative_eq!(
            model.pair_distance(&scaled).unwrap(),
            2.5 * 2.5 * model.pair_distance(&d).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn relevance_diagonal_case() {
        let l = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let model = model_from(l);
        assert_eq!(model.relevance_profile(false).values, vec![4.0, 0.0, 1.0]);
        assert_eq!(model.relevance_profile(true).values, vec![1.0, 0.0, 0.25]);
    }

    #[test]
    fn relevance_identity_all_ones() {
        let model = model_from(DMatrix::identity(5, 5));
        assert_eq!(model.relevance_profile(false).values, vec![1.0; 5]);
    }

    #[test]
    fn relevance_matches_gram_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let l = random_matrix(&mut rng, 3, 4);
        let gram = l.transpose() * &l;
        let model = model_from(l);
        let profile = model.relevance_profile(false);
        for k in 0..4 {
            assert_relative_eq!(profile.values[k], gram[(k, k)], max_relative = 1e-12);
        }
    }

    #[test]
    fn relevance_invariant_under_rotation() {
        // Left-multiplying L by an orthogonal matrix leaves M unchanged.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let l = random_matrix(&mut rng, 4, 4);
        let q = random_matrix(&mut rng, 4, 4).qr().q();
        let rotated = &q * &l;
        let a = model_from(l).relevance_profile(false);
        let b = model_from(rotated).relevance_profile(false);
        for k in 0..4 {
            assert_relative_eq!(a.values[k], b.values[k], max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn psd_project_clamps_negative_eigenvalue() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let out = psd_project(&s).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((out - expected).norm() < 1e-12);
    }

    #[test]
    fn psd_project_fixes_point_on_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_psd(&mut rng, 4);
        let out = psd_project(&s).unwrap();
        assert!((&out - &s).norm() < 1e-10 * s.norm().max(1.0));
    }

    #[test]
    fn psd_project_is_frobenius_nearest_among_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_symmetric(&mut rng, 4);
        let out = psd_project(&s).unwrap();
        let (values, _) = sorted_symmetric_eigen(&out).unwrap();
        let max = values[0].max(1.0);
        assert!(values.iter().all(|&v| v >= -1e-9 * max));
        let base = (&out - &s).norm();
        for _ in 0..100 {
            let p = random_psd(&mut rng, 4);
            assert!(base <= (&p - &s).norm() + 1e-12);
        }
    }

    #[test]
    fn psd_project_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let s = random_symmetric(&mut rng, 5);
            let once = psd_project(&s).unwrap();
            let twice = psd_project(&once).unwrap();
            assert!((&twice - &once).norm() < 1e-9 * once.norm().max(1.0));
        }
    }

    #[test]
    fn psd_project_rejects_non_finite() {
        let s = DMatrix::from_row_slice(2, 2, &[f64::NAN, 0.0, 0.0, 1.0]);
        assert!(matches!(psd_project(&s), Err(Error::Eigen(_))));
    }

    #[test]
    fn factor_identity_roundtrips() {
        let m = DMatrix::identity(4, 4);
        let l = factor_l(&m, None).unwrap();
        assert!((l.transpose() * &l - &m).norm() < 1e-10);
    }

    #[test]
    fn factor_rank_one_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let v = DVector::from_fn(5, |_, _| rng.random_range(-2.0f64..2.0));
        let m = &v * v.transpose();
        let l = factor_l(&m, Some(1)).unwrap();
        assert_eq!(l.nrows(), 1);
        assert!((l.transpose() * &l - &m).norm() < 1e-10 * m.norm());
    }

    #[test]
    fn factor_rank_three_is_best_rank_three() {
        // Compare the truncated factor against every 3-subset of eigenpairs.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = random_psd(&mut rng, 6);
        let l = factor_l(&m, Some(3)).unwrap();
        let err = (l.transpose() * &l - &m).norm();
        let (values, vectors) = sorted_symmetric_eigen(&m).unwrap();
        for a in 0..6 {
            for b in (a + 1)..6 {
                for c in (b + 1)..6 {
                    let mut approx_m = DMatrix::zeros(6, 6);
                    for &idx in &[a, b, c] {
                        let u = vectors.column(idx);
                        approx_m += values[idx] * &u * u.transpose();
                    }
                    assert!(err <= (&approx_m - &m).norm() + 1e-9);
                }
            }
        }
    }

    #[test]
    fn factor_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        assert!(matches!(factor_l(&m, None), Err(Error::Eigen(_))));
    }

    #[test]
    fn model_json_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let model = model_from(random_matrix(&mut rng, 2, 3));
        let text = model.to_json_string();
        let back = MetricModel::from_json_str(&text).unwrap();
        assert_eq!(model, back);
        assert_eq!(text, back.to_json_string());
    }

    #[test]
    fn restricted_distance_full_selection_matches_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let model = model_from(random_matrix(&mut rng, 3, 5));
        let d: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let full = model.pair_distance(&d).unwrap();
        let all: Vec<usize> = (0..5).collect();
        assert_eq!(model.restricted_distance(&d, &all).unwrap(), full);
    }
}
