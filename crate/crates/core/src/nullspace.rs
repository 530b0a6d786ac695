//! Regularization of a trained transform onto the span of the training
//! distance-data correlation matrix, with eigenvalue-profile inspection and
//! effective-dimension selection.
//!
//! Stacking every ordered training-pair distance vector as columns of a
//! matrix, directions with vanishing correlation eigenvalues are exactly the
//! directions the training data cannot constrain; projecting L onto the
//! complement yields the minimal-Frobenius-norm representative of its
//! equivalence class, which is the one whose diagonal is interpretable.

use nalgebra::DMatrix;

use crate::dtw::DistanceVectorTable;
use crate::error::{Error, Result};
use crate::fingerprint::Fingerprinter;
use crate::quadform::{sorted_symmetric_eigen, MetricModel, RelevanceProfile};

/// Eigendecomposition of the distance correlation matrix, sorted by
/// descending eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSpectrum {
    eigenvalues: Vec<f64>,
    /// Orthonormal eigenvector columns matching `eigenvalues`.
    basis: DMatrix<f64>,
    source_fingerprint: String,
}

impl CorrelationSpectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn source_fingerprint(&self) -> &str {
        &self.source_fingerprint
    }

    /// CSV rows (index, eigenvalue), largest first.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("index,eigenvalue\n");
        for (i, v) in self.eigenvalues.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }
}

/// Policy for picking the retained dimension J from a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimensionPolicy {
    /// Count eigenvalues >= eps_rel * lambda_max (numerical rank).
    Threshold(f64),
    /// Smallest J whose eigenvalue mass reaches the given fraction.
    Energy(f64),
    /// Fixed J, clamped to [1, n].
    Manual(usize),
}

/// Symmetric idempotent projector onto the leading J eigendirections.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    phi: DMatrix<f64>,
    dim: usize,
}

impl Projector {
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Eigendecompose the n x n correlation matrix of all ordered training-pair
/// distance vectors (i = j included; zero columns are harmless).
pub fn correlation_spectrum(
    table: &DistanceVectorTable,
    train_indices: &[usize],
) -> Result<CorrelationSpectrum> {
    if train_indices.is_empty() {
        return Err(Error::Validation("empty training index set".into()));
    }
    if let Some(&bad) = train_indices.iter().find(|&&i| i >= table.m()) {
        return Err(Error::Validation(format!(
            "training index {bad} out of range (m={})",
            table.m()
        )));
    }
    let n = table.n();
    let mut corr = DMatrix::<f64>::zeros(n, n);
    for &i in train_indices {
        for &j in train_indices {
            let d = table.vector(i, j);
            for p in 0..n {
                if d[p] == 0.0 {
                    continue;
                }
                for q in 0..n {
                    corr[(p, q)] += d[p] * d[q];
                }
            }
        }
    }
    if corr.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite correlation entries".into()));
    }
    let (eigenvalues, basis) = sorted_symmetric_eigen(&corr)?;

    let mut fp = Fingerprinter::new("spectrum");
    fp.push_str(table.fingerprint());
    for &i in train_indices {
        fp.push_usize(i);
    }
    Ok(CorrelationSpectrum {
        eigenvalues,
        basis,
        source_fingerprint: fp.finish(),
    })
}

/// Apply a [`DimensionPolicy`] to a spectrum.
pub fn choose_effective_dim(spectrum: &CorrelationSpectrum, policy: DimensionPolicy) -> usize {
    let n = spectrum.n();
    let values = spectrum.eigenvalues();
    match policy {
        DimensionPolicy::Threshold(eps_rel) => {
            let max = values.first().copied().unwrap_or(0.0);
            if max <= 0.0 {
                return n;
            }
            values.iter().filter(|&&v| v >= eps_rel * max).count().max(1)
        }
        DimensionPolicy::Energy(fraction) => {
            let max = values.first().copied().unwrap_or(0.0);
            // treat float dust as zero so fraction = 1.0 lands on the rank
            let cleaned: Vec<f64> = values
                .iter()
                .map(|&v| if v < 1e-12 * max.max(1.0) { 0.0 } else { v })
                .collect();
            let total: f64 = cleaned.iter().sum();
            if total <= 0.0 {
                return n;
            }
            let target = fraction.clamp(0.0, 1.0) * total;
            let mut acc = 0.0;
            for (idx, v) in cleaned.iter().enumerate() {
                acc += v;
                if acc >= target * (1.0 - 1e-12) {
                    return idx + 1;
                }
            }
            n
        }
        DimensionPolicy::Manual(j) => j.clamp(1, n),
    }
}

/// Projector onto the top-J eigendirections of the spectrum.
pub fn projector(spectrum: &CorrelationSpectrum, j: usize) -> Result<Projector> {
    let n = spectrum.n();
    if j == 0 || j > n {
        return Err(Error::Validation(format!(
            "effective dimension {j} out of range [1, {n}]"
        )));
    }
    let mut phi = DMatrix::zeros(n, n);
    for idx in 0..j {
        let u = spectrum.basis.column(idx);
        for p in 0..n {
            for q in 0..n {
                phi[(p, q)] += u[p] * u[q];
            }
        }
    }
    for p in 0..n {
        for q in (p + 1)..n {
            let v = 0.5 * (phi[(p, q)] + phi[(q, p)]);
            phi[(p, q)] = v;
            phi[(q, p)] = v;
        }
    }
    Ok(Projector { phi, dim: j })
}

/// Replace L by L * Phi with Phi the projector onto the leading J
/// eigendirections. Never increases the Frobenius norm; idempotent for a
/// fixed spectrum and J.
pub fn regularize(model: &MetricModel, spectrum: &CorrelationSpectrum, j: usize) -> Result<MetricModel> {
    if model.n() != spectrum.n() {
        return Err(Error::Dimension {
            expected: spectrum.n(),
            found: model.n(),
        });
    }
    let proj = projector(spectrum, j)?;
    let regularized = model.l() * proj.phi();
    Ok(model.with_transform(regularized, true, Some(j)))
}

/// Total variance of a collection of profiles: the unbiased per-channel
/// sample variance across the collection, summed over channels.
pub fn profile_variance(profiles: &[RelevanceProfile]) -> Result<f64> {
    if profiles.len() < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 profiles, got {}",
            profiles.len()
        )));
    }
    let n = profiles[0].len();
    for p in profiles {
        if p.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: p.len(),
            });
        }
    }
    let count = profiles.len() as f64;
    let mut total = 0.0;
    for k in 0..n {
        let mean: f64 = profiles.iter().map(|p| p.values[k]).sum::<f64>() / count;
        let ss: f64 = profiles
            .iter()
            .map(|p| (p.values[k] - mean) * (p.values[k] - mean))
            .sum();
        total += ss / (count - 1.0);
    }
    Ok(total)
}
