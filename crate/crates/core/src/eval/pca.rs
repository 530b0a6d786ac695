//! PCA over pooled timestep vectors, for the project-then-warp baseline.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::quadform::sorted_symmetric_eigen;
use crate::seqdata::{Corpus, Sequence};

/// Mean-centered principal basis fit on pooled training timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    mean: DVector<f64>,
    /// n x q, columns = leading principal directions.
    components: DMatrix<f64>,
}

impl PcaBasis {
    pub fn components(&self) -> usize {
        self.components.ncols()
    }

    /// Fit on the pooled timestep vectors of the given training samples.
    /// Errors when the pooled covariance has fewer than `q` nonzero
    /// eigenvalues.
    pub fn fit(corpus: &Corpus, train_indices: &[usize], q: usize) -> Result<Self> {
        let n = corpus.n();
        if q == 0 || q > n {
            return Err(Error::Validation(format!(
                "component count {q} out of range [1, {n}]"
            )));
        }
        if train_indices.is_empty() {
            return Err(Error::Validation("empty training index set".into()));
        }
        let mut count = 0usize;
        let mut mean = DVector::zeros(n);
        for &i in train_indices {
            let seq = corpus.sequence(i);
            for t in 0..seq.len() {
                for k in 0..n {
                    mean[k] += seq.channel(k)[t];
                }
                count += 1;
            }
        }
        mean /= count as f64;

        let mut cov = DMatrix::zeros(n, n);
        for &i in train_indices {
            let seq = corpus.sequence(i);
            for t in 0..seq.len() {
                for p in 0..n {
                    let dp = seq.channel(p)[t] - mean[p];
                    for pq in p..n {
                        let dq = seq.channel(pq)[t] - mean[pq];
                        cov[(p, pq)] += dp * dq;
                    }
                }
            }
        }
        for p in 0..n {
            for pq in (p + 1)..n {
                cov[(pq, p)] = cov[(p, pq)];
            }
        }
        cov /= count as f64;

        let (values, vectors) = sorted_symmetric_eigen(&cov)?;
        let max = values.first().copied().unwrap_or(0.0);
        let nonzero = values.iter().filter(|&&v| v > 1e-12 * max.max(1e-300)).count();
        if nonzero < q {
            return Err(Error::Validation(format!(
                "degenerate covariance: {nonzero} nonzero eigenvalues for {q} components"
            )));
        }
        let components = vectors.columns(0, q).into_owned();
        Ok(PcaBasis { mean, components })
    }

    /// Project a sequence's timesteps onto the basis: T x n -> T x q.
    pub fn project(&self, seq: &Sequence) -> Sequence {
        let q = self.components.ncols();
        let n = self.mean.len();
        let mut channels: Vec<Vec<f64>> = vec![Vec::with_capacity(seq.len()); q];
        for t in 0..seq.len() {
            for (c, channel) in channels.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += (seq.channel(k)[t] - self.mean[k]) * self.components[(k, c)];
                }
                channel.push(acc);
            }
        }
        Sequence::from_channels(seq.id(), channels).expect("projection keeps values finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqdata::{generate_synthetic, SyntheticSpec};
    use approx::assert_relative_eq;

    #[test]
    fn projection_has_requested_channels() {
        let spec = SyntheticSpec::new(8, 5, 2, (6, 9), vec![0], 3.0, 1.0, 14);
        let corpus = generate_synthetic(&spec).unwrap();
        let basis = PcaBasis::fit(&corpus, &(0..8).collect::<Vec<_>>(), 3).unwrap();
        let projected = basis.project(corpus.sequence(0));
        assert_eq!(projected.num_channels(), 3);
        assert_eq!(projected.len(), corpus.sequence(0).len());
    }

    #[test]
    fn first_component_captures_dominant_direction() {
        // Informative channel 0 has by far the largest pooled variance
        // (offsets +/-4 vs noise 0.2), so the top component aligns with e0.
        let spec = SyntheticSpec::new(10, 3, 2, (8, 12), vec![0], 4.0, 0.2, 15);
        let corpus = generate_synthetic(&spec).unwrap();
        let basis = PcaBasis::fit(&corpus, &(0..10).collect::<Vec<_>>(), 1).unwrap();
        assert_relative_eq!(basis.components[(0, 0)].abs(), 1.0, max_relative = 1e-2);
    }

    #[test]
    fn degenerate_covariance_rejected() {
        // Duplicated channel makes the covariance rank-deficient.
        let spec =
            SyntheticSpec::new(6, 2, 2, (5, 8), vec![0], 3.0, 0.5, 16).with_duplicates(vec![(1, 0)]);
        let corpus = generate_synthetic(&spec).unwrap();
        let err = PcaBasis::fit(&corpus, &(0..6).collect::<Vec<_>>(), 2);
        assert!(err.is_err());
    }

    #[test]
    fn centering_uses_training_pool_mean() {
        let spec = SyntheticSpec::new(8, 2, 2, (5, 8), vec![0], 3.0, 0.5, 18);
        let corpus = generate_synthetic(&spec).unwrap();
        let train: Vec<usize> = vec![0, 2, 4, 6];
        let basis = PcaBasis::fit(&corpus, &train, 2).unwrap();
        // projecting the pooled training mean vector gives zero
        let mut mean_seq = vec![0.0; 2];
        let mut count = 0usize;
        for &i in &train {
            let seq = corpus.sequence(i);
            for t in 0..seq.len() {
                mean_seq[0] += seq.channel(0)[t];
                mean_seq[1] += seq.channel(1)[t];
                count += 1;
            }
        }
        let mean_seq: Vec<f64> = mean_seq.iter().map(|v| v / count as f64).collect();
        let probe = Sequence::from_channels("m", vec![vec![mean_seq[0]], vec![mean_seq[1]]]).unwrap();
        let projected = basis.project(&probe);
        assert!(projected.channel(0)[0].abs() < 1e-9);
        assert!(projected.channel(1)[0].abs() < 1e-9);
    }
}
