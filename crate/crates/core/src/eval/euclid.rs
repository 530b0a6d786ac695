//! Per-channel Euclidean distance vectors for the non-warping baseline.
//!
//! Unequal-length pairs are aligned by keeping the shorter series whole and
//! subsampling the longer one at equal time intervals, endpoints included.

use crate::dtw::{table_fingerprint, DistanceVectorTable, DtwConfig};
use crate::error::Result;
use crate::seqdata::{Corpus, Sequence};

/// 0-based subsample positions: round(1 + (r-1)(long-1)/(target-1)) - 1 for
/// r = 1..=target; first and last timesteps always included.
pub fn subsample_indices(long: usize, target: usize) -> Vec<usize> {
    if target <= 1 {
        return vec![0];
    }
    (1..=target)
        .map(|r| {
            let pos = 1.0 + (r - 1) as f64 * (long - 1) as f64 / (target - 1) as f64;
            pos.round() as usize - 1
        })
        .collect()
}

fn euclidean_vector(x: &Sequence, y: &Sequence) -> Vec<f64> {
    let n = x.num_channels();
    let (short, long) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let idx = subsample_indices(long.len(), short.len());
    (0..n)
        .map(|k| {
            let a = short.channel(k);
            let b = long.channel(k);
            a.iter()
                .zip(&idx)
                .map(|(av, &bi)| (av - b[bi]) * (av - b[bi]))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Distance-vector table with per-channel Euclidean distances in place of
/// DTW; everything downstream (LMNN, KNN) is shared.
pub fn build_euclidean_table(corpus: &Corpus) -> Result<DistanceVectorTable> {
    let fingerprint = table_fingerprint(corpus, &DtwConfig::default(), "euclidean");
    DistanceVectorTable::from_sequences(corpus.sequences(), corpus.n(), fingerprint, |x, y| {
        Ok(euclidean_vector(x, y))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn equal_lengths_subsample_is_identity() {
        assert_eq!(subsample_indices(4, 4), vec![0, 1, 2, 3]);
        let x = Sequence::from_channels("x", vec![vec![0.0, 1.0, 2.0]]).unwrap();
        let y = Sequence::from_channels("y", vec![vec![1.0, 1.0, 4.0]]).unwrap();
        let v = euclidean_vector(&x, &y);
        assert_relative_eq!(v[0], (1.0f64 + 0.0 + 4.0).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn five_to_three_keeps_endpoints() {
        // 1-based {1,3,5} -> 0-based {0,2,4}
        assert_eq!(subsample_indices(5, 3), vec![0, 2, 4]);
    }

    #[test]
    fn single_target_uses_first_entry() {
        assert_eq!(subsample_indices(7, 1), vec![0]);
    }

    #[test]
    fn table_is_symmetric_with_zero_diagonal() {
        use crate::seqdata::{generate_synthetic, SyntheticSpec};
        let spec = SyntheticSpec::new(5, 2, 2, (3, 8), vec![0], 2.0, 0.5, 6);
        let corpus = generate_synthetic(&spec).unwrap();
        let table = build_euclidean_table(&corpus).unwrap();
        for i in 0..5 {
            assert!(table.vector(i, i).iter().all(|&v| v == 0.0));
            for j in 0..5 {
                assert_eq!(table.vector(i, j), table.vector(j, i));
            }
        }
    }
}
