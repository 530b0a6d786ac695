//! K-nearest-neighbor voting over precomputed distances.

use crate::error::{Error, Result};

/// Majority label among the k smallest distances. Distance ties break toward
/// the lower position index; vote ties break toward the class with the
/// nearest representative among the k neighbors. Callers present training
/// samples in canonical (ascending sample index) order so tie-breaking is
/// independent of how the data was shuffled upstream.
pub fn knn_classify(distances: &[f64], labels: &[usize], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::Validation("k must be at least 1".into()));
    }
    if distances.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            found: distances.len(),
        });
    }
    if distances.len() < k {
        return Err(Error::Validation(format!(
            "need at least {k} training samples, got {}",
            distances.len()
        )));
    }
    if let Some(bad) = distances.iter().find(|d| !d.is_finite()) {
        return Err(Error::Validation(format!("non-finite distance {bad}")));
    }
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| {
        distances[a]
            .partial_cmp(&distances[b])
            .expect("finite distances")
            .then(a.cmp(&b))
    });
    let neighbors = &order[..k];

    let num_classes = labels.iter().copied().max().unwrap_or(0) + 1;
    let mut votes = vec![0usize; num_classes];
    // rank of each class's nearest representative, for vote ties
    let mut first_rank = vec![usize::MAX; num_classes];
    for (rank, &idx) in neighbors.iter().enumerate() {
        let y = labels[idx];
        votes[y] += 1;
        if first_rank[y] == usize::MAX {
            first_rank[y] = rank;
        }
    }
    let best_votes = *votes.iter().max().expect("at least one class");
    let winner = (0..num_classes)
        .filter(|&y| votes[y] == best_votes)
        .min_by_key(|&y| first_rank[y])
        .expect("at least one winner");
    Ok(winner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_training_sample() {
        assert_eq!(knn_classify(&[0.4], &[3], 1).unwrap(), 3);
    }

    #[test]
    fn majority_of_three_nearest() {
        let distances = [0.1, 0.2, 0.3, 9.0];
        let labels = [0, 0, 1, 1];
        assert_eq!(knn_classify(&distances, &labels, 3).unwrap(), 0);
    }

    #[test]
    fn vote_tie_goes_to_nearest_class() {
        // k=2, one vote each: class of the nearest neighbor wins.
        let distances = [0.5, 0.1];
        let labels = [0, 1];
        assert_eq!(knn_classify(&distances, &labels, 2).unwrap(), 1);
    }

    #[test]
    fn distance_tie_breaks_to_lower_index() {
        let distances = [1.0, 1.0, 2.0];
        let labels = [2, 1, 1];
        assert_eq!(knn_classify(&distances, &labels, 1).unwrap(), 2);
    }

    #[test]
    fn matches_sort_and_vote_oracle() {
        // Independent reference: full sort, count votes, resolve ties the
        // same way, across random inputs.
        fn oracle(distances: &[f64], labels: &[usize], k: usize) -> usize {
            let mut pairs: Vec<(f64, usize)> =
                distances.iter().copied().zip(0..distances.len()).collect();
            pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let top: Vec<usize> = pairs[..k].iter().map(|&(_, i)| labels[i]).collect();
            let max_class = labels.iter().max().unwrap() + 1;
            let mut counts = vec![0usize; max_class];
            for &y in &top {
                counts[y] += 1;
            }
            let best = *counts.iter().max().unwrap();
            for &y in &top {
                if counts[y] == best {
                    return y;
                }
            }
            unreachable!()
        }
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for _ in 0..50 {
            let m = rng.random_range(5..50);
            let distances: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..10.0)).collect();
            let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..3)).collect();
            assert_eq!(
                knn_classify(&distances, &labels, 3).unwrap(),
                oracle(&distances, &labels, 3)
            );
        }
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(knn_classify(&[1.0, 2.0], &[0, 1], 3).is_err());
    }
}
