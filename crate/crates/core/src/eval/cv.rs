//! Stratified cross-validation plans shared by every pipeline under
//! comparison.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `folds` disjoint index sets per repetition, stratified by class, repeated
/// with independent shuffles. Identical seed gives an identical plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    partitions: Vec<Vec<Vec<usize>>>,
    folds: usize,
    seed: u64,
}

impl CvPlan {
    pub fn stratified(labels: &[usize], folds: usize, repetitions: usize, seed: u64) -> Result<Self> {
        let m = labels.len();
        if folds < 2 {
            return Err(Error::Validation(format!("need at least 2 folds, got {folds}")));
        }
        if repetitions == 0 {
            return Err(Error::Validation("need at least 1 repetition".into()));
        }
        if m < folds {
            return Err(Error::Validation(format!(
                "cannot split {m} samples into {folds} folds"
            )));
        }
        let num_classes = labels.iter().copied().max().map_or(0, |y| y + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut partitions = Vec::with_capacity(repetitions);
        for _ in 0..repetitions {
            let mut fold_sets: Vec<Vec<usize>> = vec![Vec::new(); folds];
            // deal each class round-robin from a random fold offset so small
            // classes do not pile onto fold 0 across classes
            let mut next_fold = 0usize;
            for class in 0..num_classes {
                let mut members: Vec<usize> =
                    (0..m).filter(|&i| labels[i] == class).collect();
                members.shuffle(&mut rng);
                for idx in members {
                    fold_sets[next_fold % folds].push(idx);
                    next_fold += 1;
                }
            }
            for fold in &mut fold_sets {
                fold.sort_unstable();
            }
            partitions.push(fold_sets);
        }
        Ok(CvPlan {
            partitions,
            folds,
            seed,
        })
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn repetitions(&self) -> usize {
        self.partitions.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Test indices of one fold (sorted ascending).
    pub fn test_indices(&self, repetition: usize, fold: usize) -> &[usize] {
        &self.partitions[repetition][fold]
    }

    /// Training indices of one fold: the complement, sorted ascending. The
    /// canonical ascending order makes index tie-breaking stable no matter
    /// how the plan was produced.
    pub fn train_indices(&self, repetition: usize, fold: usize, m: usize) -> Vec<usize> {
        let test = self.test_indices(repetition, fold);
        let mut in_test = vec![false; m];
        for &i in test {
            in_test[i] = true;
        }
        (0..m).filter(|&i| !in_test[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_two_class(m: usize) -> Vec<usize> {
        (0..m).map(|i| i % 2).collect()
    }

    #[test]
    fn folds_partition_all_samples() {
        let labels = labels_two_class(23);
        let plan = CvPlan::stratified(&labels, 5, 3, 9).unwrap();
        for rep in 0..3 {
            let mut seen = vec![0usize; 23];
            for fold in 0..5 {
                for &i in plan.test_indices(rep, fold) {
                    seen[i] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1), "rep {rep}: {seen:?}");
        }
    }

    #[test]
    fn folds_are_stratified_where_feasible() {
        let labels = labels_two_class(40);
        let plan = CvPlan::stratified(&labels, 10, 2, 1).unwrap();
        for rep in 0..2 {
            for fold in 0..10 {
                let test = plan.test_indices(rep, fold);
                let ones = test.iter().filter(|&&i| labels[i] == 1).count();
                assert_eq!(test.len(), 4);
                assert_eq!(ones, 2, "rep {rep} fold {fold}");
            }
        }
    }

    #[test]
    fn identical_seed_identical_plan() {
        let labels = labels_two_class(30);
        let a = CvPlan::stratified(&labels, 10, 10, 42).unwrap();
        let b = CvPlan::stratified(&labels, 10, 10, 42).unwrap();
        assert_eq!(a, b);
        let c = CvPlan::stratified(&labels, 10, 10, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn train_indices_complement_test() {
        let labels = labels_two_class(12);
        let plan = CvPlan::stratified(&labels, 3, 1, 5).unwrap();
        let train = plan.train_indices(0, 1, 12);
        let test = plan.test_indices(0, 1);
        assert_eq!(train.len() + test.len(), 12);
        for &i in test {
            assert!(!train.contains(&i));
        }
        assert!(train.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn too_few_samples_rejected() {
        let labels = labels_two_class(4);
        assert!(CvPlan::stratified(&labels, 10, 1, 0).is_err());
        assert!(CvPlan::stratified(&labels, 1, 1, 0).is_err());
    }
}
