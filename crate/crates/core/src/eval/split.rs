//! Stratified train/test splitting and k-fold partitioning. Class
//! proportions are preserved to within one sample in every partition.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::seed::rng_for;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

fn class_indices(labels: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l {
            pos.push(i)
        } else {
            neg.push(i)
        }
    }
    (pos, neg)
}

/// Within each class, `round(n_class * test_fraction)` shuffled rows go to
/// the test side.
pub fn stratified_split(labels: &[bool], test_fraction: f64, seed: u64) -> Result<SplitPlan, EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::BadFraction(test_fraction));
    }
    let (pos, neg) = class_indices(labels);
    for (class, members) in [(true, &pos), (false, &neg)] {
        if members.len() < 2 {
            return Err(EvalError::DegenerateClass {
                class,
                count: members.len(),
                need: 2,
            });
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class_id, mut members) in [(0u64, pos), (1u64, neg)] {
        members.shuffle(&mut rng_for(seed, "split-class", class_id));
        let n_test = (members.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan {
        train_indices: train,
        test_indices: test,
        seed,
        test_fraction,
    })
}

/// `k` disjoint folds covering all indices; within each class the fold sizes
/// differ by at most one.
pub fn stratified_kfold(labels: &[bool], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    assert!(k >= 2, "k-fold needs k >= 2");
    let (pos, neg) = class_indices(labels);
    for (class, members) in [(true, &pos), (false, &neg)] {
        if members.len() < k {
            return Err(EvalError::DegenerateClass {
                class,
                count: members.len(),
                need: k,
            });
        }
    }
    let mut folds = vec![Vec::new(); k];
    for (class_id, mut members) in [(0u64, pos), (1u64, neg)] {
        members.shuffle(&mut rng_for(seed, "kfold-class", class_id));
        for (i, idx) in members.into_iter().enumerate() {
            folds[i % k].push(idx);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n_pos: usize, n_neg: usize) -> Vec<bool> {
        let mut v = vec![true; n_pos];
        v.extend(vec![false; n_neg]);
        v
    }

    #[test]
    fn exact_class_counts_in_test_split() {
        let plan = stratified_split(&labels(30, 70), 0.2, 7).unwrap();
        let test_pos = plan.test_indices.iter().filter(|&&i| i < 30).count();
        assert_eq!(test_pos, 6);
        assert_eq!(plan.test_indices.len() - test_pos, 14);
        assert_eq!(plan.train_indices.len() + plan.test_indices.len(), 100);
    }

    #[test]
    fn zero_fraction_is_rejected() {
        assert!(matches!(
            stratified_split(&labels(5, 5), 0.0, 1),
            Err(EvalError::BadFraction(_))
        ));
    }

    #[test]
    fn split_is_seed_deterministic() {
        let l = labels(20, 40);
        let a = stratified_split(&l, 0.25, 3).unwrap();
        let b = stratified_split(&l, 0.25, 3).unwrap();
        assert_eq!(a.test_indices, b.test_indices);
        let c = stratified_split(&l, 0.25, 4).unwrap();
        assert_ne!(a.test_indices, c.test_indices);
        // class counts are identical regardless of seed
        let count = |p: &SplitPlan| p.test_indices.iter().filter(|&&i| i < 20).count();
        assert_eq!(count(&a), count(&c));
    }

    #[test]
    fn kfold_balances_classes_exactly_when_divisible() {
        let folds = stratified_kfold(&labels(5, 5), 5, 1).unwrap();
        for fold in &folds {
            assert_eq!(fold.len(), 2);
            assert_eq!(fold.iter().filter(|&&i| i < 5).count(), 1);
        }
    }

    #[test]
    fn kfold_pigeonholes_remainders() {
        let folds = stratified_kfold(&labels(7, 10), 5, 2).unwrap();
        for fold in &folds {
            let p = fold.iter().filter(|&&i| i < 7).count();
            assert!(p == 1 || p == 2, "positive count {p}");
        }
    }

    #[test]
    fn degenerate_class_is_rejected() {
        assert!(matches!(
            stratified_kfold(&labels(3, 50), 5, 1),
            Err(EvalError::DegenerateClass { class: true, .. })
        ));
    }

    proptest! {
        #[test]
        fn split_partitions_indices_exactly(n_pos in 2usize..60, n_neg in 2usize..60, seed in 0u64..100) {
            let l = labels(n_pos, n_neg);
            let plan = stratified_split(&l, 0.2, seed).unwrap();
            let mut all: Vec<usize> = plan.train_indices.iter().chain(&plan.test_indices).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..l.len()).collect::<Vec<_>>());
            // per-class test fraction within one sample
            for (class, n_class) in [(true, n_pos), (false, n_neg)] {
                let in_test = plan.test_indices.iter().filter(|&&i| l[i] == class).count();
                prop_assert!((in_test as f64 - n_class as f64 * 0.2).abs() <= 1.0);
            }
        }

        #[test]
        fn kfold_partitions_indices_exactly(n_pos in 5usize..40, n_neg in 5usize..40, seed in 0u64..100) {
            let l = labels(n_pos, n_neg);
            let folds = stratified_kfold(&l, 5, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..l.len()).collect::<Vec<_>>());
            for class in [true, false] {
                let sizes: Vec<usize> = folds
                    .iter()
                    .map(|f| f.iter().filter(|&&i| l[i] == class).count())
                    .collect();
                let min = sizes.iter().min().unwrap();
                let max = sizes.iter().max().unwrap();
                prop_assert!(max - min <= 1);
            }
        }
    }
}
