//! Stratified train/test splits.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;

pub type Split = (Vec<usize>, Vec<usize>);

fn members_by_class(labels: &[usize]) -> Vec<Vec<usize>> {
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by[l].push(i);
    }
    by
}

/// Keeps `fraction` of every class for training. A class with a single
/// member goes to the training side; otherwise each side gets at least one.
pub fn split_labelled_fraction(labels: &[usize], fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "labelled fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in members_by_class(labels).into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() == 1 {
            train.push(members[0]);
            continue;
        }
        members.shuffle(&mut seed::rng(
            seed,
            &[seed::tag("fraction-split"), class as u64],
        ));
        let take = ((fraction * members.len() as f64).round() as usize).clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..take]);
        test.extend_from_slice(&members[take..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "fraction {fraction} leaves an empty train or test set"
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified k-fold partitions.
///
/// Class members are shuffled, concatenated class by class and dealt to the
/// folds round-robin, so every fold's per-class count is within one of any
/// other fold's.
pub fn kfold_splits(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Split>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "k must be at least 2, got {k}"
        )));
    }
    if k > labels.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the {} items",
            labels.len()
        )));
    }
    let mut fold_of = vec![0usize; labels.len()];
    let mut next = 0usize;
    for (class, mut members) in members_by_class(labels).into_iter().enumerate() {
        members.shuffle(&mut seed::rng(seed, &[seed::tag("kfold"), class as u64]));
        for i in members {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| fold_of[i] == f);
            (train, test)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_half_split() {
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let (train, test) = split_labelled_fraction(&labels, 0.5, 3).unwrap();
        assert_eq!(train.iter().filter(|&&i| labels[i] == 0).count(), 25);
        assert_eq!(train.iter().filter(|&&i| labels[i] == 1).count(), 25);
        assert_eq!(test.len(), 50);
        assert_eq!(
            split_labelled_fraction(&labels, 0.5, 3).unwrap(),
            (train, test)
        );
    }

    #[test]
    fn singleton_class_goes_to_train() {
        let labels = vec![0, 0, 0, 0, 1, 2, 2];
        let (train, test) = split_labelled_fraction(&labels, 0.5, 0).unwrap();
        assert!(train.contains(&4));
        assert!(!test.contains(&4));
    }

    #[test]
    fn empty_side_is_an_error() {
        assert!(split_labelled_fraction(&[0, 1, 2], 0.5, 0).is_err());
        assert!(split_labelled_fraction(&[0, 0], 1.0, 0).is_err());
        assert!(split_labelled_fraction(&[0, 0], 0.0, 0).is_err());
    }

    #[test]
    fn kfold_partition() {
        let labels = vec![0; 10];
        let folds = kfold_splits(&labels, 5, 1).unwrap();
        let mut seen = vec![0; 10];
        for (train, test) in &folds {
            assert_eq!(test.len(), 2);
            assert_eq!(train.len(), 8);
            for &i in test {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert!(kfold_splits(&labels, 11, 0).is_err());
        assert!(kfold_splits(&labels, 1, 0).is_err());
    }

    #[test]
    fn kfold_stratification() {
        let labels: Vec<usize> = (0..103).map(|i| [0, 0, 0, 1, 1, 2][i % 6]).collect();
        let folds = kfold_splits(&labels, 5, 9).unwrap();
        for class in 0..3 {
            let total = labels.iter().filter(|&&l| l == class).count();
            for (_, test) in &folds {
                let c = test.iter().filter(|&&i| labels[i] == class).count();
                assert!((c as f64 - total as f64 / 5.0).abs() <= 1.0);
            }
        }
    }
}
