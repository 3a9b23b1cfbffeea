use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Stratified partition of one item's records into `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    /// Record indices per fold, ascending.
    pub folds: Vec<Vec<usize>>,
}

/// Index sets of one rotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rotation {
    pub index: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Fold `r` tests, fold `(r + 1) mod k` validates, the rest train.
    pub fn rotation(&self, r: usize) -> Rotation {
        let k = self.k();
        let val = (r + 1) % k;
        let mut train: Vec<usize> = (0..k)
            .filter(|&f| f != r && f != val)
            .flat_map(|f| self.folds[f].iter().copied())
            .collect();
        train.sort_unstable();
        Rotation {
            index: r,
            train,
            validation: self.folds[val].clone(),
            test: self.folds[r].clone(),
        }
    }

    pub fn rotations(&self) -> impl Iterator<Item = Rotation> + '_ {
        (0..self.k()).map(|r| self.rotation(r))
    }
}

/// Shuffles each label's records and deals them round-robin, continuing the
/// dealing position across labels so fold sizes differ by at most one.
pub fn make_folds(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::config(format!("need at least 2 folds, got {k}")));
    }
    if labels.len() < k {
        return Err(Error::data(format!(
            "{} records cannot fill {k} folds",
            labels.len()
        )));
    }
    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by_label.entry(y).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0usize;
    for idx in by_label.values_mut() {
        idx.shuffle(&mut rng);
        for &i in idx.iter() {
            folds[next % k].push(i);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan { folds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_records_five_folds() {
        let labels = vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let plan = make_folds(&labels, 5, 3).unwrap();
        let mut all: Vec<usize> = plan.folds.iter().flatten().copied().collect();
        assert!(plan.folds.iter().all(|f| f.len() == 2));
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(plan, make_folds(&labels, 5, 3).unwrap());
    }

    #[test]
    fn stratified_within_one() {
        let labels: Vec<usize> = (0..97).map(|i| (i * i + 3 * i) % 4).collect();
        let plan = make_folds(&labels, 5, 11).unwrap();
        for y in 0..4 {
            let global = labels.iter().filter(|&&l| l == y).count() as f64 / 5.0;
            for f in &plan.folds {
                let c = f.iter().filter(|&&i| labels[i] == y).count() as f64;
                assert!((c - global).abs() <= 1.0);
            }
        }
    }

    #[test]
    fn rotation_roles() {
        let labels: Vec<usize> = (0..23).map(|i| i % 3).collect();
        let plan = make_folds(&labels, 5, 0).unwrap();
        let mut tested = Vec::new();
        for rot in plan.rotations() {
            assert_eq!(rot.validation, plan.folds[(rot.index + 1) % 5]);
            assert_eq!(rot.test, plan.folds[rot.index]);
            let train_folds = plan
                .folds
                .iter()
                .filter(|f| f.iter().all(|i| rot.train.contains(i)) && !f.is_empty())
                .count();
            assert_eq!(train_folds, 3);
            assert!(rot.train.iter().all(|i| !rot.test.contains(i) && !rot.validation.contains(i)));
            tested.extend(rot.test);
        }
        tested.sort_unstable();
        assert_eq!(tested, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn too_few_records() {
        assert!(make_folds(&[0, 1, 0], 5, 0).is_err());
        assert!(make_folds(&[0, 1, 0], 1, 0).is_err());
    }
}
