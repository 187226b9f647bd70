//! k-fold plans: a seeded shuffle cut into `k` contiguous blocks.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold index of every pattern.
    pub assignments: Vec<usize>,
    /// Pattern indices of each fold, in shuffled order.
    pub folds: Vec<Vec<usize>>,
}

/// Index sets of one rotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rotation {
    pub index: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Folds differ in size by at most one; the first `n mod k` are larger.
pub fn make_folds(n_patterns: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 3 {
        return Err(Error::invalid(format!("k-fold needs k >= 3, got {k}")));
    }
    if k > n_patterns {
        return Err(Error::invalid(format!("k = {k} exceeds the {n_patterns} available patterns")));
    }
    let mut order: Vec<usize> = (0..n_patterns).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n_patterns / k;
    let extra = n_patterns % k;
    let mut folds = Vec::with_capacity(k);
    let mut assignments = vec![0; n_patterns];
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let fold = order[start..start + len].to_vec();
        for &p in &fold {
            assignments[p] = f;
        }
        folds.push(fold);
        start += len;
    }
    Ok(FoldPlan { k, assignments, folds })
}

impl FoldPlan {
    /// Rotation `j`: fold `j` tests, fold `j+1 mod k` validates, the rest train.
    pub fn rotation(&self, j: usize) -> Result<Rotation> {
        if j >= self.k {
            return Err(Error::invalid(format!("rotation {j} out of range for k = {}", self.k)));
        }
        let v = (j + 1) % self.k;
        let train = (0..self.k)
            .filter(|&f| f != j && f != v)
            .flat_map(|f| self.folds[f].iter().copied())
            .collect();
        Ok(Rotation {
            index: j,
            train,
            val: self.folds[v].clone(),
            test: self.folds[j].clone(),
        })
    }

    pub fn rotations(&self) -> impl Iterator<Item = Rotation> + '_ {
        (0..self.k).map(|j| self.rotation(j).expect("index below k"))
    }
}

/// Seeded shuffle split into (train, validation) index sets; the
/// validation part has `round(fraction · n)` patterns.
pub fn shuffled_split(n_patterns: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::invalid(format!("validation fraction must be in [0, 1), got {val_fraction}")));
    }
    let n_val = (val_fraction * n_patterns as f64).round() as usize;
    if n_patterns == 0 || n_val >= n_patterns || (val_fraction > 0.0 && n_val == 0) {
        return Err(Error::invalid(format!(
            "cannot split {n_patterns} patterns with validation fraction {val_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..n_patterns).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let val = order.split_off(n_patterns - n_val);
    Ok((order, val))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_per_fold() {
        let p = make_folds(10, 10, 1).unwrap();
        assert!(p.folds.iter().all(|f| f.len() == 1));
    }

    #[test]
    fn balanced_remainder() {
        let p = make_folds(103, 10, 1).unwrap();
        let sizes: Vec<usize> = p.folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![11, 11, 11, 10, 10, 10, 10, 10, 10, 10]);
    }

    #[test]
    fn split_sizes() {
        let (t, v) = shuffled_split(10, 0.2, 3).unwrap();
        assert_eq!((t.len(), v.len()), (8, 2));
        let (t, v) = shuffled_split(10, 0.0, 3).unwrap();
        assert_eq!((t.len(), v.len()), (10, 0));
        assert!(shuffled_split(3, 0.1, 0).is_err());
        assert!(shuffled_split(3, 1.0, 0).is_err());
    }

    #[test]
    fn bad_k() {
        assert!(make_folds(5, 6, 0).is_err());
        assert!(make_folds(5, 2, 0).is_err());
    }
}
