//! k-fold cross-validated accuracy.
//!
//! The fold spread is the population standard deviation (divisor k). Folds
//! are plain shuffled splits unless `stratified` is set.

use alloc::vec;
use alloc::vec::Vec;

use crate::forest::{self, ForestConfig};
use crate::rng::{self, tag};
use crate::tabular::{FeatureTable, Label, Mask};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvConfig {
    pub k: usize,
    pub stratified: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k: 3,
            stratified: false,
        }
    }
}

impl CvConfig {
    pub fn folds(k: usize) -> Self {
        Self {
            k,
            stratified: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl CvResult {
    pub fn from_folds(fold_accuracies: Vec<f64>) -> Self {
        let k = fold_accuracies.len() as f64;
        let mean = fold_accuracies.iter().sum::<f64>() / k;
        let var = fold_accuracies
            .iter()
            .map(|a| (a - mean) * (a - mean))
            .sum::<f64>()
            / k;
        Self {
            fold_accuracies,
            mean,
            std: libm::sqrt(var),
        }
    }
}

/// Shuffles `0..n` and cuts it into `k` disjoint folds whose sizes differ by
/// at most one (the first `n % k` folds get the extra row). Each fold is
/// returned sorted.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    check_folds(n, k)?;
    let mut perm: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut rng::stream(seed, &[tag::FOLDS]), &mut perm);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = perm[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

/// Label-stratified folds: each class is shuffled and the classes are dealt
/// round-robin, so fold sizes still differ by at most one.
pub fn stratified_kfold_indices(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    check_folds(n, k)?;
    let mut rng = rng::stream(seed, &[tag::FOLDS]);
    let mut order = Vec::with_capacity(n);
    for class in [Label::Nt, Label::Asd] {
        let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        rng::shuffle(&mut rng, &mut idx);
        order.extend(idx);
    }
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

fn check_folds(n: usize, k: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(Error::TooFewRows { n, k });
    }
    Ok(())
}

/// Fraction of positions where `pred` equals `truth`.
pub fn accuracy(pred: &[Label], truth: &[Label]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Cross-validated accuracy of a forest on the masked table.
///
/// Fold assignment derives from `seed`; the forest for fold `i` is seeded
/// from `(seed, i)`. Training rows keep their table order.
pub fn cv_accuracy(
    table: &FeatureTable,
    mask: &Mask,
    forest_config: &ForestConfig,
    cv: &CvConfig,
    seed: u64,
) -> Result<CvResult> {
    let masked = table.apply_mask(mask)?;
    let n = masked.n();
    let folds = if cv.stratified {
        stratified_kfold_indices(masked.labels(), cv.k, seed)?
    } else {
        kfold_indices(n, cv.k, seed)?
    };
    let x = masked.features();
    let y = masked.labels();
    let accs = par::map_indices(folds.len(), |f| {
        let test = &folds[f];
        let mut in_test = vec![false; n];
        for &i in test {
            in_test[i] = true;
        }
        let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
        let train_y: Vec<Label> = train.iter().map(|&i| y[i]).collect();
        let fcfg = forest_config.with_seed(rng::derive(seed, &[tag::FOLD, f as u64]));
        let model = forest::fit(&x.select_rows(&train), &train_y, &fcfg)?;
        let pred = model.predict(&x.select_rows(test))?;
        let truth: Vec<Label> = test.iter().map(|&i| y[i]).collect();
        accuracy(&pred, &truth)
    });
    let accs = accs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CvResult::from_folds(accs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn six_into_three() {
        let folds = kfold_indices(6, 3, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 2));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn remainder_goes_to_first_folds() {
        let sizes: Vec<usize> = kfold_indices(7, 3, 1)
            .unwrap()
            .iter()
            .map(Vec::len)
            .collect();
        assert_eq!(sizes, vec![3, 2, 2]);
    }

    #[test]
    fn folds_are_deterministic() {
        assert_eq!(
            kfold_indices(50, 3, 9).unwrap(),
            kfold_indices(50, 3, 9).unwrap()
        );
        assert_ne!(
            kfold_indices(50, 3, 9).unwrap(),
            kfold_indices(50, 3, 10).unwrap()
        );
    }

    #[test]
    fn fold_errors() {
        assert_eq!(
            kfold_indices(2, 3, 0),
            Err(Error::TooFewRows { n: 2, k: 3 })
        );
        assert!(kfold_indices(5, 1, 0).is_err());
    }

    #[test]
    fn exhaustive_disjoint_cover() {
        for n in 2..=200 {
            for k in 2..=n.min(200) {
                let folds = kfold_indices(n, k, (n * 1000 + k) as u64).unwrap();
                let mut seen = vec![false; n];
                let (mut lo, mut hi) = (usize::MAX, 0);
                for f in &folds {
                    lo = lo.min(f.len());
                    hi = hi.max(f.len());
                    for &i in f {
                        assert!(!seen[i]);
                        seen[i] = true;
                    }
                }
                assert!(seen.iter().all(|&s| s), "n={n} k={k}");
                assert!(hi - lo <= 1);
            }
        }
    }

    #[test]
    fn stratified_balances_classes() {
        let labels: Vec<Label> = (0..30)
            .map(|i| Label::from_index((i < 12) as usize))
            .collect();
        let folds = stratified_kfold_indices(&labels, 3, 4).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 10);
            assert_eq!(f.iter().filter(|&&i| labels[i] == Label::Asd).count(), 4);
        }
    }

    #[test]
    fn accuracy_examples() {
        let a = [Label::Asd, Label::Nt, Label::Asd, Label::Nt];
        let b = [Label::Nt, Label::Asd, Label::Nt, Label::Asd];
        assert_eq!(accuracy(&a, &a).unwrap(), 1.0);
        assert_eq!(accuracy(&a, &b).unwrap(), 0.0);
        let c = [Label::Asd, Label::Nt, Label::Asd, Label::Asd];
        assert_eq!(accuracy(&c, &a).unwrap(), 0.75);
        assert!(accuracy(&a[..3], &a).is_err());
    }

    #[test]
    fn population_std() {
        let r = CvResult::from_folds(vec![0.5, 0.7, 0.9]);
        assert!((r.mean - 0.7).abs() < 1e-15);
        assert!((r.std - libm::sqrt(0.08 / 3.0)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn complement_accuracy_sums_to_one(bits in proptest::collection::vec(any::<(bool, bool)>(), 1..64)) {
            let p: Vec<Label> = bits.iter().map(|b| Label::from_index(b.0 as usize)).collect();
            let t: Vec<Label> = bits.iter().map(|b| Label::from_index(b.1 as usize)).collect();
            let flipped: Vec<Label> = p.iter().map(|l| l.flip()).collect();
            let s = accuracy(&p, &t).unwrap() + accuracy(&flipped, &t).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
