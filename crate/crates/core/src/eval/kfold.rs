//! K-fold index generation, plain and stratified.
//!
//! Test sets partition the index range; fold sizes differ by at most one.
//! The stratified variant applies the same chunking per class, so per-fold
//! class counts also differ by at most one.

use rand::seq::SliceRandom;

use crate::data::StageLabel;
use crate::error::{Error, Result};
use crate::rng::{derive, rng_from, stream};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(Error::InvalidFolds { k, n });
    }
    Ok(())
}

/// Split `pool` into k chunks whose sizes differ by at most one; the
/// first `pool.len() % k` chunks carry the extra element.
fn chunk_sizes(len: usize, k: usize) -> impl Iterator<Item = usize> {
    let base = len / k;
    let extra = len % k;
    (0..k).map(move |f| base + usize::from(f < extra))
}

fn assign_chunks(pool: &[usize], k: usize, folds: &mut [Vec<usize>]) {
    let mut cursor = 0;
    for (f, size) in chunk_sizes(pool.len(), k).enumerate() {
        folds[f].extend_from_slice(&pool[cursor..cursor + size]);
        cursor += size;
    }
}

fn folds_from_test_sets(n: usize, mut test_sets: Vec<Vec<usize>>) -> Vec<Fold> {
    let mut fold_of = vec![0usize; n];
    for (f, test) in test_sets.iter().enumerate() {
        for &i in test {
            fold_of[i] = f;
        }
    }
    test_sets
        .iter_mut()
        .for_each(|t| t.sort_unstable());
    test_sets
        .into_iter()
        .enumerate()
        .map(|(f, test)| Fold {
            train: (0..n).filter(|&i| fold_of[i] != f).collect(),
            test,
        })
        .collect()
}

/// Plain k-fold over `0..n`. With `shuffle`, index order is randomized
/// from `seed` before chunking; otherwise chunks are contiguous.
pub fn kfold(n: usize, k: usize, shuffle: bool, seed: u64) -> Result<Vec<Fold>> {
    check_k(k, n)?;
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(&mut rng_from(derive(seed, stream::KFOLD)));
    }
    let mut test_sets = vec![Vec::new(); k];
    assign_chunks(&order, k, &mut test_sets);
    Ok(folds_from_test_sets(n, test_sets))
}

/// Stratified k-fold: each class is chunked independently, so every fold
/// holds its share of both classes. Requires each class to have at least
/// k members.
pub fn stratified_kfold(
    y: &[StageLabel],
    k: usize,
    shuffle: bool,
    seed: u64,
) -> Result<Vec<Fold>> {
    check_k(k, y.len())?;
    let mut rng = rng_from(derive(seed, stream::KFOLD));
    let mut test_sets = vec![Vec::new(); k];
    let mut position = 0usize;
    for label in StageLabel::ALL {
        let mut pool: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label).collect();
        if pool.len() < k {
            return Err(Error::StratificationImpossible(format!(
                "class {label:?} has {} samples, fewer than k={k}",
                pool.len()
            )));
        }
        if shuffle {
            pool.shuffle(&mut rng);
        }
        // Stripe class members across folds at a global position counter:
        // each class spreads evenly AND fold totals stay within one, even
        // when both classes leave a remainder.
        for idx in pool {
            test_sets[position % k].push(idx);
            position += 1;
        }
    }
    Ok(folds_from_test_sets(y.len(), test_sets))
}
