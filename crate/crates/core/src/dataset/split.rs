//! Seeded 3:1:1 train/validation/test partitioning.

use crate::error::{CoreError, Result};
use crate::nn::{stream, RngState};

/// Fewest records that still give every partition at least one member.
pub const MIN_SPLIT_RECORDS: usize = 5;

/// Partition sizes for `n` records: `⌊3n/5⌋` train, `⌊n/5⌋` validation,
/// and the remainder test.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = 3 * n / 5;
    let val = n / 5;
    (train, val, n - train - val)
}

/// Seeded permutation of `0..n` carved into contiguous train/val/test
/// index lists. Same `(n, seed)` always yields the same partition.
pub fn split_indices(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    if n < MIN_SPLIT_RECORDS {
        return Err(CoreError::invalid(format!(
            "need at least {MIN_SPLIT_RECORDS} records to split 3:1:1, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = RngState::with_stream(seed, stream::SHUFFLE);
    rng.shuffle(&mut order);
    let (n_train, n_val, _) = split_sizes(n);
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok((order, val, test))
}

/// Move `items` into (train, val, test) per [`split_indices`].
pub fn split<T>(items: Vec<T>, seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (ti, vi, si) = split_indices(items.len(), seed)?;
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let mut take = |ids: &[usize]| -> Vec<T> {
        ids.iter().map(|&i| slots[i].take().expect("index used twice")).collect()
    };
    Ok((take(&ti), take(&vi), take(&si)))
}
