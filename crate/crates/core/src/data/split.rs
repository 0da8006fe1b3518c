use rand::seq::SliceRandom;

use super::LabeledDataset;
use crate::error::{invalid, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: LabeledDataset,
    pub dev: LabeledDataset,
    pub test: LabeledDataset,
}

/// Seeded shuffle, then contiguous train/dev/test cut.
///
/// Dev and test sizes are `floor(n * fraction)`; whatever is left goes to train.
pub fn split(ds: &LabeledDataset, fractions: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (train, dev, test) = fractions;
    if [train, dev, test].iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(invalid("split fractions must be non-negative"));
    }
    if (train + dev + test - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("split fractions sum to {}", train + dev + test)));
    }
    let n = ds.len();
    let take = |f: f64| ((n as f64 * f) + 1e-9).floor() as usize;
    let n_dev = take(dev);
    let n_test = take(test).min(n - n_dev);
    let n_train = n - n_dev - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    Ok(Split {
        train: ds.select(&order[..n_train]),
        dev: ds.select(&order[n_train..n_train + n_dev]),
        test: ds.select(&order[n_train + n_dev..]),
    })
}
