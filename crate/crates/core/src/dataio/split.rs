use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let all = [train, validation, test];
        if all.iter().any(|r| !(r.is_finite() && *r >= 0.0)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::usage(format!(
                "split ratios must be non-negative and sum to 1, got {train}, {validation}, {test}"
            )));
        }
        Ok(Self {
            train,
            validation,
            test,
        })
    }
}

/// Partition time-ordered items into train, validation and test sets.
///
/// The test set is the trailing time-contiguous block and does not depend on
/// the seed. The remainder is shuffled with `seed` and cut into train and
/// validation.
pub fn split_dataset<T: Clone>(items: &[T], ratios: SplitRatios, seed: u64) -> (Vec<T>, Vec<T>, Vec<T>) {
    let n = items.len();
    let n_test = ((n as f64) * ratios.test).round() as usize;
    let n_val = (((n as f64) * ratios.validation).round() as usize).min(n - n_test);
    let (rest, test) = items.split_at(n - n_test);

    let mut order: Vec<usize> = (0..rest.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (val_idx, train_idx) = order.split_at(n_val);
    let pick = |idx: &[usize]| idx.iter().map(|&i| rest[i].clone()).collect::<Vec<_>>();
    (pick(train_idx), pick(val_idx), test.to_vec())
}
