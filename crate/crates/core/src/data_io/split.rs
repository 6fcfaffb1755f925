use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::quantized_model::ObservedResponses;

/// Randomly moves `round(fraction · |Ω_obs|)` entries into a test set.
/// Both halves keep the original entry order.
pub fn holdout_split(
    responses: &ObservedResponses,
    fraction: f64,
    seed: u64,
) -> Result<(ObservedResponses, ObservedResponses)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "hold-out fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = responses.len();
    let test_len = (fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_test = vec![false; n];
    for &k in &order[..test_len] {
        in_test[k] = true;
    }
    let (mut train, mut test) = (
        Vec::with_capacity(n - test_len),
        Vec::with_capacity(test_len),
    );
    for (r, &t) in responses.entries().iter().zip(&in_test) {
        if t {
            test.push(*r);
        } else {
            train.push(*r);
        }
    }
    Ok((responses.with_entries(train), responses.with_entries(test)))
}

/// Fold index of each of `n` entries; fold sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &k) in order.iter().enumerate() {
        fold[k] = pos % folds.max(1);
    }
    fold
}
