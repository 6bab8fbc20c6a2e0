//! Input fixtures shared by the benchmarks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` i.i.d. uniform draws; with `levels > 0`, rounded to that many distinct
/// values so that ties occur.
pub fn vector(n: usize, levels: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            if levels > 0 {
                (u * levels as f64).floor()
            } else {
                u
            }
        })
        .collect()
}

/// Rows of a correlated `n × d` sample built from a shared factor.
pub fn sample(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(n, d);
    for i in 0..n {
        let common: f64 = rng.random::<f64>() - 0.5;
        for k in 0..d {
            out[(i, k)] = common + rng.random::<f64>() - 0.5;
        }
    }
    out
}
