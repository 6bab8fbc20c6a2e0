//! Oracle-inequality and diagonal-deviation right-hand sides for the refined
//! estimator.

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::factor::FactorDecomposition;

/// Incoherence ceiling on `γ_r` below which the oracle inequality applies.
pub const GAMMA_CEILING: f64 = 1.0 / 9.0;

/// Absolute slack on the `γ_r ≤ 1/9` test. Eigenvectors with exactly
/// constant-diagonal projectors hit `1/9` on the nose in exact arithmetic;
/// without slack, rounding in the last bit would flip the outcome.
pub const GAMMA_SLACK: f64 = 1e-12;

/// `γ_r = ‖U*_r U*_rᵀ‖_∞`.
pub fn gamma_r(truth: &FactorDecomposition, r: usize) -> Result<f64> {
    truth.gamma_r(r)
}

/// `R = max{r ≤ r* : γ_r ≤ 1/9}`; `R = 0` is always admissible.
pub fn incoherent_rank(truth: &FactorDecomposition) -> usize {
    (0..=truth.rank())
        .filter(|&r| truth.gamma_r(r).expect("in range") <= GAMMA_CEILING + GAMMA_SLACK)
        .max()
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleBound {
    /// `R`.
    pub r_cap: usize,
    pub bound: f64,
    /// Smallest minimiser over `r ≤ R`.
    pub argmin_r: usize,
}

fn minimise(r_cap: usize, term: impl Fn(usize) -> f64) -> (f64, usize) {
    (0..=r_cap).fold((f64::INFINITY, 0), |(best, arg), r| {
        let v = term(r);
        if v < best {
            (v, r)
        } else {
            (best, arg)
        }
    })
}

/// `min_{r ≤ R} { Σ_{j>r} λ_j² + 8 r μ̄² }`, the bound on `‖Σ̃ - Σ‖_F²`.
pub fn oracle_rhs(truth: &FactorDecomposition, mu_bar: f64) -> OracleBound {
    let r_cap = incoherent_rank(truth);
    let (bound, argmin_r) = minimise(r_cap, |r| {
        truth.tail_power_sum(r, 2) + 8.0 * r as f64 * mu_bar * mu_bar
    });
    OracleBound { r_cap, bound, argmin_r }
}

/// `min_{r ≤ R} { 3/(2μ′) Σ_{j>r} λ_j² + 3/2 Σ_{j>r} λ_j + 19 r μ̄ }`, the bound
/// on `‖P_Ω(Θ̃ - Θ*)‖₁`.
pub fn diagonal_bound_rhs(truth: &FactorDecomposition, mu_prime: f64, mu_bar: f64) -> Result<f64> {
    if !(mu_prime > 0.0) {
        return arg_err(format!("mu' must be positive, got {mu_prime}"));
    }
    let r_cap = incoherent_rank(truth);
    let (bound, _) = minimise(r_cap, |r| {
        1.5 / mu_prime * truth.tail_power_sum(r, 2) + 1.5 * truth.tail_power_sum(r, 1) + 19.0 * r as f64 * mu_bar
    });
    Ok(bound)
}
