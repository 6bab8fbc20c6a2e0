//! Finite-sample deviation bounds for the Kendall's tau matrix and the
//! plug-in correlation estimator.
//!
//! Everything is driven by the deviation scale
//! `f(n, d, α) = sqrt(16/3 · d · ln(2d/α) / n)`, with `n` replaced by
//! `2⌊n/2⌋` for odd sample sizes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::linalg::SymEigen;
use crate::transform::{arcsine_transform, operator_norm, CorrelationMatrix};

/// First-order constant linking `‖Σ̂ - Σ‖₂` to `‖T̂ - T‖₂`.
pub const C1: f64 = PI;
/// Second-order constant, `3π²/16`.
pub const C2: f64 = 3.0 * PI * PI / 16.0;

fn check_common(n: usize, d: usize, alpha: f64) -> Result<()> {
    if n < 2 {
        return arg_err(format!("n must be >= 2, got {n}"));
    }
    if d < 1 {
        return arg_err("d must be >= 1");
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return arg_err(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

pub(crate) fn check_norm(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return arg_err(format!("{name} must be a finite non-negative number, got {v}"));
    }
    Ok(())
}

fn even_part(n: usize) -> f64 {
    (2 * (n / 2)) as f64
}

/// The deviation scale `f(n, d, α)` (natural logarithm).
pub fn f(n: usize, d: usize, alpha: f64) -> Result<f64> {
    check_common(n, d, alpha)?;
    let d = d as f64;
    Ok((16.0 / 3.0 * d * (2.0 * d / alpha).ln() / even_part(n)).sqrt())
}

/// Variant of [`f`] with the dimension inside the logarithm replaced by
/// `d̃ = 4d / ‖T‖₂`. Only meaningful in the population-side bound.
pub fn f_effective_rank(n: usize, d: usize, alpha: f64, t_norm: f64) -> Result<f64> {
    check_common(n, d, alpha)?;
    check_norm("||T||_2", t_norm)?;
    if t_norm == 0.0 {
        return arg_err("effective-rank variant needs ||T||_2 > 0");
    }
    let d_tilde = 4.0 * d as f64 / t_norm;
    let arg = (2.0 * d_tilde / alpha).ln();
    Ok((16.0 / 3.0 * d as f64 * arg.max(0.0) / even_part(n)).sqrt())
}

/// `max{√‖T‖₂ f, f²}`.
pub(crate) fn population_scale(t_norm: f64, f: f64) -> f64 {
    (t_norm.sqrt() * f).max(f * f)
}

/// `√(‖T̂‖₂ f² + f⁴/4)`.
pub(crate) fn data_driven_root(that_norm: f64, f: f64) -> f64 {
    (that_norm * f * f + 0.25 * f.powi(4)).sqrt()
}

/// Right-hand sides of the three `‖T̂ - T‖₂` bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauBounds {
    /// `max{√‖T‖₂ f, f²}`, the tightest, population side.
    pub population: f64,
    /// `√(‖T̂‖₂ f² + f⁴/4) + f²/2`, computable from data.
    pub data_driven: f64,
    /// `max{√‖T‖₂ f, f²} + f²`, guarantee for the data-driven bound.
    pub guarantee: f64,
}

pub fn t_deviation_bounds(t_norm: f64, that_norm: f64, n: usize, d: usize, alpha: f64) -> Result<TauBounds> {
    check_norm("||T||_2", t_norm)?;
    check_norm("||T_hat||_2", that_norm)?;
    let f = f(n, d, alpha)?;
    let f2 = f * f;
    let population = population_scale(t_norm, f);
    Ok(TauBounds {
        population,
        data_driven: data_driven_root(that_norm, f) + 0.5 * f2,
        guarantee: population + f2,
    })
}

/// Right-hand sides of the three `‖Σ̂ - Σ‖₂` bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaBounds {
    pub population: f64,
    pub data_driven: f64,
    pub guarantee: f64,
}

pub(crate) fn sigma_data_driven(that_norm: f64, f: f64) -> f64 {
    C1 * data_driven_root(that_norm, f) + (0.5 * C1 + C2) * f * f
}

pub(crate) fn sigma_population(t_norm: f64, f: f64) -> f64 {
    C1 * population_scale(t_norm, f) + C2 * f * f
}

pub(crate) fn sigma_guarantee(t_norm: f64, f: f64) -> f64 {
    C1 * population_scale(t_norm, f) + (C1 + C2) * f * f
}

pub fn sigma_deviation_bounds(t_norm: f64, that_norm: f64, n: usize, d: usize, alpha: f64) -> Result<SigmaBounds> {
    check_norm("||T||_2", t_norm)?;
    check_norm("||T_hat||_2", that_norm)?;
    let f = f(n, d, alpha)?;
    Ok(SigmaBounds {
        population: sigma_population(t_norm, f),
        data_driven: sigma_data_driven(that_norm, f),
        guarantee: sigma_guarantee(t_norm, f),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub lower: f64,
    pub t_norm: f64,
    pub upper: f64,
    pub ok: bool,
}

/// Evaluates `(2/π)‖Σ‖₂ ≤ ‖T‖₂ ≤ ‖Σ‖₂` with `T = (2/π) arcsin(Σ)`.
pub fn t_sigma_sandwich_check(sigma: &CorrelationMatrix) -> Result<SandwichReport> {
    let eig = SymEigen::new(sigma.values())?;
    let lmin = eig.min();
    if lmin < -1e-8 {
        return Err(Error::Precondition(format!(
            "sandwich inequality needs a PSD matrix (lambda_min = {lmin:e})"
        )));
    }
    let upper = eig.max_abs();
    let lower = 2.0 / PI * upper;
    let t_norm = operator_norm(arcsine_transform(sigma)?.values())?;
    let slack = 1e-10;
    Ok(SandwichReport {
        lower,
        t_norm,
        upper,
        ok: lower <= t_norm + slack && t_norm <= upper + slack,
    })
}

/// Matrix Bennett tail bound on `P(‖T̂ - T‖₂ ≥ t)`:
/// `2d · exp(-n‖T‖₂/(2d) · h(t/‖T‖₂))` with `h(u) = (1+u)ln(1+u) - u`.
/// Not clamped to 1.
pub fn matrix_bennett_tail(t: f64, n: usize, d: usize, t_norm: f64) -> Result<f64> {
    check_common(n, d, 0.5)?;
    check_norm("||T||_2", t_norm)?;
    check_norm("t", t)?;
    if t_norm == 0.0 {
        return arg_err("Bennett tail needs ||T||_2 > 0");
    }
    let u = t / t_norm;
    let h = (1.0 + u) * u.ln_1p() - u;
    let n = even_part(n);
    let d = d as f64;
    Ok(2.0 * d * (-n * t_norm / (2.0 * d) * h).exp())
}

/// Split matrix Bernstein tail bound:
/// `2d · max{exp(-3nt²/(16d‖T‖₂)), exp(-3nt/(16d))}`. Not clamped to 1.
pub fn split_bernstein_tail(t: f64, n: usize, d: usize, t_norm: f64) -> Result<f64> {
    check_common(n, d, 0.5)?;
    check_norm("||T||_2", t_norm)?;
    check_norm("t", t)?;
    let n = even_part(n);
    let d = d as f64;
    let linear = (-3.0 / 16.0 * n * t / d).exp();
    let quadratic = if t_norm > 0.0 {
        (-3.0 / 16.0 * n * t * t / (d * t_norm)).exp()
    } else {
        0.0
    };
    Ok(2.0 * d * quadratic.max(linear))
}

/// Evaluated bounds and regularisation parameters for one `(n, d, α)`.
/// Population-side quantities are present only when `‖T‖₂` is supplied and
/// the `μ` family only when `α < 1/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub d: usize,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub f_value: f64,
    pub effective_rank: bool,
    pub t_norm: Option<f64>,
    pub that_norm: Option<f64>,
    pub t_bound_population: Option<f64>,
    pub t_bound_data_driven: Option<f64>,
    pub t_bound_guarantee: Option<f64>,
    pub sigma_bound_population: Option<f64>,
    pub sigma_bound_data_driven: Option<f64>,
    pub sigma_bound_guarantee: Option<f64>,
    pub mu_elementary: Option<f64>,
    pub mu_bar_elementary: Option<f64>,
    pub mu_refined: Option<f64>,
    pub mu_bar_refined: Option<f64>,
    pub mu_prime: Option<f64>,
}

/// Builds a [`BoundReport`]. With `effective_rank` set, the population-side
/// `‖T̂ - T‖₂` bound uses [`f_effective_rank`]; everything else keeps `f`.
pub fn bound_report(
    n: usize,
    d: usize,
    alpha: f64,
    t_norm: Option<f64>,
    that_norm: Option<f64>,
    effective_rank: bool,
) -> Result<BoundReport> {
    let fv = f(n, d, alpha)?;
    let f2 = fv * fv;
    if let Some(v) = t_norm {
        check_norm("||T||_2", v)?;
    }
    if let Some(v) = that_norm {
        check_norm("||T_hat||_2", v)?;
    }
    if effective_rank && t_norm.is_none() {
        return arg_err("effective-rank variant needs ||T||_2");
    }
    let t_pop = match t_norm {
        Some(t) if effective_rank => Some(population_scale(t, f_effective_rank(n, d, alpha, t)?)),
        Some(t) => Some(population_scale(t, fv)),
        None => None,
    };
    let factor = alpha < 0.5;
    let with_that = |g: fn(f64, usize, usize, f64) -> Result<f64>| {
        that_norm.filter(|_| factor).map(|v| g(v, n, d, alpha)).transpose()
    };
    let with_t = |g: fn(f64, usize, usize, f64) -> Result<f64>| {
        t_norm.filter(|_| factor).map(|v| g(v, n, d, alpha)).transpose()
    };
    Ok(BoundReport {
        n,
        d,
        alpha,
        c1: C1,
        c2: C2,
        f_value: fv,
        effective_rank,
        t_norm,
        that_norm,
        t_bound_population: t_pop,
        t_bound_data_driven: that_norm.map(|v| data_driven_root(v, fv) + 0.5 * f2),
        t_bound_guarantee: t_norm.map(|t| population_scale(t, fv) + f2),
        sigma_bound_population: t_norm.map(|t| sigma_population(t, fv)),
        sigma_bound_data_driven: that_norm.map(|v| sigma_data_driven(v, fv)),
        sigma_bound_guarantee: t_norm.map(|t| sigma_guarantee(t, fv)),
        mu_elementary: with_that(crate::elementary::mu_elementary)?,
        mu_bar_elementary: with_t(crate::elementary::mu_bar_elementary)?,
        mu_refined: with_that(crate::refined::mu_refined)?,
        mu_bar_refined: with_t(crate::refined::mu_bar_refined)?,
        mu_prime: with_t(crate::refined::mu_prime)?,
    })
}
