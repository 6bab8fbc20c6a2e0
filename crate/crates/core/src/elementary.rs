//! Closed-form spectral estimators for the elementary factor model
//! `Σ = Θ* + σ² I`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bounds::{self, check_norm, C1, C2};
use crate::error::{arg_err, Error, Result};
use crate::factor::FactorDecomposition;
use crate::linalg::{self, SymEigen};
use crate::transform::{arcsine_of, operator_norm};

pub(crate) fn check_factor_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return arg_err(format!("factor-model results need alpha in (0, 1/2), got {alpha}"));
    }
    Ok(())
}

/// Data-driven threshold `μ = 2{C₁√(‖T̂‖₂f² + f⁴/4) + (C₁/2 + C₂)f²}`.
pub fn mu_elementary(that_norm: f64, n: usize, d: usize, alpha: f64) -> Result<f64> {
    check_factor_alpha(alpha)?;
    check_norm("||T_hat||_2", that_norm)?;
    let f = bounds::f(n, d, alpha)?;
    Ok(2.0 * bounds::sigma_data_driven(that_norm, f))
}

/// Population counterpart `μ̄ = 2{C₁√‖T‖₂ f + (C₁ + C₂)f²}`.
pub fn mu_bar_elementary(t_norm: f64, n: usize, d: usize, alpha: f64) -> Result<f64> {
    check_factor_alpha(alpha)?;
    check_norm("||T||_2", t_norm)?;
    let f = bounds::f(n, d, alpha)?;
    Ok(2.0 * (C1 * t_norm.sqrt() * f + (C1 + C2) * f * f))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementaryEstimate {
    pub r_hat: usize,
    pub sigma2_hat: f64,
    #[serde(with = "crate::serde_matrix::rows")]
    pub theta_hat: DMatrix<f64>,
    pub mu_used: f64,
    /// Eigenvalues of the input, descending.
    #[serde(with = "crate::serde_matrix::vector")]
    pub eigenvalues: DVector<f64>,
    /// Set when `σ̂²` came out negative, which only happens on pathological
    /// inputs. The value is returned unclamped.
    pub negative_sigma2: bool,
}

/// Rank, noise level and low-rank component from the spectrum of `sigma_hat`:
///
/// * `r̂ = #{k : λ̂_k - λ̂_d ≥ μ}`
/// * `σ̂² = mean of the d - r̂ smallest eigenvalues`
/// * `Θ̂ = Σ_{k ≤ r̂} (λ̂_k - σ̂²) û_k û_kᵀ`
pub fn estimate_elementary(sigma_hat: &DMatrix<f64>, mu: f64) -> Result<ElementaryEstimate> {
    if !(mu > 0.0 && mu.is_finite()) {
        return arg_err(format!("mu must be positive, got {mu}"));
    }
    linalg::check_symmetric(sigma_hat, 1e-12 * linalg::max_abs_entry(sigma_hat).max(1.0))?;
    let d = sigma_hat.nrows();
    if d == 0 {
        return arg_err("empty matrix");
    }
    let eig = SymEigen::new(&linalg::symmetrize(sigma_hat))?;
    let lam = &eig.values;
    let smallest = lam[d - 1];
    let r_hat = lam.iter().filter(|l| *l - smallest >= mu).count();
    if r_hat == d {
        return Err(Error::Degenerate("no noise eigenvalues left (r_hat = d)".into()));
    }
    let sigma2_hat = lam.iter().skip(r_hat).sum::<f64>() / (d - r_hat) as f64;
    let mut theta_hat = DMatrix::zeros(d, d);
    for k in 0..r_hat {
        let u = eig.vectors.column(k);
        theta_hat += (lam[k] - sigma2_hat) * u * u.transpose();
    }
    Ok(ElementaryEstimate {
        r_hat,
        sigma2_hat,
        theta_hat: linalg::symmetrize(&theta_hat),
        mu_used: mu,
        eigenvalues: eig.values.clone(),
        negative_sigma2: sigma2_hat < 0.0,
    })
}

/// Which hypotheses of the elementary recovery guarantee hold for a given
/// truth, and the guarantee they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementaryConditions {
    pub r: usize,
    pub d: usize,
    pub sigma2: f64,
    pub mu_bar: f64,
    pub lambda_r: Option<f64>,
    pub t_norm: f64,
    pub f_squared: f64,
    /// `r < d`.
    pub rank_below_dim: bool,
    /// `λ_r(Θ*) ≥ 2μ̄` (vacuous when `r = 0`).
    pub eigen_gap: bool,
    /// `‖T‖₂ ≥ f²`.
    pub sample_size: bool,
    pub all_hold: bool,
    /// Guarantee `‖Θ̂ - Θ*‖_F² ≤ 2rμ̄²`.
    pub frobenius_sq_bound: f64,
    /// Guarantee `|σ̂² - σ²| ≤ μ̄/2`.
    pub sigma2_bound: f64,
}

pub fn check_elementary_conditions(
    truth: &FactorDecomposition,
    mu_bar: f64,
    n: usize,
    d: usize,
    alpha: f64,
) -> Result<ElementaryConditions> {
    check_factor_alpha(alpha)?;
    if truth.dim() != d {
        return Err(Error::Dimension(format!("truth has d = {}, expected {d}", truth.dim())));
    }
    let sigma2 = truth
        .elementary_sigma2()
        .ok_or_else(|| Error::ModelMismatch("V* is not a multiple of the identity".into()))?;
    let f = bounds::f(n, d, alpha)?;
    let t_norm = operator_norm(arcsine_of(truth.sigma().values())?.values())?;
    let r = truth.rank();
    let lambda_r = r.checked_sub(1).map(|k| truth.eigenvalues()[k]);
    let rank_below_dim = r < d;
    let eigen_gap = lambda_r.is_none_or(|l| l >= 2.0 * mu_bar);
    let sample_size = t_norm >= f * f;
    Ok(ElementaryConditions {
        r,
        d,
        sigma2,
        mu_bar,
        lambda_r,
        t_norm,
        f_squared: f * f,
        rank_below_dim,
        eigen_gap,
        sample_size,
        all_hold: rank_below_dim && eigen_gap && sample_size,
        frobenius_sq_bound: 2.0 * r as f64 * mu_bar * mu_bar,
        sigma2_bound: mu_bar / 2.0,
    })
}

/// Outcome of one elementary estimate against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementaryEvent {
    pub rank_ok: bool,
    pub frobenius_sq: f64,
    pub frobenius_ok: bool,
    pub sigma2_error: f64,
    pub sigma2_ok: bool,
    pub joint: bool,
}

pub fn elementary_event(est: &ElementaryEstimate, truth: &FactorDecomposition, mu_bar: f64) -> Result<ElementaryEvent> {
    let sigma2 = truth
        .elementary_sigma2()
        .ok_or_else(|| Error::ModelMismatch("V* is not a multiple of the identity".into()))?;
    let r = truth.rank();
    let frobenius_sq = (&est.theta_hat - truth.theta_star()).norm_squared();
    let sigma2_error = (est.sigma2_hat - sigma2).abs();
    let rank_ok = est.r_hat == r;
    let frobenius_ok = frobenius_sq <= 2.0 * r as f64 * mu_bar * mu_bar;
    let sigma2_ok = sigma2_error <= mu_bar / 2.0;
    Ok(ElementaryEvent {
        rank_ok,
        frobenius_sq,
        frobenius_ok,
        sigma2_error,
        sigma2_ok,
        joint: rank_ok && frobenius_ok && sigma2_ok,
    })
}
