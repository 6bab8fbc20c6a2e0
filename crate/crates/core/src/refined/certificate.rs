//! Numerical construction of the primal-dual certificate and random checks of
//! the projector contraction inequalities it relies on.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::linalg::{self, l1_entry, max_abs_entry, spectral_norm};

use super::projectors::{off_diagonal, p_omega, p_tangent, p_tangent_perp, TangentSpace};

const CHECK_TOL: f64 = 1e-8;
const STEP_TOL: f64 = 1e-12;

/// Smallest `μ` for which the certificate is guaranteed to exist:
/// `(1/c - γ/(1-3γ))⁻¹ (2√γ/(1-3γ) + 1) ‖E‖₂`.
pub fn mu_threshold(gamma: f64, c: f64, e_norm: f64) -> Result<f64> {
    check_gamma(gamma, c)?;
    let q = 1.0 - 3.0 * gamma;
    Ok((2.0 * gamma.sqrt() / q + 1.0) * e_norm / (1.0 / c - gamma / q))
}

fn check_gamma(gamma: f64, c: f64) -> Result<()> {
    if !(c >= 1.0 && c.is_finite()) {
        return arg_err(format!("c must be at least 1, got {c}"));
    }
    if !(gamma < 1.0 / (c + 3.0)) {
        return Err(Error::Precondition(format!(
            "gamma too large: {gamma} is not below 1/(c+3) = {}",
            1.0 / (c + 3.0)
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub gamma: f64,
    pub mu: f64,
    pub c: f64,
    /// Threshold on `μ` above which all checks are guaranteed.
    pub mu_threshold: f64,
    pub iterations: usize,
    /// `‖P_T⊥ Φ‖_F`.
    pub tangent_residual: f64,
    /// `‖P_T(E - Φ_o) - μ ŪŪᵀ‖_F`.
    pub equality_residual: f64,
    /// `‖P_T⊥(E - Φ_o)‖₂`, to be compared with `μ/c`.
    pub orthogonal_norm: f64,
    /// `‖Φ‖₂`, to be compared with `(2/c + 1)μ`.
    pub phi_norm: f64,
    pub in_tangent: bool,
    pub equality_ok: bool,
    pub orthogonal_ok: bool,
    pub phi_norm_ok: bool,
}

impl CertificateReport {
    pub fn all_pass(&self) -> bool {
        self.in_tangent && self.equality_ok && self.orthogonal_ok && self.phi_norm_ok
    }
}

/// Solves `Φ = P_T P_Ω Φ + P_T E - μ ŪŪᵀ` by fixed-point iteration, which
/// contracts in the max-entry norm at rate `3γ`, and verifies the certificate
/// conditions. A `μ` below the threshold is allowed; the report then records
/// which checks fail.
pub fn construct_certificate(
    ts: &TangentSpace,
    e: &DMatrix<f64>,
    mu: f64,
    c: f64,
) -> Result<(DMatrix<f64>, CertificateReport)> {
    let gamma = ts.gamma();
    check_gamma(gamma, c)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return arg_err(format!("mu must be positive, got {mu}"));
    }
    linalg::check_symmetric(e, 1e-12 * max_abs_entry(e).max(1.0))?;
    let p = ts.projector();
    let rhs = p_tangent(ts, e)? - p * mu;

    let rate = 3.0 * gamma;
    let cap = (10.0 / (1.0 - rate) * 16.0).ceil() as usize + 100;
    let mut phi = rhs.clone();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let next = p_tangent(ts, &p_omega(&phi))? + &rhs;
        let step = max_abs_entry(&(&next - &phi));
        phi = next;
        if !step.is_finite() {
            return Err(Error::Numerical(format!("certificate iteration diverged (gamma = {gamma})")));
        }
        if step < STEP_TOL * max_abs_entry(&phi).max(1.0) {
            break;
        }
        if iterations >= cap {
            return Err(Error::Numerical(format!(
                "certificate iteration did not contract in {cap} steps (gamma = {gamma}, last step {step:e})"
            )));
        }
    }

    let dual = e - off_diagonal(&phi);
    let tangent_residual = p_tangent_perp(ts, &phi)?.norm();
    let equality_residual = (p_tangent(ts, &dual)? - p * mu).norm();
    let orthogonal_norm = spectral_norm(&p_tangent_perp(ts, &dual)?);
    let phi_norm = spectral_norm(&phi);
    let report = CertificateReport {
        gamma,
        mu,
        c,
        mu_threshold: mu_threshold(gamma, c, spectral_norm(e))?,
        iterations,
        tangent_residual,
        equality_residual,
        orthogonal_norm,
        phi_norm,
        in_tangent: tangent_residual <= CHECK_TOL,
        equality_ok: equality_residual <= CHECK_TOL,
        orthogonal_ok: orthogonal_norm <= mu / c + CHECK_TOL,
        phi_norm_ok: phi_norm <= (2.0 / c + 1.0) * mu + CHECK_TOL,
    };
    Ok((phi, report))
}

/// Largest observed `lhs / rhs` ratio for each inequality over all trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub trials: usize,
    pub gamma: f64,
    /// `‖P_T D‖_∞ ≤ 3γ ‖D‖_∞` for diagonal `D`.
    pub diag_inf: f64,
    /// `‖P_T M‖_∞ ≤ 2√γ ‖M‖₂`.
    pub inf_from_spectral: f64,
    /// `‖P_Ω P_T M‖₁ ≤ 3γ ‖M‖₁`.
    pub diag_l1: f64,
    /// `‖ACB‖_∞ ≤ √(‖AAᵀ‖_∞ ‖BᵀB‖_∞) ‖C‖₂`.
    pub sandwich_inf: f64,
    pub violations: usize,
}

impl ContractionReport {
    pub fn all_pass(&self) -> bool {
        self.violations == 0
    }
}

const SLACK: f64 = 1e-10;

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Checks the contraction inequalities on `trials` random Gaussian inputs.
pub fn contraction_check(ts: &TangentSpace, trials: usize, seed: u64) -> Result<ContractionReport> {
    if trials == 0 {
        return arg_err("trials must be at least 1");
    }
    let d = ts.dim();
    let gamma = ts.gamma();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = |rows: usize, cols: usize| DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut report = ContractionReport {
        trials,
        gamma,
        diag_inf: 0.0,
        inf_from_spectral: 0.0,
        diag_l1: 0.0,
        sandwich_inf: 0.0,
        violations: 0,
    };
    let record = |slot: &mut f64, violations: &mut usize, lhs: f64, rhs: f64| {
        *slot = slot.max(ratio(lhs, rhs));
        if lhs > rhs + SLACK {
            *violations += 1;
        }
    };
    for _ in 0..trials {
        let dg = p_omega(&gauss(d, d));
        let m = gauss(d, d);
        let a = gauss(d, d);
        let b = gauss(d, d);
        let cm = gauss(d, d);

        let lhs = max_abs_entry(&p_tangent(ts, &dg)?);
        record(&mut report.diag_inf, &mut report.violations, lhs, 3.0 * gamma * max_abs_entry(&dg));

        let pm = p_tangent(ts, &m)?;
        let lhs = max_abs_entry(&pm);
        record(&mut report.inf_from_spectral, &mut report.violations, lhs, 2.0 * gamma.sqrt() * spectral_norm(&m));

        let lhs = l1_entry(&p_omega(&pm));
        record(&mut report.diag_l1, &mut report.violations, lhs, 3.0 * gamma * l1_entry(&m));

        let lhs = max_abs_entry(&(&a * &cm * &b));
        let rhs = (max_abs_entry(&(&a * a.transpose())) * max_abs_entry(&(b.transpose() * &b))).sqrt()
            * spectral_norm(&cm);
        record(&mut report.sandwich_inf, &mut report.violations, lhs, rhs);
    }
    Ok(report)
}
