//! Nuclear-norm penalised least squares on the off-diagonal entries:
//!
//! ```text
//! minimise  ½‖Θ_o - Σ̂_o‖_F² + μ‖Θ‖_*
//! ```
//!
//! solved with a monotone accelerated proximal gradient method. The smooth
//! part has a 1-Lipschitz gradient `Θ ↦ Θ_o - Σ̂_o`, so the step size is 1.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::projectors::{off_diagonal, p_tangent, p_tangent_perp, TangentSpace};
use crate::error::{arg_err, Error, Result};
use crate::linalg::{self, SymEigen};
use crate::transform::{CorrelationMatrix, Provenance};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// A symmetric matrix kept together with its nonzero spectral factors.
#[derive(Debug, Clone)]
pub(crate) struct Factored {
    pub matrix: DMatrix<f64>,
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl Factored {
    fn nuclear_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }
}

pub(crate) fn svt_factored(m: &DMatrix<f64>, mu: f64) -> Result<Factored> {
    let eig = SymEigen::new(m)?;
    let keep: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k].abs() > mu).collect();
    let values = DVector::from_iterator(
        keep.len(),
        keep.iter().map(|&k| {
            let l = eig.values[k];
            l.signum() * (l.abs() - mu)
        }),
    );
    let vectors = eig.vectors.select_columns(&keep);
    let d = m.nrows();
    let matrix = if keep.is_empty() {
        DMatrix::zeros(d, d)
    } else {
        let mut scaled = vectors.clone();
        for (k, v) in values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(*v);
        }
        linalg::symmetrize(&(scaled * vectors.transpose()))
    };
    Ok(Factored { matrix, values, vectors })
}

/// Singular value thresholding for symmetric input: eigenvalues are
/// soft-thresholded in magnitude with their signs kept.
pub fn svt(m: &DMatrix<f64>, mu: f64) -> Result<DMatrix<f64>> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return arg_err(format!("threshold must be non-negative, got {mu}"));
    }
    linalg::check_symmetric(m, 1e-10 * linalg::max_abs_entry(m).max(1.0))?;
    Ok(svt_factored(&linalg::symmetrize(m), mu)?.matrix)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverResult {
    #[serde(with = "crate::serde_matrix::rows")]
    pub theta_tilde: DMatrix<f64>,
    pub sigma_tilde: CorrelationMatrix,
    pub mu: f64,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    pub objective: f64,
    pub rank: usize,
    pub kkt_tangent_residual: f64,
    pub kkt_orthogonal_excess: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

fn objective(theta: &Factored, target_off: &DMatrix<f64>, mu: f64) -> f64 {
    0.5 * (off_diagonal(&theta.matrix) - target_off).norm_squared() + mu * theta.nuclear_norm()
}

/// KKT residuals at a factored point: the tangent-space stationarity
/// residual and the excess of the orthogonal component over `μ`.
fn kkt(theta: &Factored, target_off: &DMatrix<f64>, mu: f64) -> Result<(f64, f64)> {
    let grad = off_diagonal(&theta.matrix) - target_off;
    let ts = TangentSpace::from_basis(theta.vectors.clone())?;
    let mut sign = DMatrix::zeros(theta.vectors.ncols(), theta.vectors.ncols());
    for (k, v) in theta.values.iter().enumerate() {
        sign[(k, k)] = v.signum();
    }
    let subgrad = &theta.vectors * sign * theta.vectors.transpose();
    let tangent = (p_tangent(&ts, &grad)? + subgrad * mu).norm();
    let orth = linalg::spectral_norm(&linalg::symmetrize(&p_tangent_perp(&ts, &grad)?));
    Ok((tangent, (orth - mu).max(0.0)))
}

/// Solves the refined program for `Σ̂` and returns `Θ̃` with its KKT
/// certificate. Running out of iterations is reported through
/// `converged = false`, not as an error.
pub fn solve_refined(sigma_hat: &DMatrix<f64>, mu: f64, opts: SolverOptions) -> Result<SolverResult> {
    if !(mu > 0.0 && mu.is_finite()) {
        return arg_err(format!("mu must be positive (the diagonal is unidentified at mu = 0), got {mu}"));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return arg_err("tol must be positive and max_iter at least 1");
    }
    linalg::check_finite(sigma_hat)?;
    linalg::check_symmetric(sigma_hat, 1e-10 * linalg::max_abs_entry(sigma_hat).max(1.0))?;
    let d = sigma_hat.nrows();
    let target_off = off_diagonal(&linalg::symmetrize(sigma_hat));
    let tangent_tol = opts.tol * mu.max(1.0) * d as f64;
    let orth_tol = opts.tol * mu;

    let zero = Factored {
        matrix: DMatrix::zeros(d, d),
        values: DVector::zeros(0),
        vectors: DMatrix::zeros(d, 0),
    };
    let mut x = zero;
    let mut fx = objective(&x, &target_off, mu);
    let mut y = x.matrix.clone();
    let mut t = 1.0f64;
    let mut trace = Vec::new();

    for iter in 1..=opts.max_iter {
        // Gradient step: y - (y_o - Σ̂_o) keeps y's diagonal and takes Σ̂'s
        // off-diagonal.
        let mut w = target_off.clone();
        for k in 0..d {
            w[(k, k)] = y[(k, k)];
        }
        let z = svt_factored(&w, mu)?;
        if linalg::asymmetry(&z.matrix) > 1e-10 {
            return Err(Error::Numerical("iterate lost symmetry".into()));
        }
        let fz = objective(&z, &target_off, mu);
        let (res_t, res_o) = kkt(&z, &target_off, mu)?;
        if res_t <= tangent_tol && res_o <= orth_tol {
            trace.push(fz.min(fx));
            return Ok(finish(z, fz, mu, iter, trace, (res_t, res_o), true));
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let accepted = fz <= fx;
        let x_next = if accepted { z.clone() } else { x.clone() };
        y = &x_next.matrix
            + (&z.matrix - &x_next.matrix) * (t / t_next)
            + (&x_next.matrix - &x.matrix) * ((t - 1.0) / t_next);
        if accepted {
            fx = fz;
            t = t_next;
        } else {
            // Restart the momentum when the proximal step went uphill.
            t = 1.0;
            y = x_next.matrix.clone();
        }
        x = x_next;
        trace.push(fx);
    }
    let (res_t, res_o) = kkt(&x, &target_off, mu)?;
    let converged = res_t <= tangent_tol && res_o <= orth_tol;
    Ok(finish(x, fx, mu, opts.max_iter, trace, (res_t, res_o), converged))
}

fn finish(
    theta: Factored,
    objective: f64,
    mu: f64,
    iterations: usize,
    trace: Vec<f64>,
    (tangent, orth): (f64, f64),
    converged: bool,
) -> SolverResult {
    let d = theta.matrix.nrows();
    let mut sigma = off_diagonal(&theta.matrix);
    for k in 0..d {
        sigma[(k, k)] = 1.0;
    }
    SolverResult {
        rank: theta.values.len(),
        theta_tilde: theta.matrix,
        sigma_tilde: CorrelationMatrix::from_parts_unchecked(sigma, Provenance::Refined),
        mu,
        iterations,
        objective_trace: trace,
        objective,
        kkt_tangent_residual: tangent,
        kkt_orthogonal_excess: orth,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn svt_examples() {
        assert_eq!(svt(&DMatrix::zeros(3, 3), 0.7).unwrap(), DMatrix::zeros(3, 3));
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]));
        let out = svt(&m, 2.0).unwrap();
        assert!((out - DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]))).amax() < 1e-15);
        let mut bad = DMatrix::identity(2, 2);
        bad[(0, 1)] = 1.0;
        assert!(svt(&bad, 0.1).is_err());
    }

    #[test]
    fn svt_keeps_signs() {
        // 5(uvᵀ + vuᵀ) with orthonormal u, v has eigenvalues ±5.
        let s = 0.5f64.sqrt();
        let u = DVector::from_vec(vec![s, s, 0.0]);
        let v = DVector::from_vec(vec![s, -s, 0.0]);
        let m = (&u * v.transpose() + &v * u.transpose()) * 5.0;
        let out = svt(&m, 1.0).unwrap();
        let e = SymEigen::new(&out).unwrap();
        assert!((e.values[0] - 4.0).abs() < 1e-12);
        assert!(e.values[1].abs() < 1e-12);
        assert!((e.values[2] + 4.0).abs() < 1e-12);
        assert!((out - m * 0.8).amax() < 1e-12);
    }

    fn two_by_two(s: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, s, s, 1.0])
    }

    #[test]
    fn two_dimensional_soft_threshold() {
        let r = solve_refined(&two_by_two(0.6), 0.1, SolverOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.sigma_tilde.values()[(0, 1)] - 0.5).abs() < 1e-6);
        assert_eq!(r.sigma_tilde.values()[(0, 0)], 1.0);
    }

    #[test]
    fn large_mu_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = 5;
        let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.3..0.3));
        let mut s = linalg::symmetrize(&a);
        s.fill_diagonal(1.0);
        let norm = linalg::spectral_norm(&off_diagonal(&s));
        let r = solve_refined(&s, norm * 1.0001, SolverOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.theta_tilde, DMatrix::zeros(d, d));
        assert_eq!(r.sigma_tilde.values(), &DMatrix::identity(d, d));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(solve_refined(&two_by_two(0.2), 0.0, SolverOptions::default()).is_err());
        let opts = SolverOptions { tol: 1e-8, max_iter: 0 };
        assert!(solve_refined(&two_by_two(0.2), 0.1, opts).is_err());
    }

    #[test]
    fn trace_is_monotone_and_kkt_met() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = 8;
        let g = DMatrix::from_fn(d, 2, |_, _| rng.random_range(-0.6..0.6));
        let mut s = linalg::symmetrize(&(&g * g.transpose()));
        let noise = DMatrix::from_fn(d, d, |_, _| rng.random_range(-0.05..0.05));
        s += linalg::symmetrize(&noise);
        s.fill_diagonal(1.0);
        let r = solve_refined(&s, 0.15, SolverOptions::default()).unwrap();
        assert!(r.converged, "{r:?}");
        for w in r.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(r.kkt_tangent_residual <= 1e-8 * d as f64);
        assert!(r.kkt_orthogonal_excess <= 1e-8 * 0.15);
    }

    #[test]
    fn non_convergence_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = 8;
        let g = DMatrix::from_fn(d, 2, |_, _| rng.random_range(-0.6..0.6));
        let mut s = linalg::symmetrize(&(&g * g.transpose()));
        s.fill_diagonal(1.0);
        let r = solve_refined(&s, 0.05, SolverOptions { tol: 1e-14, max_iter: 3 }).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }
}
