//! Nuclear-norm penalised estimator for the general factor model
//! `Σ = Θ* + V*`, with the projector algebra and diagnostics behind its
//! guarantees.

pub mod certificate;
pub mod oracle;
pub mod projectors;
pub mod solver;

pub use certificate::{construct_certificate, contraction_check, mu_threshold, CertificateReport, ContractionReport};
pub use oracle::{diagonal_bound_rhs, gamma_r, incoherent_rank, oracle_rhs, OracleBound};
pub use projectors::{off_diagonal, p_omega, p_tangent, p_tangent_perp, TangentSpace};
pub use solver::{solve_refined, svt, SolverOptions, SolverResult};

use crate::bounds::{self, check_norm};
use crate::elementary::check_factor_alpha;
use crate::error::Result;

fn scaled(
    name: &str,
    norm: f64,
    n: usize,
    d: usize,
    alpha: f64,
    g: fn(f64, f64) -> f64,
) -> Result<f64> {
    check_factor_alpha(alpha)?;
    check_norm(name, norm)?;
    let f = bounds::f(n, d, alpha)?;
    Ok(6.0 * g(norm, f))
}

/// Data-driven penalty `μ = 6{C₁√(‖T̂‖₂f² + f⁴/4) + (C₁/2 + C₂)f²}`.
pub fn mu_refined(that_norm: f64, n: usize, d: usize, alpha: f64) -> Result<f64> {
    scaled("||T_hat||_2", that_norm, n, d, alpha, bounds::sigma_data_driven)
}

/// `μ̄ = 6{C₁ max(√‖T‖₂ f, f²) + (C₁ + C₂)f²}`.
pub fn mu_bar_refined(t_norm: f64, n: usize, d: usize, alpha: f64) -> Result<f64> {
    scaled("||T||_2", t_norm, n, d, alpha, bounds::sigma_guarantee)
}

/// `μ′ = 6{C₁ max(√‖T‖₂ f, f²) + C₂f²}`.
pub fn mu_prime(t_norm: f64, n: usize, d: usize, alpha: f64) -> Result<f64> {
    scaled("||T||_2", t_norm, n, d, alpha, bounds::sigma_population)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{C1, C2};

    #[test]
    fn reference_values() {
        assert!((mu_refined(1.5, 1000, 3, 0.25).unwrap() - 6.271_640_853_006_167).abs() < 1e-12);
        assert!((mu_bar_refined(1.5, 1000, 3, 0.25).unwrap() - 6.728_867_541_916_9).abs() < 1e-12);
        assert!((mu_prime(1.5, 1000, 3, 0.25).unwrap() - 5.770_389_087_568_035).abs() < 1e-12);
    }

    #[test]
    fn zero_norm_and_differences() {
        let f = bounds::f(1000, 3, 0.25).unwrap();
        let f2 = f * f;
        assert!((mu_refined(0.0, 1000, 3, 0.25).unwrap() - 6.0 * (C1 + C2) * f2).abs() < 1e-12);
        assert!((mu_bar_refined(0.0, 1000, 3, 0.25).unwrap() - 6.0 * (2.0 * C1 + C2) * f2).abs() < 1e-12);
        for t in [0.0, 0.01, 1.0, 2.5] {
            let gap = mu_bar_refined(t, 1000, 3, 0.25).unwrap() - mu_prime(t, 1000, 3, 0.25).unwrap();
            assert!((gap - 6.0 * C1 * f2).abs() < 1e-12);
        }
    }

    #[test]
    fn range_errors() {
        assert!(mu_refined(1.0, 1000, 3, 0.5).is_err());
        assert!(mu_bar_refined(-1.0, 1000, 3, 0.25).is_err());
        assert!(mu_prime(1.0, 1, 3, 0.25).is_err());
    }
}
