//! Ground-truth factor structure `Σ = Θ* + V*`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{arg_err, Error, Result};
use crate::linalg;
use crate::transform::{CorrelationMatrix, Provenance};

/// A low-rank PSD component `Θ* = U* Λ* U*ᵀ` plus a non-negative diagonal
/// `V*` such that `Θ* + V*` has unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorDecomposition {
    #[serde(with = "crate::serde_matrix::rows")]
    theta_star: DMatrix<f64>,
    #[serde(with = "crate::serde_matrix::vector")]
    v_star: DVector<f64>,
    #[serde(with = "crate::serde_matrix::vector")]
    eigenvalues: DVector<f64>,
    #[serde(with = "crate::serde_matrix::rows")]
    eigenvectors: DMatrix<f64>,
}

impl FactorDecomposition {
    /// Builds `Θ* = U diag(λ) Uᵀ` and `V* = 1 - diag(Θ*)`.
    ///
    /// `eigenvalues` must be positive and descending and `eigenvectors`
    /// orthonormal to within `1e-12`.
    pub fn from_eigen(eigenvalues: DVector<f64>, eigenvectors: DMatrix<f64>) -> Result<Self> {
        let d = eigenvectors.nrows();
        let r = eigenvalues.len();
        if eigenvectors.ncols() != r {
            return Err(Error::Dimension(format!(
                "{r} eigenvalues but {} eigenvectors",
                eigenvectors.ncols()
            )));
        }
        if eigenvalues.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return arg_err("factor eigenvalues must be positive and finite");
        }
        if eigenvalues.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return arg_err("factor eigenvalues must be in descending order");
        }
        let gram = eigenvectors.transpose() * &eigenvectors;
        if (gram - DMatrix::identity(r, r)).amax() > 1e-12 {
            return arg_err("factor eigenvectors are not orthonormal");
        }
        let theta_star = theta_from(&eigenvalues, &eigenvectors, d);
        let mut v_star = DVector::zeros(d);
        for k in 0..d {
            let t = theta_star[(k, k)];
            if t > 1.0 + 1e-12 {
                return Err(Error::Infeasible(format!(
                    "diag(Theta*) entry {k} is {t} > 1"
                )));
            }
            v_star[k] = (1.0 - t).max(0.0);
        }
        Ok(Self { theta_star, v_star, eigenvalues, eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.theta_star.nrows()
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn theta_star(&self) -> &DMatrix<f64> {
        &self.theta_star
    }

    pub fn v_star(&self) -> &DVector<f64> {
        &self.v_star
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// `Σ = Θ* + V*` with its diagonal set to exactly one.
    pub fn sigma(&self) -> CorrelationMatrix {
        let d = self.dim();
        let mut s = linalg::symmetrize(&self.theta_star);
        for k in 0..d {
            s[(k, k)] = 1.0;
        }
        s.apply(|x| *x = x.clamp(-1.0, 1.0));
        CorrelationMatrix::from_parts_unchecked(s, Provenance::Population)
    }

    /// `σ²` when `V* = σ² I` to within `1e-12`.
    pub fn elementary_sigma2(&self) -> Option<f64> {
        let first = *self.v_star.iter().next()?;
        self.v_star
            .iter()
            .all(|v| (v - first).abs() <= 1e-12)
            .then_some(first)
    }

    /// `γ_r = ‖U*_r U*_rᵀ‖_∞`, the largest diagonal entry of the projector onto
    /// the top-`r` eigenvectors. `γ_0 = 0`.
    pub fn gamma_r(&self, r: usize) -> Result<f64> {
        if r > self.rank() {
            return arg_err(format!("r = {r} exceeds the rank {}", self.rank()));
        }
        Ok(gamma_of(&self.eigenvectors.columns(0, r).into_owned()))
    }

    /// `γ_0, …, γ_{r*}`.
    pub fn gammas(&self) -> Vec<f64> {
        (0..=self.rank()).map(|r| self.gamma_r(r).expect("in range")).collect()
    }

    /// `Σ_{j>r} λ_j^p`.
    pub(crate) fn tail_power_sum(&self, r: usize, p: i32) -> f64 {
        self.eigenvalues.iter().skip(r).map(|l| l.powi(p)).sum()
    }
}

fn theta_from(eigenvalues: &DVector<f64>, eigenvectors: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let mut scaled = eigenvectors.clone();
    for (k, l) in eigenvalues.iter().enumerate() {
        scaled.column_mut(k).scale_mut(*l);
    }
    if eigenvalues.is_empty() {
        return DMatrix::zeros(d, d);
    }
    linalg::symmetrize(&(scaled * eigenvectors.transpose()))
}

/// `‖U Uᵀ‖_∞ = max_i Σ_k U_ik²` for a matrix with orthonormal columns.
pub fn gamma_of(u: &DMatrix<f64>) -> f64 {
    (0..u.nrows())
        .map(|i| u.row(i).iter().map(|x| x * x).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_examples() {
        let d = 9;
        let u = DMatrix::from_element(d, 1, 1.0 / (d as f64).sqrt());
        let fd = FactorDecomposition::from_eigen(DVector::from_vec(vec![0.9 * d as f64]), u).unwrap();
        assert!((fd.gamma_r(1).unwrap() - 1.0 / d as f64).abs() < 1e-15);
        assert_eq!(fd.gamma_r(0).unwrap(), 0.0);
        assert!(fd.gamma_r(2).is_err());
        assert!((fd.elementary_sigma2().unwrap() - 0.1).abs() < 1e-12);

        let mut e1 = DMatrix::zeros(4, 1);
        e1[(0, 0)] = 1.0;
        let fd = FactorDecomposition::from_eigen(DVector::from_vec(vec![0.5]), e1).unwrap();
        assert_eq!(fd.gamma_r(1).unwrap(), 1.0);
        assert!(fd.elementary_sigma2().is_none());
    }

    #[test]
    fn infeasible_diagonal() {
        let mut e1 = DMatrix::zeros(3, 1);
        e1[(0, 0)] = 1.0;
        let r = FactorDecomposition::from_eigen(DVector::from_vec(vec![1.5]), e1);
        assert!(matches!(r, Err(Error::Infeasible(_))));
    }

    #[test]
    fn rank_zero_is_identity() {
        let fd = FactorDecomposition::from_eigen(DVector::zeros(0), DMatrix::zeros(5, 0)).unwrap();
        assert_eq!(fd.sigma().values(), &DMatrix::identity(5, 5));
        assert_eq!(fd.v_star(), &DVector::from_element(5, 1.0));
    }
}
