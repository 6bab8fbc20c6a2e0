//! Diagonal / off-diagonal splitting and tangent-space projectors at a
//! low-rank PSD matrix.

use nalgebra::DMatrix;

use crate::error::{arg_err, Error, Result};
use crate::factor::gamma_of;
use crate::linalg::{self, SymEigen};

/// The tangent space at `Θ̄ = Ū Λ̄ Ūᵀ`, represented by the orthonormal basis
/// `Ū` of its column space.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentSpace {
    basis: DMatrix<f64>,
    projector: DMatrix<f64>,
    gamma: f64,
}

impl TangentSpace {
    pub fn from_basis(basis: DMatrix<f64>) -> Result<Self> {
        let r = basis.ncols();
        let gram = basis.transpose() * &basis;
        if (gram - DMatrix::identity(r, r)).amax() > 1e-12 {
            return arg_err("tangent-space basis is not orthonormal");
        }
        let projector = if r == 0 {
            DMatrix::zeros(basis.nrows(), basis.nrows())
        } else {
            linalg::symmetrize(&(&basis * basis.transpose()))
        };
        let gamma = gamma_of(&basis);
        Ok(Self { basis, projector, gamma })
    }

    /// Tangent space of a symmetric matrix, keeping eigenvectors whose
    /// eigenvalues exceed `tol` in absolute value.
    pub fn from_matrix(theta: &DMatrix<f64>, tol: f64) -> Result<Self> {
        let eig = SymEigen::new(theta)?;
        let keep: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k].abs() > tol).collect();
        let basis = eig.vectors.select_columns(&keep);
        Self::from_basis(basis)
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `ŪŪᵀ`.
    pub fn projector(&self) -> &DMatrix<f64> {
        &self.projector
    }

    /// `γ = ‖ŪŪᵀ‖_∞`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn check(&self, m: &DMatrix<f64>) -> Result<()> {
        let d = self.dim();
        if m.shape() != (d, d) {
            return Err(Error::Dimension(format!("expected {d}x{d}, got {:?}", m.shape())));
        }
        Ok(())
    }
}

/// `M_o = M - I∘M`.
pub fn off_diagonal(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    out.fill_diagonal(0.0);
    out
}

/// `P_Ω(M) = I∘M`.
pub fn p_omega(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_diagonal(&m.diagonal())
}

/// `P_T(N) = PN + NP - PNP` with `P = ŪŪᵀ`.
pub fn p_tangent(ts: &TangentSpace, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ts.check(m)?;
    let p = ts.projector();
    let pm = p * m;
    let mp = m * p;
    let pmp = &pm * p;
    Ok(pm + mp - pmp)
}

/// `P_T⊥(N) = (I - P) N (I - P)`.
pub fn p_tangent_perp(ts: &TangentSpace, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ts.check(m)?;
    let d = ts.dim();
    let q = DMatrix::identity(d, d) - ts.projector();
    Ok(&q * m * &q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frob_inner;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_space(rng: &mut ChaCha8Rng, d: usize, r: usize) -> TangentSpace {
        let g = DMatrix::from_fn(d, r, |_, _| rng.sample::<f64, _>(StandardNormal));
        TangentSpace::from_basis(g.qr().q()).unwrap()
    }

    #[test]
    fn omega_and_off_diagonal_are_complementary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = DMatrix::from_fn(5, 5, |_, _| rng.random::<f64>());
        assert_eq!(p_omega(&off_diagonal(&m)), DMatrix::zeros(5, 5));
        assert_eq!(off_diagonal(&m) + p_omega(&m), m);
    }

    #[test]
    fn orthogonality_of_tangent_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ts = random_space(&mut rng, 6, 2);
        let m = DMatrix::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = p_tangent(&ts, &m).unwrap();
        let b = p_tangent_perp(&ts, &m).unwrap();
        assert!(frob_inner(&a, &b).abs() < 1e-12);
        assert!((&a + &b - &m).amax() < 1e-12);
        assert!((p_tangent(&ts, &a).unwrap() - &a).amax() < 1e-12);
        assert!((p_tangent_perp(&ts, &b).unwrap() - &b).amax() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let ts = TangentSpace::from_basis(DMatrix::identity(4, 1)).unwrap();
        assert!(p_tangent(&ts, &DMatrix::zeros(3, 3)).is_err());
        assert!(TangentSpace::from_basis(DMatrix::from_element(3, 1, 1.0)).is_err());
    }

    #[test]
    fn basis_from_matrix() {
        let u = DMatrix::from_element(9, 1, 1.0 / 3.0);
        let theta = &u * u.transpose() * 2.0;
        let ts = TangentSpace::from_matrix(&theta, 1e-10).unwrap();
        assert_eq!(ts.rank(), 1);
        assert!((ts.gamma() - 1.0 / 9.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn projector_identities(seed in any::<u64>(), d in 2usize..9, r in 0usize..3) {
            let r = r.min(d);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ts = random_space(&mut rng, d, r);
            prop_assert!(ts.gamma() <= 1.0 + 1e-12);
            let m = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let a = p_tangent(&ts, &m).unwrap();
            let b = p_tangent_perp(&ts, &m).unwrap();
            prop_assert!((&a + &b - &m).amax() < 1e-12);
            prop_assert!((p_tangent(&ts, &a).unwrap() - &a).amax() < 1e-12);
            prop_assert!((p_tangent_perp(&ts, &b).unwrap() - &b).amax() < 1e-12);
            prop_assert!(frob_inner(&a, &b).abs() < 1e-12 * (1.0 + m.norm_squared()));
        }
    }
}
