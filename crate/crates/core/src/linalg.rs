//! Small dense linear algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigendecomposition of a symmetric matrix with eigenvalues in descending
/// order. Each eigenvector has its first non-negligible component positive,
/// so the decomposition is reproducible across runs.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        check_square(m)?;
        check_finite(m)?;
        let n = m.nrows();
        if n == 0 {
            return Ok(Self {
                values: DVector::zeros(0),
                vectors: DMatrix::zeros(0, 0),
            });
        }
        let eig = m.clone().symmetric_eigen();
        let mut cols: Vec<(f64, DVector<f64>)> = (0..n)
            .map(|k| {
                let mut v = eig.eigenvectors.column(k).into_owned();
                if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
                    if first < 0.0 {
                        v.neg_mut();
                    }
                }
                (eig.eigenvalues[k], v)
            })
            .collect();
        cols.sort_by(|(la, va), (lb, vb)| {
            lb.total_cmp(la).then_with(|| {
                for (a, b) in va.iter().zip(vb.iter()) {
                    match b.total_cmp(a) {
                        std::cmp::Ordering::Equal => continue,
                        o => return o,
                    }
                }
                std::cmp::Ordering::Equal
            })
        });
        let values = DVector::from_iterator(n, cols.iter().map(|(l, _)| *l));
        let mut vectors = DMatrix::zeros(n, n);
        for (k, (_, v)) in cols.iter().enumerate() {
            vectors.set_column(k, v);
        }
        Ok(Self { values, vectors })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Reassembles `V diag(g(λ)) Vᵀ`.
    pub fn reassemble(&self, g: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let w = g(self.values[k]);
            scaled.column_mut(k).scale_mut(w);
        }
        symmetrize(&(scaled * self.vectors.transpose()))
    }
}

pub fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        let (r, c) = (pos % m.nrows(), pos / m.nrows());
        return Err(Error::Argument(format!("non-finite entry at ({r}, {c})")));
    }
    Ok(())
}

pub fn check_same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Largest absolute asymmetry `max |m_kl - m_lk|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for k in 0..n {
        for l in (k + 1)..n {
            worst = worst.max((m[(k, l)] - m[(l, k)]).abs());
        }
    }
    worst
}

pub fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    check_square(m)?;
    let a = asymmetry(m);
    if a > tol {
        return Err(Error::Argument(format!(
            "matrix is not symmetric (max asymmetry {a:e})"
        )));
    }
    Ok(())
}

/// `(m + mᵀ) / 2`, which is exactly symmetric.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = m.clone();
    for k in 0..n {
        for l in (k + 1)..n {
            let v = 0.5 * (m[(k, l)] + m[(l, k)]);
            out[(k, l)] = v;
            out[(l, k)] = v;
        }
    }
    out
}

/// Entrywise maximum absolute value.
pub fn max_abs_entry(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Entrywise ℓ1 norm.
pub fn l1_entry(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v.abs()).sum()
}

/// Largest singular value of an arbitrary (possibly rectangular) matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0, |acc, v| acc.max(*v))
}

/// Frobenius inner product `tr(aᵀb)`.
pub fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
