//! Sine and arcsine maps between Kendall's tau and copula correlation
//! matrices, plus PSD repair and the operator norm.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kendall::{KendallKind, KendallMatrix};
use crate::linalg::{self, SymEigen};

/// Slack allowed on `[-1, 1]` before an entry is treated as a domain error.
pub const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Population,
    Plugin,
    Refined,
}

/// A symmetric unit-diagonal matrix with entries in `[-1, 1]`.
///
/// Population matrices are PSD; plug-in estimates may be indefinite. A plug-in
/// built from tied data can also have diagonal entries below one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCorrelation")]
pub struct CorrelationMatrix {
    #[serde(with = "crate::serde_matrix::rows")]
    values: DMatrix<f64>,
    provenance: Provenance,
}

#[derive(Deserialize)]
struct RawCorrelation {
    #[serde(with = "crate::serde_matrix::rows")]
    values: DMatrix<f64>,
    #[serde(default = "population")]
    provenance: Provenance,
}

fn population() -> Provenance {
    Provenance::Population
}

impl TryFrom<RawCorrelation> for CorrelationMatrix {
    type Error = Error;

    fn try_from(raw: RawCorrelation) -> Result<Self> {
        Self::new(raw.values, raw.provenance)
    }
}

impl CorrelationMatrix {
    /// Validates and normalises a candidate correlation matrix. Asymmetry and
    /// diagonal deviation up to [`DOMAIN_SLACK`] are repaired; anything larger
    /// is rejected.
    pub fn new(values: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        linalg::check_square(&values)?;
        linalg::check_finite(&values)?;
        let d = values.nrows();
        let scale = linalg::max_abs_entry(&values).max(1.0);
        if linalg::asymmetry(&values) > DOMAIN_SLACK * scale {
            return Err(Error::Argument("correlation matrix is not symmetric".into()));
        }
        let mut values = linalg::symmetrize(&values);
        for k in 0..d {
            if (values[(k, k)] - 1.0).abs() > DOMAIN_SLACK {
                return Err(Error::Argument(format!(
                    "diagonal entry {k} is {} instead of 1",
                    values[(k, k)]
                )));
            }
            values[(k, k)] = 1.0;
        }
        clamp_unit(&mut values)?;
        if provenance == Provenance::Population {
            let lmin = SymEigen::new(&values)?.min();
            if lmin < -1e-10 * d as f64 {
                return Err(Error::Precondition(format!(
                    "population correlation matrix is not PSD (lambda_min = {lmin:e})"
                )));
            }
        }
        Ok(Self { values, provenance })
    }

    pub(crate) fn from_parts_unchecked(values: DMatrix<f64>, provenance: Provenance) -> Self {
        Self { values, provenance }
    }

    pub fn identity(d: usize, provenance: Provenance) -> Self {
        Self { values: DMatrix::identity(d, d), provenance }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }
}

fn clamp_unit(m: &mut DMatrix<f64>) -> Result<()> {
    let rows = m.nrows();
    for (i, v) in m.iter_mut().enumerate() {
        if v.abs() > 1.0 + DOMAIN_SLACK {
            return Err(Error::Domain { row: i % rows, col: i / rows, value: *v });
        }
        *v = v.clamp(-1.0, 1.0);
    }
    Ok(())
}

/// `sin(π/2 · T)` applied entrywise.
pub fn sine_transform(t: &KendallMatrix) -> Result<CorrelationMatrix> {
    let mut v = t.values().clone();
    clamp_unit(&mut v)?;
    v.apply(|x| *x = (FRAC_PI_2 * *x).sin());
    let provenance = match t.kind() {
        KendallKind::Empirical => Provenance::Plugin,
        KendallKind::Population => Provenance::Population,
    };
    Ok(CorrelationMatrix::from_parts_unchecked(v, provenance))
}

/// `(2/π) arcsin(Σ)` applied entrywise, the population Kendall's tau matrix.
pub fn arcsine_transform(s: &CorrelationMatrix) -> Result<KendallMatrix> {
    arcsine_of(s.values())
}

pub(crate) fn arcsine_of(m: &DMatrix<f64>) -> Result<KendallMatrix> {
    let mut v = m.clone();
    clamp_unit(&mut v)?;
    v.apply(|x| *x = (x.asin() / FRAC_PI_2).clamp(-1.0, 1.0));
    Ok(KendallMatrix::from_parts_unchecked(v, KendallKind::Population))
}

/// Projects onto the PSD cone by clamping negative eigenvalues, then rescales
/// to unit diagonal with `D^{-1/2} M D^{-1/2}`.
pub fn project_psd(s: &CorrelationMatrix) -> Result<CorrelationMatrix> {
    let m = s.values();
    linalg::check_symmetric(m, DOMAIN_SLACK * linalg::max_abs_entry(m).max(1.0))?;
    let eig = SymEigen::new(m)?;
    let clamped = eig.reassemble(|l| l.max(0.0));
    let d = m.nrows();
    let mut inv_sqrt = Vec::with_capacity(d);
    for k in 0..d {
        let v = clamped[(k, k)];
        if v <= 0.0 {
            return Err(Error::Degenerate(format!(
                "diagonal entry {k} vanishes after clamping negative eigenvalues"
            )));
        }
        inv_sqrt.push(1.0 / v.sqrt());
    }
    let mut out = DMatrix::from_fn(d, d, |i, j| clamped[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    out = linalg::symmetrize(&out);
    for k in 0..d {
        out[(k, k)] = 1.0;
    }
    out.apply(|x| *x = x.clamp(-1.0, 1.0));
    Ok(CorrelationMatrix::from_parts_unchecked(out, s.provenance()))
}

/// Operator norm `‖M‖₂` of a symmetric matrix: the largest absolute eigenvalue.
pub fn operator_norm(m: &DMatrix<f64>) -> Result<f64> {
    linalg::check_square(m)?;
    linalg::check_finite(m)?;
    let scale = linalg::max_abs_entry(m).max(1.0);
    if linalg::asymmetry(m) > 1e-9 * scale {
        return Err(Error::Argument("operator_norm expects a symmetric matrix".into()));
    }
    Ok(SymEigen::new(&linalg::symmetrize(m))?.max_abs())
}
