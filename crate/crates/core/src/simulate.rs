//! Samples from semiparametric elliptical copulas with a known correlation
//! matrix, and ground-truth factor structures to feed them.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::factor::FactorDecomposition;
use crate::kendall::SampleMatrix;
use crate::linalg::{self, SymEigen};
use crate::transform::{CorrelationMatrix, Provenance};

/// Degrees of freedom used when a Student-t generator omits `nu`.
pub const DEFAULT_NU: f64 = 3.0;

fn default_nu() -> f64 {
    DEFAULT_NU
}

/// Radial part of the elliptical distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Generator {
    #[default]
    Gaussian,
    StudentT {
        #[serde(default = "default_nu")]
        nu: f64,
    },
}

/// Strictly increasing map applied to one column of the latent sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Marginal {
    #[default]
    Identity,
    Exp,
    /// Logistic function `1/(1 + e^{-x})`, turning a normal latent into a
    /// logit-normal margin.
    LogitNormal,
    Cube,
}

impl Marginal {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Marginal::Identity => x,
            Marginal::Exp => x.exp(),
            Marginal::LogitNormal => 1.0 / (1.0 + (-x).exp()),
            Marginal::Cube => x * x * x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    pub sigma: CorrelationMatrix,
    #[serde(default)]
    pub generator: Generator,
    /// One transform per column; empty means identity everywhere.
    #[serde(default)]
    pub marginals: Vec<Marginal>,
    #[serde(default)]
    pub seed: u64,
}

impl CopulaSpec {
    pub fn gaussian(sigma: CorrelationMatrix, seed: u64) -> Self {
        Self { sigma, generator: Generator::Gaussian, marginals: Vec::new(), seed }
    }

    fn validate(&self) -> Result<()> {
        if let Generator::StudentT { nu } = self.generator {
            if !(nu > 0.0 && nu.is_finite()) {
                return arg_err(format!("Student-t degrees of freedom must be positive, got {nu}"));
            }
        }
        let d = self.sigma.dim();
        if !self.marginals.is_empty() && self.marginals.len() != d {
            return Err(Error::Dimension(format!(
                "{} marginal transforms for {d} columns",
                self.marginals.len()
            )));
        }
        Ok(())
    }
}

/// The `stream`-th independent ChaCha stream under `master`.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// A matrix `A` with `A Aᵀ = Σ`: the Cholesky factor, with a `1e-10` ridge
/// retry and, for singular `Σ`, the symmetric square root. The latter keeps
/// exactly collinear columns exactly collinear.
pub fn covariance_factor(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = Cholesky::new(sigma.clone()) {
        return Ok(c.l());
    }
    let eig = SymEigen::new(sigma)?;
    let d = sigma.nrows();
    if eig.min() < -1e-10 * d.max(1) as f64 {
        let jittered = sigma + DMatrix::<f64>::identity(d, d) * 1e-10;
        return Cholesky::new(jittered).map(|c| c.l()).ok_or_else(|| {
            Error::Numerical(format!("Cholesky failed after jitter (lambda_min = {:e})", eig.min()))
        });
    }
    let mut root = eig.vectors.clone();
    for (k, l) in eig.values.iter().enumerate() {
        root.column_mut(k).scale_mut(l.max(0.0).sqrt());
    }
    Ok(root)
}

/// Latent elliptical rows `A g / √(W/ν)` before the marginal transforms.
pub fn sample_latent(spec: &CopulaSpec, n: usize, rng: &mut impl Rng) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if n < 2 {
        return arg_err(format!("need at least 2 observations, got {n}"));
    }
    let d = spec.sigma.dim();
    let a = covariance_factor(spec.sigma.values())?;
    let chi = match spec.generator {
        Generator::Gaussian => None,
        Generator::StudentT { nu } => {
            Some((nu, ChiSquared::new(nu).map_err(|e| Error::Argument(e.to_string()))?))
        }
    };
    let mut out = DMatrix::zeros(n, d);
    let mut g = DVector::zeros(d);
    for i in 0..n {
        g.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        let mut z = &a * &g;
        if let Some((nu, chi)) = &chi {
            let w: f64 = chi.sample(rng);
            z /= (w / nu).sqrt();
        }
        out.row_mut(i).tr_copy_from(&z);
    }
    Ok(out)
}

/// Applies the column transforms of `spec` in place.
pub fn apply_marginals(spec: &CopulaSpec, latent: &mut DMatrix<f64>) {
    for (k, m) in spec.marginals.iter().enumerate() {
        latent.column_mut(k).apply(|x| *x = m.apply(*x));
    }
}

pub fn sample_with(spec: &CopulaSpec, n: usize, rng: &mut impl Rng) -> Result<SampleMatrix> {
    let mut x = sample_latent(spec, n, rng)?;
    apply_marginals(spec, &mut x);
    SampleMatrix::new(x)
}

/// `n` rows drawn with the generator seeded from `spec.seed`.
pub fn sample(spec: &CopulaSpec, n: usize) -> Result<SampleMatrix> {
    sample_with(spec, n, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}

/// A random PSD correlation matrix `D^{-1/2} G Gᵀ D^{-1/2}` with `G` a
/// `d × d` Gaussian matrix.
pub fn random_correlation(d: usize, rng: &mut impl Rng) -> Result<CorrelationMatrix> {
    if d == 0 {
        return arg_err("dimension must be positive");
    }
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = &g * g.transpose();
    let scale = DVector::from_fn(d, |k, _| 1.0 / s[(k, k)].sqrt());
    let c = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { s[(i, j)] * scale[i] * scale[j] });
    CorrelationMatrix::new(linalg::symmetrize(&c), Provenance::Population)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EigenvectorStyle {
    /// Orthonormalised Gaussian columns.
    #[default]
    DelocalizedHaar,
    /// Standard basis vectors `e_1, …, e_r`.
    Spiked,
    /// `±1/√d` sign patterns from a Sylvester-Hadamard matrix, repeated to
    /// length `d`; every projector built from them has constant diagonal.
    OrthogonalDesign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub d: usize,
    pub r: usize,
    pub factor_eigenvalues: Vec<f64>,
    #[serde(default)]
    pub eigenvector_style: EigenvectorStyle,
    /// Forces [`EigenvectorStyle::OrthogonalDesign`] so that `V* = σ² I`
    /// with `σ² = 1 - Σλ_k / d`.
    #[serde(default)]
    pub elementary: bool,
}

/// `r` orthonormal `±1/√d` vectors, from the smallest Sylvester-Hadamard
/// order `m = 2^k ≥ r` dividing `d`.
pub fn orthogonal_design(d: usize, r: usize) -> Result<DMatrix<f64>> {
    let m = (0..usize::BITS)
        .map(|k| 1usize << k)
        .take_while(|&m| m <= d.max(1))
        .find(|&m| m >= r && d % m == 0)
        .ok_or_else(|| {
            Error::Infeasible(format!("no Hadamard order 2^k >= {r} divides d = {d}"))
        })?;
    let s = 1.0 / (d as f64).sqrt();
    Ok(DMatrix::from_fn(d, r, |i, k| {
        if ((i % m) & k).count_ones() % 2 == 0 {
            s
        } else {
            -s
        }
    }))
}

/// Builds `Θ* = U Λ Uᵀ` and `V* = I - diag(Θ*)` from `spec`.
pub fn make_factor_truth(spec: &FactorSpec, rng: &mut impl Rng) -> Result<FactorDecomposition> {
    let FactorSpec { d, r, .. } = *spec;
    if d == 0 {
        return arg_err("dimension must be positive");
    }
    if r > d {
        return arg_err(format!("rank {r} exceeds dimension {d}"));
    }
    if spec.factor_eigenvalues.len() != r {
        return Err(Error::Dimension(format!(
            "{} factor eigenvalues for rank {r}",
            spec.factor_eigenvalues.len()
        )));
    }
    let style = if spec.elementary { EigenvectorStyle::OrthogonalDesign } else { spec.eigenvector_style };
    let u = match style {
        EigenvectorStyle::DelocalizedHaar => {
            let g = DMatrix::from_fn(d, r, |_, _| rng.sample::<f64, _>(StandardNormal));
            if r == 0 {
                g
            } else {
                g.qr().q()
            }
        }
        EigenvectorStyle::Spiked => DMatrix::identity(d, r),
        EigenvectorStyle::OrthogonalDesign => orthogonal_design(d, r)?,
    };
    FactorDecomposition::from_eigen(DVector::from_column_slice(&spec.factor_eigenvalues), u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kendall::kendall_tau_matrix;

    fn corr2(rho: f64) -> CorrelationMatrix {
        CorrelationMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]), Provenance::Population)
            .unwrap()
    }

    #[test]
    fn rank_zero_truth() {
        let spec = FactorSpec {
            d: 5,
            r: 0,
            factor_eigenvalues: vec![],
            eigenvector_style: EigenvectorStyle::DelocalizedHaar,
            elementary: false,
        };
        let fd = make_factor_truth(&spec, &mut stream_rng(0, 0)).unwrap();
        assert_eq!(fd.sigma().values(), &DMatrix::identity(5, 5));
        assert_eq!(fd.v_star(), &DVector::from_element(5, 1.0));
    }

    #[test]
    fn constant_vector_truth() {
        let spec = FactorSpec {
            d: 9,
            r: 1,
            factor_eigenvalues: vec![0.9 * 9.0],
            eigenvector_style: EigenvectorStyle::OrthogonalDesign,
            elementary: false,
        };
        let fd = make_factor_truth(&spec, &mut stream_rng(0, 0)).unwrap();
        assert!((fd.gamma_r(1).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        assert!((fd.elementary_sigma2().unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn spiked_truth_is_coherent() {
        let spec = FactorSpec {
            d: 6,
            r: 1,
            factor_eigenvalues: vec![0.5],
            eigenvector_style: EigenvectorStyle::Spiked,
            elementary: false,
        };
        let fd = make_factor_truth(&spec, &mut stream_rng(0, 0)).unwrap();
        assert_eq!(fd.gamma_r(1).unwrap(), 1.0);
        assert!(fd.gamma_r(1).unwrap() > 1.0 / 9.0);
    }

    #[test]
    fn elementary_design_has_constant_noise() {
        for (d, r) in [(16, 2), (18, 2), (12, 3), (8, 8)] {
            let lam: Vec<f64> = (0..r).map(|k| 0.8 * d as f64 / r as f64 - k as f64 * 0.01).collect();
            let spec = FactorSpec {
                d,
                r,
                factor_eigenvalues: lam,
                eigenvector_style: EigenvectorStyle::Spiked,
                elementary: true,
            };
            let fd = make_factor_truth(&spec, &mut stream_rng(0, 0)).unwrap();
            assert!(fd.elementary_sigma2().is_some(), "d={d} r={r}");
            assert!((fd.gamma_r(r).unwrap() - r as f64 / d as f64).abs() < 1e-14);
        }
        assert!(orthogonal_design(9, 2).is_err());
    }

    #[test]
    fn infeasible_spec() {
        let spec = FactorSpec {
            d: 4,
            r: 1,
            factor_eigenvalues: vec![2.0],
            eigenvector_style: EigenvectorStyle::Spiked,
            elementary: false,
        };
        assert!(matches!(make_factor_truth(&spec, &mut stream_rng(0, 0)), Err(Error::Infeasible(_))));
    }

    #[test]
    fn comonotone_columns() {
        let spec = CopulaSpec { marginals: vec![Marginal::Exp, Marginal::Cube], ..CopulaSpec::gaussian(corr2(1.0), 3) };
        let x = sample(&spec, 200).unwrap();
        assert_eq!(kendall_tau_matrix(&x).values()[(0, 1)], 1.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = CopulaSpec {
            generator: Generator::StudentT { nu: 3.0 },
            ..CopulaSpec::gaussian(corr2(0.3), 11)
        };
        assert_eq!(sample(&spec, 50).unwrap(), sample(&spec, 50).unwrap());
        let other = CopulaSpec { seed: 12, ..spec.clone() };
        assert_ne!(sample(&spec, 50).unwrap(), sample(&other, 50).unwrap());
    }

    #[test]
    fn tau_matches_arcsine_law() {
        for generator in [Generator::Gaussian, Generator::StudentT { nu: 3.0 }] {
            let spec = CopulaSpec {
                generator,
                marginals: vec![Marginal::LogitNormal, Marginal::Exp],
                ..CopulaSpec::gaussian(corr2(0.5), 5)
            };
            let t = kendall_tau_matrix(&sample(&spec, 5000).unwrap());
            assert!((t.values()[(0, 1)] - 1.0 / 3.0).abs() < 0.03, "{generator:?}");
        }
    }

    #[test]
    fn bad_specs() {
        let spec = CopulaSpec { generator: Generator::StudentT { nu: 0.0 }, ..CopulaSpec::gaussian(corr2(0.1), 0) };
        assert!(sample(&spec, 10).is_err());
        let spec = CopulaSpec { marginals: vec![Marginal::Exp], ..CopulaSpec::gaussian(corr2(0.1), 0) };
        assert!(sample(&spec, 10).is_err());
        assert!(sample(&CopulaSpec::gaussian(corr2(0.1), 0), 1).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let json = r#"{"sigma": {"values": [[1, 0.2], [0.2, 1]]}, "generator": {"family": "student_t"},
                       "marginals": ["exp", "cube"], "seed": 4}"#;
        let spec: CopulaSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.generator, Generator::StudentT { nu: DEFAULT_NU });
        let back: CopulaSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let bad = r#"{"sigma": {"values": [[1, 2], [2, 1]]}}"#;
        assert!(serde_json::from_str::<CopulaSpec>(bad).is_err());
    }

    #[test]
    fn random_correlation_is_valid() {
        let mut rng = stream_rng(9, 0);
        for d in [1, 2, 7, 30] {
            let c = random_correlation(d, &mut rng).unwrap();
            assert_eq!(c.dim(), d);
            assert!(SymEigen::new(c.values()).unwrap().min() > -1e-12);
        }
    }
}
