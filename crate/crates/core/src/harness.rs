//! Monte Carlo experiments that wire the simulator to the estimators and
//! check each probabilistic or deterministic guarantee empirically.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::bounds::{self, sigma_deviation_bounds, t_deviation_bounds, t_sigma_sandwich_check};
use crate::elementary::{self, check_elementary_conditions, elementary_event, estimate_elementary};
use crate::error::{arg_err, Error, Result};
use crate::factor::FactorDecomposition;
use crate::io;
use crate::kendall::kendall_tau_matrix;
use crate::linalg::{l1_entry, spectral_norm};
use crate::refined::{
    self, construct_certificate, contraction_check, diagonal_bound_rhs, mu_threshold, oracle, oracle_rhs,
    p_omega, solve_refined, SolverOptions, TangentSpace,
};
use crate::simulate::{
    make_factor_truth, random_correlation, sample_with, stream_rng, CopulaSpec, FactorSpec, Generator, Marginal,
};
use crate::transform::{arcsine_transform, operator_norm, sine_transform, CorrelationMatrix};

pub const SCHEMA_VERSION: u32 = 1;

/// Allowed shortfall of the confidence bound below the theoretical floor.
pub const COVERAGE_SLACK: f64 = 0.03;

/// Confidence level of the one-sided binomial lower bound.
pub const CONFIDENCE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "bound_coverage_T")]
    BoundCoverageT,
    #[serde(rename = "bound_coverage_Sigma")]
    BoundCoverageSigma,
    #[serde(rename = "sandwich")]
    Sandwich,
    #[serde(rename = "elementary")]
    Elementary,
    #[serde(rename = "refined_oracle")]
    RefinedOracle,
    #[serde(rename = "diagonal_bound")]
    DiagonalBound,
    #[serde(rename = "certificate")]
    Certificate,
    #[serde(rename = "contraction")]
    Contraction,
}

impl Experiment {
    fn needs_factor(self) -> bool {
        matches!(self, Experiment::Elementary | Experiment::RefinedOracle | Experiment::DiagonalBound)
    }
}

/// Copula settings shared by all replicates. Without `sigma`, one random
/// correlation matrix is drawn per run (per replicate for `sandwich`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CopulaSettings {
    #[serde(default)]
    pub sigma: Option<CorrelationMatrix>,
    #[serde(default)]
    pub generator: Generator,
    #[serde(default)]
    pub marginals: Vec<Marginal>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    #[serde(default)]
    pub mu_override: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    refined::solver::DEFAULT_TOL
}

fn default_max_iter() -> usize {
    refined::solver::DEFAULT_MAX_ITER
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { mu_override: None, tol: default_tol(), max_iter: default_max_iter() }
    }
}

fn default_c() -> f64 {
    2.0
}

fn default_rank() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub alpha: f64,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub factor: Option<FactorSpec>,
    #[serde(default)]
    pub copula: CopulaSettings,
    #[serde(default)]
    pub solver: SolverSettings,
    /// Certificate slack parameter `c ≥ 1`.
    #[serde(default = "default_c")]
    pub c: f64,
    /// Tangent-space rank for `certificate` and `contraction`.
    #[serde(default = "default_rank")]
    pub rank: usize,
    /// Where to write the JSON result; the CSV table goes next to it.
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return arg_err("replicates must be at least 1");
        }
        if self.d == 0 {
            return arg_err("d must be at least 1");
        }
        let sampled = !matches!(
            self.experiment,
            Experiment::Sandwich | Experiment::Certificate | Experiment::Contraction
        );
        if sampled {
            if self.n < 2 {
                return arg_err(format!("n must be at least 2, got {}", self.n));
            }
            let hi = if self.experiment.needs_factor() { 0.5 } else { 1.0 };
            if !(self.alpha > 0.0 && self.alpha < hi) {
                return arg_err(format!("alpha must lie in (0, {hi}) for this experiment, got {}", self.alpha));
            }
        }
        if self.experiment.needs_factor() {
            let f = self
                .factor
                .as_ref()
                .ok_or_else(|| Error::Argument("this experiment needs a factor spec".into()))?;
            if f.d != self.d {
                return Err(Error::Dimension(format!("factor spec has d = {}, config has d = {}", f.d, self.d)));
            }
        }
        if let Some(s) = &self.copula.sigma {
            if s.dim() != self.d {
                return Err(Error::Dimension(format!("sigma is {0}x{0}, config has d = {1}", s.dim(), self.d)));
            }
        }
        if let Some(mu) = self.solver.mu_override {
            if !(mu > 0.0 && mu.is_finite()) {
                return arg_err(format!("mu_override must be positive, got {mu}"));
            }
        }
        Ok(())
    }
}

/// One replicate: named scalar diagnostics and named event indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub values: BTreeMap<String, f64>,
    pub events: BTreeMap<String, bool>,
}

impl ReplicateRecord {
    fn new(index: usize) -> Self {
        Self { index, values: BTreeMap::new(), events: BTreeMap::new() }
    }

    fn value(&mut self, k: &str, v: f64) {
        self.values.insert(k.to_owned(), v);
    }

    fn event(&mut self, k: &str, v: bool) {
        self.events.insert(k.to_owned(), v);
    }
}

/// Empirical frequency of one event against its probability floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub event: String,
    pub successes: usize,
    pub replicates: usize,
    pub frequency: f64,
    pub floor: f64,
    /// One-sided Clopper-Pearson lower bound at [`CONFIDENCE`].
    pub lower_confidence: f64,
    /// Deterministic claims must hold on every replicate.
    pub deterministic: bool,
    pub pass: bool,
}

impl Coverage {
    fn new(event: &str, records: &[ReplicateRecord], floor: f64, deterministic: bool) -> Self {
        let successes = records.iter().filter(|r| r.events.get(event).copied().unwrap_or(false)).count();
        let replicates = records.len();
        let lower_confidence = binomial_lower_bound(successes, replicates, CONFIDENCE);
        let pass = if deterministic {
            successes == replicates
        } else {
            lower_confidence >= floor - COVERAGE_SLACK
        };
        Self {
            event: event.to_owned(),
            successes,
            replicates,
            frequency: successes as f64 / replicates as f64,
            floor,
            lower_confidence,
            deterministic,
            pass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    ConditionsUnmet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub coverage: Vec<Coverage>,
    /// Side conditions that must hold on every replicate, e.g. bound chains.
    pub checks: BTreeMap<String, bool>,
    /// Hypotheses of the checked guarantee evaluated on the truth.
    pub conditions: BTreeMap<String, bool>,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    /// Seconds since the Unix epoch; excluded from reproducibility checks.
    pub generated_at: u64,
    pub config: ExperimentConfig,
    /// Run-level constants such as `‖T‖₂`, `μ̄` or the oracle bound.
    pub constants: BTreeMap<String, f64>,
    pub records: Vec<ReplicateRecord>,
    pub summary: Summary,
}

impl ExperimentResult {
    pub fn passed(&self) -> bool {
        self.summary.status == Status::Pass
    }

    /// The result with the timestamp zeroed, for reproducibility comparisons.
    pub fn without_timestamp(&self) -> Self {
        Self { generated_at: 0, ..self.clone() }
    }

    /// Per-replicate table: `index`, then every value and event column.
    pub fn write_csv(&self, writer: impl std::io::Write) -> Result<()> {
        let value_keys: Vec<&String> = self.records.first().map_or(vec![], |r| r.values.keys().collect());
        let event_keys: Vec<&String> = self.records.first().map_or(vec![], |r| r.events.keys().collect());
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        let header = std::iter::once("index").chain(value_keys.iter().chain(&event_keys).map(|s| s.as_str()));
        w.write_record(header).map_err(csv_err)?;
        for r in &self.records {
            let mut row = vec![r.index.to_string()];
            row.extend(value_keys.iter().map(|k| format!("{:?}", r.values.get(*k).copied().unwrap_or(f64::NAN))));
            row.extend(event_keys.iter().map(|k| u8::from(r.events.get(*k).copied().unwrap_or(false)).to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `path` as JSON and the replicate table beside it as `.csv`.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        io::write_json_file(path, self)?;
        let csv_path = path.with_extension("csv");
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(&csv_path)?))?;
        Ok(csv_path)
    }
}

/// One-sided Clopper-Pearson lower bound for `k` successes in `n` trials.
pub fn binomial_lower_bound(k: usize, n: usize, confidence: f64) -> f64 {
    if k == 0 || n == 0 {
        return 0.0;
    }
    let beta = Beta::new(k as f64, (n - k + 1) as f64).expect("positive shape parameters");
    beta.inverse_cdf(1.0 - confidence)
}

/// Stream reserved for run-level randomness such as the true `Σ`.
const TRUTH_STREAM: u64 = u64::MAX;

/// Runs every replicate and aggregates the result. Output files are not
/// written; see [`ExperimentResult::write`].
pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let mut truth_rng = stream_rng(config.seed, TRUTH_STREAM);
    let (constants, records, summary) = match config.experiment {
        Experiment::BoundCoverageT | Experiment::BoundCoverageSigma => coverage(config, &mut truth_rng)?,
        Experiment::Sandwich => sandwich(config)?,
        Experiment::Elementary => elementary_run(config, &mut truth_rng)?,
        Experiment::RefinedOracle | Experiment::DiagonalBound => refined_run(config, &mut truth_rng)?,
        Experiment::Certificate => certificate_run(config)?,
        Experiment::Contraction => contraction_run(config)?,
    };
    let generated_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    Ok(ExperimentResult {
        schema_version: SCHEMA_VERSION,
        generated_at,
        config: config.clone(),
        constants,
        records,
        summary,
    })
}

type Parts = (BTreeMap<String, f64>, Vec<ReplicateRecord>, Summary);

fn replicates(
    config: &ExperimentConfig,
    body: impl Fn(usize, &mut ChaCha8Rng) -> Result<ReplicateRecord> + Sync,
) -> Result<Vec<ReplicateRecord>> {
    let mut out = (0..config.replicates)
        .into_par_iter()
        .map(|i| body(i, &mut stream_rng(config.seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|r| r.index);
    Ok(out)
}

fn all_events(records: &[ReplicateRecord], event: &str) -> bool {
    records.iter().all(|r| r.events.get(event).copied().unwrap_or(false))
}

fn summarise(coverage: Vec<Coverage>, checks: BTreeMap<String, bool>, conditions: BTreeMap<String, bool>) -> Summary {
    let status = if conditions.values().any(|ok| !ok) {
        Status::ConditionsUnmet
    } else if coverage.iter().all(|c| c.pass) && checks.values().all(|ok| *ok) {
        Status::Pass
    } else {
        Status::Fail
    };
    Summary { coverage, checks, conditions, status }
}

fn copula(config: &ExperimentConfig, sigma: CorrelationMatrix) -> CopulaSpec {
    CopulaSpec {
        sigma,
        generator: config.copula.generator,
        marginals: config.copula.marginals.clone(),
        seed: config.seed,
    }
}

fn fixed_sigma(config: &ExperimentConfig, rng: &mut impl Rng) -> Result<CorrelationMatrix> {
    match &config.copula.sigma {
        Some(s) => Ok(s.clone()),
        None => random_correlation(config.d, rng),
    }
}

fn coverage(config: &ExperimentConfig, truth_rng: &mut impl Rng) -> Result<Parts> {
    let sigma = fixed_sigma(config, truth_rng)?;
    let t = arcsine_transform(&sigma)?;
    let t_norm = operator_norm(t.values())?;
    let spec = copula(config, sigma.clone());
    let (n, d, alpha) = (config.n, config.d, config.alpha);
    let records = replicates(config, |i, rng| {
        let that = kendall_tau_matrix(&sample_with(&spec, n, rng)?);
        let that_norm = operator_norm(that.values())?;
        let tb = t_deviation_bounds(t_norm, that_norm, n, d, alpha)?;
        let sb = sigma_deviation_bounds(t_norm, that_norm, n, d, alpha)?;
        let t_err = spectral_norm(&(that.values() - t.values()));
        let sigma_hat = sine_transform(&that)?;
        let s_err = spectral_norm(&(sigma_hat.values() - sigma.values()));
        let covered = t_err < tb.population;
        let f = bounds::f(n, d, alpha)?;

        let mut rec = ReplicateRecord::new(i);
        rec.value("that_norm", that_norm);
        rec.value("t_error", t_err);
        rec.value("t_rhs_a", tb.population);
        rec.value("t_rhs_b", tb.data_driven);
        rec.value("t_rhs_c", tb.guarantee);
        rec.value("sigma_error", s_err);
        rec.value("sigma_rhs_pop", sb.population);
        rec.value("sigma_rhs_dd", sb.data_driven);
        rec.value("sigma_rhs_guar", sb.guarantee);
        rec.event("t_covered", covered);
        rec.event("sigma_covered", s_err < sb.data_driven);
        rec.event(
            "t_chain",
            !covered || (tb.population <= tb.data_driven && tb.data_driven <= tb.guarantee),
        );
        rec.event(
            "sigma_chain",
            !covered || (sb.population <= sb.data_driven && sb.data_driven <= sb.guarantee),
        );
        rec.event("sigma_gap_identity", (sb.guarantee - sb.population - bounds::C1 * f * f).abs() <= 1e-12);
        Ok(rec)
    })?;
    let mut constants = BTreeMap::new();
    constants.insert("t_norm".into(), t_norm);
    constants.insert("f".into(), bounds::f(n, d, alpha)?);
    let (cov, checks) = if config.experiment == Experiment::BoundCoverageT {
        (
            Coverage::new("t_covered", &records, 1.0 - alpha, false),
            [("t_chain".to_owned(), all_events(&records, "t_chain"))].into(),
        )
    } else {
        (
            Coverage::new("sigma_covered", &records, 1.0 - alpha - alpha * alpha / 4.0, false),
            [
                ("sigma_chain".to_owned(), all_events(&records, "sigma_chain")),
                ("sigma_gap_identity".to_owned(), all_events(&records, "sigma_gap_identity")),
            ]
            .into(),
        )
    };
    Ok((constants, records, summarise(vec![cov], checks, BTreeMap::new())))
}

fn sandwich(config: &ExperimentConfig) -> Result<Parts> {
    let records = replicates(config, |i, rng| {
        let sigma = match &config.copula.sigma {
            Some(s) => s.clone(),
            None => random_correlation(config.d, rng)?,
        };
        let rep = t_sigma_sandwich_check(&sigma)?;
        let mut rec = ReplicateRecord::new(i);
        rec.value("lower", rep.lower);
        rec.value("t_norm", rep.t_norm);
        rec.value("upper", rep.upper);
        rec.event("sandwich", rep.ok);
        Ok(rec)
    })?;
    let cov = Coverage::new("sandwich", &records, 1.0, true);
    Ok((BTreeMap::new(), records, summarise(vec![cov], BTreeMap::new(), BTreeMap::new())))
}

fn factor_truth(config: &ExperimentConfig, rng: &mut impl Rng) -> Result<FactorDecomposition> {
    make_factor_truth(config.factor.as_ref().expect("validated"), rng)
}

fn elementary_run(config: &ExperimentConfig, truth_rng: &mut impl Rng) -> Result<Parts> {
    let truth = factor_truth(config, truth_rng)?;
    let (n, d, alpha) = (config.n, config.d, config.alpha);
    let sigma = truth.sigma();
    let t_norm = operator_norm(arcsine_transform(&sigma)?.values())?;
    let mu_bar = elementary::mu_bar_elementary(t_norm, n, d, alpha)?;
    let cond = check_elementary_conditions(&truth, mu_bar, n, d, alpha)?;
    let spec = copula(config, sigma);
    let records = replicates(config, |i, rng| {
        let that = kendall_tau_matrix(&sample_with(&spec, n, rng)?);
        let that_norm = operator_norm(that.values())?;
        let mu = match config.solver.mu_override {
            Some(mu) => mu,
            None => elementary::mu_elementary(that_norm, n, d, alpha)?,
        };
        let sigma_hat = sine_transform(&that)?;
        let est = estimate_elementary(sigma_hat.values(), mu)?;
        let ev = elementary_event(&est, &truth, mu_bar)?;
        let mut rec = ReplicateRecord::new(i);
        rec.value("mu", mu);
        rec.value("r_hat", est.r_hat as f64);
        rec.value("sigma2_hat", est.sigma2_hat);
        rec.value("frobenius_sq", ev.frobenius_sq);
        rec.value("sigma2_error", ev.sigma2_error);
        rec.event("rank", ev.rank_ok);
        rec.event("frobenius", ev.frobenius_ok);
        rec.event("sigma2", ev.sigma2_ok);
        rec.event("joint", ev.joint);
        rec.event("mu_below_mu_bar", mu <= mu_bar);
        Ok(rec)
    })?;
    let constants = BTreeMap::from([
        ("t_norm".to_owned(), t_norm),
        ("mu_bar".to_owned(), mu_bar),
        ("sigma2".to_owned(), cond.sigma2),
        ("lambda_r".to_owned(), cond.lambda_r.unwrap_or(f64::NAN)),
        ("f_squared".to_owned(), cond.f_squared),
    ]);
    let conditions = BTreeMap::from([
        ("rank_below_dim".to_owned(), cond.rank_below_dim),
        ("eigen_gap".to_owned(), cond.eigen_gap),
        ("sample_size".to_owned(), cond.sample_size),
    ]);
    let cov = Coverage::new("joint", &records, 1.0 - 2.0 * alpha, false);
    Ok((constants, records, summarise(vec![cov], BTreeMap::new(), conditions)))
}

/// `‖Σ̃ - Σ‖_F²` and `‖P_Ω(Θ̃ - Θ*)‖₁` for one refined estimate.
pub fn refined_errors(
    sigma_tilde: &CorrelationMatrix,
    theta_tilde: &DMatrix<f64>,
    truth: &FactorDecomposition,
) -> (f64, f64) {
    let frob = (sigma_tilde.values() - truth.sigma().values()).norm_squared();
    let diag = l1_entry(&p_omega(&(theta_tilde - truth.theta_star())));
    (frob, diag)
}

fn refined_run(config: &ExperimentConfig, truth_rng: &mut impl Rng) -> Result<Parts> {
    let truth = factor_truth(config, truth_rng)?;
    let (n, d, alpha) = (config.n, config.d, config.alpha);
    let sigma = truth.sigma();
    let t_norm = operator_norm(arcsine_transform(&sigma)?.values())?;
    let mu_bar = refined::mu_bar_refined(t_norm, n, d, alpha)?;
    let mu_prime = refined::mu_prime(t_norm, n, d, alpha)?;
    let oracle = oracle_rhs(&truth, mu_bar);
    let diag_rhs = diagonal_bound_rhs(&truth, mu_prime, mu_bar)?;
    let gamma_full = truth.gamma_r(truth.rank())?;
    let opts = SolverOptions { tol: config.solver.tol, max_iter: config.solver.max_iter };
    let spec = copula(config, sigma);
    let records = replicates(config, |i, rng| {
        let that = kendall_tau_matrix(&sample_with(&spec, n, rng)?);
        let that_norm = operator_norm(that.values())?;
        let mu = match config.solver.mu_override {
            Some(mu) => mu,
            None => refined::mu_refined(that_norm, n, d, alpha)?,
        };
        let sigma_hat = sine_transform(&that)?;
        let res = solve_refined(sigma_hat.values(), mu, opts)?;
        let (frob, diag) = refined_errors(&res.sigma_tilde, &res.theta_tilde, &truth);
        let mut rec = ReplicateRecord::new(i);
        rec.value("mu", mu);
        rec.value("iterations", res.iterations as f64);
        rec.value("rank", res.rank as f64);
        rec.value("frobenius_sq", frob);
        rec.value("diagonal_l1", diag);
        rec.value("kkt_tangent_residual", res.kkt_tangent_residual);
        rec.value("kkt_orthogonal_excess", res.kkt_orthogonal_excess);
        rec.event("oracle", frob <= oracle.bound);
        rec.event("diagonal", diag <= diag_rhs);
        rec.event("converged", res.converged);
        rec.event("mu_below_mu_bar", mu <= mu_bar);
        Ok(rec)
    })?;
    let constants = BTreeMap::from([
        ("t_norm".to_owned(), t_norm),
        ("mu_bar".to_owned(), mu_bar),
        ("mu_prime".to_owned(), mu_prime),
        ("oracle_bound".to_owned(), oracle.bound),
        ("oracle_r_cap".to_owned(), oracle.r_cap as f64),
        ("oracle_argmin_r".to_owned(), oracle.argmin_r as f64),
        ("diagonal_bound".to_owned(), diag_rhs),
        ("gamma_r_star".to_owned(), gamma_full),
    ]);
    let floor = 1.0 - 2.0 * alpha;
    let mut coverage = Vec::new();
    if config.experiment == Experiment::RefinedOracle {
        coverage.push(Coverage::new("oracle", &records, floor, false));
    }
    coverage.push(Coverage::new("diagonal", &records, floor, false));
    let checks = BTreeMap::from([("converged".to_owned(), all_events(&records, "converged"))]);
    let conditions = BTreeMap::from([(
        "gamma_r_star_incoherent".to_owned(),
        gamma_full <= oracle::GAMMA_CEILING + oracle::GAMMA_SLACK,
    )]);
    Ok((constants, records, summarise(coverage, checks, conditions)))
}

const MAX_BASIS_DRAWS: usize = 100_000;

/// Orthonormalised Gaussian `d × r` basis, redrawn until `γ < gamma_below`.
fn incoherent_basis(d: usize, r: usize, gamma_below: f64, rng: &mut impl Rng) -> Result<TangentSpace> {
    if r > d {
        return arg_err(format!("rank {r} exceeds dimension {d}"));
    }
    for _ in 0..MAX_BASIS_DRAWS {
        let g = DMatrix::from_fn(d, r, |_, _| rng.sample::<f64, _>(StandardNormal));
        let ts = TangentSpace::from_basis(if r == 0 { g } else { g.qr().q() })?;
        if ts.gamma() < gamma_below {
            return Ok(ts);
        }
    }
    Err(Error::Infeasible(format!(
        "no {d}x{r} basis with gamma < {gamma_below} in {MAX_BASIS_DRAWS} draws"
    )))
}

fn certificate_run(config: &ExperimentConfig) -> Result<Parts> {
    let (d, r, c) = (config.d, config.rank, config.c);
    let records = replicates(config, |i, rng| {
        let ts = incoherent_basis(d, r, 1.0 / (c + 3.0), rng)?;
        let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let e = (&g + g.transpose()) / (2.0 * (d as f64).sqrt());
        let mu = match config.solver.mu_override {
            Some(mu) => mu,
            None => 1.01 * mu_threshold(ts.gamma(), c, spectral_norm(&e))?,
        };
        let (_, rep) = construct_certificate(&ts, &e, mu, c)?;
        let mut rec = ReplicateRecord::new(i);
        rec.value("gamma", rep.gamma);
        rec.value("mu", mu);
        rec.value("iterations", rep.iterations as f64);
        rec.value("tangent_residual", rep.tangent_residual);
        rec.value("equality_residual", rep.equality_residual);
        rec.value("orthogonal_norm_over_mu", rep.orthogonal_norm / mu);
        rec.value("phi_norm_over_mu", rep.phi_norm / mu);
        rec.event("in_tangent", rep.in_tangent);
        rec.event("equality", rep.equality_ok);
        rec.event("orthogonal", rep.orthogonal_ok);
        rec.event("phi_norm", rep.phi_norm_ok);
        rec.event("certificate", rep.all_pass());
        Ok(rec)
    })?;
    let cov = Coverage::new("certificate", &records, 1.0, true);
    Ok((BTreeMap::new(), records, summarise(vec![cov], BTreeMap::new(), BTreeMap::new())))
}

fn contraction_run(config: &ExperimentConfig) -> Result<Parts> {
    let (d, r) = (config.d, config.rank);
    let records = replicates(config, |i, rng| {
        let ts = incoherent_basis(d, r, f64::INFINITY, rng)?;
        let rep = contraction_check(&ts, 1, rng.next_u64())?;
        let mut rec = ReplicateRecord::new(i);
        rec.value("gamma", rep.gamma);
        rec.value("diag_inf_ratio", rep.diag_inf);
        rec.value("inf_from_spectral_ratio", rep.inf_from_spectral);
        rec.value("diag_l1_ratio", rep.diag_l1);
        rec.value("sandwich_inf_ratio", rep.sandwich_inf);
        rec.event("contraction", rep.all_pass());
        Ok(rec)
    })?;
    let cov = Coverage::new("contraction", &records, 1.0, true);
    Ok((BTreeMap::new(), records, summarise(vec![cov], BTreeMap::new(), BTreeMap::new())))
}
