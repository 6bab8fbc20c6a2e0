//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use taucopula::bounds::{self, sigma_deviation_bounds, t_sigma_sandwich_check};
use taucopula::elementary::estimate_elementary;
use taucopula::harness::{self, CopulaSettings, Experiment, ExperimentConfig, ExperimentResult, SolverSettings};
use taucopula::kendall::{kendall_tau_matrix, kendall_tau_pair_fast, kendall_tau_pair_naive, SampleMatrix};
use taucopula::linalg::SymEigen;
use taucopula::refined::{off_diagonal, solve_refined, SolverOptions};
use taucopula::simulate::{
    apply_marginals, make_factor_truth, random_correlation, sample_latent, sample_with, stream_rng, CopulaSpec,
    EigenvectorStyle, FactorSpec, Generator, Marginal,
};
use taucopula::transform::{arcsine_transform, operator_norm, sine_transform, CorrelationMatrix, Provenance};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: &str, limit: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = body();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let pass = out.pass && in_time;
    println!(
        "criterion {id:>2}: {} | {} | {:.1}s (limit {}s)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn config(experiment: Experiment, n: usize, d: usize, alpha: f64, replicates: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        experiment,
        n,
        d,
        alpha,
        replicates,
        seed,
        factor: None,
        copula: CopulaSettings::default(),
        solver: SolverSettings::default(),
        c: 2.0,
        rank: 2,
        output_path: None,
    }
}

fn coverage_line(res: &ExperimentResult) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for c in &res.summary.coverage {
        ok &= c.frequency >= c.floor && c.pass;
        parts.push(format!(
            "{} {}/{} = {:.3} (floor {:.4}, 99% lower {:.3})",
            c.event, c.successes, c.replicates, c.frequency, c.floor, c.lower_confidence
        ));
    }
    for (k, v) in &res.summary.checks {
        ok &= *v;
        parts.push(format!("{k} {}", if *v { "ok" } else { "violated" }));
    }
    (ok, parts.join(", "))
}

fn tau_oracle() -> Outcome {
    let mut rng = stream_rng(101, 0);
    let mut worst = 0.0f64;
    let mut tied = 0;
    for trial in 0..200 {
        let n = rng.random_range(2..=500);
        let levels = if trial % 4 == 0 { rng.random_range(2..=10) } else { 0 };
        let mut draw = || {
            let u: f64 = rng.random();
            if levels > 0 {
                (u * levels as f64).floor()
            } else {
                u
            }
        };
        let x: Vec<f64> = (0..n).map(|_| draw()).collect();
        let y: Vec<f64> = (0..n).map(|_| draw()).collect();
        if levels > 0 {
            tied += 1;
        }
        let a = kendall_tau_pair_fast(&x, &y).unwrap();
        let b = kendall_tau_pair_naive(&x, &y).unwrap();
        worst = worst.max((a - b).abs());
    }
    Outcome {
        pass: worst <= 1e-12 && tied >= 20,
        detail: format!("200 pairs ({tied} with ties), max |fast - naive| = {worst:.1e}"),
    }
}

fn tau_psd() -> Outcome {
    let mut rng = stream_rng(102, 0);
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for _ in 0..100 {
        let d = rng.random_range(2..=20);
        let n = rng.random_range(10..=300);
        let spec = CopulaSpec::gaussian(random_correlation(d, &mut rng).unwrap(), 0);
        let t = kendall_tau_matrix(&sample_with(&spec, n, &mut rng).unwrap());
        let lmin = SymEigen::new(t.values()).unwrap().min();
        worst = worst.min(lmin / d as f64);
        ok &= lmin >= -1e-10 * d as f64;
    }
    Outcome { pass: ok, detail: format!("100 samples, min lambda_min(T_hat)/d = {worst:.3e}") }
}

fn sandwich() -> Outcome {
    let mut rng = stream_rng(103, 0);
    let mut ok = 0;
    for _ in 0..200 {
        let d = rng.random_range(1..=30);
        let s = random_correlation(d, &mut rng).unwrap();
        ok += usize::from(t_sigma_sandwich_check(&s).unwrap().ok);
    }
    let id = t_sigma_sandwich_check(&CorrelationMatrix::identity(12, Provenance::Population)).unwrap();
    let equality = id.t_norm == 1.0 && id.upper == 1.0 && (id.lower - 2.0 / PI).abs() < 1e-15;
    Outcome {
        pass: ok == 200 && equality,
        detail: format!("{ok}/200 random matrices, identity gives ||T|| = {} = ||Sigma|| = {}", id.t_norm, id.upper),
    }
}

fn theorem_tau() -> Outcome {
    let res = harness::run(&config(Experiment::BoundCoverageT, 400, 8, 0.1, 300, 104)).unwrap();
    let (ok, detail) = coverage_line(&res);
    let lower_ok = res.summary.coverage[0].lower_confidence >= 0.87;
    Outcome { pass: ok && lower_ok, detail }
}

fn theorem_sigma() -> Outcome {
    let res = harness::run(&config(Experiment::BoundCoverageSigma, 400, 8, 0.1, 300, 105)).unwrap();
    let (ok, detail) = coverage_line(&res);
    let lower_ok = res.summary.coverage[0].lower_confidence >= 0.87;
    let mut gap = 0.0f64;
    for (t, th) in [(0.0, 0.0), (0.3, 2.0), (2.0, 1.7), (7.5, 8.0)] {
        let b = sigma_deviation_bounds(t, th, 400, 8, 0.1).unwrap();
        let f = bounds::f(400, 8, 0.1).unwrap();
        gap = gap.max((b.guarantee - b.population - PI * f * f).abs());
    }
    Outcome {
        pass: ok && lower_ok && gap <= 1e-12,
        detail: format!("{detail}, max |guar - pop - pi f^2| = {gap:.1e}"),
    }
}

fn elementary_spec() -> FactorSpec {
    FactorSpec {
        d: 16,
        r: 2,
        factor_eigenvalues: vec![7.3, 7.1],
        eigenvector_style: EigenvectorStyle::OrthogonalDesign,
        elementary: true,
    }
}

fn theorem_elementary() -> Outcome {
    let mut cfg = config(Experiment::Elementary, 20_000, 16, 0.25, 200, 106);
    cfg.factor = Some(elementary_spec());
    let res = harness::run(&cfg).unwrap();
    let (ok, detail) = coverage_line(&res);
    let conditions = res.summary.conditions.values().all(|v| *v);

    let truth = make_factor_truth(&elementary_spec(), &mut stream_rng(0, 0)).unwrap();
    let est = estimate_elementary(truth.sigma().values(), 1.0).unwrap();
    let sigma2 = truth.elementary_sigma2().unwrap();
    let noiseless = est.r_hat == 2
        && (est.sigma2_hat - sigma2).abs() <= 1e-10
        && (&est.theta_hat - truth.theta_star()).amax() <= 1e-10;
    Outcome {
        pass: ok && conditions && noiseless,
        detail: format!(
            "n = 20000, mu_bar = {:.3}, lambda_r = 7.1, {detail}, noiseless recovery {}",
            res.constants["mu_bar"],
            if noiseless { "exact" } else { "FAILED" }
        ),
    }
}

fn solver() -> Outcome {
    let opts = SolverOptions::default();
    let mut rng = stream_rng(107, 0);

    let mut zero_ok = true;
    for _ in 0..10 {
        let d = rng.random_range(2..=10);
        let s = random_correlation(d, &mut rng).unwrap();
        let mu = 1.0001 * operator_norm(&off_diagonal(s.values())).unwrap();
        let r = solve_refined(s.values(), mu, opts).unwrap();
        zero_ok &= r.converged && r.theta_tilde.iter().all(|x| *x == 0.0);
        zero_ok &= r.sigma_tilde.values() == &DMatrix::identity(d, d);
    }

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let s: f64 = rng.random_range(-0.99..0.99);
        let mu: f64 = rng.random_range(0.01..1.0);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, s, s, 1.0]);
        let r = solve_refined(&m, mu, opts).unwrap();
        let expect = s.signum() * (s.abs() - mu).max(0.0);
        worst = worst.max((r.sigma_tilde.values()[(0, 1)] - expect).abs());
    }

    let (mut kkt_ok, mut mono_ok, mut converged) = (true, true, 0);
    for _ in 0..20 {
        let d = rng.random_range(3..=12);
        let spec = CopulaSpec::gaussian(random_correlation(d, &mut rng).unwrap(), 0);
        let that = kendall_tau_matrix(&sample_with(&spec, 200, &mut rng).unwrap());
        let sigma_hat = sine_transform(&that).unwrap();
        let mu = rng.random_range(0.05..1.0);
        let r = solve_refined(sigma_hat.values(), mu, opts).unwrap();
        if r.converged {
            converged += 1;
            kkt_ok &= r.kkt_tangent_residual <= opts.tol * mu.max(1.0) * d as f64;
            kkt_ok &= r.kkt_orthogonal_excess <= opts.tol * mu;
        }
        mono_ok &= r.objective_trace.windows(2).skip(1).all(|w| w[1] <= w[0] + 1e-12);
    }
    Outcome {
        pass: zero_ok && worst <= 1e-6 && kkt_ok && mono_ok && converged == 20,
        detail: format!(
            "(a) zero solution {}, (b) max soft-threshold error {worst:.1e}, (c) KKT {} on {converged}/20 converged, (d) monotone {}",
            if zero_ok { "exact" } else { "FAILED" },
            if kkt_ok { "met" } else { "FAILED" },
            if mono_ok { "yes" } else { "no" }
        ),
    }
}

fn refined_config() -> ExperimentConfig {
    let mut cfg = config(Experiment::RefinedOracle, 100_000, 18, 0.25, 100, 108);
    cfg.factor = Some(FactorSpec {
        d: 18,
        r: 2,
        factor_eigenvalues: vec![12.0, 5.0],
        eigenvector_style: EigenvectorStyle::OrthogonalDesign,
        elementary: false,
    });
    cfg
}

fn theorem_refined(res: &ExperimentResult) -> Outcome {
    let cov = res.summary.coverage.iter().find(|c| c.event == "oracle").unwrap();
    let conditions = res.summary.conditions.values().all(|v| *v);
    Outcome {
        pass: cov.frequency >= cov.floor && cov.pass && conditions && res.summary.checks["converged"],
        detail: format!(
            "gamma_r* = {:.6}, R = {}, argmin r = {}, bound {:.2}, oracle {}/{} = {:.3} (99% lower {:.3})",
            res.constants["gamma_r_star"],
            res.constants["oracle_r_cap"],
            res.constants["oracle_argmin_r"],
            res.constants["oracle_bound"],
            cov.successes,
            cov.replicates,
            cov.frequency,
            cov.lower_confidence
        ),
    }
}

fn diagonal_bound(res: &ExperimentResult) -> Outcome {
    let cov = res.summary.coverage.iter().find(|c| c.event == "diagonal").unwrap();
    Outcome {
        pass: cov.frequency >= cov.floor && cov.pass,
        detail: format!(
            "bound {:.2}, diagonal {}/{} = {:.3} (floor {:.2})",
            res.constants["diagonal_bound"], cov.successes, cov.replicates, cov.frequency, cov.floor
        ),
    }
}

fn certificate() -> Outcome {
    let mut cfg = config(Experiment::Certificate, 0, 40, 0.0, 50, 109);
    cfg.rank = 2;
    let res = harness::run(&cfg).unwrap();
    let max = |k: &str| res.records.iter().map(|r| r.values[k]).fold(0.0, f64::max);
    let (ok, detail) = coverage_line(&res);
    Outcome {
        pass: ok,
        detail: format!(
            "d = 40, r = 2, c = 2, {detail}, max ||Phi||/mu = {:.3}, max gamma = {:.3}",
            max("phi_norm_over_mu"),
            max("gamma")
        ),
    }
}

fn contraction() -> Outcome {
    let mut cfg = config(Experiment::Contraction, 0, 12, 0.0, 500, 110);
    cfg.rank = 3;
    let res = harness::run(&cfg).unwrap();
    let max = |k: &str| res.records.iter().map(|r| r.values[k]).fold(0.0, f64::max);
    let (ok, detail) = coverage_line(&res);
    Outcome {
        pass: ok,
        detail: format!(
            "{detail}, max ratios {:.3} / {:.3} / {:.3} / {:.3}",
            max("diag_inf_ratio"),
            max("inf_from_spectral_ratio"),
            max("diag_l1_ratio"),
            max("sandwich_inf_ratio")
        ),
    }
}

fn invariance() -> Outcome {
    let mut rng = stream_rng(112, 0);
    let d = 5;
    let sigma = random_correlation(d, &mut rng).unwrap();
    let base = CopulaSpec::gaussian(sigma.clone(), 0);
    let latent = sample_latent(&base, 1000, &mut stream_rng(112, 1)).unwrap();
    let t0 = kendall_tau_matrix(&SampleMatrix::new(latent.clone()).unwrap());

    let mut marginal_ok = true;
    for m in [Marginal::Exp, Marginal::LogitNormal, Marginal::Cube] {
        let spec = CopulaSpec { marginals: vec![m; d], ..base.clone() };
        let mut x = latent.clone();
        apply_marginals(&spec, &mut x);
        marginal_ok &= kendall_tau_matrix(&SampleMatrix::new(x).unwrap()) == t0;
    }
    let mixed = CopulaSpec {
        marginals: vec![Marginal::Exp, Marginal::Cube, Marginal::Identity, Marginal::LogitNormal, Marginal::Exp],
        ..base.clone()
    };
    let mut x = latent.clone();
    apply_marginals(&mixed, &mut x);
    marginal_ok &= kendall_tau_matrix(&SampleMatrix::new(x).unwrap()) == t0;

    let mut order: Vec<usize> = (0..latent.nrows()).collect();
    order.shuffle(&mut rng);
    let permuted = latent.select_rows(&order);
    let perm_ok = kendall_tau_matrix(&SampleMatrix::new(permuted).unwrap()) == t0;

    let n = 4000;
    let g = kendall_tau_matrix(&sample_with(&base, n, &mut stream_rng(113, 0)).unwrap());
    let tspec = CopulaSpec { generator: Generator::StudentT { nu: 3.0 }, ..base };
    let t = kendall_tau_matrix(&sample_with(&tspec, n, &mut stream_rng(113, 0)).unwrap());
    let nf = n as f64;
    let se = (2.0 * 2.0 * (2.0 * nf + 5.0) / (9.0 * nf * (nf - 1.0))).sqrt();
    let worst = (g.values() - t.values()).amax() / se;

    let population = arcsine_transform(&sigma).unwrap();
    let bias = (g.values() - population.values()).amax().max((t.values() - population.values()).amax()) / se;
    Outcome {
        pass: marginal_ok && perm_ok && worst <= 3.0,
        detail: format!(
            "marginals {}, row permutation {}, Gaussian vs t(3): max |diff| = {worst:.2} SE (max |tau_hat - T| = {bias:.2} SE)",
            if marginal_ok { "exact" } else { "CHANGED" },
            if perm_ok { "exact" } else { "CHANGED" }
        ),
    }
}

fn main() -> ExitCode {
    let s = Duration::from_secs;
    let mut ok = true;
    ok &= check("1", s(10), tau_oracle);
    ok &= check("2", s(30), tau_psd);
    ok &= check("3", s(60), sandwich);
    ok &= check("4", s(120), theorem_tau);
    ok &= check("5", s(120), theorem_sigma);
    ok &= check("6", s(600), theorem_elementary);
    ok &= check("7", s(60), solver);
    let start = Instant::now();
    let refined = harness::run(&refined_config()).unwrap();
    let shared = start.elapsed();
    ok &= check("8", s(900), || {
        let mut out = theorem_refined(&refined);
        out.detail = format!("{} [Monte Carlo {:.1}s]", out.detail, shared.as_secs_f64());
        out
    }) && shared <= s(900);
    ok &= check("9", s(60), certificate);
    ok &= check("10", s(30), contraction);
    ok &= check("11", s(900), || diagonal_bound(&refined));
    ok &= check("12", s(60), invariance);
    println!("acceptance: {}", if ok { "all criteria PASS" } else { "FAILURES above" });
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
