//! `verify`: the invariant suites run against the configured instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use superhedge_core::{
    backtest_path, chi_factor, deformation_sweep, deformed_params, gamma_max, gamma_max_naive,
    gamma_min, hedge_weights, lattice_slacks, phi, solve_deformation, MarketState, OrderedModel,
    SolveOptions, DEFAULT_NAIVE_CAP, S_MAX,
};

use crate::commands::{containment, families, prepare, run_family};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{num, Outcome};

pub const IDENTITY_TOL: f64 = 1e-12;
pub const ORACLE_TOL: f64 = 1e-10;
pub const RECURSION_TOL: f64 = 1e-10;
pub const NEAR_ONE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub check: String,
    pub passed: bool,
    pub deviation: f64,
    pub tolerance: f64,
}

struct Checks(Vec<Check>);

impl Checks {
    fn push(&mut self, suite: &'static str, check: impl Into<String>, deviation: f64, tol: f64) {
        self.0.push(Check {
            suite,
            check: check.into(),
            passed: deviation <= tol,
            deviation,
            tolerance: tol,
        });
    }
}

fn fail(e: impl std::fmt::Display) -> CliError {
    CliError::Verification(e.to_string())
}

fn random_path(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
        .collect()
}

fn martingale(o: &OrderedModel, c: &mut Checks) {
    let q = o.q();
    let m = o.assets();
    c.push(
        "martingale",
        "sum_q",
        (q.iter().sum::<f64>() - 1.0).abs(),
        IDENTITY_TOL,
    );
    // b_0 = 1 for the bond, so i = 0 repeats the total mass.
    let partial = (0..=m)
        .map(|i| {
            let b = if i == 0 { 1.0 } else { o.b()[i - 1] };
            (q[i..].iter().sum::<f64>() - b).abs()
        })
        .fold(0.0, f64::max);
    c.push("martingale", "partial_sums", partial, IDENTITY_TOL);
    let chi = (0..=m)
        .map(|i| {
            let s: f64 = (0..=m).map(|j| q[j] * chi_factor(o, i, j)).sum();
            (s - o.rate()).abs() / (1.0 + o.rate())
        })
        .fold(0.0, f64::max);
    c.push("martingale", "chi_mean_is_R", chi, IDENTITY_TOL);
}

fn oracle(
    cfg: &RunConfig,
    o: &OrderedModel,
    rng: &mut ChaCha8Rng,
    c: &mut Checks,
) -> Result<(), CliError> {
    let (n, m) = (cfg.model.steps, cfg.model.assets());
    // First state along a random prefix at which the naive sum fits the cap.
    let mut k = 0;
    while k < n && ((m as f64 + 1.0).powi((n - k) as i32)) > DEFAULT_NAIVE_CAP as f64 {
        k += 1;
    }
    let prefix = random_path(rng, k, m);
    let state = MarketState::from_path(&cfg.model, &prefix).map_err(fail)?;
    let fast = gamma_max(o, &cfg.option, &state);
    let slow = gamma_max_naive(o, &cfg.option, &state, DEFAULT_NAIVE_CAP).map_err(fail)?;
    c.push(
        "oracle",
        format!("gamma_max_vs_naive@k={k}"),
        (fast - slow).abs() / (1.0 + slow.abs()),
        ORACLE_TOL,
    );
    Ok(())
}

fn recursion(
    cfg: &RunConfig,
    o: &OrderedModel,
    path: &[Vec<f64>],
    c: &mut Checks,
) -> Result<(), CliError> {
    let mut state = MarketState::initial(&cfg.model);
    let mut worst = 0.0f64;
    let mut order = 0.0f64;
    for jump in path {
        let high = gamma_max(o, &cfg.option, &state);
        let low = gamma_min(o, &cfg.option, &state);
        order = order.max(low - high);
        let mut next = 0.0;
        for t in 0..=o.assets() {
            let succ = state.vertex_successor(o, t).map_err(fail)?;
            next += o.q()[t] * gamma_max(o, &cfg.option, &succ);
        }
        worst = worst.max((high - next / o.rate()).abs() / (1.0 + high.abs()));
        state = state.advance(&cfg.model, jump).map_err(fail)?;
    }
    c.push("recursion", "one_step_recursion", worst, RECURSION_TOL);
    c.push(
        "recursion",
        "gamma_min_le_gamma_max",
        order.max(0.0),
        IDENTITY_TOL,
    );
    Ok(())
}

fn superhedge(
    cfg: &RunConfig,
    o: &OrderedModel,
    paths: &[Vec<Vec<f64>>],
    c: &mut Checks,
) -> Result<(), CliError> {
    let tol = cfg.run.tol;
    let (mut value_err, mut slack) = (0.0f64, f64::INFINITY);
    for path in paths {
        let report = backtest_path(o, &cfg.option, path).map_err(fail)?;
        value_err = value_err.max(report.max_value_error());
        slack = slack.min(report.min_slack());
    }
    // Vertex successors along the first path.
    let mut vertex = f64::INFINITY;
    let mut state = MarketState::initial(&cfg.model);
    for jump in &paths[0] {
        let h = hedge_weights(o, &cfg.option, &state).map_err(fail)?;
        for s in lattice_slacks(o, &cfg.option, &h, &state).map_err(fail)? {
            vertex = vertex.min(s);
        }
        state = state.advance(&cfg.model, jump).map_err(fail)?;
    }
    c.push("superhedge", "value_equals_gamma_max", value_err, tol);
    c.push("superhedge", "realized_slack", (-slack).max(0.0), tol);
    c.push("superhedge", "vertex_slack", (-vertex).max(0.0), tol);
    Ok(())
}

fn containment_suite(cfg: &RunConfig, o: &OrderedModel, c: &mut Checks) -> Result<(), CliError> {
    let state = MarketState::initial(&cfg.model);
    let low = gamma_min(o, &cfg.option, &state);
    let high = gamma_max(o, &cfg.option, &state);
    let scale = cfg.option.scale(&cfg.model);
    for family in families(o, cfg)? {
        let est = run_family(o, cfg, &family)?;
        let check = containment(family.name, &est, low, high, scale);
        c.push(
            "containment",
            format!("inside_interval/{}", family.name),
            check.outside_by,
            4.0 * est.std_error,
        );
        if let Some((d, allowed)) = check.near {
            let end = if family.name == "center-box" {
                "gamma_min"
            } else {
                "gamma_max"
            };
            c.push(
                "containment",
                format!("near_{end}/{}", family.name),
                d,
                allowed,
            );
        }
    }
    Ok(())
}

fn deformation(cfg: &RunConfig, o: &OrderedModel, c: &mut Checks) -> Result<(), CliError> {
    let option = &cfg.option;
    let state = MarketState::initial(&cfg.model);
    let low = gamma_min(o, option, &state);
    let high = gamma_max(o, option, &state);
    let scale = option.scale(&cfg.model);
    let at_zero = phi(o, option, 0.0).map_err(fail)?;
    c.push(
        "deformation",
        "phi_at_zero_is_gamma_max",
        (at_zero - high).abs(),
        0.0,
    );
    let near_one = phi(o, option, 1.0 - 1e-6).map_err(fail)?;
    c.push(
        "deformation",
        "phi_near_one_is_gamma_min",
        (near_one - low).abs(),
        NEAR_ONE_TOL * (1.0 + high),
    );
    let base_b = o.b_user();
    let (mut b_dev, mut min_dev) = (0.0f64, 0.0f64);
    for row in deformation_sweep(o, option, cfg.run.sweep_points).map_err(fail)? {
        let params = deformed_params(o, row.s.min(S_MAX)).map_err(fail)?;
        for (x, y) in params.b().iter().zip(&base_b) {
            b_dev = b_dev.max((x - y).abs());
        }
        let deformed = superhedge_core::deformed_model(o, row.s).map_err(fail)?;
        min_dev = min_dev.max((gamma_min(&deformed, option, &state) - low).abs());
    }
    c.push("deformation", "b_invariant", b_dev, IDENTITY_TOL);
    c.push("deformation", "gamma_min_invariant", min_dev, IDENTITY_TOL);
    let targets = cfg.run.verify_targets;
    let tol = 1e-9 * scale;
    if high - low <= IDENTITY_TOL * scale || targets == 0 {
        c.push("deformation", "round_trip (no interior targets)", 0.0, tol);
        return Ok(());
    }
    let mut worst = 0.0f64;
    for i in 1..=targets {
        let target = low + (high - low) * i as f64 / (targets + 1) as f64;
        let sol = solve_deformation(o, option, target, &SolveOptions::default()).map_err(fail)?;
        let back = phi(o, option, sol.s).map_err(fail)?;
        worst = worst.max((back - target).abs());
    }
    c.push(
        "deformation",
        format!("round_trip_{targets}_targets"),
        worst,
        tol,
    );
    Ok(())
}

pub fn run_checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let o = prepare(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let (n, m) = (cfg.model.steps, cfg.model.assets());
    let paths: Vec<_> = (0..cfg.run.verify_paths.max(1))
        .map(|_| random_path(&mut rng, n, m))
        .collect();
    let mut c = Checks(Vec::new());
    martingale(&o, &mut c);
    oracle(cfg, &o, &mut rng, &mut c)?;
    recursion(cfg, &o, &paths[0], &mut c)?;
    superhedge(cfg, &o, &paths, &mut c)?;
    containment_suite(cfg, &o, &mut c)?;
    deformation(cfg, &o, &mut c)?;
    Ok(c.0)
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let start = std::time::Instant::now();
    let checks = run_checks(cfg)?;
    let mut out = Outcome::default();
    for ch in &checks {
        out.line(format!(
            "{} {:<12} {:<40} deviation = {:<12.3e} tolerance = {:.3e}",
            if ch.passed { "PASS" } else { "FAIL" },
            ch.suite,
            ch.check,
            ch.deviation,
            ch.tolerance
        ));
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.check.as_str())
        .collect();
    out.line(format!(
        "{} of {} checks passed ({:.1} ms)",
        checks.len() - failed.len(),
        checks.len(),
        start.elapsed().as_secs_f64() * 1e3
    ));
    let header = ["suite", "check", "passed", "deviation", "tolerance"].map(String::from);
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.suite.to_string(),
                c.check.clone(),
                c.passed.to_string(),
                num(c.deviation),
                num(c.tolerance),
            ]
        })
        .collect();
    out.csv("verify.csv", &header, &rows);
    out.json(
        "verify.json",
        &json!({
            "config": cfg.echo(),
            "passed": failed.is_empty(),
            "checks": checks,
        }),
    );
    if !failed.is_empty() {
        out.failure = Some(failed.join(", "));
    }
    Ok(out)
}
