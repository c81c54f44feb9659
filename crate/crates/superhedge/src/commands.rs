//! The five subcommands. Each returns an [`Outcome`]; the binary prints the
//! text and writes the files.

use std::time::Instant;

use serde_json::json;
use superhedge_core::{
    backtest_path, deformation_sweep, enumerate_count_vectors, gamma_max_terms, gamma_max_with,
    gamma_min, hedge_weights, lattice_slacks, make_extremal_measure, make_jensen_measure,
    make_uniform_mixture, mc_price, solve_deformation, DeformationError, Execution, MarketState,
    McConfig, McEstimate, MeasureError, OneStepMeasure, OrderedModel, PathMeasure, SolveOptions,
};

use crate::config::{model_error, RunConfig};
use crate::error::CliError;
use crate::report::{indexed, num, Outcome};

/// Size of the q_0 perturbation applied by the `perturb-q0` fault.
pub const FAULT_Q0_SHIFT: f64 = 1e-3;

/// Box radius cap for the uniform-mixture family.
pub const MIXTURE_RADIUS: f64 = 0.25;

/// Orders the assets and applies any injected fault.
pub fn prepare(cfg: &RunConfig) -> Result<OrderedModel, CliError> {
    cfg.option.validate_for(&cfg.model).map_err(model_error)?;
    let ordered = OrderedModel::new(&cfg.model).map_err(model_error)?;
    Ok(match cfg.run.fault_inject.as_deref() {
        Some("perturb-q0") => {
            let mut q = ordered.q().to_vec();
            q[0] += FAULT_Q0_SHIFT;
            ordered.with_vertex_weights(q)
        }
        _ => ordered,
    })
}

fn measure_error(e: MeasureError) -> CliError {
    CliError::Validation(format!("measure: {e}"))
}

fn deformation_error(e: DeformationError) -> CliError {
    match e {
        DeformationError::TargetNotInterior { .. } | DeformationError::OutOfRange(_) => {
            CliError::Validation(format!("run.target: {e}"))
        }
        DeformationError::Model(m) => model_error(m),
        other => CliError::Verification(other.to_string()),
    }
}

pub fn cmd_price(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ordered = prepare(cfg)?;
    let state = MarketState::initial(&cfg.model);
    let start = Instant::now();
    let low = gamma_min(&ordered, &cfg.option, &state);
    let high = gamma_max_with(&ordered, &cfg.option, &state, Execution::Parallel);
    let wall = start.elapsed();
    let terms = enumerate_count_vectors(cfg.model.steps, cfg.model.assets()).len_exact();

    let mut out = Outcome::default();
    out.line(format!("gamma_min = {low}"));
    out.line(format!("gamma_max = {high}"));
    out.line(format!("count-vector terms = {terms}"));
    out.line(format!("wall time = {:.3} ms", wall.as_secs_f64() * 1e3));
    out.json(
        "price.json",
        &json!({
            "config": cfg.echo(),
            "k": 0,
            "gamma_min": low,
            "gamma_max": high,
            "terms": terms,
        }),
    );
    if cfg.run.dump_terms {
        let m = cfg.model.assets();
        let mut header = indexed("n_", 0, m + 1);
        header.extend(
            [
                "multinomial_weight",
                "q_weight",
                "basket_value",
                "clipped_term",
            ]
            .map(String::from),
        );
        let rows: Vec<Vec<String>> = gamma_max_terms(&ordered, &cfg.option, &state)
            .into_iter()
            .map(|t| {
                let mut row: Vec<String> = t.counts.iter().map(|c| c.to_string()).collect();
                row.extend(
                    [
                        t.multinomial_weight,
                        t.q_weight,
                        t.basket_value,
                        t.clipped_term,
                    ]
                    .map(num),
                );
                row
            })
            .collect();
        out.csv("terms.csv", &header, &rows);
        out.line(format!("wrote {} term rows", rows.len()));
    }
    Ok(out)
}

fn backtest_header(m: usize) -> Vec<String> {
    let mut header: Vec<String> = ["k", "V_alpha", "gamma_max", "realized_slack"]
        .map(String::from)
        .to_vec();
    header.extend(indexed("alpha_", 0, m + 1));
    header
}

pub fn cmd_hedge(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ordered = prepare(cfg)?;
    let option = &cfg.option;
    let m = cfg.model.assets();
    let mut out = Outcome::default();
    let start = Instant::now();

    match &cfg.run.path {
        Some(path) => {
            let report = backtest_path(&ordered, option, path).map_err(|e| match e {
                superhedge_core::PricingError::Model(m) => model_error(m),
                other => CliError::Validation(other.to_string()),
            })?;
            let rows: Vec<Vec<String>> = report
                .rows()
                .map(|s| {
                    let mut row = vec![
                        s.k.to_string(),
                        num(s.portfolio_value),
                        num(s.gamma_max),
                        num(s.slack),
                    ];
                    row.extend(s.alpha.iter().copied().map(num));
                    row
                })
                .collect();
            for s in &report.steps {
                out.line(format!(
                    "k = {:>3}  V_alpha = {:<22} gamma_max = {:<22} slack = {:e}  alpha = {:?}",
                    s.k, s.portfolio_value, s.gamma_max, s.slack, s.alpha
                ));
            }
            let t = &report.terminal;
            out.line(format!(
                "k = {:>3}  V_alpha = {:<22} payoff    = {:<22} slack = {:e}",
                t.k, t.portfolio_value, t.gamma_max, t.slack
            ));
            let passed = report.passed(cfg.run.tol);
            out.line(format!(
                "max |V_alpha - gamma_max| = {:e}, min slack = {:e}, {}",
                report.max_value_error(),
                report.min_slack(),
                if passed {
                    "superhedge holds"
                } else {
                    "SUPERHEDGE VIOLATED"
                }
            ));
            out.csv("backtest.csv", &backtest_header(m), &rows);
            out.json(
                "hedge.json",
                &json!({
                    "config": cfg.echo(),
                    "max_value_error": report.max_value_error(),
                    "min_slack": report.min_slack(),
                    "terminal_payoff": t.gamma_max,
                    "terminal_value": t.portfolio_value,
                    "passed": passed,
                    "steps": report.steps,
                }),
            );
        }
        None => {
            let state = MarketState::initial(&cfg.model);
            let hedge = hedge_weights(&ordered, option, &state)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let high = gamma_max_with(&ordered, option, &state, Execution::Parallel);
            let slacks = lattice_slacks(&ordered, option, &hedge, &state)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            let min_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
            out.line(format!("alpha(0) = {:?}", hedge.alpha));
            out.line(format!("V_alpha(0) = {}", hedge.value));
            out.line(format!("gamma_max(0) = {high}"));
            out.line(format!(
                "min slack over the {} lattice vertices = {min_slack:e}",
                slacks.len()
            ));
            let mut row = vec!["0".into(), num(hedge.value), num(high), String::new()];
            row.extend(hedge.alpha.iter().copied().map(num));
            out.csv("backtest.csv", &backtest_header(m), &[row]);
            out.json(
                "hedge.json",
                &json!({
                    "config": cfg.echo(),
                    "k": 0,
                    "alpha": hedge.alpha,
                    "V_alpha": hedge.value,
                    "gamma_max": high,
                    "vertex_slacks": slacks,
                    "min_vertex_slack": min_slack,
                }),
            );
        }
    }
    out.line(format!(
        "wall time = {:.3} ms",
        start.elapsed().as_secs_f64() * 1e3
    ));
    Ok(out)
}

/// One member of a measure family together with the delta it was built with.
pub struct Family {
    pub name: &'static str,
    pub step: OneStepMeasure,
    pub delta: Option<f64>,
}

/// The families selected by `run.measure`, all with mean `b`.
pub fn families(ordered: &OrderedModel, cfg: &RunConfig) -> Result<Vec<Family>, CliError> {
    let b = ordered.b_user();
    let (beta, delta) = (cfg.run.beta, cfg.run.delta);
    let wanted = |name: &str| cfg.run.measure == "all" || cfg.run.measure == name;
    let mut out = Vec::new();
    if wanted("uniform-mixture") {
        out.push(Family {
            name: "uniform-mixture",
            step: make_uniform_mixture(&b, MIXTURE_RADIUS).map_err(measure_error)?,
            delta: None,
        });
    }
    if wanted("center-box") {
        out.push(Family {
            name: "center-box",
            step: make_jensen_measure(&b, beta, delta).map_err(measure_error)?,
            delta: Some(delta),
        });
    }
    if wanted("vertex-boxes") {
        out.push(Family {
            name: "vertex-boxes",
            step: make_extremal_measure(ordered, beta, delta).map_err(measure_error)?,
            delta: Some(delta),
        });
    }
    Ok(out)
}

/// Containment in `[Γ_min - 4SE, Γ_max + 4SE]`, plus closeness to the end
/// the family is meant to approach. The band is closed: a run whose samples
/// never leave the zero-payoff region returns exactly `Γ_min` with `SE = 0`.
pub struct Containment {
    pub inside: bool,
    pub outside_by: f64,
    /// `(distance to the approached end, allowed distance)`.
    pub near: Option<(f64, f64)>,
}

impl Containment {
    pub fn passed(&self) -> bool {
        self.inside && self.near.is_none_or(|(d, tol)| d <= tol)
    }
}

pub fn containment(name: &str, est: &McEstimate, low: f64, high: f64, scale: f64) -> Containment {
    let band = 4.0 * est.std_error;
    let inside = est.estimate >= low - band && est.estimate <= high + band;
    let outside_by = (low - est.estimate).max(est.estimate - high).max(0.0);
    let allowed = band.max(1e-2 * scale);
    let near = match name {
        "center-box" => Some(((est.estimate - low).abs(), allowed)),
        "vertex-boxes" => Some(((est.estimate - high).abs(), allowed)),
        _ => None,
    };
    Containment {
        inside,
        outside_by,
        near,
    }
}

pub fn run_family(
    ordered: &OrderedModel,
    cfg: &RunConfig,
    family: &Family,
) -> Result<McEstimate, CliError> {
    let mc = McConfig {
        samples: cfg.run.samples,
        seed: cfg.run.seed,
        batch_size: cfg.run.batch_size,
        execution: Execution::Parallel,
    };
    let measure = PathMeasure::homogeneous(family.step.clone(), cfg.model.steps);
    mc_price(ordered, &cfg.option, &measure, &mc).map_err(measure_error)
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ordered = prepare(cfg)?;
    let state = MarketState::initial(&cfg.model);
    let low = gamma_min(&ordered, &cfg.option, &state);
    let high = gamma_max_with(&ordered, &cfg.option, &state, Execution::Parallel);
    let scale = cfg.option.scale(&cfg.model);
    let mut out = Outcome::default();
    out.line(format!("price interval [{low}, {high}]"));
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for family in families(&ordered, cfg)? {
        let start = Instant::now();
        let est = run_family(&ordered, cfg, &family)?;
        let check = containment(family.name, &est, low, high, scale);
        let verdict = if check.passed() { "pass" } else { "fail" };
        out.line(format!(
            "{:<16} estimate = {:<22} SE = {:<12.6e} {verdict}  ({:.1} ms)",
            family.name,
            est.estimate,
            est.std_error,
            start.elapsed().as_secs_f64() * 1e3
        ));
        let beta = family.step.beta();
        records.push(json!({
            "measure": family.name,
            "beta": beta,
            "delta": family.delta,
            "samples": est.samples,
            "seed": est.seed,
            "estimate": est.estimate,
            "std_error": est.std_error,
            "gamma_min": low,
            "gamma_max": high,
            "verdict": verdict,
        }));
        rows.push(vec![
            family.name.to_string(),
            num(beta),
            family.delta.map(num).unwrap_or_default(),
            est.samples.to_string(),
            est.seed.to_string(),
            num(est.estimate),
            num(est.std_error),
            num(low),
            num(high),
            verdict.to_string(),
        ]);
    }
    let header = [
        "measure",
        "beta",
        "delta",
        "samples",
        "seed",
        "estimate",
        "std_error",
        "gamma_min",
        "gamma_max",
        "verdict",
    ]
    .map(String::from);
    out.csv("simulate.csv", &header, &rows);
    out.json(
        "simulate.json",
        &json!({ "config": cfg.echo(), "records": records }),
    );
    Ok(out)
}

pub fn cmd_deform(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let ordered = prepare(cfg)?;
    let m = cfg.model.assets();
    let state = MarketState::initial(&cfg.model);
    let low = gamma_min(&ordered, &cfg.option, &state);
    let high = gamma_max_with(&ordered, &cfg.option, &state, Execution::Parallel);
    let mut out = Outcome::default();
    let start = Instant::now();

    let sweep = deformation_sweep(&ordered, &cfg.option, cfg.run.sweep_points)
        .map_err(deformation_error)?;
    let mut header = vec!["s".to_string()];
    header.extend(indexed("d_", 1, m));
    header.extend(indexed("u_", 1, m));
    header.push("phi".into());
    let rows: Vec<Vec<String>> = sweep
        .iter()
        .map(|r| {
            let mut row = vec![num(r.s)];
            row.extend(r.down.iter().chain(&r.up).copied().map(num));
            row.push(num(r.phi));
            row
        })
        .collect();
    out.csv("deform_sweep.csv", &header, &rows);
    out.line(format!("price interval [{low}, {high}]"));
    out.line(format!(
        "sweep of {} points: phi(0) = {}, phi({}) = {}",
        sweep.len(),
        sweep[0].phi,
        sweep[sweep.len() - 1].s,
        sweep[sweep.len() - 1].phi
    ));

    let mut record = json!({
        "config": cfg.echo(),
        "gamma_min": low,
        "gamma_max": high,
        "sweep_points": sweep.len(),
    });
    if let Some(target) = cfg.run.target {
        let sol = solve_deformation(&ordered, &cfg.option, target, &SolveOptions::default())
            .map_err(deformation_error)?;
        let params =
            superhedge_core::deformed_params(&ordered, sol.s).map_err(deformation_error)?;
        out.line(format!(
            "target {target}: s = {}, phi(s) = {}, residual = {:e}",
            sol.s, sol.phi, sol.residual
        ));
        out.line(format!("  d(s) = {:?}", params.down));
        out.line(format!("  u(s) = {:?}", params.up));
        record["solution"] = json!({
            "target": target,
            "s": sol.s,
            "phi": sol.phi,
            "residual": sol.residual,
            "down": params.down,
            "up": params.up,
        });
    }
    out.json("deform.json", &record);
    out.line(format!(
        "wall time = {:.3} ms",
        start.elapsed().as_secs_f64() * 1e3
    ));
    Ok(out)
}
