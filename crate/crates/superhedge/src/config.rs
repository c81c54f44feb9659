//! JSON run configuration: `{model: {m, n, R, S0, D, U}, option: {c, K}, run: {...}}`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use superhedge_core::{BasketOption, MarketModel, ModelError};

use crate::error::CliError;

/// Names accepted by `run.fault_inject` / `--fault-inject`.
pub const FAULTS: &[&str] = &["perturb-q0"];

/// Names accepted by `run.measure`.
pub const MEASURES: &[&str] = &["all", "uniform-mixture", "center-box", "vertex-boxes"];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<RawModel>,
    option: Option<RawOption>,
    #[serde(default)]
    run: RunParams,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    m: Option<usize>,
    n: Option<usize>,
    #[serde(rename = "R")]
    rate: Option<f64>,
    #[serde(rename = "S0")]
    s0: Option<Vec<f64>>,
    #[serde(rename = "D")]
    down: Option<Vec<f64>>,
    #[serde(rename = "U")]
    up: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOption {
    c: Option<Vec<f64>>,
    #[serde(rename = "K")]
    strike: Option<f64>,
}

/// Command parameters. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunParams {
    pub samples: u64,
    pub seed: u64,
    pub beta: f64,
    pub delta: f64,
    pub tol: f64,
    pub target: Option<f64>,
    pub out: PathBuf,
    pub threads: Option<usize>,
    /// Realized jumps for `hedge`, one user-order vector in `[0,1]^m` per step.
    pub path: Option<Vec<Vec<f64>>>,
    pub measure: String,
    pub batch_size: u64,
    pub sweep_points: usize,
    pub dump_terms: bool,
    /// Random paths backtested by `verify`.
    pub verify_paths: usize,
    /// Interior targets round-tripped by `verify`.
    pub verify_targets: usize,
    pub fault_inject: Option<String>,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
            beta: 1e-3,
            delta: 1e-3,
            tol: 1e-9,
            target: None,
            out: PathBuf::from("out"),
            threads: None,
            path: None,
            measure: "all".into(),
            batch_size: 4096,
            sweep_points: 65,
            dump_terms: false,
            verify_paths: 20,
            verify_targets: 5,
            fault_inject: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: MarketModel,
    pub option: BasketOption,
    pub run: RunParams,
}

/// Command-line values that replace the file's `run` entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub beta: Option<f64>,
    pub delta: Option<f64>,
    pub tol: Option<f64>,
    pub target: Option<f64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub fault_inject: Option<String>,
    pub measure: Option<String>,
    pub path: Option<Vec<Vec<f64>>>,
    pub dump_terms: bool,
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        CliError::Validation(msg) => CliError::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses and validates a config held in memory.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let raw: RawConfig = serde_json::from_str(text)
        .map_err(|e| CliError::Validation(format!("parse error: {e}")))?;
    let model = raw.model.ok_or_else(|| required("model"))?;
    let option = raw.option.ok_or_else(|| required("option"))?;

    let m = model.m.ok_or_else(|| required("model.m"))?;
    let n = model.n.ok_or_else(|| required("model.n"))?;
    let rate = model.rate.ok_or_else(|| required("model.R"))?;
    let s0 = model.s0.ok_or_else(|| required("model.S0"))?;
    let down = model.down.ok_or_else(|| required("model.D"))?;
    let up = model.up.ok_or_else(|| required("model.U"))?;
    let coeffs = option.c.ok_or_else(|| required("option.c"))?;
    let strike = option.strike.ok_or_else(|| required("option.K"))?;

    for (field, len, want) in [
        ("model.S0", s0.len(), m + 1),
        ("model.D", down.len(), m),
        ("model.U", up.len(), m),
        ("option.c", coeffs.len(), m + 1),
    ] {
        if len != want {
            return Err(CliError::Validation(format!(
                "{field}: expected {want} entries for m = {m}, found {len}"
            )));
        }
    }
    let model = MarketModel::new(n, rate, s0, down, up).map_err(model_error)?;
    let option = BasketOption::new(coeffs, strike).map_err(model_error)?;
    let cfg = RunConfig {
        model,
        option,
        run: raw.run,
    };
    validate_run(&cfg)?;
    Ok(cfg)
}

fn required(field: &str) -> CliError {
    CliError::Validation(format!("{field} required"))
}

/// Prefixes a core validation error with the config field it refers to.
pub fn model_error(e: ModelError) -> CliError {
    let field = match &e {
        ModelError::NoAssets => "model.m".to_string(),
        ModelError::NoSteps => "model.n".to_string(),
        ModelError::NonPositiveRate(_) | ModelError::NonFinite("R") => "model.R".to_string(),
        ModelError::NonFinite("option") => "option".to_string(),
        ModelError::NonFinite(f) => format!("model.{f}"),
        ModelError::Dimension { field: "c", .. } => "option.c".to_string(),
        ModelError::Dimension { field, .. } => format!("model.{field}"),
        ModelError::NonPositivePrice { index, .. } => format!("model.S0[{index}]"),
        ModelError::NonPositiveDown { index, .. } | ModelError::DownNotBelowRate { index, .. } => {
            format!("model.D[{}]", index - 1)
        }
        ModelError::UpNotAboveRate { index, .. } => format!("model.U[{}]", index - 1),
        ModelError::NonPositiveStrike(_) => "option.K".to_string(),
        ModelError::NegativeCoefficient { index, .. } => format!("option.c[{index}]"),
        ModelError::NonMonotoneB { .. } => "model".to_string(),
        ModelError::JumpOutOfRange { .. } | ModelError::AtHorizon(_) => "run.path".to_string(),
    };
    CliError::Validation(format!("{field}: {e}"))
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {msg}"))
}

fn validate_run(cfg: &RunConfig) -> Result<(), CliError> {
    let run = &cfg.run;
    let m = cfg.model.assets();
    if run.samples < 2 {
        return Err(invalid("run.samples", "must be at least 2"));
    }
    if !(run.beta > 0.0 && run.beta <= 1.0) {
        return Err(invalid("run.beta", format!("{} not in (0, 1]", run.beta)));
    }
    if !(run.delta > 0.0 && run.delta < 0.5) {
        return Err(invalid(
            "run.delta",
            format!("{} not in (0, 0.5)", run.delta),
        ));
    }
    if !(run.tol > 0.0 && run.tol.is_finite()) {
        return Err(invalid("run.tol", "must be positive"));
    }
    if let Some(t) = run.target {
        if !t.is_finite() {
            return Err(invalid("run.target", "must be finite"));
        }
    }
    if run.threads == Some(0) {
        return Err(invalid("run.threads", "must be at least 1"));
    }
    if run.batch_size == 0 {
        return Err(invalid("run.batch_size", "must be at least 1"));
    }
    if run.sweep_points < 2 {
        return Err(invalid("run.sweep_points", "must be at least 2"));
    }
    if !MEASURES.contains(&run.measure.as_str()) {
        return Err(invalid(
            "run.measure",
            format!(
                "unknown family {:?}, expected one of {MEASURES:?}",
                run.measure
            ),
        ));
    }
    if let Some(f) = &run.fault_inject {
        if !FAULTS.contains(&f.as_str()) {
            return Err(invalid(
                "run.fault_inject",
                format!("unknown fault {f:?}, expected one of {FAULTS:?}"),
            ));
        }
    }
    if let Some(path) = &run.path {
        if path.len() != cfg.model.steps {
            return Err(invalid(
                "run.path",
                format!("expected {} jumps, found {}", cfg.model.steps, path.len()),
            ));
        }
        for (k, jump) in path.iter().enumerate() {
            if jump.len() != m {
                return Err(invalid(
                    &format!("run.path[{k}]"),
                    format!("expected {m} coordinates, found {}", jump.len()),
                ));
            }
            if let Some(x) = jump.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(invalid(
                    &format!("run.path[{k}]"),
                    format!("coordinate {x} outside [0, 1]"),
                ));
            }
        }
    }
    Ok(())
}

impl RunConfig {
    /// Applies command-line overrides and re-validates.
    pub fn with_overrides(mut self, o: Overrides) -> Result<Self, CliError> {
        let run = &mut self.run;
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = o.$f { run.$f = v; })* };
        }
        set!(seed, samples, beta, delta, tol, out, measure);
        if o.target.is_some() {
            run.target = o.target;
        }
        if o.threads.is_some() {
            run.threads = o.threads;
        }
        if o.fault_inject.is_some() {
            run.fault_inject = o.fault_inject;
        }
        if o.path.is_some() {
            run.path = o.path;
        }
        run.dump_terms |= o.dump_terms;
        validate_run(&self)?;
        Ok(self)
    }

    /// The effective config in the input schema, for echoing into reports.
    pub fn echo(&self) -> Value {
        let m = &self.model;
        json!({
            "model": {
                "m": m.assets(),
                "n": m.steps,
                "R": m.rate,
                "S0": m.initial_prices,
                "D": m.down,
                "U": m.up,
            },
            "option": { "c": self.option.coeffs, "K": self.option.strike },
            "run": self.run,
        })
    }
}

/// Reads a JSON array of jumps for `--path`.
pub fn load_path(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: parse error: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const RUNNING: &str = r#"{
        "model": {"m": 1, "n": 1, "R": 1.0, "S0": [1.0, 1.0], "D": [0.5], "U": [2.0]},
        "option": {"c": [0.0, 1.0], "K": 1.0}
    }"#;

    fn err(text: &str) -> String {
        parse_config(text).unwrap_err().to_string()
    }

    #[test]
    fn minimal_config() {
        let cfg = parse_config(RUNNING).unwrap();
        assert_eq!(cfg.model.assets(), 1);
        assert_eq!(cfg.option.strike, 1.0);
        assert_eq!(cfg.run, RunParams::default());
    }

    #[test]
    fn missing_strike() {
        let text = RUNNING.replace(r#", "K": 1.0"#, "");
        assert_eq!(err(&text), "option.K required");
    }

    #[test]
    fn down_above_rate_has_field_path() {
        let text = RUNNING.replace(r#""D": [0.5]"#, r#""D": [1.0]"#);
        let msg = err(&text);
        assert!(msg.starts_with("model.D[0]: D_1 < R violated"), "{msg}");
    }

    #[test]
    fn parse_error_has_line() {
        let msg = err("{\n  \"model\": {\n  \"m\": 1,,\n}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn length_and_run_checks() {
        let text = RUNNING.replace(r#""c": [0.0, 1.0]"#, r#""c": [1.0]"#);
        assert!(err(&text).starts_with("option.c:"));
        let text = RUNNING.replace("}\n    }", r#"}, "run": {"beta": 2.0}}"#);
        assert!(err(&text).starts_with("run.beta:"), "{}", err(&text));
        let text = RUNNING.replace("}\n    }", r#"}, "run": {"bogus": 1}}"#);
        assert!(err(&text).contains("unknown field"));
    }

    #[test]
    fn overrides_and_echo_round_trip() {
        let cfg = parse_config(RUNNING)
            .unwrap()
            .with_overrides(Overrides {
                seed: Some(7),
                target: Some(0.2),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(cfg.run.seed, 7);
        let again = parse_config(&cfg.echo().to_string()).unwrap();
        assert_eq!(again, cfg);
        let bad = cfg.with_overrides(Overrides {
            fault_inject: Some("nope".into()),
            ..Default::default()
        });
        assert!(bad.is_err());
    }
}
