use thiserror::Error;

/// Violations of the market-model or option parameter constraints.
///
/// Asset indices in messages are 1-based, matching the usual `S_1..S_m`
/// numbering (index 0 is the bond).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("model needs at least one risky asset")]
    NoAssets,
    #[error("model needs a horizon of at least one step")]
    NoSteps,
    #[error("R > 0 violated (R = {0})")]
    NonPositiveRate(f64),
    #[error("expected {expected} entries in {field}, found {found}")]
    Dimension {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("S0_{index} > 0 violated (S0_{index} = {value})")]
    NonPositivePrice { index: usize, value: f64 },
    #[error("0 < D_{index} violated (D_{index} = {value})")]
    NonPositiveDown { index: usize, value: f64 },
    #[error("D_{index} < R violated (D_{index} = {down}, R = {rate})")]
    DownNotBelowRate { index: usize, down: f64, rate: f64 },
    #[error("R < U_{index} violated (U_{index} = {up}, R = {rate})")]
    UpNotAboveRate { index: usize, up: f64, rate: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("K > 0 violated (K = {0})")]
    NonPositiveStrike(f64),
    #[error("c_{index} >= 0 violated (c_{index} = {value})")]
    NegativeCoefficient { index: usize, value: f64 },
    #[error("b must be non-increasing in [0, 1]: b_{index} = {value} breaks the order")]
    NonMonotoneB { index: usize, value: f64 },
    #[error("jump coordinate {index} = {value} lies outside [0, 1]")]
    JumpOutOfRange { index: usize, value: f64 },
    #[error("state is already at the horizon k = {0}")]
    AtHorizon(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error("naive enumeration needs {needed} sequences, cap is {cap}")]
    CapExceeded { needed: u128, cap: u64 },
    #[error("operation requires k <= n - 1, state is at k = {k} with n = {n}")]
    TerminalState { k: usize, n: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("background weight beta = {0} must lie in (0, 1]")]
    InvalidBeta(f64),
    #[error("target mean coordinate {index} = {value} must lie in (0, 1)")]
    MeanOutOfRange { index: usize, value: f64 },
    #[error("atom weights sum to {sum}, expected 1 - beta = {expected}")]
    WeightMismatch { sum: f64, expected: f64 },
    #[error("atom {atom} has dimension {found}, expected {expected}")]
    Dimension {
        atom: usize,
        expected: usize,
        found: usize,
    },
    #[error("pure uniform measure has mean 1/2 but target coordinate {index} is {value}")]
    UniformMeanMismatch { index: usize, value: f64 },
    #[error("shifted center of atom {atom} leaves (0,1)^m at coordinate {coord} ({value}); reduce beta or the radius")]
    Infeasible {
        atom: usize,
        coord: usize,
        value: f64,
    },
    #[error("beta = {beta} must be below the smallest retained vertex weight {min_weight}")]
    BetaTooLarge { beta: f64, min_weight: f64 },
    #[error("delta = {0} must be positive")]
    InvalidDelta(f64),
    #[error("b is too close to the boundary for a box of radius {delta} (room {room})")]
    BoxDoesNotFit { delta: f64, room: f64 },
    #[error("Monte-Carlo run needs at least 2 samples and a positive batch size")]
    TooFewSamples,
    #[error("path measure has {found} steps, model horizon is {expected}")]
    HorizonMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeformationError {
    #[error("deformation parameter s = {0} must lie in [0, 1)")]
    OutOfRange(f64),
    #[error("target {target} is not interior to ({gamma_min}, {gamma_max})")]
    TargetNotInterior {
        target: f64,
        gamma_min: f64,
        gamma_max: f64,
    },
    #[error("no sign change of phi(s) - c found on a grid of {grid} points")]
    NoBracket { grid: usize },
    #[error("bisection stalled at s = {s} with residual {residual}")]
    NoConvergence { s: f64, residual: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}
