//! Pricing and hedging for European basket calls in the discrete-time
//! continuous-binomial market model.
//!
//! Every risky asset `i` moves by a factor in `[D_i, U_i]` per step while the
//! bond grows by `R`. The market is incomplete, so a claim has an open
//! interval of arbitrage-free prices. This crate computes:
//!
//! * the interval endpoints [`gamma_min`] and [`gamma_max`], the latter via
//!   a count-vector collapse of the multinomial lattice sum,
//! * the minimum-cost maximal hedge ([`hedge_weights`]) and path backtests,
//! * the boundary deformation `φ(s)` sweeping the interval ([`phi`],
//!   [`solve_deformation`]),
//! * sampleable mean-`b` measures and a Monte-Carlo pricer used to check
//!   that risk-neutral expectations land inside the interval.
//!
//! The crate is `no_std` + `alloc` with default features off. The `std`
//! feature adds `std::error::Error` impls and the `parallel` feature adds
//! rayon-backed kernels whose results are bit-identical to the serial path.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod deformation;
pub mod error;
pub mod hedging;
pub mod lattice;
pub mod math;
pub mod measure;
pub mod model;
pub mod montecarlo;
pub mod pricing;

pub use deformation::{
    deformation_sweep, deformed_model, deformed_params, phi, solve_deformation,
    DeformationSolution, DeformedParams, SolveOptions, SweepRow, S_MAX,
};
pub use error::{DeformationError, MeasureError, ModelError, PricingError};
pub use hedging::{
    backtest_path, hedge_weights, hedge_weights_matrix, lattice_slacks, superhedge_check,
    BacktestReport, BacktestStep, HedgePortfolio, SLACK_TOLERANCE,
};
pub use lattice::{enumerate_count_vectors, CountVector, CountVectors};
pub use measure::{
    check_mean_b, make_extremal_measure, make_jensen_measure, make_product_measure,
    make_uniform_mixture, sample_path, AtomSpec, BoxAtom, MeanCheck, MeasureKind, OneStepMeasure,
    PathMeasure, DEFAULT_BETA,
};
pub use model::{
    chi_factor, compute_b, order_assets, payoff, validate_model, vertex_weights, BasketOption,
    MarketModel, MarketState, OrderedModel,
};
pub use montecarlo::{mc_price, McConfig, McEstimate};
pub use pricing::{
    gamma_max, gamma_max_naive, gamma_max_terms, gamma_max_with, gamma_min, price_interval,
    y_values, Execution, PriceInterval, TermRecord, DEFAULT_NAIVE_CAP,
};
