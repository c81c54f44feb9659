//! Minimum-cost maximal hedge.
//!
//! At time `k` the portfolio is pinned down by replicating the continuation
//! values `Y_t(k)` at the `m+1` chain-vertex successors. The system is
//! triangular in the vertex basis and inverts in closed form:
//!
//! ```text
//! α = W(k) · N · Q · Y
//! ```
//!
//! with `Q` taking differences of consecutive `Y_t`, `N` mapping them to
//! asset units through `Δ_i = U_i - D_i`, and `W(k)` dividing by prices.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{ModelError, PricingError};
use crate::math::compensated_sum;
use crate::model::{payoff, BasketOption, MarketState, OrderedModel};
use crate::pricing::{gamma_max, y_values};

/// Default absolute tolerance for superhedging slacks and value checks.
pub const SLACK_TOLERANCE: f64 = 1e-9;

/// Positions `α_0..α_m` (user order, 0 = bond) held from `k` to `k+1`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HedgePortfolio {
    pub alpha: Vec<f64>,
    pub k: usize,
    /// `Σ α_i S_i(k)`.
    pub value: f64,
}

impl HedgePortfolio {
    /// Value of the positions at arbitrary prices.
    pub fn value_at(&self, prices: &[f64]) -> f64 {
        compensated_sum(self.alpha.iter().zip(prices).map(|(a, s)| a * s))
    }
}

/// Maximal hedge at `state` (requires `k ≤ n-1`).
pub fn hedge_weights(
    ordered: &OrderedModel,
    option: &BasketOption,
    state: &MarketState,
) -> Result<HedgePortfolio, PricingError> {
    let y = y_values(ordered, option, state)?;
    let m = ordered.assets();
    let rate = ordered.rate();
    let (down, up) = (ordered.sorted_down(), ordered.sorted_up());
    let mut alpha = vec![0.0; m + 1];
    let mut bond_adjust = Vec::with_capacity(m);
    for pos in 0..m {
        let user = ordered.order()[pos] + 1;
        let delta = up[pos] - down[pos];
        let diff = y[pos + 1] - y[pos];
        alpha[user] = diff / (delta * state.prices[user]);
        bond_adjust.push(down[pos] * diff / delta);
    }
    alpha[0] = (y[0] - compensated_sum(bond_adjust)) / (rate * state.prices[0]);
    Ok(portfolio(alpha, state))
}

/// Same hedge through the explicit product `W(k)·N·Q` applied to `Y`.
/// Cross-check for [`hedge_weights`].
pub fn hedge_weights_matrix(
    ordered: &OrderedModel,
    option: &BasketOption,
    state: &MarketState,
) -> Result<HedgePortfolio, PricingError> {
    let y = y_values(ordered, option, state)?;
    let m = ordered.assets();
    let dim = m + 1;
    let (down, up) = (ordered.sorted_down(), ordered.sorted_up());
    let sorted_prices: Vec<f64> = core::iter::once(state.prices[0])
        .chain(ordered.order().iter().map(|&u| state.prices[u + 1]))
        .collect();

    let mut w = vec![vec![0.0; dim]; dim];
    w[0][0] = 1.0 / (ordered.rate() * sorted_prices[0]);
    for i in 1..dim {
        w[i][i] = 1.0 / sorted_prices[i];
    }
    let mut n = vec![vec![0.0; dim]; dim];
    n[0][0] = 1.0;
    for i in 1..dim {
        let delta = up[i - 1] - down[i - 1];
        n[0][i] = -down[i - 1] / delta;
        n[i][i] = 1.0 / delta;
    }
    let mut q = vec![vec![0.0; dim]; dim];
    for j in 0..dim {
        q[j][j] = 1.0;
        if j > 0 {
            q[j][j - 1] = -1.0;
        }
    }
    let product = matmul(&matmul(&w, &n), &q);
    let sorted_alpha: Vec<f64> = product
        .iter()
        .map(|row| compensated_sum(row.iter().zip(&y).map(|(a, b)| a * b)))
        .collect();

    let mut alpha = vec![0.0; dim];
    alpha[0] = sorted_alpha[0];
    for (pos, &user) in ordered.order().iter().enumerate() {
        alpha[user + 1] = sorted_alpha[pos + 1];
    }
    Ok(portfolio(alpha, state))
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = b.len();
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| compensated_sum((0..dim).map(|k| row[k] * b[k][j])))
                .collect()
        })
        .collect()
}

fn portfolio(alpha: Vec<f64>, state: &MarketState) -> HedgePortfolio {
    let value = compensated_sum(alpha.iter().zip(&state.prices).map(|(a, s)| a * s));
    HedgePortfolio {
        alpha,
        k: state.k,
        value,
    }
}

/// `Σ α_i S_i(k+1) - Γ_max(F, k+1)` after `jump` (user order).
pub fn superhedge_check(
    ordered: &OrderedModel,
    option: &BasketOption,
    portfolio: &HedgePortfolio,
    state: &MarketState,
    jump: &[f64],
) -> Result<f64, PricingError> {
    let next = state.advance(ordered.base(), jump)?;
    Ok(portfolio.value_at(&next.prices) - gamma_max(ordered, option, &next))
}

/// Slacks at every lattice vertex `{0,1}^m`, indexed by the bitmask of
/// up-jumping assets (bit `i` = user asset `i + 1`).
pub fn lattice_slacks(
    ordered: &OrderedModel,
    option: &BasketOption,
    portfolio: &HedgePortfolio,
    state: &MarketState,
) -> Result<Vec<f64>, PricingError> {
    let m = ordered.assets();
    (0u64..1 << m)
        .map(|mask| {
            let jump: Vec<f64> = (0..m).map(|i| ((mask >> i) & 1) as f64).collect();
            superhedge_check(ordered, option, portfolio, state, &jump)
        })
        .collect()
}

/// One row of a backtest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BacktestStep {
    pub k: usize,
    /// Value of the portfolio held at `k`. For the terminal row, the value
    /// of the last portfolio at the terminal prices.
    pub portfolio_value: f64,
    /// `Γ_max(F, k)`; the payoff for the terminal row.
    pub gamma_max: f64,
    /// Slack at the realized jump out of `k`; for the terminal row,
    /// `portfolio_value - payoff`.
    pub slack: f64,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BacktestReport {
    pub steps: Vec<BacktestStep>,
    pub terminal: BacktestStep,
}

impl BacktestReport {
    /// `max_k |V_α(k) - Γ_max(F,k)|` over the rebalancing steps.
    pub fn max_value_error(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| crate::math::abs(s.portfolio_value - s.gamma_max))
            .fold(0.0, f64::max)
    }

    /// Smallest slack, terminal row included.
    pub fn min_slack(&self) -> f64 {
        self.steps
            .iter()
            .chain(core::iter::once(&self.terminal))
            .map(|s| s.slack)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_value_error() <= tol && self.min_slack() >= -tol
    }

    /// All rows including the terminal one.
    pub fn rows(&self) -> impl Iterator<Item = &BacktestStep> {
        self.steps.iter().chain(core::iter::once(&self.terminal))
    }
}

/// Runs the maximal hedge along `path` (one user-order jump per step).
pub fn backtest_path(
    ordered: &OrderedModel,
    option: &BasketOption,
    path: &[Vec<f64>],
) -> Result<BacktestReport, PricingError> {
    let model = ordered.base();
    if path.len() != model.steps {
        return Err(ModelError::Dimension {
            field: "path",
            expected: model.steps,
            found: path.len(),
        }
        .into());
    }
    let mut state = MarketState::initial(model);
    let mut steps = Vec::with_capacity(path.len());
    let mut held: Option<HedgePortfolio> = None;
    for jump in path {
        let hedge = hedge_weights(ordered, option, &state)?;
        let gmax = gamma_max(ordered, option, &state);
        let next = state.advance(model, jump)?;
        let slack = hedge.value_at(&next.prices) - gamma_max(ordered, option, &next);
        steps.push(BacktestStep {
            k: state.k,
            portfolio_value: hedge.value,
            gamma_max: gmax,
            slack,
            alpha: hedge.alpha.clone(),
        });
        held = Some(hedge);
        state = next;
    }
    let held = held.expect("model has at least one step");
    let terminal_value = held.value_at(&state.prices);
    let claim = payoff(option, &state.prices);
    Ok(BacktestReport {
        steps,
        terminal: BacktestStep {
            k: state.k,
            portfolio_value: terminal_value,
            gamma_max: claim,
            slack: terminal_value - claim,
            alpha: held.alpha,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MarketModel;

    fn one_step() -> (OrderedModel, BasketOption) {
        let model = MarketModel::new(1, 1.0, vec![1.0, 1.0], vec![0.5], vec![2.0]).unwrap();
        (
            OrderedModel::new(&model).unwrap(),
            BasketOption::new(vec![0.0, 1.0], 1.0).unwrap(),
        )
    }

    #[test]
    fn running_example_hedge() {
        let (o, opt) = one_step();
        let s = MarketState::initial(o.base());
        let h = hedge_weights(&o, &opt, &s).unwrap();
        assert!((h.alpha[0] + 1.0 / 3.0).abs() < 1e-15);
        assert!((h.alpha[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((h.value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn running_example_slacks() {
        let (o, opt) = one_step();
        let s = MarketState::initial(o.base());
        let h = hedge_weights(&o, &opt, &s).unwrap();
        assert!(superhedge_check(&o, &opt, &h, &s, &[1.0]).unwrap().abs() < 1e-15);
        assert!(superhedge_check(&o, &opt, &h, &s, &[0.0]).unwrap().abs() < 1e-15);
        let mid = superhedge_check(&o, &opt, &h, &s, &[0.5]).unwrap();
        assert!((mid - 0.25).abs() < 1e-15);
    }

    #[test]
    fn constant_claim_is_bond_only() {
        let model =
            MarketModel::new(3, 1.05, vec![2.0, 1.0, 1.0], vec![0.8, 0.9], vec![1.3, 1.2]).unwrap();
        let o = OrderedModel::new(&model).unwrap();
        let opt = BasketOption::new(vec![1.0, 0.0, 0.0], 0.5).unwrap();
        let s = MarketState::initial(&model);
        let h = hedge_weights(&o, &opt, &s).unwrap();
        assert_eq!(h.alpha[1], 0.0);
        assert_eq!(h.alpha[2], 0.0);
        assert!((h.value - gamma_max(&o, &opt, &s)).abs() < 1e-12);
    }

    #[test]
    fn matrix_and_scalar_forms_agree() {
        let model = MarketModel::new(
            3,
            1.02,
            vec![1.0, 1.2, 0.8, 1.0],
            vec![0.9, 0.7, 0.85],
            vec![1.15, 1.4, 1.1],
        )
        .unwrap();
        let o = OrderedModel::new(&model).unwrap();
        let opt = BasketOption::new(vec![0.1, 1.0, 0.5, 1.5], 2.5).unwrap();
        let s = MarketState::from_path(&model, &[vec![0.3, 0.9, 0.5]]).unwrap();
        let a = hedge_weights(&o, &opt, &s).unwrap();
        let b = hedge_weights_matrix(&o, &opt, &s).unwrap();
        for (x, y) in a.alpha.iter().zip(&b.alpha) {
            assert!((x - y).abs() < 1e-14 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn replicates_vertex_values() {
        let model = MarketModel::new(
            4,
            1.01,
            vec![1.0, 1.0, 1.0],
            vec![0.85, 0.9],
            vec![1.25, 1.1],
        )
        .unwrap();
        let o = OrderedModel::new(&model).unwrap();
        let opt = BasketOption::new(vec![0.0, 1.0, 1.0], 2.0).unwrap();
        let s = MarketState::initial(&model);
        let h = hedge_weights(&o, &opt, &s).unwrap();
        let y = y_values(&o, &opt, &s).unwrap();
        for (t, yt) in y.iter().enumerate() {
            let next = s.vertex_successor(&o, t).unwrap();
            assert!((h.value_at(&next.prices) - yt).abs() < 1e-12);
        }
        for slack in lattice_slacks(&o, &opt, &h, &s).unwrap() {
            assert!(slack >= -SLACK_TOLERANCE);
        }
    }

    #[test]
    fn backtest_all_up() {
        let model =
            MarketModel::new(3, 1.0, vec![1.0, 1.0, 1.0], vec![0.8, 0.5], vec![1.2, 2.0]).unwrap();
        let o = OrderedModel::new(&model).unwrap();
        let opt = BasketOption::new(vec![0.0, 1.0, 1.0], 2.0).unwrap();
        let path = vec![vec![1.0, 1.0]; 3];
        let report = backtest_path(&o, &opt, &path).unwrap();
        assert_eq!(report.steps.len(), 3);
        assert!(report.passed(SLACK_TOLERANCE));
        for step in report.rows() {
            assert!(step.slack.abs() < 1e-12);
        }
    }

    #[test]
    fn backtest_rejects_short_path() {
        let (o, opt) = one_step();
        assert!(backtest_path(&o, &opt, &[]).is_err());
    }
}
