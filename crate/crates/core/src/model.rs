//! Market parameters, derived risk-neutral weights and the basket payoff.

use alloc::vec::Vec;

use crate::error::ModelError;
use crate::math::{abs, positive_part, powi};

/// Parameters of the continuous-binomial market.
///
/// Index 0 of `initial_prices` is the bond; `down[i - 1]` and `up[i - 1]`
/// bound the one-step price jump of risky asset `i`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MarketModel {
    pub steps: usize,
    pub rate: f64,
    pub initial_prices: Vec<f64>,
    pub down: Vec<f64>,
    pub up: Vec<f64>,
}

impl MarketModel {
    /// Builds and validates a model.
    pub fn new(
        steps: usize,
        rate: f64,
        initial_prices: Vec<f64>,
        down: Vec<f64>,
        up: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let model = Self {
            steps,
            rate,
            initial_prices,
            down,
            up,
        };
        validate_model(&model)?;
        Ok(model)
    }

    /// Number of risky assets.
    #[inline]
    pub fn assets(&self) -> usize {
        self.down.len()
    }

    /// Prices at time `n` after applying `path` (jump coordinates in user
    /// order, one vector per step) from time 0.
    pub fn terminal_prices(&self, path: &[Vec<f64>]) -> Vec<f64> {
        let mut prices = self.initial_prices.clone();
        for jump in path {
            prices[0] *= self.rate;
            for i in 0..self.assets() {
                prices[i + 1] *= self.jump_factor(i, jump[i]);
            }
        }
        prices
    }

    /// `D_i + (U_i - D_i)·ω` for the 0-based risky index `i`.
    #[inline]
    pub fn jump_factor(&self, i: usize, omega: f64) -> f64 {
        self.down[i] + (self.up[i] - self.down[i]) * omega
    }
}

/// Checks `0 < D_i < R < U_i` and positivity of the initial prices.
///
/// Returns the first violated constraint.
pub fn validate_model(model: &MarketModel) -> Result<&MarketModel, ModelError> {
    let m = model.down.len();
    if m == 0 {
        return Err(ModelError::NoAssets);
    }
    if model.steps == 0 {
        return Err(ModelError::NoSteps);
    }
    if model.up.len() != m {
        return Err(ModelError::Dimension {
            field: "U",
            expected: m,
            found: model.up.len(),
        });
    }
    if model.initial_prices.len() != m + 1 {
        return Err(ModelError::Dimension {
            field: "S0",
            expected: m + 1,
            found: model.initial_prices.len(),
        });
    }
    if !model.rate.is_finite() {
        return Err(ModelError::NonFinite("R"));
    }
    if model.rate <= 0.0 {
        return Err(ModelError::NonPositiveRate(model.rate));
    }
    for (index, &value) in model.initial_prices.iter().enumerate() {
        if !value.is_finite() {
            return Err(ModelError::NonFinite("S0"));
        }
        if value <= 0.0 {
            return Err(ModelError::NonPositivePrice { index, value });
        }
    }
    for i in 0..m {
        let (down, up) = (model.down[i], model.up[i]);
        if !down.is_finite() {
            return Err(ModelError::NonFinite("D"));
        }
        if !up.is_finite() {
            return Err(ModelError::NonFinite("U"));
        }
        let index = i + 1;
        if down <= 0.0 {
            return Err(ModelError::NonPositiveDown { index, value: down });
        }
        if down >= model.rate {
            return Err(ModelError::DownNotBelowRate {
                index,
                down,
                rate: model.rate,
            });
        }
        if up <= model.rate {
            return Err(ModelError::UpNotAboveRate {
                index,
                up,
                rate: model.rate,
            });
        }
    }
    Ok(model)
}

/// `b_i = (R - D_i) / (U_i - D_i)` in user order.
pub fn compute_b(model: &MarketModel) -> Vec<f64> {
    model
        .down
        .iter()
        .zip(&model.up)
        .map(|(&d, &u)| (model.rate - d) / (u - d))
        .collect()
}

/// Weights of the chain vertices `ρ_0 ⪯ … ⪯ ρ_m`: `q_j = b_j - b_{j+1}` with
/// `b_0 = 1` and `b_{m+1} = 0`.
///
/// Ties in `b` give zero weights.
pub fn vertex_weights(b: &[f64]) -> Result<Vec<f64>, ModelError> {
    let mut prev = 1.0;
    for (i, &value) in b.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) || value > prev {
            return Err(ModelError::NonMonotoneB {
                index: i + 1,
                value,
            });
        }
        prev = value;
    }
    let m = b.len();
    let at = |j: usize| match j {
        0 => 1.0,
        j if j > m => 0.0,
        j => b[j - 1],
    };
    Ok((0..=m).map(|j| at(j) - at(j + 1)).collect())
}

/// A model with its risky assets sorted so that `b` is non-increasing.
///
/// `order[pos]` is the 0-based user index of the risky asset sitting at
/// sorted position `pos`; `b`, `q`, `down` and `up` are stored in sorted order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedModel {
    base: MarketModel,
    order: Vec<usize>,
    b: Vec<f64>,
    q: Vec<f64>,
    down: Vec<f64>,
    up: Vec<f64>,
}

/// Sorts the assets by non-increasing `b` (stable, ties keep user order)
/// and computes the vertex weights.
pub fn order_assets(model: &MarketModel) -> Result<OrderedModel, ModelError> {
    validate_model(model)?;
    let b_user = compute_b(model);
    let mut order: Vec<usize> = (0..model.assets()).collect();
    order.sort_by(|&x, &y| b_user[y].total_cmp(&b_user[x]));
    let b: Vec<f64> = order.iter().map(|&i| b_user[i]).collect();
    let q = vertex_weights(&b)?;
    Ok(OrderedModel {
        down: order.iter().map(|&i| model.down[i]).collect(),
        up: order.iter().map(|&i| model.up[i]).collect(),
        base: model.clone(),
        order,
        b,
        q,
    })
}

impl OrderedModel {
    pub fn new(model: &MarketModel) -> Result<Self, ModelError> {
        order_assets(model)
    }

    #[inline]
    pub fn base(&self) -> &MarketModel {
        &self.base
    }

    #[inline]
    pub fn assets(&self) -> usize {
        self.order.len()
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.base.steps
    }

    #[inline]
    pub fn rate(&self) -> f64 {
        self.base.rate
    }

    /// Sorted position → 0-based user risky index.
    #[inline]
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `b` in sorted (non-increasing) order.
    #[inline]
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `b` mapped back to user order.
    pub fn b_user(&self) -> Vec<f64> {
        self.to_user(&self.b)
    }

    /// Vertex weights `q_0..q_m`.
    #[inline]
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    #[inline]
    pub fn sorted_down(&self) -> &[f64] {
        &self.down
    }

    #[inline]
    pub fn sorted_up(&self) -> &[f64] {
        &self.up
    }

    /// Reorders a per-risky-asset vector from sorted to user order.
    pub fn to_user(&self, sorted: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; sorted.len()];
        for (pos, &user) in self.order.iter().enumerate() {
            out[user] = sorted[pos];
        }
        out
    }

    /// Reorders a per-risky-asset vector from user to sorted order.
    pub fn to_sorted(&self, user: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&i| user[i]).collect()
    }

    /// `χ_i(j)` for sorted asset index `i` (0 = bond) and vertex `j`.
    pub fn chi(&self, i: usize, j: usize) -> f64 {
        chi_factor(self, i, j)
    }

    /// Jump coordinates (user order) of the vertex `ρ_t`: the first `t`
    /// sorted assets jump up, the rest jump down.
    pub fn vertex_jump(&self, t: usize) -> Vec<f64> {
        let mut jump = alloc::vec![0.0; self.assets()];
        for &user in &self.order[..t] {
            jump[user] = 1.0;
        }
        jump
    }

    /// Same ordering and weights with replaced jump bounds (user order).
    ///
    /// Used for the `b`-preserving boundary deformation, where the weights
    /// are invariant and recomputing them would only add rounding.
    pub fn with_bounds(&self, down: Vec<f64>, up: Vec<f64>) -> Result<Self, ModelError> {
        let base = MarketModel {
            down,
            up,
            ..self.base.clone()
        };
        validate_model(&base)?;
        Ok(Self {
            down: self.order.iter().map(|&i| base.down[i]).collect(),
            up: self.order.iter().map(|&i| base.up[i]).collect(),
            base,
            order: self.order.clone(),
            b: self.b.clone(),
            q: self.q.clone(),
        })
    }

    /// Replaces the vertex weights without any check. Diagnostic hook for
    /// fault injection in verification runs.
    pub fn with_vertex_weights(&self, q: Vec<f64>) -> Self {
        Self { q, ..self.clone() }
    }
}

/// `χ_i(j)`: `R` for the bond, `U_i` if `1 ≤ i ≤ j`, `D_i` if `i > j`.
/// Asset indices are in sorted order.
pub fn chi_factor(ordered: &OrderedModel, i: usize, j: usize) -> f64 {
    match i {
        0 => ordered.rate(),
        i if i <= j => ordered.up[i - 1],
        i => ordered.down[i - 1],
    }
}

/// European basket call `F = (Σ c_i S_i(n) - K)^+`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BasketOption {
    pub coeffs: Vec<f64>,
    pub strike: f64,
}

impl BasketOption {
    pub fn new(coeffs: Vec<f64>, strike: f64) -> Result<Self, ModelError> {
        let option = Self { coeffs, strike };
        option.validate()?;
        Ok(option)
    }

    /// `c_i ≥ 0` for risky assets, `K > 0`. `c_0` is unrestricted.
    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.strike.is_finite() || self.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(ModelError::NonFinite("option"));
        }
        if self.strike <= 0.0 {
            return Err(ModelError::NonPositiveStrike(self.strike));
        }
        for (index, &value) in self.coeffs.iter().enumerate().skip(1) {
            if value < 0.0 {
                return Err(ModelError::NegativeCoefficient { index, value });
            }
        }
        Ok(())
    }

    /// Also checks that there is one coefficient per asset of `model`.
    pub fn validate_for(&self, model: &MarketModel) -> Result<(), ModelError> {
        self.validate()?;
        if self.coeffs.len() != model.assets() + 1 {
            return Err(ModelError::Dimension {
                field: "c",
                expected: model.assets() + 1,
                found: self.coeffs.len(),
            });
        }
        Ok(())
    }

    /// `Σ c_i S_i`.
    pub fn basket_value(&self, prices: &[f64]) -> f64 {
        self.coeffs.iter().zip(prices).map(|(c, s)| c * s).sum()
    }

    /// Magnitude used to scale absolute tolerances: `1 + Σ |c_i| S_i(0)`.
    pub fn scale(&self, model: &MarketModel) -> f64 {
        1.0 + self
            .coeffs
            .iter()
            .zip(&model.initial_prices)
            .map(|(c, s)| abs(*c) * s)
            .sum::<f64>()
    }
}

/// `(Σ c_i S_i(n) - K)^+`.
pub fn payoff(option: &BasketOption, terminal_prices: &[f64]) -> f64 {
    positive_part(option.basket_value(terminal_prices) - option.strike)
}

/// Time index plus the asset prices realized at that time (user order,
/// index 0 is the bond).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MarketState {
    pub k: usize,
    pub prices: Vec<f64>,
}

impl MarketState {
    /// The state at time 0.
    pub fn initial(model: &MarketModel) -> Self {
        Self {
            k: 0,
            prices: model.initial_prices.clone(),
        }
    }

    /// Replays `path` (one jump vector per step, user order) from time 0.
    pub fn from_path(model: &MarketModel, path: &[Vec<f64>]) -> Result<Self, ModelError> {
        path.iter().try_fold(Self::initial(model), |state, jump| {
            state.advance(model, jump)
        })
    }

    /// Successor state after one step with jump coordinates `jump ∈ [0,1]^m`.
    pub fn advance(&self, model: &MarketModel, jump: &[f64]) -> Result<Self, ModelError> {
        if self.k >= model.steps {
            return Err(ModelError::AtHorizon(self.k));
        }
        if jump.len() != model.assets() {
            return Err(ModelError::Dimension {
                field: "jump",
                expected: model.assets(),
                found: jump.len(),
            });
        }
        for (index, &value) in jump.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ModelError::JumpOutOfRange { index, value });
            }
        }
        let mut prices = self.prices.clone();
        prices[0] *= model.rate;
        for (i, &omega) in jump.iter().enumerate() {
            prices[i + 1] *= model.jump_factor(i, omega);
        }
        Ok(Self {
            k: self.k + 1,
            prices,
        })
    }

    /// Successor reached through the chain vertex `ρ_t` (sorted order).
    pub fn vertex_successor(&self, ordered: &OrderedModel, t: usize) -> Result<Self, ModelError> {
        self.advance(ordered.base(), &ordered.vertex_jump(t))
    }

    /// The deterministic continuation `S_i(n) = R^{n-k} S_i(k)`, i.e. every
    /// remaining jump equal to `b`.
    pub fn growth_continuation(&self, model: &MarketModel) -> Vec<f64> {
        let growth = powi(model.rate, (model.steps - self.k) as u32);
        self.prices.iter().map(|s| s * growth).collect()
    }
}
