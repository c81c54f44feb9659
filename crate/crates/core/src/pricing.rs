//! Endpoints of the arbitrage-free price interval.
//!
//! The upper endpoint is the discounted expectation of the payoff under the
//! product of the chain-vertex measure `q` over the remaining steps. Since a
//! jump sequence only matters through its tail counts `t_i = Σ_{j≥i} n_j`,
//! the sum runs over count vectors with multinomial weights.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::PricingError;
use crate::lattice::{binomial, enumerate_count_vectors};
use crate::math::{compensated_sum, exp, ln, positive_part, powi, CompensatedSum};
use crate::model::{BasketOption, MarketState, OrderedModel};

/// Default limit on the number of sequences the naive oracle may visit.
pub const DEFAULT_NAIVE_CAP: u64 = 10_000_000;

/// Above this many remaining steps the weights `C·Π q_j^{n_j}` are carried
/// in log space.
const LOG_SPACE_STEPS: usize = 40;

/// Serial or rayon-backed evaluation. Both reduce the same fixed partition
/// in the same order, so results are bit-identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Serial,
    /// Falls back to serial without the `parallel` feature.
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PriceInterval {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub k: usize,
}

/// One count vector's contribution to the upper price.
#[derive(Debug, Clone, PartialEq)]
pub struct TermRecord {
    pub counts: Vec<usize>,
    pub multinomial_weight: f64,
    /// `Π q_j^{n_j}`.
    pub q_weight: f64,
    /// `Σ_i c_i χ_i(J) S_i(k)` for any sequence `J` with these counts.
    pub basket_value: f64,
    /// `multinomial_weight · q_weight · (basket_value - K)^+`, undiscounted.
    pub clipped_term: f64,
}

/// Lower endpoint `R^{k-n} (R^{n-k} Σ c_i S_i(k) - K)^+`.
pub fn gamma_min(ordered: &OrderedModel, option: &BasketOption, state: &MarketState) -> f64 {
    let h = remaining_steps(ordered, state);
    let growth = powi(ordered.rate(), h);
    positive_part(growth * option.basket_value(&state.prices) - option.strike) / growth
}

/// Upper endpoint `Γ_max(F, k)` at `state`.
///
/// # Panics
///
/// If `option` does not have one coefficient per asset, or `state.k > n`.
pub fn gamma_max(ordered: &OrderedModel, option: &BasketOption, state: &MarketState) -> f64 {
    gamma_max_with(ordered, option, state, Execution::Serial)
}

/// [`gamma_max`] with a choice of execution.
pub fn gamma_max_with(
    ordered: &OrderedModel,
    option: &BasketOption,
    state: &MarketState,
    execution: Execution,
) -> f64 {
    let kernel = Kernel::new(ordered, option, state, None);
    kernel.evaluate(execution)
}

/// Both endpoints at `state`.
pub fn price_interval(
    ordered: &OrderedModel,
    option: &BasketOption,
    state: &MarketState,
) -> PriceInterval {
    PriceInterval {
        gamma_min: gamma_min(ordered, option, state),
        gamma_max: gamma_max(ordered, option, state),
        k: state.k,
    }
}

/// Per-count-vector breakdown of the upper price, in enumeration order.
pub fn gamma_max_terms(
    ordered: &OrderedModel,
    option: &BasketOption,
    state: &MarketState,
) -> Vec<TermRecord> {
    let h = remaining_steps(ordered, state) as usize;
    let m = ordered.assets();
    let (bond, risky) = sorted_amounts(ordered, option, state);
    let bond = bond * powi(ordered.rate(), h as u32);
    let q = ordered.q();
    enumerate_count_vectors(h, m)
        .map(|cv| {
            let q_weight: f64 = cv
                .counts
                .iter()
                .zip(q)
                .map(|(&n, &qj)| powi(qj, n as u32))
                .product();
            let basket_value = bond
                + (0..m)
                    .map(|i| {
                        let t = cv.tail[i] as u32;
                        risky[i]
                            * powi(ordered.sorted_up()[i], t)
                            * powi(ordered.sorted_down()[i], h as u32 - t)
                    })
                    .sum::<f64>();
            let clipped_term = cv.weight * q_weight * positive_part(basket_value - option.strike);
            TermRecord {
                counts: cv.counts,
                multinomial_weight: cv.weight,
                q_weight,
                basket_value,
                clipped_term,
            }
        })
        .collect()
}

/// Upper endpoint by literal enumeration of all `(m+1)^{n-k}` vertex
/// sequences. Test oracle only.
pub fn gamma_max_naive(
    ordered: &OrderedModel,
    option: &BasketOption,
    state: &MarketState,
    cap: u64,
) -> Result<f64, PricingError> {
    let h = remaining_steps(ordered, state) as usize;
    let m = ordered.assets();
    let needed = (m as u128 + 1).checked_pow(h as u32).unwrap_or(u128::MAX);
    if needed > cap as u128 {
        return Err(PricingError::CapExceeded { needed, cap });
    }
    let (bond, risky) = sorted_amounts(ordered, option, state);
    let mut seq = vec![0usize; h];
    let mut acc = CompensatedSum::new();
    loop {
        let q_seq: f64 = seq.iter().map(|&j| ordered.q()[j]).product();
        let chi_bond: f64 = seq.iter().map(|&j| ordered.chi(0, j)).product();
        let mut basket = bond * chi_bond;
        for i in 1..=m {
            let chi_seq: f64 = seq.iter().map(|&j| ordered.chi(i, j)).product();
            basket += risky[i - 1] * chi_seq;
        }
        acc.add(q_seq * positive_part(basket - option.strike));

        // odometer over {0..m}^h
        let mut pos = 0;
        loop {
            if pos == h {
                return Ok(acc.value() / powi(ordered.rate(), h as u32));
            }
            seq[pos] += 1;
            if seq[pos] <= m {
                break;
            }
            seq[pos] = 0;
            pos += 1;
        }
    }
}

/// `Y_t(k)` for `t = 0..m`: the upper price at time `k+1` after the chain
/// vertex jump `ρ_t` (first `t` sorted assets up, the rest down).
pub fn y_values(
    ordered: &OrderedModel,
    option: &BasketOption,
    state: &MarketState,
) -> Result<Vec<f64>, PricingError> {
    if state.k >= ordered.steps() {
        return Err(PricingError::TerminalState {
            k: state.k,
            n: ordered.steps(),
        });
    }
    (0..=ordered.assets())
        .map(|t| {
            let next = state.vertex_successor(ordered, t)?;
            Ok(gamma_max(ordered, option, &next))
        })
        .collect()
}

fn remaining_steps(ordered: &OrderedModel, state: &MarketState) -> u32 {
    assert!(
        state.k <= ordered.steps(),
        "state time {} beyond horizon {}",
        state.k,
        ordered.steps()
    );
    (ordered.steps() - state.k) as u32
}

/// `(c_0 S_0(k), [c_i S_i(k)] in sorted order)`.
fn sorted_amounts(
    ordered: &OrderedModel,
    option: &BasketOption,
    state: &MarketState,
) -> (f64, Vec<f64>) {
    assert_eq!(
        option.coeffs.len(),
        ordered.assets() + 1,
        "option has {} coefficients for {} assets",
        option.coeffs.len(),
        ordered.assets()
    );
    let risky = ordered
        .order()
        .iter()
        .map(|&u| option.coeffs[u + 1] * state.prices[u + 1])
        .collect();
    (option.coeffs[0] * state.prices[0], risky)
}

enum Weights {
    /// Pascal rows and `q_j^n` tables.
    Direct {
        binom: Vec<Vec<f64>>,
        q_pow: Vec<Vec<f64>>,
    },
    /// `ln n!` and `ln q_j` (`-inf` for zero weights).
    Log { ln_fact: Vec<f64>, ln_q: Vec<f64> },
}

/// Depth-first evaluation of the count-vector sum.
///
/// Level `j` chooses `n_j`; entering level `j ≥ 1` with `r` steps left means
/// `t_j = r`, which fixes the factor `c_j S_j U_j^r D_j^{h-r}` of asset `j`.
struct Kernel<'a> {
    h: usize,
    m: usize,
    strike: f64,
    bond: f64,
    /// `asset_terms[i][t] = c S U^t D^{h-t}` for sorted asset `i + 1`.
    asset_terms: Vec<Vec<f64>>,
    q: &'a [f64],
    weights: Weights,
    discount: f64,
}

impl<'a> Kernel<'a> {
    fn new(
        ordered: &'a OrderedModel,
        option: &BasketOption,
        state: &MarketState,
        force_log: Option<bool>,
    ) -> Self {
        let h = remaining_steps(ordered, state) as usize;
        let m = ordered.assets();
        let (bond, risky) = sorted_amounts(ordered, option, state);
        let growth = powi(ordered.rate(), h as u32);
        let asset_terms = (0..m)
            .map(|i| {
                let (u, d) = (ordered.sorted_up()[i], ordered.sorted_down()[i]);
                let mut up_pow = vec![1.0; h + 1];
                let mut down_pow = vec![1.0; h + 1];
                for t in 1..=h {
                    up_pow[t] = up_pow[t - 1] * u;
                    down_pow[t] = down_pow[t - 1] * d;
                }
                (0..=h)
                    .map(|t| risky[i] * up_pow[t] * down_pow[h - t])
                    .collect()
            })
            .collect();
        let q = ordered.q();
        let use_log = force_log.unwrap_or(h > LOG_SPACE_STEPS);
        let weights = if use_log {
            let mut ln_fact = vec![0.0; h + 1];
            for n in 1..=h {
                ln_fact[n] = ln_fact[n - 1] + ln(n as f64);
            }
            let ln_q = q
                .iter()
                .map(|&x| if x > 0.0 { ln(x) } else { f64::NEG_INFINITY })
                .collect();
            Weights::Log { ln_fact, ln_q }
        } else {
            let binom = (0..=h)
                .map(|r| (0..=r).map(|n| binomial(r, n)).collect())
                .collect();
            let q_pow = q
                .iter()
                .map(|&x| {
                    let mut row = vec![1.0; h + 1];
                    for n in 1..=h {
                        row[n] = row[n - 1] * x;
                    }
                    row
                })
                .collect();
            Weights::Direct { binom, q_pow }
        };
        Self {
            h,
            m,
            strike: option.strike,
            bond: bond * growth,
            asset_terms,
            q,
            weights,
            discount: growth,
        }
    }

    fn unit(&self) -> f64 {
        match self.weights {
            Weights::Direct { .. } => 1.0,
            Weights::Log { .. } => 0.0,
        }
    }

    /// Weight after choosing `n` of vertex `j` out of `r` remaining steps,
    /// or `None` when the branch carries zero probability.
    #[inline]
    fn choose(&self, j: usize, r: usize, n: usize, coeff: f64) -> Option<f64> {
        if n > 0 && self.q[j] <= 0.0 {
            return None;
        }
        match &self.weights {
            Weights::Direct { binom, q_pow } => {
                let c = coeff * binom[r][n] * q_pow[j][n];
                (c != 0.0).then_some(c)
            }
            Weights::Log { ln_fact, ln_q } => {
                let lq = if n == 0 { 0.0 } else { n as f64 * ln_q[j] };
                Some(coeff + ln_fact[r] - ln_fact[n] - ln_fact[r - n] + lq)
            }
        }
    }

    #[inline]
    fn finish(&self, coeff: f64) -> f64 {
        match self.weights {
            Weights::Direct { .. } => coeff,
            Weights::Log { .. } => exp(coeff),
        }
    }

    /// Basket value after entering level `level` with `r` steps left.
    #[inline]
    fn enter(&self, level: usize, r: usize, basket: f64) -> f64 {
        if level == 0 {
            basket
        } else {
            basket + self.asset_terms[level - 1][r]
        }
    }

    fn visit(&self, level: usize, r: usize, coeff: f64, basket: f64, acc: &mut CompensatedSum) {
        let basket = self.enter(level, r, basket);
        if level == self.m {
            if let Some(c) = self.choose(level, r, r, coeff) {
                acc.add(self.finish(c) * positive_part(basket - self.strike));
            }
            return;
        }
        for n in (0..=r).rev() {
            if let Some(c) = self.choose(level, r, n, coeff) {
                self.visit(level + 1, r - n, c, basket, acc);
            }
        }
    }

    /// Fixed partition of the enumeration: one chunk per choice of the
    /// leading `min(2, m)` counts, in enumeration order.
    fn chunks(&self) -> Vec<Vec<usize>> {
        let depth = self.m.min(2);
        let mut out = Vec::new();
        let mut prefix = Vec::with_capacity(depth);
        fn rec(depth: usize, r: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if prefix.len() == depth {
                out.push(prefix.clone());
                return;
            }
            for n in (0..=r).rev() {
                prefix.push(n);
                rec(depth, r - n, prefix, out);
                prefix.pop();
            }
        }
        rec(depth, self.h, &mut prefix, &mut out);
        out
    }

    fn chunk_sum(&self, prefix: &[usize]) -> f64 {
        let mut acc = CompensatedSum::new();
        let mut r = self.h;
        let mut coeff = self.unit();
        let mut basket = self.bond;
        for (level, &n) in prefix.iter().enumerate() {
            basket = self.enter(level, r, basket);
            match self.choose(level, r, n, coeff) {
                Some(c) => coeff = c,
                None => return 0.0,
            }
            r -= n;
        }
        self.visit(prefix.len(), r, coeff, basket, &mut acc);
        acc.value()
    }

    fn evaluate(&self, execution: Execution) -> f64 {
        let chunks = self.chunks();
        let partials: Vec<f64> = match execution {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                chunks.par_iter().map(|p| self.chunk_sum(p)).collect()
            }
            _ => chunks.iter().map(|p| self.chunk_sum(p)).collect(),
        };
        compensated_sum(partials) / self.discount
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MarketModel, OrderedModel};
    use rand::{Rng, SeedableRng};

    fn one_step() -> (OrderedModel, BasketOption) {
        let model = MarketModel::new(1, 1.0, vec![1.0, 1.0], vec![0.5], vec![2.0]).unwrap();
        (
            OrderedModel::new(&model).unwrap(),
            BasketOption::new(vec![0.0, 1.0], 1.0).unwrap(),
        )
    }

    fn two_asset_one_step() -> (OrderedModel, BasketOption) {
        let model =
            MarketModel::new(1, 1.0, vec![1.0, 1.0, 1.0], vec![0.8, 0.5], vec![1.2, 2.0]).unwrap();
        (
            OrderedModel::new(&model).unwrap(),
            BasketOption::new(vec![0.0, 1.0, 1.0], 2.0).unwrap(),
        )
    }

    #[test]
    fn running_example_endpoints() {
        let (o, opt) = one_step();
        let s = MarketState::initial(o.base());
        assert_eq!(gamma_min(&o, &opt, &s), 0.0);
        assert!((gamma_max(&o, &opt, &s) - 1.0 / 3.0).abs() < 1e-15);
        assert!((gamma_max_naive(&o, &opt, &s, 10).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn two_asset_example() {
        let (o, opt) = two_asset_one_step();
        let s = MarketState::initial(o.base());
        let q = o.q();
        assert!((q[0] - 0.5).abs() < 1e-15);
        assert!((q[1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((q[2] - 1.0 / 3.0).abs() < 1e-15);
        assert!((gamma_max(&o, &opt, &s) - 0.4).abs() < 1e-12);
        assert_eq!(gamma_min(&o, &opt, &s), 0.0);
    }

    #[test]
    fn linear_claim_has_degenerate_interval() {
        let model =
            MarketModel::new(3, 1.05, vec![1.0, 2.0, 3.0], vec![0.9, 0.7], vec![1.3, 1.6]).unwrap();
        let o = OrderedModel::new(&model).unwrap();
        let opt = BasketOption::new(vec![0.5, 1.0, 2.0], 1e-9).unwrap();
        let s = MarketState::initial(&model);
        let linear = 0.5 + 2.0 + 6.0;
        assert!((gamma_min(&o, &opt, &s) - linear).abs() < 1e-8);
        assert!((gamma_max(&o, &opt, &s) - linear).abs() < 1e-8);
    }

    #[test]
    fn terminal_state_gives_payoff() {
        let model = MarketModel::new(2, 1.1, vec![1.0, 1.0], vec![0.6], vec![1.5]).unwrap();
        let o = OrderedModel::new(&model).unwrap();
        let opt = BasketOption::new(vec![0.0, 1.0], 1.0).unwrap();
        let s = MarketState::from_path(&model, &[vec![0.9], vec![0.7]]).unwrap();
        let f = crate::model::payoff(&opt, &s.prices);
        assert_eq!(gamma_min(&o, &opt, &s), f);
        assert_eq!(gamma_max(&o, &opt, &s), f);
        assert_eq!(gamma_max_naive(&o, &opt, &s, 1).unwrap(), f);
        assert!(matches!(
            y_values(&o, &opt, &s),
            Err(PricingError::TerminalState { k: 2, n: 2 })
        ));
    }

    #[test]
    fn naive_cap() {
        let model = MarketModel::new(12, 1.0, vec![1.0; 4], vec![0.5; 3], vec![2.0; 3]).unwrap();
        let o = OrderedModel::new(&model).unwrap();
        let opt = BasketOption::new(vec![0.0, 1.0, 1.0, 1.0], 3.0).unwrap();
        let err = gamma_max_naive(&o, &opt, &MarketState::initial(&model), DEFAULT_NAIVE_CAP);
        assert!(matches!(err, Err(PricingError::CapExceeded { .. })));
    }

    #[test]
    fn running_example_y_values() {
        let (o, opt) = one_step();
        let y = y_values(&o, &opt, &MarketState::initial(o.base())).unwrap();
        assert_eq!(y, vec![0.0, 1.0]);
    }

    #[test]
    fn log_space_matches_direct() {
        let model = MarketModel::new(
            30,
            1.01,
            vec![1.0, 1.0, 2.0, 0.5],
            vec![0.9, 0.95, 0.8],
            vec![1.1, 1.2, 1.15],
        )
        .unwrap();
        let o = OrderedModel::new(&model).unwrap();
        let opt = BasketOption::new(vec![0.0, 1.0, 0.5, 2.0], 3.0).unwrap();
        let s = MarketState::initial(&model);
        let direct = Kernel::new(&o, &opt, &s, Some(false)).evaluate(Execution::Serial);
        let logged = Kernel::new(&o, &opt, &s, Some(true)).evaluate(Execution::Serial);
        assert!((direct - logged).abs() <= 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn tied_b_skips_zero_weight_vertex() {
        let model =
            MarketModel::new(8, 1.0, vec![1.0, 1.0, 1.0], vec![0.5, 0.5], vec![2.0, 2.0]).unwrap();
        let o = OrderedModel::new(&model).unwrap();
        assert_eq!(o.q()[1], 0.0);
        let opt = BasketOption::new(vec![0.0, 1.0, 1.0], 2.5).unwrap();
        let s = MarketState::initial(&model);
        for force in [false, true] {
            let v = Kernel::new(&o, &opt, &s, Some(force)).evaluate(Execution::Serial);
            let naive = gamma_max_naive(&o, &opt, &s, DEFAULT_NAIVE_CAP).unwrap();
            assert!(v.is_finite());
            assert!((v - naive).abs() < 1e-10 * (1.0 + naive));
        }
    }

    #[test]
    fn term_dump_sums_to_gamma_max() {
        let model =
            MarketModel::new(4, 1.02, vec![1.0, 1.0, 1.5], vec![0.8, 0.9], vec![1.3, 1.2]).unwrap();
        let o = OrderedModel::new(&model).unwrap();
        let opt = BasketOption::new(vec![0.0, 1.0, 1.0], 2.4).unwrap();
        let s = MarketState::initial(&model);
        let terms = gamma_max_terms(&o, &opt, &s);
        assert_eq!(terms.len(), 15);
        assert_eq!(terms[0].counts, vec![4, 0, 0]);
        let total: f64 = terms.iter().map(|t| t.clipped_term).sum::<f64>() / 1.02f64.powi(4);
        assert!((total - gamma_max(&o, &opt, &s)).abs() < 1e-12);
    }

    #[test]
    fn oracle_equality_random() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..60 {
            let m = rng.random_range(1..=3);
            let n = rng.random_range(1..=5);
            let rate = rng.random_range(0.95..1.1);
            let down: Vec<f64> = (0..m).map(|_| rate * rng.random_range(0.5..0.99)).collect();
            let up: Vec<f64> = (0..m).map(|_| rate * rng.random_range(1.01..1.6)).collect();
            let s0: Vec<f64> = (0..=m).map(|_| rng.random_range(0.5..2.0)).collect();
            let model = MarketModel::new(n, rate, s0, down, up).unwrap();
            let o = OrderedModel::new(&model).unwrap();
            let mut c: Vec<f64> = (0..=m).map(|_| rng.random_range(0.0..1.5)).collect();
            c[0] = rng.random_range(-0.5..0.5);
            let opt = BasketOption::new(c, rng.random_range(0.2..3.0)).unwrap();
            let s = MarketState::initial(&model);
            let fast = gamma_max(&o, &opt, &s);
            let slow = gamma_max_naive(&o, &opt, &s, DEFAULT_NAIVE_CAP).unwrap();
            assert!(
                (fast - slow).abs() <= 1e-10 * (1.0 + slow.abs()),
                "{fast} vs {slow}"
            );
            assert!(gamma_min(&o, &opt, &s) <= fast + 1e-12);
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_is_bit_identical() {
        let model = MarketModel::new(
            12,
            1.01,
            vec![1.0; 5],
            vec![0.9, 0.85, 0.8, 0.95],
            vec![1.1, 1.2, 1.3, 1.05],
        )
        .unwrap();
        let o = OrderedModel::new(&model).unwrap();
        let opt = BasketOption::new(vec![0.0, 1.0, 1.0, 1.0, 1.0], 4.0).unwrap();
        let s = MarketState::initial(&model);
        let a = gamma_max_with(&o, &opt, &s, Execution::Serial);
        let b = gamma_max_with(&o, &opt, &s, Execution::Parallel);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
