//! Shrinking the jump bounds towards `R` while keeping `b` fixed.
//!
//! `d_i(s) = D_i + (R - D_i)s` and `u_i(s) = (R - (1-b_i) d_i(s)) / b_i`
//! leave every `b_i` unchanged, so the lower price is untouched while
//! `φ(s) = Γ_max(F, 0; u(s), d(s))` moves continuously from the upper price
//! at `s = 0` towards the lower price as `s → 1`.

use alloc::vec::Vec;

use crate::error::DeformationError;
use crate::math::abs;
use crate::model::{BasketOption, MarketState, OrderedModel};
use crate::pricing::{gamma_max, gamma_min};

/// Largest deformation parameter used; `s` closer to 1 is clamped here.
pub const S_MAX: f64 = 1.0 - 1e-9;

/// Deformed jump bounds in user order.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformedParams {
    pub s: f64,
    pub down: Vec<f64>,
    pub up: Vec<f64>,
    /// `R - d_i(s) = (R - D_i)(1 - s)`, computed without cancellation.
    pub gap_down: Vec<f64>,
    /// `u_i(s) - R = (R - d_i(s))(1 - b_i) / b_i`.
    pub gap_up: Vec<f64>,
}

impl DeformedParams {
    /// `b_i(s)` recomputed from the gaps.
    pub fn b(&self) -> Vec<f64> {
        self.gap_down
            .iter()
            .zip(&self.gap_up)
            .map(|(lo, hi)| lo / (lo + hi))
            .collect()
    }
}

/// Jump bounds at deformation parameter `s ∈ [0, 1)`.
pub fn deformed_params(ordered: &OrderedModel, s: f64) -> Result<DeformedParams, DeformationError> {
    if !(0.0..1.0).contains(&s) {
        return Err(DeformationError::OutOfRange(s));
    }
    let s = s.min(S_MAX);
    let model = ordered.base();
    let rate = model.rate;
    let b = ordered.b_user();
    let mut params = DeformedParams {
        s,
        down: Vec::with_capacity(b.len()),
        up: Vec::with_capacity(b.len()),
        gap_down: Vec::with_capacity(b.len()),
        gap_up: Vec::with_capacity(b.len()),
    };
    for (i, &bi) in b.iter().enumerate() {
        let (lo, hi) = (model.down[i], model.up[i]);
        let gap_down = (rate - lo) * (1.0 - s);
        let gap_up = gap_down * (1.0 - bi) / bi;
        if s == 0.0 {
            params.down.push(lo);
            params.up.push(hi);
        } else {
            params.down.push(lo + (rate - lo) * s);
            params.up.push(rate + gap_up);
        }
        params.gap_down.push(gap_down);
        params.gap_up.push(gap_up);
    }
    debug_assert!(params.b().iter().zip(&b).all(|(x, y)| abs(x - y) <= 1e-12));
    Ok(params)
}

/// The model with bounds deformed to `s`, sharing the base ordering and
/// vertex weights.
pub fn deformed_model(ordered: &OrderedModel, s: f64) -> Result<OrderedModel, DeformationError> {
    let params = deformed_params(ordered, s)?;
    Ok(ordered.with_bounds(params.down, params.up)?)
}

/// `φ(s)`: the time-0 upper price under the deformed bounds.
pub fn phi(ordered: &OrderedModel, option: &BasketOption, s: f64) -> Result<f64, DeformationError> {
    let deformed = deformed_model(ordered, s)?;
    Ok(gamma_max(
        &deformed,
        option,
        &MarketState::initial(deformed.base()),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Initial number of grid intervals on `[0, S_MAX]`.
    pub grid: usize,
    /// The grid doubles up to this size before giving up.
    pub max_grid: usize,
    /// Absolute tolerance on `|φ(s) - c|`; `None` means `1e-9 · scale`.
    pub tol: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            grid: 64,
            max_grid: 4096,
            tol: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationSolution {
    pub s: f64,
    pub phi: f64,
    pub residual: f64,
}

/// Finds `s` with `φ(s) = target` for a target strictly inside the price
/// interval. `φ` is continuous but not known to be monotone: a grid scan
/// locates the first sign change of `φ(s) - target`, which is then bisected,
/// so the smallest bracketed root is returned.
pub fn solve_deformation(
    ordered: &OrderedModel,
    option: &BasketOption,
    target: f64,
    opts: &SolveOptions,
) -> Result<DeformationSolution, DeformationError> {
    let state = MarketState::initial(ordered.base());
    let low = gamma_min(ordered, option, &state);
    let high = gamma_max(ordered, option, &state);
    if !(target > low && target < high) {
        return Err(DeformationError::TargetNotInterior {
            target,
            gamma_min: low,
            gamma_max: high,
        });
    }
    let tol = opts.tol.unwrap_or(1e-9 * option.scale(ordered.base()));
    let f = |s: f64| phi(ordered, option, s).map(|v| v - target);

    let mut grid = opts.grid.max(1);
    let (mut lo, mut hi) = loop {
        let mut prev = 0.0;
        let mut bracket = None;
        for i in 1..=grid {
            let s = S_MAX * i as f64 / grid as f64;
            let v = f(s)?;
            if v <= 0.0 {
                bracket = Some((prev, s));
                break;
            }
            prev = s;
        }
        if let Some(b) = bracket {
            break b;
        }
        if grid >= opts.max_grid {
            return Err(DeformationError::NoBracket { grid });
        }
        grid = (grid * 2).min(opts.max_grid);
    };

    // Bisect down to the floating-point resolution of the bracket and keep
    // the best point seen; `tol` only decides success.
    let mut best = (hi, f(hi)?);
    while hi - lo > f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid)?;
        if abs(v) < abs(best.1) {
            best = (mid, v);
        }
        if v == 0.0 {
            break;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (s, residual) = best;
    if abs(residual) <= tol {
        Ok(DeformationSolution {
            s,
            phi: residual + target,
            residual,
        })
    } else {
        Err(DeformationError::NoConvergence { s, residual })
    }
}

/// One row of a deformation sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub s: f64,
    pub down: Vec<f64>,
    pub up: Vec<f64>,
    pub phi: f64,
}

/// `φ` on `points` evenly spaced parameters from 0 to [`S_MAX`].
pub fn deformation_sweep(
    ordered: &OrderedModel,
    option: &BasketOption,
    points: usize,
) -> Result<Vec<SweepRow>, DeformationError> {
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let s = S_MAX * i as f64 / (points - 1) as f64;
            let params = deformed_params(ordered, s)?;
            let value = phi(ordered, option, s)?;
            Ok(SweepRow {
                s: params.s,
                down: params.down,
                up: params.up,
                phi: value,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MarketModel;

    fn running() -> (OrderedModel, BasketOption) {
        let model = MarketModel::new(1, 1.0, vec![1.0, 1.0], vec![0.5], vec![2.0]).unwrap();
        (
            OrderedModel::new(&model).unwrap(),
            BasketOption::new(vec![0.0, 1.0], 1.0).unwrap(),
        )
    }

    #[test]
    fn identity_at_zero() {
        let (o, opt) = running();
        let p = deformed_params(&o, 0.0).unwrap();
        assert_eq!(p.down, vec![0.5]);
        assert_eq!(p.up, vec![2.0]);
        let base = gamma_max(&o, &opt, &MarketState::initial(o.base()));
        assert_eq!(phi(&o, &opt, 0.0).unwrap(), base);
    }

    #[test]
    fn half_way_running_example() {
        let (o, opt) = running();
        let p = deformed_params(&o, 0.5).unwrap();
        assert!((p.down[0] - 0.75).abs() < 1e-15);
        assert!((p.up[0] - 1.5).abs() < 1e-15);
        assert!(((1.0 - p.down[0]) / (p.up[0] - p.down[0]) - 1.0 / 3.0).abs() < 1e-15);
        assert!((phi(&o, &opt, 0.5).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn bounds_collapse_towards_rate() {
        let (o, _) = running();
        let p = deformed_params(&o, 1.0 - 1e-6).unwrap();
        assert!((p.down[0] - 1.0).abs() < 1e-5 && (p.up[0] - 1.0).abs() < 1e-5);
        assert!(p.down[0] < 1.0 && p.up[0] > 1.0);
        assert!((p.b()[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            deformed_params(&o, 1.0),
            Err(DeformationError::OutOfRange(_))
        ));
        assert!(deformed_params(&o, -0.1).is_err());
    }

    #[test]
    fn round_trip_through_phi() {
        let (o, opt) = running();
        let target = phi(&o, &opt, 0.5).unwrap();
        let sol = solve_deformation(&o, &opt, target, &SolveOptions::default()).unwrap();
        assert!((sol.s - 0.5).abs() < 1e-6);
        assert!(sol.residual.abs() <= 1e-9 * opt.scale(o.base()));
    }

    #[test]
    fn endpoints_are_rejected() {
        let (o, opt) = running();
        let s = MarketState::initial(o.base());
        for c in [gamma_max(&o, &opt, &s), gamma_min(&o, &opt, &s)] {
            assert!(matches!(
                solve_deformation(&o, &opt, c, &SolveOptions::default()),
                Err(DeformationError::TargetNotInterior { .. })
            ));
        }
    }

    #[test]
    fn sweep_starts_at_upper_price() {
        let (o, opt) = running();
        let rows = deformation_sweep(&o, &opt, 5).unwrap();
        assert_eq!(rows.len(), 5);
        assert!((rows[0].phi - 1.0 / 3.0).abs() < 1e-15);
        assert!(rows[4].phi < 1e-6);
    }
}
