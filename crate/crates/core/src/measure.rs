//! Sampleable non-degenerate one-step measures on `[0,1]^m` with mean `b`.
//!
//! Every measure is a mixture of a uniform background of weight `β` and
//! uniform boxes. The background keeps the density strictly positive; the
//! boxes concentrate mass where the payoff expectation should be pushed
//! (near the chain vertices for the upper end, near `b` for the lower end).
//! Means are exact by construction and checkable in closed form.

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;

use crate::error::MeasureError;
use crate::math::abs;
use crate::model::OrderedModel;

/// Default weight of the uniform background.
pub const DEFAULT_BETA: f64 = 1e-3;

/// Tolerance for analytic mean checks.
pub const MEAN_TOLERANCE: f64 = 1e-12;

/// Boxes stop this fraction short of the available room.
const INTERIOR_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MeasureKind {
    UniformMixture,
    VertexBoxes,
    CenterBox,
}

impl MeasureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MeasureKind::UniformMixture => "uniform-mixture",
            MeasureKind::VertexBoxes => "vertex-boxes",
            MeasureKind::CenterBox => "center-box",
        }
    }
}

/// Uniform distribution on `center + [-radius, radius]^m`, with mixture weight.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxAtom {
    pub center: Vec<f64>,
    pub radius: f64,
    pub weight: f64,
}

/// Requested atom for [`make_product_measure`].
#[derive(Debug, Clone, PartialEq)]
pub struct AtomSpec {
    pub center: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OneStepMeasure {
    kind: MeasureKind,
    dim: usize,
    beta: f64,
    atoms: Vec<BoxAtom>,
}

impl OneStepMeasure {
    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Weight of the uniform background.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn atoms(&self) -> &[BoxAtom] {
        &self.atoms
    }

    /// `β·(1/2,…,1/2) + Σ w·center`.
    pub fn analytic_mean(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                crate::math::compensated_sum(
                    core::iter::once(0.5 * self.beta)
                        .chain(self.atoms.iter().map(|a| a.weight * a.center[i])),
                )
            })
            .collect()
    }

    /// Draws one point into `out`; returns the component it came from
    /// (`None` for the background, `Some(i)` for atom `i`).
    pub fn sample_into<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Option<usize> {
        let u = unit(rng);
        let component = if u < self.beta || self.atoms.is_empty() {
            None
        } else {
            let mut acc = self.beta;
            let mut pick = self.atoms.len() - 1;
            for (i, atom) in self.atoms.iter().enumerate() {
                acc += atom.weight;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            Some(pick)
        };
        match component {
            None => out.iter_mut().for_each(|x| *x = unit(rng)),
            Some(i) => {
                let atom = &self.atoms[i];
                for (x, c) in out.iter_mut().zip(&atom.center) {
                    *x = c + atom.radius * (2.0 * unit(rng) - 1.0);
                }
            }
        }
        component
    }
}

/// Uniform draw in `[0, 1)` with 53 random bits.
#[inline]
pub(crate) fn unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Product of one-step measures, one per time step.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathMeasure {
    pub steps: Vec<OneStepMeasure>,
}

impl PathMeasure {
    /// The same one-step measure at every one of `n` steps.
    pub fn homogeneous(step: OneStepMeasure, n: usize) -> Self {
        Self {
            steps: vec![step; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.steps.first().map_or(0, |s| s.dim)
    }
}

/// Independent draws per step; returns `n` jump vectors.
pub fn sample_path<R: RngCore + ?Sized>(measure: &PathMeasure, rng: &mut R) -> Vec<Vec<f64>> {
    measure
        .steps
        .iter()
        .map(|step| {
            let mut point = vec![0.0; step.dim];
            step.sample_into(rng, &mut point);
            point
        })
        .collect()
}

fn check_beta(beta: f64, allow_one: bool) -> Result<(), MeasureError> {
    let ok = beta > 0.0 && (beta < 1.0 || (allow_one && beta == 1.0));
    if ok {
        Ok(())
    } else {
        Err(MeasureError::InvalidBeta(beta))
    }
}

fn check_target(b: &[f64]) -> Result<(), MeasureError> {
    for (index, &value) in b.iter().enumerate() {
        if !(value > 0.0 && value < 1.0) {
            return Err(MeasureError::MeanOutOfRange { index, value });
        }
    }
    Ok(())
}

/// Smallest distance from any atom center to the boundary of the cube.
fn room(centers: impl Iterator<Item = (usize, Vec<f64>)>) -> Result<f64, MeasureError> {
    let mut best = f64::INFINITY;
    for (atom, center) in centers {
        for (coord, &value) in center.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(MeasureError::Infeasible { atom, coord, value });
            }
            best = best.min(value).min(1.0 - value);
        }
    }
    Ok(best)
}

/// Uniform background of weight `beta` plus boxes at `atoms`, with the
/// first atom's center shifted so that the mixture mean is exactly `b`.
///
/// The common box radius is the largest that keeps every box inside
/// `(0,1)^m`, capped at `r_max`. With `beta = 1` and no atoms the result is
/// the plain uniform measure, which requires `b = (1/2,…,1/2)`.
pub fn make_product_measure(
    b: &[f64],
    beta: f64,
    atoms: &[AtomSpec],
    r_max: f64,
) -> Result<OneStepMeasure, MeasureError> {
    check_beta(beta, atoms.is_empty())?;
    check_target(b)?;
    let dim = b.len();
    for (atom, spec) in atoms.iter().enumerate() {
        if spec.center.len() != dim {
            return Err(MeasureError::Dimension {
                atom,
                expected: dim,
                found: spec.center.len(),
            });
        }
    }
    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    if abs(total - (1.0 - beta)) > MEAN_TOLERANCE || atoms.iter().any(|a| a.weight < 0.0) {
        return Err(MeasureError::WeightMismatch {
            sum: total,
            expected: 1.0 - beta,
        });
    }
    if atoms.is_empty() {
        if let Some((index, &value)) = b
            .iter()
            .enumerate()
            .find(|(_, &v)| abs(v - 0.5) > MEAN_TOLERANCE)
        {
            return Err(MeasureError::UniformMeanMismatch { index, value });
        }
        return Ok(OneStepMeasure {
            kind: MeasureKind::UniformMixture,
            dim,
            beta,
            atoms: Vec::new(),
        });
    }

    let mut centers: Vec<Vec<f64>> = atoms.iter().map(|a| a.center.clone()).collect();
    let lead = atoms[0].weight;
    if lead <= 0.0 {
        return Err(MeasureError::Infeasible {
            atom: 0,
            coord: 0,
            value: f64::NAN,
        });
    }
    for i in 0..dim {
        let current: f64 = atoms.iter().map(|a| a.weight * a.center[i]).sum();
        centers[0][i] += (b[i] - 0.5 * beta - current) / lead;
    }
    let space = room(centers.iter().cloned().enumerate())?;
    let radius = r_max.min(space * (1.0 - INTERIOR_MARGIN));
    Ok(OneStepMeasure {
        kind: MeasureKind::UniformMixture,
        dim,
        beta,
        atoms: centers
            .into_iter()
            .zip(atoms)
            .map(|(center, spec)| BoxAtom {
                center,
                radius,
                weight: spec.weight,
            })
            .collect(),
    })
}

/// A spread-out mean-`b` mixture: uniform background plus one wide box.
///
/// The background weight is as large as possible (at most 1/2) while the
/// single mean-correcting center stays inside the cube.
pub fn make_uniform_mixture(b: &[f64], r_max: f64) -> Result<OneStepMeasure, MeasureError> {
    check_target(b)?;
    let room = b
        .iter()
        .fold(f64::INFINITY, |acc, &x| acc.min(x).min(1.0 - x));
    let beta = (0.9 * 2.0 * room).min(0.5);
    let spec = AtomSpec {
        center: b.to_vec(),
        weight: 1.0 - beta,
    };
    make_product_measure(b, beta, core::slice::from_ref(&spec), r_max)
}

/// One box of radius `delta` around (the mean-corrected) `b` plus a
/// uniform background of weight `beta`. Approaches the point mass at `b`,
/// whose expectation is the lower price.
pub fn make_jensen_measure(
    b: &[f64],
    beta: f64,
    delta: f64,
) -> Result<OneStepMeasure, MeasureError> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(MeasureError::InvalidDelta(delta));
    }
    check_beta(beta, false)?;
    let spec = AtomSpec {
        center: b.to_vec(),
        weight: 1.0 - beta,
    };
    let mut measure = make_product_measure(b, beta, core::slice::from_ref(&spec), delta).map_err(
        |e| match e {
            MeasureError::Infeasible { value, .. } => MeasureError::BoxDoesNotFit {
                delta,
                room: value.min(1.0 - value),
            },
            other => other,
        },
    )?;
    let center = &measure.atoms[0].center;
    let space = center
        .iter()
        .fold(f64::INFINITY, |acc, &c| acc.min(c).min(1.0 - c));
    if space <= delta {
        return Err(MeasureError::BoxDoesNotFit { delta, room: space });
    }
    measure.atoms[0].radius = delta;
    measure.kind = MeasureKind::CenterBox;
    Ok(measure)
}

/// Smoothed version of the chain-vertex measure `q`: small boxes near
/// interior copies of `ρ_0,…,ρ_m` (zero-weight vertices dropped) with
/// weights `q_j - β/k'`, plus a uniform background `β`. Mean exactly `b`.
///
/// Each vertex is pulled towards `b` by `δ/6` to reach the interior. The
/// mean defect left by the background is then absorbed coordinate by
/// coordinate by the atoms that sit at the far side of that coordinate, so
/// every correction points into the cube. Box radii stay below `δ/3`.
/// Output coordinates are in user asset order.
pub fn make_extremal_measure(
    ordered: &OrderedModel,
    beta: f64,
    delta: f64,
) -> Result<OneStepMeasure, MeasureError> {
    check_beta(beta, false)?;
    if delta.is_nan() || delta <= 0.0 {
        return Err(MeasureError::InvalidDelta(delta));
    }
    let b = ordered.b();
    let m = b.len();
    let retained: Vec<usize> = (0..=m).filter(|&j| ordered.q()[j] > 0.0).collect();
    let min_weight = retained
        .iter()
        .map(|&j| ordered.q()[j])
        .fold(f64::INFINITY, f64::min);
    if beta >= min_weight {
        return Err(MeasureError::BetaTooLarge { beta, min_weight });
    }
    let share = beta / retained.len() as f64;
    let weights: Vec<f64> = retained.iter().map(|&j| ordered.q()[j] - share).collect();
    let pull = (delta / 6.0).min(0.5);
    // ρ_j has coordinate i equal to 1 exactly when i < j (0-based sorted i).
    let mut centers: Vec<Vec<f64>> = retained
        .iter()
        .map(|&j| {
            (0..m)
                .map(|i| {
                    let vertex = if i < j { 1.0 } else { 0.0 };
                    (1.0 - pull) * vertex + pull * b[i]
                })
                .collect()
        })
        .collect();
    for i in 0..m {
        let current: f64 = weights.iter().zip(&centers).map(|(w, c)| w * c[i]).sum();
        let defect = b[i] - 0.5 * beta - current;
        // upward corrections go to atoms near 0 in this coordinate, downward to atoms near 1
        let movable: Vec<usize> = (0..retained.len())
            .filter(|&a| (retained[a] <= i) == (defect >= 0.0))
            .collect();
        let mass: f64 = movable.iter().map(|&a| weights[a]).sum();
        for &a in &movable {
            centers[a][i] += defect / mass;
        }
    }
    let space = room(centers.iter().cloned().enumerate())?;
    let radius = (delta / 3.0).min(space) * (1.0 - INTERIOR_MARGIN);
    Ok(OneStepMeasure {
        kind: MeasureKind::VertexBoxes,
        dim: m,
        beta,
        atoms: centers
            .into_iter()
            .zip(weights)
            .map(|(center, weight)| BoxAtom {
                center: ordered.to_user(&center),
                radius,
                weight,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanCheck {
    pub passed: bool,
    pub mean: Vec<f64>,
    pub max_deviation: f64,
}

/// Compares the closed-form mixture mean with `b` at [`MEAN_TOLERANCE`].
pub fn check_mean_b(measure: &OneStepMeasure, b: &[f64]) -> MeanCheck {
    let mean = measure.analytic_mean();
    let max_deviation = if mean.len() == b.len() {
        mean.iter()
            .zip(b)
            .map(|(x, y)| abs(x - y))
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    MeanCheck {
        passed: max_deviation <= MEAN_TOLERANCE,
        mean,
        max_deviation,
    }
}
