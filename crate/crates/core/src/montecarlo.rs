//! Monte-Carlo pricing under a path measure.
//!
//! Samples are split into fixed-size batches. Batch `i` draws from the
//! ChaCha8 stream `i` of the run seed, and batch statistics are merged in
//! batch order, so the estimate depends only on `(seed, samples,
//! batch_size)` and never on how many workers ran the batches.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;

use crate::error::MeasureError;
use crate::math::{powi, sqrt};
use crate::measure::PathMeasure;
use crate::model::{payoff, BasketOption, OrderedModel};
use crate::pricing::Execution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub batch_size: u64,
    pub execution: Execution,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
            batch_size: 4096,
            execution: Execution::Serial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McEstimate {
    /// `R^{-n}` times the sample mean of the payoff.
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
    pub batch_size: u64,
}

/// Running count, mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if other.count == 0.0 {
            return self;
        }
        if self.count == 0.0 {
            return other;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        Self {
            count,
            mean: self.mean + d * other.count / count,
            m2: self.m2 + other.m2 + d * d * self.count * other.count / count,
        }
    }
}

/// Discounted Monte-Carlo price with its standard error.
pub fn mc_price(
    ordered: &OrderedModel,
    option: &BasketOption,
    measure: &PathMeasure,
    config: &McConfig,
) -> Result<McEstimate, MeasureError> {
    let model = ordered.base();
    if config.samples < 2 || config.batch_size == 0 {
        return Err(MeasureError::TooFewSamples);
    }
    if measure.steps.len() != model.steps {
        return Err(MeasureError::HorizonMismatch {
            expected: model.steps,
            found: measure.steps.len(),
        });
    }
    for step in &measure.steps {
        if step.dim() != model.assets() {
            return Err(MeasureError::Dimension {
                atom: 0,
                expected: model.assets(),
                found: step.dim(),
            });
        }
    }
    let batches = config.samples.div_ceil(config.batch_size);
    let run_batch = |index: u64| -> Moments {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(index);
        let start = index * config.batch_size;
        let len = config.batch_size.min(config.samples - start);
        let mut moments = Moments::default();
        let mut jump = vec![0.0; model.assets()];
        let mut prices = vec![0.0; model.assets() + 1];
        for _ in 0..len {
            prices.copy_from_slice(&model.initial_prices);
            for step in &measure.steps {
                step.sample_into(&mut rng, &mut jump);
                prices[0] *= model.rate;
                for (i, &omega) in jump.iter().enumerate() {
                    prices[i + 1] *= model.jump_factor(i, omega);
                }
            }
            moments.push(payoff(option, &prices));
        }
        moments
    };
    let parts: Vec<Moments> = match config.execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..batches).into_par_iter().map(run_batch).collect()
        }
        _ => (0..batches).map(run_batch).collect(),
    };
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let discount = powi(model.rate, model.steps as u32);
    let variance = total.m2 / (total.count - 1.0);
    Ok(McEstimate {
        estimate: total.mean / discount,
        std_error: sqrt(variance / total.count) / discount,
        samples: config.samples,
        seed: config.seed,
        batch_size: config.batch_size,
    })
}
