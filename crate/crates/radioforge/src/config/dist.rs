//! Parameter distributions for scenario sampling.
//!
//! Every randomized quantity in a scenario (emitter counts, symbol rates,
//! impairment levels, path delays, ...) is described in the configuration
//! as a named distribution, so a dataset's statistics are part of its
//! config rather than baked into code.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ParameterDistribution {
    /// Degenerate distribution: always `value`.
    Constant { value: f64 },
    /// Continuous uniform on [low, high).
    Uniform { low: f64, high: f64 },
    /// Integer uniform on {low, low+1, ..., high}, inclusive.
    UniformDiscrete { low: i64, high: i64 },
    /// log(X) uniform on [log(low), log(high)); spreads samples evenly
    /// across decades, used for path delays and link distances.
    LogUniform { low: f64, high: f64 },
    /// Finite set of values with relative weights.
    Categorical { values: Vec<f64>, weights: Vec<f64> },
}

impl ParameterDistribution {
    pub fn uniform(low: f64, high: f64) -> Self {
        ParameterDistribution::Uniform { low, high }
    }

    pub fn uniform_discrete(low: i64, high: i64) -> Self {
        ParameterDistribution::UniformDiscrete { low, high }
    }

    pub fn log_uniform(low: f64, high: f64) -> Self {
        ParameterDistribution::LogUniform { low, high }
    }

    pub fn constant(value: f64) -> Self {
        ParameterDistribution::Constant { value }
    }

    /// Checks internal consistency. `name` only decorates error messages.
    pub fn validate(&self, name: &str) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("distribution `{name}`: {msg}")));
        match self {
            ParameterDistribution::Constant { value } => {
                if !value.is_finite() {
                    return fail(format!("constant value {value} is not finite"));
                }
            }
            ParameterDistribution::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite()) || low > high {
                    return fail(format!("uniform bounds [{low}, {high}] are invalid"));
                }
            }
            ParameterDistribution::UniformDiscrete { low, high } => {
                if low > high {
                    return fail(format!("discrete bounds [{low}, {high}] are inverted"));
                }
            }
            ParameterDistribution::LogUniform { low, high } => {
                if !(*low > 0.0 && high.is_finite() && low <= high) {
                    return fail(format!("log-uniform bounds [{low}, {high}] must be positive and ordered"));
                }
            }
            ParameterDistribution::Categorical { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    return fail("categorical values/weights must be non-empty and equal length".into());
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
                    return fail("categorical weights must be non-negative with positive sum".into());
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            ParameterDistribution::Constant { value } => *value,
            ParameterDistribution::Uniform { low, high } => {
                if low == high {
                    *low
                } else {
                    rng.gen_range(*low..*high)
                }
            }
            ParameterDistribution::UniformDiscrete { low, high } => rng.gen_range(*low..=*high) as f64,
            ParameterDistribution::LogUniform { low, high } => {
                if low == high {
                    *low
                } else {
                    (rng.gen_range(low.ln()..high.ln())).exp()
                }
            }
            ParameterDistribution::Categorical { values, weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.gen_range(0.0..total);
                for (v, w) in values.iter().zip(weights) {
                    if u < *w {
                        return *v;
                    }
                    u -= w;
                }
                *values.last().unwrap()
            }
        }
    }

    /// Integer sample; rounds for continuous kinds.
    pub fn sample_int<R: Rng>(&self, rng: &mut R) -> i64 {
        self.sample(rng).round() as i64
    }

    /// Exact P(X >= t). Used by the scheduler to condition the per-frame
    /// overlap draw on frames that can actually contain a pair.
    pub fn prob_at_least(&self, t: f64) -> f64 {
        match self {
            ParameterDistribution::Constant { value } => {
                if *value >= t {
                    1.0
                } else {
                    0.0
                }
            }
            ParameterDistribution::Uniform { low, high } => {
                if high == low {
                    return if *low >= t { 1.0 } else { 0.0 };
                }
                ((high - t) / (high - low)).clamp(0.0, 1.0)
            }
            ParameterDistribution::UniformDiscrete { low, high } => {
                let n = (high - low + 1) as f64;
                let k = (*high as f64 - t.ceil() + 1.0).max(0.0).min(n);
                k / n
            }
            ParameterDistribution::LogUniform { low, high } => {
                if high == low {
                    return if *low >= t { 1.0 } else { 0.0 };
                }
                if t <= *low {
                    return 1.0;
                }
                if t >= *high {
                    return 0.0;
                }
                (high.ln() - t.ln()) / (high.ln() - low.ln())
            }
            ParameterDistribution::Categorical { values, weights } => {
                let total: f64 = weights.iter().sum();
                values
                    .iter()
                    .zip(weights)
                    .filter(|(v, _)| **v >= t)
                    .map(|(_, w)| *w)
                    .sum::<f64>()
                    / total
            }
        }
    }

    /// Analytic mean, used for schedule spacing heuristics.
    pub fn mean(&self) -> f64 {
        match self {
            ParameterDistribution::Constant { value } => *value,
            ParameterDistribution::Uniform { low, high } => 0.5 * (low + high),
            ParameterDistribution::UniformDiscrete { low, high } => 0.5 * (*low + *high) as f64,
            ParameterDistribution::LogUniform { low, high } => {
                if (high - low).abs() < f64::EPSILON {
                    *low
                } else {
                    (high - low) / (high.ln() - low.ln())
                }
            }
            ParameterDistribution::Categorical { values, weights } => {
                let total: f64 = weights.iter().sum();
                values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
            }
        }
    }

    /// Smallest value the distribution can produce.
    pub fn min_value(&self) -> f64 {
        match self {
            ParameterDistribution::Constant { value } => *value,
            ParameterDistribution::Uniform { low, .. } => *low,
            ParameterDistribution::UniformDiscrete { low, .. } => *low as f64,
            ParameterDistribution::LogUniform { low, .. } => *low,
            ParameterDistribution::Categorical { values, .. } => {
                values.iter().cloned().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Largest value the distribution can produce.
    pub fn max_value(&self) -> f64 {
        match self {
            ParameterDistribution::Constant { value } => *value,
            ParameterDistribution::Uniform { high, .. } => *high,
            ParameterDistribution::UniformDiscrete { high, .. } => *high as f64,
            ParameterDistribution::LogUniform { high, .. } => *high,
            ParameterDistribution::Categorical { values, .. } => {
                values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }
}
