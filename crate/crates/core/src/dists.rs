//! Infectious-period (and latency) distributions.
//!
//! Three families cover the analyses we need: `Exponential(rate)` gives the
//! Markovian model, `Constant(value)` gives the continuous-time Reed-Frost
//! model, and `Gamma(shape, rate)` interpolates between them. Each exposes
//! its mean, squared coefficient of variation (the `r^2` entering final-size
//! variances) and Laplace transform `phi(theta) = E[exp(-theta * I)]`, the
//! workhorse of the exact final-size system:
//!
//! * Exponential: `phi(theta) = rate / (rate + theta)`, `r^2 = 1`
//! * Constant:    `phi(theta) = exp(-theta * value)`, `r^2 = 0`
//! * Gamma:       `phi(theta) = (rate / (rate + theta))^shape`, `r^2 = 1/shape`

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A nonnegative random duration. Construct through [`exponential`],
/// [`constant`] or [`gamma`] so parameter validity is guaranteed.
///
/// [`exponential`]: DurationDistribution::exponential
/// [`constant`]: DurationDistribution::constant
/// [`gamma`]: DurationDistribution::gamma
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Repr", into = "Repr")]
pub struct DurationDistribution {
    kind: DurationKind,
}

/// Read-only view of the distribution family and its parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DurationKind {
    Exponential { rate: f64 },
    Constant { value: f64 },
    Gamma { shape: f64, rate: f64 },
}

impl DurationDistribution {
    /// Exponential with the given rate (mean `1/rate`). Requires `rate > 0`.
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "exponential duration requires rate > 0 (got {rate})"
            )));
        }
        Ok(Self {
            kind: DurationKind::Exponential { rate },
        })
    }

    /// Deterministic duration of length `value`. Requires `value >= 0`.
    pub fn constant(value: f64) -> Result<Self> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "constant duration requires value >= 0 (got {value})"
            )));
        }
        Ok(Self {
            kind: DurationKind::Constant { value },
        })
    }

    /// Gamma with the given shape and rate (mean `shape/rate`). Requires
    /// `shape > 0` and `rate > 0`.
    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) || !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "gamma duration requires shape > 0 and rate > 0 (got shape={shape}, rate={rate})"
            )));
        }
        Ok(Self {
            kind: DurationKind::Gamma { shape, rate },
        })
    }

    pub fn kind(&self) -> DurationKind {
        self.kind
    }

    pub fn mean(&self) -> f64 {
        match self.kind {
            DurationKind::Exponential { rate } => 1.0 / rate,
            DurationKind::Constant { value } => value,
            DurationKind::Gamma { shape, rate } => shape / rate,
        }
    }

    pub fn variance(&self) -> f64 {
        match self.kind {
            DurationKind::Exponential { rate } => 1.0 / (rate * rate),
            DurationKind::Constant { .. } => 0.0,
            DurationKind::Gamma { shape, rate } => shape / (rate * rate),
        }
    }

    /// Squared coefficient of variation `Var(I) / E(I)^2`; by convention 0
    /// for constant durations (including the degenerate zero duration).
    pub fn scv(&self) -> f64 {
        match self.kind {
            DurationKind::Exponential { .. } => 1.0,
            DurationKind::Constant { .. } => 0.0,
            DurationKind::Gamma { shape, .. } => 1.0 / shape,
        }
    }

    /// Laplace transform `E[exp(-theta * I)]`, defined for `theta >= 0`.
    pub fn laplace(&self, theta: f64) -> Result<f64> {
        if !(theta >= 0.0) {
            return Err(Error::Domain(format!(
                "Laplace transform requires theta >= 0 (got {theta})"
            )));
        }
        Ok(match self.kind {
            DurationKind::Exponential { rate } => rate / (rate + theta),
            DurationKind::Constant { value } => (-theta * value).exp(),
            DurationKind::Gamma { shape, rate } => (rate / (rate + theta)).powf(shape),
        })
    }

    /// Draw one duration.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().sample(rng)
    }

    /// Pre-built sampler for hot loops (avoids re-deriving sampler constants
    /// on every draw).
    pub(crate) fn sampler(&self) -> PeriodSampler {
        match self.kind {
            DurationKind::Exponential { rate } => {
                PeriodSampler::Exp(rand_distr::Exp::new(rate).expect("validated rate"))
            }
            DurationKind::Constant { value } => PeriodSampler::Const(value),
            DurationKind::Gamma { shape, rate } => {
                PeriodSampler::Gamma(rand_distr::Gamma::new(shape, 1.0 / rate).expect("validated"))
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum PeriodSampler {
    Exp(rand_distr::Exp<f64>),
    Const(f64),
    Gamma(rand_distr::Gamma<f64>),
}

impl PeriodSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            PeriodSampler::Exp(d) => d.sample(rng),
            PeriodSampler::Const(v) => *v,
            PeriodSampler::Gamma(d) => d.sample(rng),
        }
    }
}

impl fmt::Display for DurationDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DurationKind::Exponential { rate } => write!(f, "Exponential(rate={rate})"),
            DurationKind::Constant { value } => write!(f, "Constant({value})"),
            DurationKind::Gamma { shape, rate } => write!(f, "Gamma(shape={shape}, rate={rate})"),
        }
    }
}

/// Accepts `exp:RATE` / `exponential:RATE`, `const:VALUE` / `constant:VALUE`,
/// and `gamma:SHAPE:RATE`.
impl FromStr for DurationDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |txt: &str| -> Result<f64> {
            txt.parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("cannot parse `{txt}` as a number")))
        };
        match parts.as_slice() {
            ["exp" | "exponential", r] => Self::exponential(num(r)?),
            ["const" | "constant", v] => Self::constant(num(v)?),
            ["gamma", a, b] => Self::gamma(num(a)?, num(b)?),
            _ => Err(Error::InvalidInput(format!(
                "cannot parse `{s}` as a duration distribution; \
                 expected exp:RATE, const:VALUE or gamma:SHAPE:RATE"
            ))),
        }
    }
}

/// Serialized form, e.g. `{"kind": "exponential", "rate": 1.0}`. Kept
/// separate from the public type so deserialization passes through the
/// validating constructors.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Repr {
    Exponential { rate: f64 },
    Constant { value: f64 },
    Gamma { shape: f64, rate: f64 },
}

impl TryFrom<Repr> for DurationDistribution {
    type Error = Error;

    fn try_from(r: Repr) -> Result<Self> {
        match r {
            Repr::Exponential { rate } => Self::exponential(rate),
            Repr::Constant { value } => Self::constant(value),
            Repr::Gamma { shape, rate } => Self::gamma(shape, rate),
        }
    }
}

impl From<DurationDistribution> for Repr {
    fn from(d: DurationDistribution) -> Repr {
        match d.kind {
            DurationKind::Exponential { rate } => Repr::Exponential { rate },
            DurationKind::Constant { value } => Repr::Constant { value },
            DurationKind::Gamma { shape, rate } => Repr::Gamma { shape, rate },
        }
    }
}
