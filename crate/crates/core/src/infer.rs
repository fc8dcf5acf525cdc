//! Estimation from one observed final outbreak size.
//!
//! The balance equation `1 - z = exp(-R0 * z)` inverts the observed infected
//! fraction `z = Z/n` of a major outbreak into `R0_hat = -ln(1 - z)/z`. The
//! CLT for final sizes gives the standard error
//!
//! ```text
//! se(R0_hat) = sqrt( (1 + r^2 (1 - z) R0_hat^2) / (n z (1 - z)) )
//! ```
//!
//! with `r^2` the squared coefficient of variation of the infectious period;
//! it is rarely observable, so it must be assumed (1, the Markovian value,
//! unless stated otherwise — conservative against the constant-period 0).
//! The critical vaccination coverage `vc = 1 - 1/R0` follows by the delta
//! method: `se(vc_hat) = se(R0_hat) / R0_hat^2`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Final size of one completed outbreak: `final_size` of `n - m` initial
/// susceptibles were infected. `0 < final_size <= n - m` is required (a zero
/// final size carries no information about `R0`).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OutbreakObservation {
    final_size: u64,
    n: u64,
    m: u64,
    scv: f64,
}

impl OutbreakObservation {
    pub fn new(final_size: u64, n: u64, m: u64) -> Result<Self> {
        if m > n {
            return Err(Error::InvalidInput(format!(
                "population must satisfy n >= m (got n={n}, m={m})"
            )));
        }
        if final_size == 0 || final_size > n - m {
            return Err(Error::InvalidInput(format!(
                "observed final size must satisfy 0 < final_size <= n - m \
                 (got final_size={final_size}, n-m={})",
                n - m
            )));
        }
        Ok(Self {
            final_size,
            n,
            m,
            scv: 1.0,
        })
    }

    /// Assume a different squared coefficient of variation of the
    /// infectious period (default 1). Requires `scv >= 0`.
    pub fn with_scv(mut self, scv: f64) -> Result<Self> {
        if !(scv >= 0.0 && scv.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "squared coefficient of variation must satisfy scv >= 0 (got {scv})"
            )));
        }
        self.scv = scv;
        Ok(self)
    }

    pub fn infected_fraction(&self) -> f64 {
        self.final_size as f64 / self.n as f64
    }
}

/// Point estimate with its standard error.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EstimateWithSe {
    pub point: f64,
    pub se: f64,
    /// The assumed `r^2` that entered the standard error.
    pub scv_assumed: f64,
    /// Set when the estimated `R0` is at or below 1, where "major outbreak"
    /// asymptotics (and vaccination advice) do not apply.
    pub subcritical: bool,
}

/// Estimate `R0` from the observed infected fraction.
pub fn estimate_r0(obs: &OutbreakObservation) -> Result<EstimateWithSe> {
    estimate_r0_from_fraction(obs.infected_fraction(), obs.n, obs.scv)
}

/// Same estimator on a pre-computed fraction `z in (0, 1)` of a community
/// of size `n`.
pub fn estimate_r0_from_fraction(z: f64, n: u64, scv: f64) -> Result<EstimateWithSe> {
    if n < 1 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    if !(scv >= 0.0 && scv.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "squared coefficient of variation must satisfy scv >= 0 (got {scv})"
        )));
    }
    if !(z > 0.0) {
        return Err(Error::InvalidInput(format!(
            "infected fraction must be positive (got {z})"
        )));
    }
    if z >= 1.0 {
        return Err(Error::Singular(format!(
            "infected fraction {z} >= 1: ln(1 - z) is undefined — the whole \
             community was infected"
        )));
    }
    // -ln(1-z)/z, via ln_1p for accuracy as z -> 0 (limit 1).
    let point = -(-z).ln_1p() / z;
    let se = ((1.0 + scv * (1.0 - z) * point * point) / (n as f64 * z * (1.0 - z))).sqrt();
    Ok(EstimateWithSe {
        point,
        se,
        scv_assumed: scv,
        subcritical: point <= 1.0,
    })
}

/// Estimate the critical vaccination coverage `vc = 1 - 1/R0`. A
/// nonpositive point estimate (flagged `subcritical`) means the estimated
/// epidemic cannot sustain itself even without vaccination.
pub fn estimate_vc(obs: &OutbreakObservation) -> Result<EstimateWithSe> {
    let r0 = estimate_r0(obs)?;
    Ok(EstimateWithSe {
        point: 1.0 - 1.0 / r0.point,
        se: r0.se / (r0.point * r0.point),
        scv_assumed: r0.scv_assumed,
        subcritical: r0.subcritical,
    })
}
