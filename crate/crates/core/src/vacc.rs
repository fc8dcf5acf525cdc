//! Vaccination: reproduction-number arithmetic and simulation with
//! imperfect vaccines.
//!
//! Vaccinating a fraction `v` with a perfect vaccine thins both the
//! susceptibles and the effective contact rate: the epidemic among the
//! remaining `n(1-v)` individuals runs with `lambda(1-v)`, so
//! `Rv = (1-v) R0` and the critical coverage is `vc = 1 - 1/R0` (herd
//! immunity). A vaccine that only reduces susceptibility by a factor `e`
//! needs coverage `(1/e)(1 - 1/R0)`, which may exceed 1 — then herd
//! immunity is out of reach for that vaccine.
//!
//! Two classic response models distribute a mean efficacy `e` differently:
//! **leaky** (every vaccinee's per-contact infection probability is scaled
//! by `1-e`) and **all-or-nothing** (a fraction `e` of vaccinees is fully
//! immune, the rest unprotected). Both have the same `Rv = (1 - ve) R0`, so
//! their major-outbreak behaviour agrees near and above the threshold, but
//! final sizes differ below it — hence the simulation entry point.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{run_engine, EngineSetup, EpidemicParams, OutbreakResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VaccineMode {
    /// Susceptibility of every vaccinee multiplied by `1 - efficacy`.
    Leaky,
    /// Each vaccinee fully immune with probability `efficacy`.
    AllOrNothing,
}

/// Coverage and vaccine response. Requires `0 <= coverage <= 1` and
/// `0 < efficacy <= 1`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct VaccinationPolicy {
    coverage: f64,
    efficacy: f64,
    mode: VaccineMode,
}

impl VaccinationPolicy {
    pub fn new(coverage: f64, efficacy: f64, mode: VaccineMode) -> Result<Self> {
        if !(0.0..=1.0).contains(&coverage) {
            return Err(Error::InvalidInput(format!(
                "coverage must lie in [0, 1] (got {coverage})"
            )));
        }
        if !(efficacy > 0.0 && efficacy <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "efficacy must lie in (0, 1] (got {efficacy})"
            )));
        }
        Ok(Self {
            coverage,
            efficacy,
            mode,
        })
    }

    /// Perfect vaccine at the given coverage.
    pub fn perfect(coverage: f64) -> Result<Self> {
        Self::new(coverage, 1.0, VaccineMode::AllOrNothing)
    }

    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    pub fn efficacy(&self) -> f64 {
        self.efficacy
    }

    pub fn mode(&self) -> VaccineMode {
        self.mode
    }
}

/// `Rv = (1 - v) R0` under a perfect vaccine with coverage `v`. Requires
/// `r0 >= 0`, `0 <= coverage <= 1`.
pub fn post_vaccination_r(r0: f64, coverage: f64) -> Result<f64> {
    if !(r0 >= 0.0 && r0.is_finite()) {
        return Err(Error::InvalidInput(format!("r0 must be >= 0 (got {r0})")));
    }
    if !(0.0..=1.0).contains(&coverage) {
        return Err(Error::InvalidInput(format!(
            "coverage must lie in [0, 1] (got {coverage})"
        )));
    }
    Ok((1.0 - coverage) * r0)
}

/// Critical coverage `1 - 1/R0` of a perfect vaccine, clamped at 0 for
/// subcritical models. Requires `r0 > 0`.
pub fn critical_coverage(r0: f64) -> Result<f64> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidInput(format!("r0 must be > 0 (got {r0})")));
    }
    Ok((1.0 - 1.0 / r0).max(0.0))
}

/// Critical coverage of a vaccine with efficacy `e`.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CriticalCoverage {
    Achievable { coverage: f64 },
    /// Even vaccinating everyone leaves `Rv > 1`; `required` is the formal
    /// coverage `(1/e)(1 - 1/R0) > 1`.
    NotAchievable { required: f64 },
}

/// Requires `r0 > 0` and `0 < efficacy <= 1`.
pub fn imperfect_critical_coverage(r0: f64, efficacy: f64) -> Result<CriticalCoverage> {
    if !(efficacy > 0.0 && efficacy <= 1.0) {
        return Err(Error::Domain(format!(
            "efficacy must lie in (0, 1] (got {efficacy})"
        )));
    }
    let perfect = critical_coverage(r0)?;
    let required = perfect / efficacy;
    Ok(if required > 1.0 {
        CriticalCoverage::NotAchievable { required }
    } else {
        CriticalCoverage::Achievable { coverage: required }
    })
}

/// The epidemic among the unvaccinated after perfect vaccination with
/// coverage `v` is again a standard epidemic: `n' = round(n(1-v))`
/// individuals, contact rate `lambda(1-v)` (contacts landing on vaccinees
/// are wasted). Errors if fewer than `m` individuals remain.
pub fn transform_for_vaccination(params: &EpidemicParams, coverage: f64) -> Result<EpidemicParams> {
    if !(0.0..=1.0).contains(&coverage) {
        return Err(Error::InvalidInput(format!(
            "coverage must lie in [0, 1] (got {coverage})"
        )));
    }
    let n_new = (params.n() as f64 * (1.0 - coverage)).round() as u64;
    if n_new < params.m() {
        return Err(Error::Infeasible(format!(
            "round(n(1-v)) = {n_new} leaves fewer individuals than the m = {} index cases",
            params.m()
        )));
    }
    let lambda_new = params.lambda() * (1.0 - coverage);
    if !(lambda_new > 0.0) {
        return Err(Error::Infeasible(
            "coverage 1 leaves no contact process; nothing to simulate".into(),
        ));
    }
    let mut p = EpidemicParams::new(n_new, params.m(), lambda_new, *params.infectious_period())?;
    if let Some(lat) = params.latent_period() {
        p = p.with_latent(*lat);
    }
    Ok(p)
}

/// Simulate one epidemic in a partially vaccinated community of `params.n()`
/// individuals: the last `ceil(n * coverage)` are vaccinated, the `m` index
/// cases are unvaccinated. Contacts still target the whole community, so
/// vaccinees shield by absorbing contacts. Errors if vaccination leaves
/// fewer than `m` unvaccinated individuals.
pub fn simulate_with_policy<R: Rng + ?Sized>(
    params: &EpidemicParams,
    policy: &VaccinationPolicy,
    rng: &mut R,
) -> Result<OutbreakResult> {
    let n = params.n() as usize;
    let vaccinated = (params.n() as f64 * policy.coverage).ceil() as usize;
    if (n - vaccinated) < params.m() as usize {
        return Err(Error::Infeasible(format!(
            "coverage {} leaves fewer unvaccinated individuals than the m = {} index cases",
            policy.coverage,
            params.m()
        )));
    }

    let setup_base = |immune: Option<&[bool]>, susceptibility: Option<&[f64]>, rng: &mut R| {
        run_engine(
            &EngineSetup {
                n: params.n(),
                index_cases: params.m(),
                lambda: params.lambda(),
                infectious: params.infectious_period(),
                latent: params.latent_period(),
                immune,
                susceptibility,
            },
            rng,
            None,
        )
    };

    Ok(match policy.mode {
        VaccineMode::AllOrNothing => {
            let mut immune = vec![false; n];
            for slot in immune.iter_mut().skip(n - vaccinated) {
                *slot = policy.efficacy >= 1.0 || rng.random::<f64>() < policy.efficacy;
            }
            setup_base(Some(&immune), None, rng)
        }
        VaccineMode::Leaky => {
            let mut susceptibility = vec![1.0; n];
            for slot in susceptibility.iter_mut().skip(n - vaccinated) {
                *slot = 1.0 - policy.efficacy;
            }
            setup_base(None, Some(&susceptibility), rng)
        }
    })
}
