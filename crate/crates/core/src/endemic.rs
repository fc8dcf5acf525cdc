//! Markovian SIR with demography: births replenish susceptibles at rate
//! `mu * n`, everyone dies at per-capita rate `mu`, infection and recovery
//! work as in the standard model. An infectious individual now leaves the
//! infectious state by recovery *or* death, so `R0 = lambda / (gamma + mu)`,
//! and `delta = mu / (gamma + mu)` is the chance the exit is a death.
//!
//! Above threshold the deterministic system has an endemic equilibrium; the
//! stochastic process instead fluctuates around it until a dip hits `I = 0`,
//! after which the disease is gone for good. The interesting quantity is how
//! long that takes, so the simulator is an exact event-driven jump process,
//! not a time-stepped approximation.

use rand::{Rng, RngExt};
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymp::DeterministicState;
use crate::error::{Error, Result};
use crate::ode;
use crate::streams;

/// Rates for the SIR model with demography. `n` sets the scale: the birth
/// rate is `mu * n`, so the population fluctuates around `n`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EndemicParams {
    n: u64,
    lambda: f64,
    gamma: f64,
    mu: f64,
}

impl EndemicParams {
    pub fn new(n: u64, lambda: f64, gamma: f64, mu: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidInput(format!(
                "population scale must satisfy n >= 1 (got {n})"
            )));
        }
        for (name, v) in [("lambda", lambda), ("gamma", gamma), ("mu", mu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "rate {name} must be positive and finite (got {v})"
                )));
            }
        }
        Ok(Self { n, lambda, gamma, mu })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `lambda / (gamma + mu)`: mean infections per infective while both
    /// recovery and death compete to end the infectious period.
    pub fn r0(&self) -> f64 {
        self.lambda / (self.gamma + self.mu)
    }

    /// `mu / (gamma + mu)`: probability the infectious state ends by death.
    pub fn delta(&self) -> f64 {
        self.mu / (self.gamma + self.mu)
    }
}

/// Endemic equilibrium fractions `(s, i, r)`: `s = 1/R0`,
/// `i = delta (R0 - 1) / R0`, `r` the remainder. Only exists above
/// threshold.
pub fn endemic_equilibrium(params: &EndemicParams) -> Result<(f64, f64, f64)> {
    let r0 = params.r0();
    if r0 <= 1.0 {
        return Err(Error::Domain(format!(
            "no endemic equilibrium: R0 = {r0} <= 1, only the disease-free \
             state is stable"
        )));
    }
    let s = 1.0 / r0;
    let i = params.delta() * (r0 - 1.0) / r0;
    Ok((s, i, 1.0 - s - i))
}

/// Integer state closest to the endemic equilibrium at scale `n`. Errors
/// when the equilibrium has less than one infective at that scale (an
/// endemic start is impossible there).
pub fn equilibrium_counts(params: &EndemicParams) -> Result<(u64, u64, u64)> {
    let (s, i, _) = endemic_equilibrium(params)?;
    let n = params.n;
    let s_count = (s * n as f64).round() as u64;
    let i_count = (i * n as f64).round() as u64;
    if i_count < 1 {
        return Err(Error::Infeasible(format!(
            "equilibrium infective count rounds to zero at n = {n} \
             (i fraction = {i:.3e}); a larger population scale is needed"
        )));
    }
    if s_count + i_count > n {
        return Err(Error::Numerical(format!(
            "equilibrium counts exceed the population scale (s={s_count}, \
             i={i_count}, n={n})"
        )));
    }
    Ok((s_count, i_count, n - s_count - i_count))
}

/// Time derivatives of the deterministic system at fractions `(s, i, r)`:
/// `s' = mu - lambda s i - mu s`, `i' = lambda s i - (gamma + mu) i`,
/// `r' = gamma i - mu r`.
pub fn endemic_derivatives(params: &EndemicParams, s: f64, i: f64, r: f64) -> (f64, f64, f64) {
    (
        params.mu - params.lambda * s * i - params.mu * s,
        params.lambda * s * i - (params.gamma + params.mu) * i,
        params.gamma * i - params.mu * r,
    )
}

/// One point of a recorded jump-process trajectory.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EndemicPoint {
    pub t: f64,
    pub s: u64,
    pub i: u64,
    pub r: u64,
}

/// Outcome of one jump-process run.
#[derive(Clone, Debug, Serialize)]
pub struct EndemicRun {
    /// Recorded states (only when a recording interval was requested): the
    /// initial state, every multiple of the interval while the process
    /// runs, and the end state.
    pub trajectory: Vec<EndemicPoint>,
    /// Time `I` first hit zero, if it did before `t_max`. The disease
    /// cannot return, so the run stops there.
    pub extinction_time: Option<f64>,
    pub final_state: (u64, u64, u64),
    /// End of the observation window: extinction time or `t_max`.
    pub t_end: f64,
    /// Time average of `I(t) / n` over `[0, t_end]`.
    pub mean_infective_fraction: f64,
    /// Time average of `S + I + R` over `[0, t_end]`; hovers near `n`.
    pub mean_population: f64,
}

/// Simulate the jump process from integer counts `(S, I, R)` until `I`
/// hits zero or `t_max` passes, whichever is first. Six competing
/// exponential channels: birth at `mu n`, infection at `lambda S I / n`,
/// recovery at `gamma I`, and per-capita death of S, I and R at `mu`. With
/// `Some(interval)` the trajectory is recorded on that grid.
pub fn simulate_endemic<R: Rng + ?Sized>(
    params: &EndemicParams,
    initial: (u64, u64, u64),
    t_max: f64,
    record_interval: Option<f64>,
    rng: &mut R,
) -> Result<EndemicRun> {
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "t_max must be nonnegative and finite (got {t_max})"
        )));
    }
    if let Some(dt) = record_interval {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "recording interval must be positive (got {dt})"
            )));
        }
    }

    let n = params.n as f64;
    let (mut s, mut i, mut r) = initial;
    let mut t = 0.0;
    let mut trajectory = Vec::new();
    let mut next_record = match record_interval {
        Some(dt) => {
            trajectory.push(EndemicPoint { t: 0.0, s, i, r });
            dt
        }
        None => f64::INFINITY,
    };

    let mut int_i = 0.0; // integral of I dt
    let mut int_pop = 0.0; // integral of (S+I+R) dt
    let mut extinction_time = if i == 0 { Some(0.0) } else { None };

    while i > 0 && t < t_max {
        let rates = [
            params.mu * n,                          // birth of a susceptible
            params.lambda * s as f64 * i as f64 / n, // infection
            params.gamma * i as f64,                // recovery
            params.mu * s as f64,                   // death of a susceptible
            params.mu * i as f64,                   // death of an infective
            params.mu * r as f64,                   // death of a removed
        ];
        let total: f64 = rates.iter().sum();
        let gap: f64 = rand_distr::Exp1.sample(rng);
        let t_next = t + gap / total;
        let t_eff = t_next.min(t_max);

        int_i += i as f64 * (t_eff - t);
        int_pop += (s + i + r) as f64 * (t_eff - t);
        if let Some(dt) = record_interval {
            while next_record < t_next && next_record <= t_max {
                trajectory.push(EndemicPoint { t: next_record, s, i, r });
                next_record += dt;
            }
        }

        if t_next > t_max {
            t = t_max;
            break;
        }
        t = t_next;

        let mut u = rng.random::<f64>() * total;
        let mut channel = rates.len() - 1;
        for (c, &rate) in rates.iter().enumerate() {
            if u < rate {
                channel = c;
                break;
            }
            u -= rate;
        }
        match channel {
            0 => s += 1,
            1 => {
                s -= 1;
                i += 1;
            }
            2 => {
                i -= 1;
                r += 1;
            }
            3 => s -= 1,
            4 => i -= 1,
            _ => r -= 1,
        }
        if i == 0 {
            extinction_time = Some(t);
        }
    }

    let t_end = extinction_time.map_or_else(|| t_max.min(t), |te| te);
    if record_interval.is_some() && trajectory.last().map_or(true, |p| p.t != t_end) {
        trajectory.push(EndemicPoint { t: t_end, s, i, r });
    }
    let (mean_infective_fraction, mean_population) = if t_end > 0.0 {
        (int_i / (n * t_end), int_pop / t_end)
    } else {
        (i as f64 / n, (s + i + r) as f64)
    };

    Ok(EndemicRun {
        trajectory,
        extinction_time,
        final_state: (s, i, r),
        t_end,
        mean_infective_fraction,
        mean_population,
    })
}

/// Monte Carlo distribution of the time for the disease to die out.
#[derive(Clone, Debug, Serialize)]
pub struct ExtinctionSummary {
    pub replicates: u64,
    pub t_cap: f64,
    /// Fraction of runs still endemic at `t_cap`; their times enter the
    /// order statistics as `t_cap`, so quantiles above
    /// `1 - censored_fraction` are lower bounds.
    pub censored_fraction: f64,
    pub lower_quartile: f64,
    pub median: f64,
    pub upper_quartile: f64,
}

/// Run `reps` jump processes (streams `0..reps` of `master_seed`) capped
/// at `t_cap` and summarise the extinction times. Requires `reps >= 100`
/// so the quartiles mean something.
pub fn time_to_extinction_mc(
    params: &EndemicParams,
    initial: (u64, u64, u64),
    reps: u64,
    master_seed: u64,
    t_cap: f64,
) -> Result<ExtinctionSummary> {
    if reps < 100 {
        return Err(Error::InvalidInput(format!(
            "extinction-time summaries need reps >= 100 (got {reps})"
        )));
    }
    let times: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = streams::replicate_rng(master_seed, rep);
            let run = simulate_endemic(params, initial, t_cap, None, &mut rng)?;
            Ok(run.extinction_time.unwrap_or(t_cap))
        })
        .collect::<Result<_>>()?;

    let censored = times.iter().filter(|&&t| t >= t_cap).count();
    let mut sorted = times;
    sorted.sort_by(f64::total_cmp);
    Ok(ExtinctionSummary {
        replicates: reps,
        t_cap,
        censored_fraction: censored as f64 / reps as f64,
        lower_quartile: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        upper_quartile: quantile(&sorted, 0.75),
    })
}

/// Linear-interpolation quantile of a sorted sample.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let idx = p * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    let frac = idx - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Integrate the deterministic system `s' = mu - lambda s i - mu s`,
/// `i' = lambda s i - (gamma + mu) i`, `r' = gamma i - mu r` from fractions
/// summing to 1, fixed-step RK4, recording every step.
pub fn deterministic_endemic_trajectory(
    params: &EndemicParams,
    initial: (f64, f64, f64),
    t_end: f64,
    step: f64,
) -> Result<Vec<DeterministicState>> {
    let (s0, i0, r0) = initial;
    if !(s0 >= 0.0 && i0 >= 0.0 && r0 >= 0.0) || (s0 + i0 + r0 - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "initial fractions must be nonnegative and sum to 1 \
             (got {s0}, {i0}, {r0})"
        )));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "t_end must be nonnegative and finite (got {t_end})"
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "step must be positive and finite (got {step})"
        )));
    }
    let p = *params;
    let mut out = Vec::new();
    ode::rk4(
        move |y| {
            let (ds, di, dr) = endemic_derivatives(&p, y[0], y[1], y[2]);
            [ds, di, dr]
        },
        [s0, i0, r0],
        t_end,
        step,
        |t, y| {
            out.push(DeterministicState {
                t,
                s: y[0],
                i: y[1],
                r: y[2],
            })
        },
    );
    Ok(out)
}
