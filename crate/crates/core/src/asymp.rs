//! Large-population approximations.
//!
//! Early on, an epidemic started by few index cases in a large community is
//! well approximated by a branching process: each infective begets
//! `Poisson(lambda * I)` children (mixed over its infectious period `I`),
//! with mean `R0 = lambda * E(I)`. The offspring generating function at `s`
//! is `phi(lambda * (1 - s))`, so the extinction probability `q` is the
//! smallest root of `q = phi(lambda * (1 - q))` — strictly below 1 exactly
//! when `R0 > 1`. `1 - q^m` approximates the probability that `m` index
//! cases spark a major outbreak.
//!
//! Given a major outbreak, the infected fraction concentrates on the
//! positive root `z*` of the balance equation `1 - z = (1 - eps) *
//! exp(-R0 * z)` (`eps` = initially infected fraction), with Gaussian
//! fluctuations of standard deviation
//! `sqrt(n * z*(1-z*) * (1 + r^2 (1-z*) R0^2)) / (1 - (1-z*) R0)`,
//! where `r^2` is the squared coefficient of variation of the infectious
//! period. The same `z*` is the terminal size of the deterministic SIR
//! system, integrated here with fixed-step RK4.

use serde::Serialize;

use crate::dists::DurationDistribution;
use crate::error::{Error, Result};
use crate::ode;

/// Absolute tolerance of the bisection root finders.
const ROOT_TOL: f64 = 1e-12;

/// `R0 = lambda * E(I)`. Requires `lambda > 0`.
pub fn basic_reproduction_number(lambda: f64, infectious_period: &DurationDistribution) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "contact rate must satisfy lambda > 0 (got {lambda})"
        )));
    }
    Ok(lambda * infectious_period.mean())
}

/// Branching-process view of the early epidemic.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BranchingApprox {
    pub r0: f64,
    /// Extinction probability per index case: smallest root of
    /// `q = phi(lambda (1 - q))`; equals 1 iff `R0 <= 1`.
    pub extinction_probability: f64,
    /// `1 - q^m`.
    pub major_outbreak_probability: f64,
}

/// Requires `lambda > 0` and `m >= 1`.
pub fn extinction_probability(
    lambda: f64,
    infectious_period: &DurationDistribution,
    m: u64,
) -> Result<BranchingApprox> {
    if m < 1 {
        return Err(Error::InvalidInput(format!(
            "at least one index case is required (got m={m})"
        )));
    }
    let r0 = basic_reproduction_number(lambda, infectious_period)?;
    let q = if r0 <= 1.0 {
        1.0
    } else {
        // g(q) = phi(lambda(1-q)) - q is positive on [0, q*) and negative on
        // (q*, 1) by convexity of phi, so plain bisection is safe.
        let g = |q: f64| infectious_period.laplace(lambda * (1.0 - q)).unwrap() - q;
        bisect(g, 0.0, 1.0, true)
    };
    Ok(BranchingApprox {
        r0,
        extinction_probability: q,
        major_outbreak_probability: 1.0 - q.powi(m.min(i32::MAX as u64) as i32),
    })
}

/// Largest root in `[0, 1]` of `1 - z = (1 - eps) * exp(-r0 * z)`: the
/// fraction ever infected (initial infectives included) in a large outbreak
/// seeded with fraction `eps` infected. Requires `r0 >= 0` and
/// `0 <= eps < 1`.
pub fn final_size_fraction(r0: f64, eps: f64) -> Result<f64> {
    if !(r0 >= 0.0 && r0.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "final size fraction requires r0 >= 0 (got {r0})"
        )));
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidInput(format!(
            "initially infected fraction must satisfy 0 <= eps < 1 (got {eps})"
        )));
    }
    // h(z) = (1-eps) e^{-r0 z} - (1 - z): convex, so at most two roots.
    let h = |z: f64| (1.0 - eps) * (-r0 * z).exp() - (1.0 - z);
    if eps == 0.0 {
        // z = 0 is always a root; a second, positive root exists iff r0 > 1.
        if r0 <= 1.0 {
            return Ok(0.0);
        }
        // h < 0 at its minimum z = ln(r0)/r0 and h(1) > 0.
        let z_min = r0.ln() / r0;
        Ok(bisect(h, z_min, 1.0, false))
    } else {
        // h(0) = -eps < 0 < h(1): exactly one root.
        Ok(bisect(h, 0.0, 1.0, false))
    }
}

/// Standard deviation of the final size of a major outbreak (central limit
/// regime). `scv` is the squared coefficient of variation `r^2` of the
/// infectious period; `z_star` the deterministic infected fraction.
/// Requires `n >= 1`, `scv >= 0`, `0 <= z_star <= 1`, and
/// `(1 - z_star) * r0 != 1` (criticality — the variance diverges).
pub fn clt_standard_deviation(n: u64, r0: f64, scv: f64, z_star: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    if !(scv >= 0.0 && scv.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "squared coefficient of variation must satisfy scv >= 0 (got {scv})"
        )));
    }
    if !(0.0..=1.0).contains(&z_star) {
        return Err(Error::InvalidInput(format!(
            "z_star must lie in [0, 1] (got {z_star})"
        )));
    }
    let denom = 1.0 - (1.0 - z_star) * r0;
    if denom.abs() < 1e-12 {
        return Err(Error::Singular(
            "(1 - z_star) * r0 = 1: the model is critical and the final-size \
             variance diverges"
                .into(),
        ));
    }
    let var_scale = z_star * (1.0 - z_star) * (1.0 + scv * (1.0 - z_star) * r0 * r0);
    Ok(((n as f64 * var_scale).sqrt() / denom).abs())
}

/// `P(total progeny of the branching process = j + 1)` counting the
/// ancestor, i.e. the index case plus `j` descendants, for Poisson offspring
/// mixed over an exponential period (linear birth-death process):
///
/// ```text
/// P(j) = Catalan(j) * p^(j+1) * q^j,   p = 1/(1+R0), q = R0/(1+R0)
/// ```
///
/// Over `j = 0, 1, ...` this sums to the extinction probability
/// (`min(1, 1/R0)`). Describes minor outbreak sizes. Requires `r0 > 0`.
pub fn total_progeny_pmf(r0: f64, j: u64) -> Result<f64> {
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "total progeny pmf requires r0 > 0 (got {r0})"
        )));
    }
    let p = 1.0 / (1.0 + r0);
    let q = r0 / (1.0 + r0);
    // term_{j+1} / term_j = [2(2j+1)/(j+2)] * p * q via the Catalan
    // recurrence; iterating keeps everything in range for any j.
    let mut term = p;
    for jj in 0..j {
        let jjf = jj as f64;
        term *= 2.0 * (2.0 * jjf + 1.0) / (jjf + 2.0) * p * q;
    }
    Ok(term)
}

/// Probability that the first `k` contacts of the index cases all land on
/// distinct initially susceptible individuals — i.e. that the branching
/// picture has not yet been contaminated by repeat or wasted contacts:
/// `(n-m)(n-m-1)...(n-m-k+1) / n^k`. Requires `k <= n - m`.
pub fn ghost_free_probability(n: u64, m: u64, k: u64) -> Result<f64> {
    if m > n {
        return Err(Error::InvalidInput(format!(
            "population must satisfy n >= m (got n={n}, m={m})"
        )));
    }
    if k > n - m {
        return Err(Error::Domain(format!(
            "k must not exceed the n - m = {} initial susceptibles (got k={k})",
            n - m
        )));
    }
    let mut p = 1.0;
    for i in 0..k {
        p *= (n - m - i) as f64 / n as f64;
    }
    Ok(p)
}

/// State of the deterministic (law of large numbers) system; fractions sum
/// to 1.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DeterministicState {
    pub t: f64,
    pub s: f64,
    pub i: f64,
    pub r: f64,
}

/// Integrate `s' = -lambda s i`, `i' = lambda s i - gamma i`, `r' = gamma i`
/// from `(s0, i0, r0)` to `t_end` with fixed-step RK4. Requires positive
/// rates, nonnegative initial fractions summing to 1 (tolerance 1e-9),
/// `t_end >= 0` and `step > 0`.
pub fn deterministic_trajectory(
    lambda: f64,
    gamma: f64,
    initial: (f64, f64, f64),
    t_end: f64,
    step: f64,
) -> Result<Vec<DeterministicState>> {
    validate_ode_inputs(lambda, gamma, initial, t_end, step)?;
    let (s0, i0, r0) = initial;
    let mut out = Vec::new();
    ode::rk4(
        |[s, i, _r]| {
            let flow = lambda * s * i;
            [-flow, flow - gamma * i, gamma * i]
        },
        [s0, i0, r0],
        t_end,
        step,
        |t, [s, i, r]| out.push(DeterministicState { t, s, i, r }),
    );
    Ok(out)
}

/// As [`deterministic_trajectory`] but returning only the state at `t_end`.
pub fn deterministic_final_state(
    lambda: f64,
    gamma: f64,
    initial: (f64, f64, f64),
    t_end: f64,
    step: f64,
) -> Result<DeterministicState> {
    validate_ode_inputs(lambda, gamma, initial, t_end, step)?;
    let (s0, i0, r0) = initial;
    let mut last = DeterministicState {
        t: 0.0,
        s: s0,
        i: i0,
        r: r0,
    };
    ode::rk4(
        |[s, i, _r]| {
            let flow = lambda * s * i;
            [-flow, flow - gamma * i, gamma * i]
        },
        [s0, i0, r0],
        t_end,
        step,
        |t, [s, i, r]| last = DeterministicState { t, s, i, r },
    );
    Ok(last)
}

fn validate_ode_inputs(
    lambda: f64,
    gamma: f64,
    (s, i, r): (f64, f64, f64),
    t_end: f64,
    step: f64,
) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) || !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "rates must satisfy lambda > 0 and gamma > 0 (got lambda={lambda}, gamma={gamma})"
        )));
    }
    if !(s >= 0.0 && i >= 0.0 && r >= 0.0) || (s + i + r - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "initial fractions must be nonnegative and sum to 1 (got {s}, {i}, {r})"
        )));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) || !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "time span must satisfy t_end >= 0 and step > 0 (got t_end={t_end}, step={step})"
        )));
    }
    Ok(())
}

/// Bisection for a monotone sign change on `[lo, hi]`. `positive_left`
/// states the sign of `f` on the left side of the root.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, positive_left: bool) -> f64 {
    for _ in 0..200 {
        if hi - lo <= ROOT_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        let go_right = if positive_left { v > 0.0 } else { v < 0.0 };
        if go_right {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
