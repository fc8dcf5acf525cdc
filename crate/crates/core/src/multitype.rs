//! Epidemics among `k` types of individuals (age groups, risk classes…).
//!
//! Type `i` makes contacts with any *given* type-`j` individual at rate
//! `contact_rates[i][j] / n`, so a type-`i` infective infects on average
//! `M[i][j] = contact_rates[i][j] * fractions[j] * E(I_i)` type-`j`
//! individuals in a fully susceptible community. The epidemic threshold is
//! governed by the Perron root of the nonnegative matrix `M`: its dominant
//! eigenvalue is the multitype `R0`.
//!
//! The Perron root is computed by shifted power iteration (the shift makes
//! the dominant eigenvalue strictly dominant even for periodic patterns
//! like two types that only infect each other). For `k <= 3` the result is
//! verified against the characteristic polynomial. Reducible contact
//! structures (some type unreachable from another) still have a Perron
//! root, but it may ignore whole sub-communities; [`is_reducible`] lets
//! callers warn about that.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, RngExt};
use rand_distr::Distribution;
use serde::Serialize;

use crate::dists::DurationDistribution;
use crate::error::{Error, Result};

/// Validated parameters: `fractions` a probability vector over types,
/// `contact_rates` a nonnegative `k x k` matrix, one infectious period per
/// type.
#[derive(Clone, Debug, Serialize)]
pub struct MultitypeParams {
    fractions: Vec<f64>,
    contact_rates: Vec<Vec<f64>>,
    periods: Vec<DurationDistribution>,
}

impl MultitypeParams {
    pub fn new(
        fractions: Vec<f64>,
        contact_rates: Vec<Vec<f64>>,
        periods: Vec<DurationDistribution>,
    ) -> Result<Self> {
        let k = fractions.len();
        if k == 0 {
            return Err(Error::InvalidInput("at least one type is required".into()));
        }
        if fractions.iter().any(|&f| !(f >= 0.0) || !f.is_finite()) {
            return Err(Error::InvalidInput(
                "type fractions must be nonnegative".into(),
            ));
        }
        let total: f64 = fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "type fractions must sum to 1 (got {total})"
            )));
        }
        if contact_rates.len() != k || contact_rates.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidInput(format!(
                "contact_rates must be a {k} x {k} matrix"
            )));
        }
        if contact_rates
            .iter()
            .flatten()
            .any(|&c| !(c >= 0.0) || !c.is_finite())
        {
            return Err(Error::InvalidInput(
                "contact rates must be nonnegative".into(),
            ));
        }
        if periods.len() != k {
            return Err(Error::InvalidInput(format!(
                "one infectious period per type is required (got {} for k={k})",
                periods.len()
            )));
        }
        Ok(Self {
            fractions,
            contact_rates,
            periods,
        })
    }

    pub fn types(&self) -> usize {
        self.fractions.len()
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn contact_rates(&self) -> &[Vec<f64>] {
        &self.contact_rates
    }

    pub fn periods(&self) -> &[DurationDistribution] {
        &self.periods
    }
}

/// Mean offspring matrix `M[i][j] = contact_rates[i][j] * fractions[j] *
/// E(I_i)`.
pub fn mean_offspring_matrix(params: &MultitypeParams) -> Vec<Vec<f64>> {
    let k = params.types();
    (0..k)
        .map(|i| {
            let mean_i = params.periods[i].mean();
            (0..k)
                .map(|j| params.contact_rates[i][j] * params.fractions[j] * mean_i)
                .collect()
        })
        .collect()
}

/// Multitype `R0`: Perron root of the mean offspring matrix.
pub fn r0_multitype(params: &MultitypeParams) -> Result<f64> {
    perron_root(&mean_offspring_matrix(params))
}

/// Dominant eigenvalue of a nonnegative square matrix by shifted power
/// iteration from the uniform vector, cross-checked against the
/// characteristic polynomial for `k <= 3`.
pub fn perron_root(matrix: &[Vec<f64>]) -> Result<f64> {
    let k = matrix.len();
    if k == 0 || matrix.iter().any(|row| row.len() != k) {
        return Err(Error::InvalidInput("matrix must be square and nonempty".into()));
    }
    if matrix
        .iter()
        .flatten()
        .any(|&c| !(c >= 0.0) || !c.is_finite())
    {
        return Err(Error::InvalidInput(
            "matrix entries must be nonnegative and finite".into(),
        ));
    }

    let max_row_sum: f64 = matrix
        .iter()
        .map(|row| row.iter().sum::<f64>())
        .fold(0.0, f64::max);
    if max_row_sum == 0.0 {
        return Ok(0.0);
    }
    // Shift by half the Perron upper bound: eigenvalues move to l + c, and
    // the dominant one becomes strictly dominant in modulus.
    let shift = 0.5 * max_row_sum;

    let mut v = vec![1.0 / k as f64; k];
    let mut lambda_prev = f64::NAN;
    let tol = 1e-10;
    for _ in 0..100_000 {
        let mut w: Vec<f64> = matrix
            .iter()
            .zip(&v)
            .map(|(row, &vi)| {
                row.iter().zip(&v).map(|(&a, &x)| a * x).sum::<f64>() + shift * vi
            })
            .collect();
        let norm: f64 = w.iter().fold(0.0, |acc, &x| acc.max(x));
        if norm == 0.0 {
            return Ok(0.0);
        }
        for x in &mut w {
            *x /= norm;
        }
        let lambda = norm - shift;
        let done = (lambda - lambda_prev).abs() <= tol * lambda.abs().max(1.0);
        v = w;
        lambda_prev = lambda;
        if done {
            // Residual check in the original (unshifted) matrix.
            let residual = matrix
                .iter()
                .zip(&v)
                .map(|(row, &vi)| {
                    let mv: f64 = row.iter().zip(&v).map(|(&a, &x)| a * x).sum();
                    (mv - lambda * vi).abs()
                })
                .fold(0.0, f64::max);
            if residual > 1e-7 * lambda.abs().max(1.0) {
                continue;
            }
            if k <= 3 {
                let poly = char_poly_at(matrix, lambda);
                let scale = (lambda.abs() + max_row_sum).powi(k as i32).max(1.0);
                if poly.abs() > 1e-8 * scale {
                    return Err(Error::NonConvergence(format!(
                        "power iteration result {lambda} fails the characteristic \
                         polynomial check (p(lambda) = {poly:e})"
                    )));
                }
            }
            return Ok(lambda);
        }
    }
    Err(Error::NonConvergence(
        "power iteration did not converge within 100000 iterations".into(),
    ))
}

/// `det(x I - M)` for `k <= 3`.
fn char_poly_at(m: &[Vec<f64>], x: f64) -> f64 {
    match m.len() {
        1 => x - m[0][0],
        2 => (x - m[0][0]) * (x - m[1][1]) - m[0][1] * m[1][0],
        3 => {
            let a = [
                [x - m[0][0], -m[0][1], -m[0][2]],
                [-m[1][0], x - m[1][1], -m[1][2]],
                [-m[2][0], -m[2][1], x - m[2][2]],
            ];
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        }
        _ => unreachable!("characteristic polynomial only used for k <= 3"),
    }
}

/// A matrix is reducible when some type cannot be reached from some other
/// through positive entries; the Perron root then reflects only part of the
/// community.
pub fn is_reducible(matrix: &[Vec<f64>]) -> bool {
    let k = matrix.len();
    if k <= 1 {
        return false;
    }
    let reach = |transpose: bool| -> usize {
        let mut seen = vec![false; k];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                let edge = if transpose { matrix[j][i] } else { matrix[i][j] };
                if edge > 0.0 && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count
    };
    reach(false) < k || reach(true) < k
}

/// `R0` for separable ("proportionate") mixing `contact_rates[i][j] =
/// alpha_i * beta_j`: the offspring matrix has rank one and the Perron root
/// collapses to `sum_i alpha_i * beta_i * fractions_i * E(I_i)`; with unit
/// mean periods, `sum alpha_i beta_i pi_i`.
pub fn r0_separable(alpha: &[f64], beta: &[f64], fractions: &[f64]) -> Result<f64> {
    if alpha.len() != beta.len() || alpha.len() != fractions.len() || alpha.is_empty() {
        return Err(Error::InvalidInput(format!(
            "alpha, beta and fractions must have equal nonzero length \
             (got {}, {}, {})",
            alpha.len(),
            beta.len(),
            fractions.len()
        )));
    }
    if alpha
        .iter()
        .chain(beta)
        .chain(fractions)
        .any(|&x| !(x >= 0.0) || !x.is_finite())
    {
        return Err(Error::InvalidInput(
            "separable mixing requires nonnegative entries".into(),
        ));
    }
    Ok(alpha
        .iter()
        .zip(beta)
        .zip(fractions)
        .map(|((&a, &b), &f)| a * b * f)
        .sum())
}

/// Split `n` into subpopulations proportional to `fractions` by the
/// largest-remainder rule (ties broken by lowest type index).
pub fn subpopulation_sizes(n: u64, fractions: &[f64]) -> Vec<u64> {
    let mut sizes: Vec<u64> = fractions
        .iter()
        .map(|&f| (n as f64 * f).floor() as u64)
        .collect();
    let assigned: u64 = sizes.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let rem_a = n as f64 * fractions[a] - (n as f64 * fractions[a]).floor();
        let rem_b = n as f64 * fractions[b] - (n as f64 * fractions[b]).floor();
        rem_b.partial_cmp(&rem_a).unwrap().then(a.cmp(&b))
    });
    for idx in order.iter().take((n - assigned) as usize) {
        sizes[*idx] += 1;
    }
    sizes
}

struct Recovery {
    time: f64,
    idx: u32,
}

impl PartialEq for Recovery {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Recovery {}

impl PartialOrd for Recovery {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Recovery {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Simulate one multitype epidemic in a community of `n` split by
/// largest-remainder rounding, with `initial_infectives[j]` index cases of
/// type `j`. Returns the per-type counts of infections (index cases not
/// counted). Requires at least one index case and `initial_infectives[j] <=
/// size_j` for every type.
pub fn simulate_multitype<R: Rng + ?Sized>(
    params: &MultitypeParams,
    n: u64,
    initial_infectives: &[u64],
    rng: &mut R,
) -> Result<Vec<u64>> {
    let k = params.types();
    if initial_infectives.len() != k {
        return Err(Error::InvalidInput(format!(
            "initial_infectives must have one entry per type (got {} for k={k})",
            initial_infectives.len()
        )));
    }
    if initial_infectives.iter().sum::<u64>() < 1 {
        return Err(Error::InvalidInput(
            "at least one index case is required".into(),
        ));
    }
    let sizes = subpopulation_sizes(n, params.fractions());
    for (j, (&m_j, &n_j)) in initial_infectives.iter().zip(&sizes).enumerate() {
        if m_j > n_j {
            return Err(Error::InvalidInput(format!(
                "type {j} has {m_j} index cases but only {n_j} individuals"
            )));
        }
    }

    // Individuals are laid out type by type.
    let offsets: Vec<u64> = sizes
        .iter()
        .scan(0u64, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let type_of = |idx: u64| -> usize {
        match offsets.binary_search(&idx) {
            Ok(t) => {
                // idx sits on a boundary; skip any zero-sized types.
                let mut t = t;
                while sizes[t] == 0 {
                    t += 1;
                }
                t
            }
            Err(t) => t - 1,
        }
    };

    let samplers: Vec<_> = params.periods.iter().map(|d| d.sampler()).collect();
    // Rate at which one type-i infective contacts *somebody* of each type.
    let row_rates: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| params.contact_rates[i][j] * sizes[j] as f64 / n as f64)
                .collect()
        })
        .collect();
    let row_totals: Vec<f64> = row_rates.iter().map(|r| r.iter().sum()).collect();

    let total_n: u64 = sizes.iter().sum();
    let mut state = vec![State::Susceptible; total_n as usize];
    let mut infectious_by_type = vec![0u64; k];
    let mut heap = BinaryHeap::new();
    let mut infected = vec![0u64; k];

    for j in 0..k {
        for idx in offsets[j]..offsets[j] + initial_infectives[j] {
            state[idx as usize] = State::Infectious;
            infectious_by_type[j] += 1;
            heap.push(Recovery {
                time: samplers[j].sample(rng),
                idx: idx as u32,
            });
        }
    }

    let mut t = 0.0;
    while infectious_by_type.iter().any(|&c| c > 0) {
        let total_rate: f64 = infectious_by_type
            .iter()
            .zip(&row_totals)
            .map(|(&c, &r)| c as f64 * r)
            .sum();
        let t_contact = if total_rate > 0.0 {
            let gap: f64 = rand_distr::Exp1.sample(rng);
            t + gap / total_rate
        } else {
            f64::INFINITY
        };
        let t_recovery = heap.peek().map_or(f64::INFINITY, |ev| ev.time);

        if t_contact < t_recovery {
            t = t_contact;
            // Source type proportional to infectives * row rate, then
            // target type proportional to the row entries.
            let mut u = rng.random::<f64>() * total_rate;
            let mut source = 0;
            for i in 0..k {
                let slab = infectious_by_type[i] as f64 * row_totals[i];
                if u < slab || i == k - 1 {
                    source = i;
                    break;
                }
                u -= slab;
            }
            if infectious_by_type[source] == 0 || row_totals[source] == 0.0 {
                // Rounding in the cumulative scan can fall through to an
                // inactive type; treat it as a non-event.
                continue;
            }
            let mut u = rng.random::<f64>() * row_totals[source];
            let mut target_type = 0;
            for j in 0..k {
                if u < row_rates[source][j] || j == k - 1 {
                    target_type = j;
                    break;
                }
                u -= row_rates[source][j];
            }
            if sizes[target_type] == 0 {
                continue;
            }
            let target = offsets[target_type] + rng.random_range(0..sizes[target_type]);
            if state[target as usize] == State::Susceptible {
                state[target as usize] = State::Infectious;
                infectious_by_type[target_type] += 1;
                infected[target_type] += 1;
                heap.push(Recovery {
                    time: t + samplers[target_type].sample(rng),
                    idx: target as u32,
                });
            }
        } else {
            let ev = heap.pop().expect("recovery scheduled");
            t = ev.time;
            let ty = type_of(ev.idx as u64);
            state[ev.idx as usize] = State::Removed;
            infectious_by_type[ty] -= 1;
        }
    }
    Ok(infected)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Susceptible,
    Infectious,
    Removed,
}
