//! Exact stochastic simulation of the epidemic, three ways, plus Monte Carlo
//! campaign plumbing.
//!
//! * **Event-driven** ([`simulate_outbreak`]): the reference implementation.
//!   Scheduled transitions (latency end, recovery) live in a priority queue;
//!   between them, contacts arrive as one aggregate Poisson process of rate
//!   `lambda * I(t)`. After every state change the next contact gap is
//!   redrawn, which is exact by memorylessness. Each contact picks its
//!   target uniformly from the whole community of `n` (so contacts with
//!   non-susceptibles, including the infectives themselves, are wasted —
//!   that is what keeps the per-pair rate at `lambda/n`).
//! * **Sellke construction** ([`simulate_sellke`]): susceptibles carry i.i.d.
//!   unit-exponential resistances; an individual is infected once the
//!   accumulated infection pressure `(lambda/n) * sum of infectious periods
//!   so far` passes its resistance. Final-size-equivalent to the
//!   event-driven model and much cheaper when only `Z` is needed.
//! * **Reed-Frost random graph** ([`simulate_reed_frost_graph`]): for
//!   constant infectious periods `1/gamma`, draw each pair infectious with
//!   probability `1 - exp(-lambda/(n*gamma))` and take the set reachable
//!   from the index cases. Realised generation by generation so the graph
//!   is never materialised.
//!
//! Campaigns ([`run_monte_carlo`], [`duration_scaling_experiment`]) run
//! replicates in parallel on dedicated RNG streams (see [`crate::streams`])
//! and merge results in replicate order, so output is bit-identical at any
//! thread count.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, RngExt};
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use crate::dists::DurationDistribution;
use crate::error::{Error, Result};
use crate::streams;

/// Validated parameters of the standard (one-type, closed-community) model.
#[derive(Clone, Debug, Serialize)]
pub struct EpidemicParams {
    n: u64,
    m: u64,
    lambda: f64,
    infectious_period: DurationDistribution,
    latent_period: Option<DurationDistribution>,
}

impl EpidemicParams {
    /// Requires `n >= m >= 1` and `lambda > 0`.
    pub fn new(
        n: u64,
        m: u64,
        lambda: f64,
        infectious_period: DurationDistribution,
    ) -> Result<Self> {
        if m < 1 || m > n {
            return Err(Error::InvalidInput(format!(
                "population must satisfy n >= m >= 1 (got n={n}, m={m})"
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "contact rate must satisfy lambda > 0 (got {lambda})"
            )));
        }
        Ok(Self {
            n,
            m,
            lambda,
            infectious_period,
            latent_period: None,
        })
    }

    /// Adds a latency period between infection and infectiousness. Latency
    /// does not change the final-size distribution, only the time course.
    pub fn with_latent(mut self, latent: DurationDistribution) -> Self {
        self.latent_period = Some(latent);
        self
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn infectious_period(&self) -> &DurationDistribution {
        &self.infectious_period
    }

    pub fn latent_period(&self) -> Option<&DurationDistribution> {
        self.latent_period.as_ref()
    }

    /// Basic reproduction number `lambda * E(I)`.
    pub fn r0(&self) -> f64 {
        self.lambda * self.infectious_period.mean()
    }
}

/// Outcome of a single epidemic.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct OutbreakResult {
    /// Number infected during the epidemic (the `m` index cases are not
    /// counted).
    pub final_size: u64,
    /// First time with no infectious and no latent individuals left.
    pub extinction_time: f64,
    /// Maximum number simultaneously infectious.
    pub peak_infectives: u64,
    /// Sum of the sampled infectious periods of index cases and everyone
    /// infected; `(lambda/n) * infectious_period_sum` is the total infection
    /// pressure exerted over the epidemic.
    pub infectious_period_sum: f64,
}

impl OutbreakResult {
    pub fn is_major(&self, threshold: u64) -> bool {
        self.final_size >= threshold
    }
}

/// Compartment counts after one transition; `s + e + i + r` plus any
/// initially immune individuals equals `n` at all times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EventRecord {
    pub t: f64,
    pub s: u64,
    pub e: u64,
    pub i: u64,
    pub r: u64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Susceptible,
    Latent,
    Infectious,
    Removed,
    /// Immune before the epidemic started (vaccination); contacts with these
    /// individuals are wasted and they never appear in the final size.
    Immune,
}

#[derive(Clone, Copy)]
enum Transition {
    BecomeInfectious,
    Recover,
}

/// Heap entry; ordered so that `BinaryHeap` pops the earliest time first
/// (ties broken by individual index for determinism).
struct Scheduled {
    time: f64,
    idx: u32,
    what: Transition,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Full engine configuration; the public entry points below are thin
/// wrappers, and the vaccination module drives it with immunity masks and
/// per-individual susceptibilities.
pub(crate) struct EngineSetup<'a> {
    pub n: u64,
    pub index_cases: u64,
    pub lambda: f64,
    pub infectious: &'a DurationDistribution,
    pub latent: Option<&'a DurationDistribution>,
    /// `immune[j]` marks individual `j` as immune from the start. Index
    /// cases are the first `index_cases` non-immune individuals.
    pub immune: Option<&'a [bool]>,
    /// Probability that a contact on this (susceptible) individual causes
    /// infection; `None` means 1 for everyone.
    pub susceptibility: Option<&'a [f64]>,
}

pub(crate) fn run_engine<R: Rng + ?Sized>(
    setup: &EngineSetup,
    rng: &mut R,
    mut log: Option<&mut Vec<EventRecord>>,
) -> OutbreakResult {
    let n = setup.n as usize;
    let infectious_sampler = setup.infectious.sampler();
    let latent_sampler = setup.latent.map(|d| d.sampler());

    let mut state = vec![State::Susceptible; n];
    let mut immune_count: u64 = 0;
    if let Some(mask) = setup.immune {
        for (j, &im) in mask.iter().enumerate() {
            if im {
                state[j] = State::Immune;
                immune_count += 1;
            }
        }
    }

    let mut heap: BinaryHeap<Scheduled> = BinaryHeap::new();
    let mut s_count = setup.n - setup.index_cases - immune_count;
    let mut e_count: u64 = 0;
    let mut i_count: u64 = 0;
    let mut r_count: u64 = 0;
    let mut period_sum = 0.0;

    let mut seeded = 0;
    for j in 0..n {
        if seeded == setup.index_cases {
            break;
        }
        if state[j] == State::Susceptible {
            state[j] = State::Infectious;
            let period = infectious_sampler.sample(rng);
            period_sum += period;
            heap.push(Scheduled {
                time: period,
                idx: j as u32,
                what: Transition::Recover,
            });
            i_count += 1;
            seeded += 1;
        }
    }
    debug_assert_eq!(seeded, setup.index_cases);

    let mut t = 0.0;
    let mut peak = i_count;
    let mut infected: u64 = 0;
    if let Some(log) = log.as_deref_mut() {
        log.push(EventRecord {
            t,
            s: s_count,
            e: e_count,
            i: i_count,
            r: r_count,
        });
    }

    while i_count > 0 || e_count > 0 {
        let t_contact = if i_count > 0 {
            let gap: f64 = rand_distr::Exp1.sample(rng);
            t + gap / (setup.lambda * i_count as f64)
        } else {
            f64::INFINITY
        };
        let t_scheduled = heap.peek().map_or(f64::INFINITY, |ev| ev.time);

        let mut changed = false;
        if t_contact < t_scheduled {
            t = t_contact;
            let target = rng.random_range(0..n);
            if state[target] == State::Susceptible {
                let takes = match setup.susceptibility {
                    None => true,
                    Some(sus) => {
                        let p = sus[target];
                        p >= 1.0 || rng.random::<f64>() < p
                    }
                };
                if takes {
                    infected += 1;
                    s_count -= 1;
                    changed = true;
                    match &latent_sampler {
                        Some(lat) => {
                            state[target] = State::Latent;
                            e_count += 1;
                            heap.push(Scheduled {
                                time: t + lat.sample(rng),
                                idx: target as u32,
                                what: Transition::BecomeInfectious,
                            });
                        }
                        None => {
                            state[target] = State::Infectious;
                            i_count += 1;
                            peak = peak.max(i_count);
                            let period = infectious_sampler.sample(rng);
                            period_sum += period;
                            heap.push(Scheduled {
                                time: t + period,
                                idx: target as u32,
                                what: Transition::Recover,
                            });
                        }
                    }
                }
            }
        } else {
            let ev = heap.pop().expect("scheduled event exists");
            t = ev.time;
            changed = true;
            match ev.what {
                Transition::BecomeInfectious => {
                    state[ev.idx as usize] = State::Infectious;
                    e_count -= 1;
                    i_count += 1;
                    peak = peak.max(i_count);
                    let period = infectious_sampler.sample(rng);
                    period_sum += period;
                    heap.push(Scheduled {
                        time: t + period,
                        idx: ev.idx,
                        what: Transition::Recover,
                    });
                }
                Transition::Recover => {
                    state[ev.idx as usize] = State::Removed;
                    i_count -= 1;
                    r_count += 1;
                }
            }
        }

        if changed {
            if let Some(log) = log.as_deref_mut() {
                log.push(EventRecord {
                    t,
                    s: s_count,
                    e: e_count,
                    i: i_count,
                    r: r_count,
                });
            }
        }
    }

    OutbreakResult {
        final_size: infected,
        extinction_time: t,
        peak_infectives: peak,
        infectious_period_sum: period_sum,
    }
}

/// Run one epidemic with the event-driven engine.
pub fn simulate_outbreak<R: Rng + ?Sized>(params: &EpidemicParams, rng: &mut R) -> OutbreakResult {
    run_engine(
        &EngineSetup {
            n: params.n,
            index_cases: params.m,
            lambda: params.lambda,
            infectious: &params.infectious_period,
            latent: params.latent_period.as_ref(),
            immune: None,
            susceptibility: None,
        },
        rng,
        None,
    )
}

/// Like [`simulate_outbreak`] but also returns the compartment counts after
/// every transition.
pub fn simulate_outbreak_logged<R: Rng + ?Sized>(
    params: &EpidemicParams,
    rng: &mut R,
) -> (OutbreakResult, Vec<EventRecord>) {
    let mut log = Vec::new();
    let result = run_engine(
        &EngineSetup {
            n: params.n,
            index_cases: params.m,
            lambda: params.lambda,
            infectious: &params.infectious_period,
            latent: params.latent_period.as_ref(),
            immune: None,
            susceptibility: None,
        },
        rng,
        Some(&mut log),
    );
    (result, log)
}

/// Final size via the Sellke construction. Requires that no latency period
/// is configured (latency would not change the result — the construction
/// simply has no notion of it).
pub fn simulate_sellke<R: Rng + ?Sized>(params: &EpidemicParams, rng: &mut R) -> Result<u64> {
    if params.latent_period.is_some() {
        return Err(Error::InvalidInput(
            "the Sellke construction requires latent_period = None \
             (the final size is unaffected by latency)"
            .into(),
        ));
    }
    let sampler = params.infectious_period.sampler();
    let pair_rate = params.lambda / params.n as f64;

    let mut pressure = 0.0;
    for _ in 0..params.m {
        pressure += pair_rate * sampler.sample(rng);
    }

    let n_susceptible = (params.n - params.m) as usize;
    let mut resistances: Vec<f64> = (0..n_susceptible)
        .map(|_| rand_distr::Exp1.sample(rng))
        .collect();
    resistances.sort_unstable_by(f64::total_cmp);

    let mut z = 0usize;
    while z < n_susceptible && resistances[z] < pressure {
        pressure += pair_rate * sampler.sample(rng);
        z += 1;
    }
    Ok(z as u64)
}

/// Final size via the Reed-Frost random graph, for constant infectious
/// periods of length `1/gamma`. Each ordered pair is independently an
/// infection route with probability `1 - exp(-lambda/(n*gamma))`; the final
/// size is the set reachable from the index cases, realised lazily.
/// Requires `n >= m >= 1`, `lambda >= 0` and `gamma > 0`.
pub fn simulate_reed_frost_graph<R: Rng + ?Sized>(
    n: u64,
    m: u64,
    lambda: f64,
    gamma: f64,
    rng: &mut R,
) -> Result<u64> {
    if m < 1 || m > n {
        return Err(Error::InvalidInput(format!(
            "population must satisfy n >= m >= 1 (got n={n}, m={m})"
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "contact rate must satisfy lambda >= 0 (got {lambda})"
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "recovery rate must satisfy gamma > 0 (got {gamma})"
        )));
    }

    let p_edge = -((-lambda / (gamma * n as f64)).exp_m1());
    let mut pool: Vec<u64> = (m..n).collect();
    let mut pending = m;
    let mut infected: u64 = 0;

    while pending > 0 && !pool.is_empty() {
        pending -= 1;
        let mut j = 0;
        while j < pool.len() {
            if rng.random::<f64>() < p_edge {
                pool.swap_remove(j);
                pending += 1;
                infected += 1;
            } else {
                j += 1;
            }
        }
    }
    Ok(infected)
}

/// Classification rule for separating minor from major outbreaks.
#[derive(Clone, Copy, Debug)]
pub enum MajorThreshold {
    /// Place the cut in the widest empty stretch of the final-size
    /// histogram; if the histogram has no convincing gap (shorter than
    /// `max(3, n/100)` bins), fall back to `n^(2/3)`, which sits between
    /// the `O(log n)` minor and `O(n)` major scales.
    Auto,
    /// `final_size >= threshold` is major.
    Fixed(u64),
}

/// Aggregate view of a Monte Carlo campaign.
#[derive(Clone, Debug, Serialize)]
pub struct MonteCarloSummary {
    pub replicates: u64,
    pub master_seed: u64,
    /// Resolved threshold: a final size at or above this counts as major.
    pub threshold: u64,
    pub minor_fraction: f64,
    pub major_count: u64,
    pub major_mean_size: Option<f64>,
    pub major_sd_size: Option<f64>,
    pub major_mean_duration: Option<f64>,
    /// `histogram[z]` = number of replicates with final size `z`.
    pub histogram: Vec<u64>,
}

/// Run `reps` independent epidemics on streams `0..reps` of `master_seed`,
/// in parallel, returned in replicate order.
pub fn run_replicates(params: &EpidemicParams, reps: u64, master_seed: u64) -> Vec<OutbreakResult> {
    run_replicates_block(params, reps, master_seed, 0)
}

/// As [`run_replicates`] but on streams `block * REPLICATE_STRIDE + i`, so
/// several experiment arms can share one master seed without stream reuse.
pub fn run_replicates_block(
    params: &EpidemicParams,
    reps: u64,
    master_seed: u64,
    block: u64,
) -> Vec<OutbreakResult> {
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams::replicate_rng(master_seed, block * streams::REPLICATE_STRIDE + i);
            simulate_outbreak(params, &mut rng)
        })
        .collect()
}

/// Summarise pre-computed replicates. The histogram, classification and all
/// statistics depend only on the results and the rule, so re-summarising
/// with a different threshold is cheap.
pub fn summarize(
    params: &EpidemicParams,
    results: &[OutbreakResult],
    threshold: MajorThreshold,
    master_seed: u64,
) -> Result<MonteCarloSummary> {
    if results.is_empty() {
        return Err(Error::InvalidInput(
            "summarize requires at least one replicate".into(),
        ));
    }
    let mut histogram = vec![0u64; (params.n - params.m + 1) as usize];
    for r in results {
        histogram[r.final_size as usize] += 1;
    }

    let threshold = match threshold {
        MajorThreshold::Fixed(k) => k,
        MajorThreshold::Auto => auto_threshold(&histogram, params.n),
    };

    let mut major_count = 0u64;
    let mut size_sum = 0.0;
    let mut size_sq_sum = 0.0;
    let mut duration_sum = 0.0;
    for r in results {
        if r.is_major(threshold) {
            major_count += 1;
            size_sum += r.final_size as f64;
            size_sq_sum += (r.final_size as f64) * (r.final_size as f64);
            duration_sum += r.extinction_time;
        }
    }

    let reps = results.len() as u64;
    let (major_mean_size, major_sd_size, major_mean_duration) = if major_count > 0 {
        let k = major_count as f64;
        let mean = size_sum / k;
        let sd = if major_count > 1 {
            Some(((size_sq_sum - k * mean * mean) / (k - 1.0)).max(0.0).sqrt())
        } else {
            None
        };
        (Some(mean), sd, Some(duration_sum / k))
    } else {
        (None, None, None)
    };

    Ok(MonteCarloSummary {
        replicates: reps,
        master_seed,
        threshold,
        minor_fraction: (reps - major_count) as f64 / reps as f64,
        major_count,
        major_mean_size,
        major_sd_size,
        major_mean_duration,
        histogram,
    })
}

/// Run a campaign and summarise it.
pub fn run_monte_carlo(
    params: &EpidemicParams,
    reps: u64,
    master_seed: u64,
    threshold: MajorThreshold,
) -> Result<MonteCarloSummary> {
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be >= 1".into()));
    }
    let results = run_replicates(params, reps, master_seed);
    summarize(params, &results, threshold, master_seed)
}

/// Resolve a major-outbreak threshold from a final-size histogram alone:
/// the widest run of empty bins strictly between occupied bins; see
/// [`MajorThreshold::Auto`] for the fallback rule.
pub fn auto_threshold(histogram: &[u64], n: u64) -> u64 {
    let first = histogram.iter().position(|&c| c > 0);
    let last = histogram.iter().rposition(|&c| c > 0);
    let mut best_start = 0usize;
    let mut best_len = 0usize;
    if let (Some(first), Some(last)) = (first, last) {
        let mut run_start = None;
        for z in first..=last {
            match (histogram[z] == 0, run_start) {
                (true, None) => run_start = Some(z),
                (false, Some(start)) => {
                    if z - start > best_len {
                        best_start = start;
                        best_len = z - start;
                    }
                    run_start = None;
                }
                _ => {}
            }
        }
    }
    let min_len = 3.max(n / 100) as usize;
    if best_len >= min_len {
        (best_start + best_len / 2) as u64
    } else {
        ((n as f64).cbrt().powi(2)).ceil() as u64
    }
}

/// One population size in the duration experiment.
#[derive(Clone, Debug, Serialize)]
pub struct DurationPoint {
    pub n: u64,
    pub replicates: u64,
    pub threshold: u64,
    pub major_count: u64,
    pub mean_duration: f64,
    /// Standard error of the mean over major outbreaks.
    pub se_duration: f64,
}

/// Least-squares fit of mean major-outbreak duration against `ln n`.
#[derive(Clone, Debug, Serialize)]
pub struct DurationScaling {
    pub points: Vec<DurationPoint>,
    /// Duration increase per unit of `ln n`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Measure how the expected duration of a *major* outbreak grows with the
/// population size: simulate `reps` epidemics at each `n`, classify with the
/// automatic threshold, and fit mean duration linearly in `ln n`. Requires a
/// supercritical model (`lambda * E(I) > 1`) and at least two distinct sizes.
pub fn duration_scaling_experiment(
    lambda: f64,
    infectious_period: &DurationDistribution,
    m: u64,
    n_grid: &[u64],
    reps: u64,
    master_seed: u64,
) -> Result<DurationScaling> {
    let r0 = lambda * infectious_period.mean();
    if !(r0 > 1.0) {
        return Err(Error::Subcritical(format!(
            "duration scaling requires lambda * E(I) > 1 (got R0 = {r0})"
        )));
    }
    let mut sizes: Vec<u64> = n_grid.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(Error::InvalidInput(
            "n_grid must contain at least two distinct population sizes".into(),
        ));
    }
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be >= 1".into()));
    }

    let mut points = Vec::with_capacity(sizes.len());
    for (arm, &n) in sizes.iter().enumerate() {
        let params = EpidemicParams::new(n, m, lambda, *infectious_period)?;
        let results = run_replicates_block(&params, reps, master_seed, arm as u64);
        let summary = summarize(&params, &results, MajorThreshold::Auto, master_seed)?;
        let threshold = summary.threshold;

        let durations: Vec<f64> = results
            .iter()
            .filter(|r| r.is_major(threshold))
            .map(|r| r.extinction_time)
            .collect();
        if durations.len() < 2 {
            return Err(Error::Numerical(format!(
                "only {} major outbreaks at n={n}; increase reps",
                durations.len()
            )));
        }
        let k = durations.len() as f64;
        let mean = durations.iter().sum::<f64>() / k;
        let var = durations.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (k - 1.0);
        points.push(DurationPoint {
            n,
            replicates: reps,
            threshold,
            major_count: durations.len() as u64,
            mean_duration: mean,
            se_duration: (var / k).sqrt(),
        });
    }

    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_duration).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(DurationScaling {
        points,
        slope,
        intercept,
        r_squared,
    })
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let k = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / k;
    let y_mean = ys.iter().sum::<f64>() / k;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
        syy += (y - y_mean) * (y - y_mean);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res = syy - slope * sxy;
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r_squared)
}
