//! Two-level mixing: a community partitioned into small households.
//!
//! Individuals make *global* contacts at rate `lambda_g`, aimed uniformly
//! at the whole community, and *local* contacts with each of their
//! housemates at per-pair rate `lambda_h` (no population scaling — the
//! household is small and its pairs are explicit).
//!
//! Treating households as super-individuals gives the reproduction number
//! `R0 = lambda_g * E(I) * mu_h`: each global infection lands in a
//! household whose size is size-biased (larger households contain more
//! individuals), sets off a local outbreak infecting `mu_h` members on
//! average (primary included), and each of those makes `lambda_g * E(I)`
//! global contacts in expectation. `mu_h` comes from the exact
//! final-size machinery applied household by household.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, RngExt};
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;

use crate::dists::DurationDistribution;
use crate::error::{Error, Result};
use crate::exact;
use crate::sim::{self, MajorThreshold, MonteCarloSummary, OutbreakResult};
use crate::streams;

/// Largest supported household size; the within-household exact solve is
/// cheap only because households are tiny.
pub const MAX_HOUSEHOLD_SIZE: usize = 10;

/// Community parameters: a household-size pmf (`size_pmf[h-1]` is the
/// probability of size `h`), the within-household per-pair rate, the
/// global contact rate, and the infectious period.
#[derive(Clone, Debug, Serialize)]
pub struct HouseholdParams {
    size_pmf: Vec<f64>,
    lambda_h: f64,
    lambda_g: f64,
    period: DurationDistribution,
}

impl HouseholdParams {
    pub fn new(
        size_pmf: Vec<f64>,
        lambda_h: f64,
        lambda_g: f64,
        period: DurationDistribution,
    ) -> Result<Self> {
        validate_pmf(&size_pmf)?;
        if !(lambda_h >= 0.0 && lambda_h.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "within-household rate must satisfy lambda_h >= 0 (got {lambda_h})"
            )));
        }
        if !(lambda_g >= 0.0 && lambda_g.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "global contact rate must satisfy lambda_g >= 0 (got {lambda_g})"
            )));
        }
        Ok(Self {
            size_pmf,
            lambda_h,
            lambda_g,
            period,
        })
    }

    pub fn size_pmf(&self) -> &[f64] {
        &self.size_pmf
    }

    pub fn lambda_h(&self) -> f64 {
        self.lambda_h
    }

    pub fn lambda_g(&self) -> f64 {
        self.lambda_g
    }

    pub fn period(&self) -> &DurationDistribution {
        &self.period
    }

    /// Largest size with positive probability.
    pub fn max_size(&self) -> usize {
        self.size_pmf.iter().rposition(|&p| p > 0.0).unwrap() + 1
    }
}

fn validate_pmf(size_pmf: &[f64]) -> Result<()> {
    if size_pmf.is_empty() || size_pmf.len() > MAX_HOUSEHOLD_SIZE {
        return Err(Error::InvalidInput(format!(
            "household sizes must range over 1..={MAX_HOUSEHOLD_SIZE} \
             (got a pmf over 1..={})",
            size_pmf.len()
        )));
    }
    if size_pmf.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidInput(
            "household-size probabilities must be nonnegative".into(),
        ));
    }
    let total: f64 = size_pmf.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "household-size pmf must sum to 1 (got {total})"
        )));
    }
    Ok(())
}

/// Reweight a household-size pmf by size: the household of a uniformly
/// chosen *individual* has distribution `h * pmf[h-1] / mean`. Errors when
/// the pmf has zero mean (all mass on nothing).
pub fn size_biased_pmf(size_pmf: &[f64]) -> Result<Vec<f64>> {
    validate_pmf(size_pmf)?;
    let mean: f64 = size_pmf
        .iter()
        .enumerate()
        .map(|(i, &p)| (i + 1) as f64 * p)
        .sum();
    if mean <= 0.0 {
        return Err(Error::Domain(
            "size-biasing requires a pmf with positive mean".into(),
        ));
    }
    Ok(size_pmf
        .iter()
        .enumerate()
        .map(|(i, &p)| (i + 1) as f64 * p / mean)
        .collect())
}

/// Mean size of a household outbreak, `mu_h`: the household of the
/// externally infected individual is size-biased; within it the exact
/// final-size distribution (one introduction, per-pair rate `lambda_h`)
/// gives the expected number of additional cases, and the primary is
/// counted too.
pub fn household_outbreak_mean(params: &HouseholdParams) -> Result<f64> {
    let biased = size_biased_pmf(&params.size_pmf)?;
    let mut mu = 0.0;
    for (i, &w) in biased.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let h = (i + 1) as u64;
        let mean_additional = if h == 1 || params.lambda_h == 0.0 {
            0.0
        } else {
            exact::final_size_pmf_per_pair(
                h - 1,
                1,
                params.lambda_h,
                &params.period,
                exact::DEFAULT_PRECISION_BITS,
            )?
            .mean()
        };
        mu += w * (1.0 + mean_additional);
    }
    Ok(mu)
}

/// Household reproduction number `lambda_g * E(I) * mu_h`.
pub fn household_r0(params: &HouseholdParams) -> Result<f64> {
    Ok(params.lambda_g * params.period.mean() * household_outbreak_mean(params)?)
}

/// One simulated two-level epidemic, with enough bookkeeping to study the
/// household-level branching structure.
#[derive(Clone, Debug)]
pub struct HouseholdOutbreak {
    /// Final size, duration, peak and total infectious pressure, as in the
    /// standard model (final size excludes the index cases).
    pub result: OutbreakResult,
    /// Realised community size (the household sizes are sampled).
    pub population: u64,
    pub household_sizes: Vec<u8>,
    /// Generation of each household in the household-to-household tree:
    /// 0 for households seeded with an index case, `g+1` for a household
    /// first infected by a global contact out of a generation-`g`
    /// household, `None` if never infected.
    pub household_generation: Vec<Option<u32>>,
    /// Number of previously untouched households each household infected
    /// via global contacts.
    pub household_offspring: Vec<u32>,
}

/// Simulate one epidemic: sample `n_households` household sizes, seed `m`
/// uniformly chosen distinct individuals, and run the two contact
/// processes (per-pair `lambda_h` within households, `lambda_g` to a
/// uniform member of the community) to extinction.
pub fn simulate_households<R: Rng + ?Sized>(
    params: &HouseholdParams,
    n_households: u64,
    m: u64,
    rng: &mut R,
) -> Result<HouseholdOutbreak> {
    if n_households < 1 {
        return Err(Error::InvalidInput(
            "at least one household is required".into(),
        ));
    }
    if m < 1 {
        return Err(Error::InvalidInput(
            "at least one index case is required (m >= 1)".into(),
        ));
    }

    // Sample the community.
    let cumulative: Vec<f64> = params
        .size_pmf
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let mut sizes = Vec::with_capacity(n_households as usize);
    for _ in 0..n_households {
        let u = rng.random::<f64>();
        let h = cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1);
        sizes.push((h + 1) as u8);
    }
    let n: u64 = sizes.iter().map(|&s| s as u64).sum();
    if m > n {
        return Err(Error::InvalidInput(format!(
            "m index cases do not fit in the sampled community \
             (m={m}, population={n})"
        )));
    }

    // Individual -> household, households laid out contiguously.
    let mut house_of = Vec::with_capacity(n as usize);
    let mut house_start = Vec::with_capacity(sizes.len());
    for (house, &s) in sizes.iter().enumerate() {
        house_start.push(house_of.len() as u32);
        for _ in 0..s {
            house_of.push(house as u32);
        }
    }

    let max_size = params.max_size() as u32;
    let sampler = params.period.sampler();

    let mut susceptible = vec![true; n as usize];
    let mut roster = Roster::new(n as usize);
    // Recovery events keyed by time bits: recovery times are nonnegative,
    // and nonnegative doubles order the same way as their bit patterns.
    let mut heap: BinaryHeap<Reverse<(u64, u32)>> = BinaryHeap::new();

    let mut generation: Vec<Option<u32>> = vec![None; sizes.len()];
    let mut offspring = vec![0u32; sizes.len()];
    let mut infections: u64 = 0;
    let mut period_sum = 0.0;
    let mut peak: u64 = 0;
    let mut t = 0.0;

    // Seed m distinct uniform individuals.
    let mut seeded = 0u64;
    while seeded < m {
        let idx = rng.random_range(0..n) as u32;
        if !susceptible[idx as usize] {
            continue;
        }
        susceptible[idx as usize] = false;
        roster.add(idx, (sizes[house_of[idx as usize] as usize] - 1) as u64);
        let w = sampler.sample(rng);
        period_sum += w;
        heap.push(Reverse((w.to_bits(), idx)));
        generation[house_of[idx as usize] as usize] = Some(0);
        seeded += 1;
    }
    peak = peak.max(roster.infectives.len() as u64);

    while !roster.infectives.is_empty() {
        let global_rate = params.lambda_g * roster.infectives.len() as f64;
        let local_rate = params.lambda_h * roster.housemate_sum as f64;
        let total_rate = global_rate + local_rate;
        let t_contact = if total_rate > 0.0 {
            let gap: f64 = rand_distr::Exp1.sample(rng);
            t + gap / total_rate
        } else {
            f64::INFINITY
        };
        let t_recover = heap
            .peek()
            .map_or(f64::INFINITY, |Reverse((bits, _))| f64::from_bits(*bits));

        if t_contact < t_recover {
            t = t_contact;
            let (source, target) = if rng.random::<f64>() * total_rate < global_rate {
                // Global contact: uniform source infective, uniform target.
                let source = roster.pick_uniform(rng);
                (source, rng.random_range(0..n) as u32)
            } else {
                // Local contact: source weighted by housemate count
                // (rejection against the largest size), target a uniform
                // housemate.
                let source = loop {
                    let cand = roster.pick_uniform(rng);
                    let mates = (sizes[house_of[cand as usize] as usize] - 1) as u32;
                    if mates > 0 && rng.random_range(0..max_size - 1) < mates {
                        break cand;
                    }
                };
                let house = house_of[source as usize] as usize;
                let start = house_start[house];
                let h = sizes[house] as u32;
                let offset = rng.random_range(0..h - 1);
                let target = start + if start + offset >= source { offset + 1 } else { offset };
                (source, target)
            };
            if susceptible[target as usize] {
                let source_house = house_of[source as usize] as usize;
                let target_house = house_of[target as usize] as usize;
                if generation[target_house].is_none() {
                    generation[target_house] =
                        Some(generation[source_house].expect("source household infected") + 1);
                    offspring[source_house] += 1;
                }
                susceptible[target as usize] = false;
                roster.add(target, (sizes[target_house] - 1) as u64);
                let w = sampler.sample(rng);
                period_sum += w;
                heap.push(Reverse(((t + w).to_bits(), target)));
                infections += 1;
                peak = peak.max(roster.infectives.len() as u64);
            }
        } else {
            let Reverse((bits, idx)) = heap.pop().expect("recovery scheduled");
            t = f64::from_bits(bits);
            roster.remove(idx, (sizes[house_of[idx as usize] as usize] - 1) as u64);
        }
    }

    Ok(HouseholdOutbreak {
        result: OutbreakResult {
            final_size: infections,
            extinction_time: t,
            peak_infectives: peak,
            infectious_period_sum: period_sum,
        },
        population: n,
        household_sizes: sizes,
        household_generation: generation,
        household_offspring: offspring,
    })
}

/// Currently infectious individuals with O(1) insert, O(1) removal by
/// index, and the running sum of their housemate counts (which scales the
/// within-household contact rate).
struct Roster {
    infectives: Vec<u32>,
    slot: Vec<u32>,
    housemate_sum: u64,
}

impl Roster {
    fn new(n: usize) -> Self {
        Self {
            infectives: Vec::new(),
            slot: vec![u32::MAX; n],
            housemate_sum: 0,
        }
    }

    fn add(&mut self, idx: u32, mates: u64) {
        self.slot[idx as usize] = self.infectives.len() as u32;
        self.infectives.push(idx);
        self.housemate_sum += mates;
    }

    fn remove(&mut self, idx: u32, mates: u64) {
        let pos = self.slot[idx as usize] as usize;
        self.infectives.swap_remove(pos);
        if pos < self.infectives.len() {
            self.slot[self.infectives[pos] as usize] = pos as u32;
        }
        self.slot[idx as usize] = u32::MAX;
        self.housemate_sum -= mates;
    }

    fn pick_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.infectives[rng.random_range(0..self.infectives.len())]
    }
}

/// Run `reps` independent two-level epidemics on streams `0..reps` of
/// `master_seed`, in parallel, in replicate order.
pub fn run_household_replicates(
    params: &HouseholdParams,
    n_households: u64,
    m: u64,
    reps: u64,
    master_seed: u64,
) -> Result<Vec<HouseholdOutbreak>> {
    if reps == 0 {
        return Err(Error::InvalidInput("reps must be >= 1".into()));
    }
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams::replicate_rng(master_seed, i);
            simulate_households(params, n_households, m, &mut rng)
        })
        .collect()
}

/// Summarise household replicates with the same classification rule as the
/// standard model (the histogram is over final sizes; `Auto` uses the
/// largest realised population for its fallback scale).
pub fn summarize_households(
    results: &[HouseholdOutbreak],
    threshold: MajorThreshold,
    master_seed: u64,
) -> Result<MonteCarloSummary> {
    if results.is_empty() {
        return Err(Error::InvalidInput(
            "summarize requires at least one replicate".into(),
        ));
    }
    let max_n = results.iter().map(|r| r.population).max().unwrap();
    let mut histogram = vec![0u64; max_n as usize + 1];
    for r in results {
        histogram[r.result.final_size as usize] += 1;
    }
    let threshold = match threshold {
        MajorThreshold::Fixed(k) => k,
        MajorThreshold::Auto => sim::auto_threshold(&histogram, max_n),
    };

    let mut major_count = 0u64;
    let mut size_sum = 0.0;
    let mut size_sq_sum = 0.0;
    let mut duration_sum = 0.0;
    for r in results {
        if r.result.is_major(threshold) {
            major_count += 1;
            size_sum += r.result.final_size as f64;
            size_sq_sum += (r.result.final_size as f64) * (r.result.final_size as f64);
            duration_sum += r.result.extinction_time;
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

/// Mean number of child households per household over the first
/// `generations` generations (pooled across replicates); compares against
/// [`household_r0`] while the branching approximation holds.
pub fn early_household_offspring_mean(
    results: &[HouseholdOutbreak],
    generations: u32,
) -> Option<f64> {
    let mut households = 0u64;
    let mut children = 0u64;
    for r in results {
        for (g, &off) in r.household_generation.iter().zip(&r.household_offspring) {
            if let Some(g) = g {
                if *g < generations {
                    households += 1;
                    children += off as u64;
                }
            }
        }
    }
    if households == 0 {
        None
    } else {
        Some(children as f64 / households as f64)
    }
}
