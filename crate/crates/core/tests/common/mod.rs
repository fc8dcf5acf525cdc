//! Shared test oracles, written independently of the library internals:
//! small-state-space dynamic programming for final-size distributions and
//! chi-square helpers for comparing empirical histograms.

#![allow(dead_code)] // each integration test binary uses a subset

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Exact final-size pmf of the Markovian SIR model by absorption
/// probabilities of the embedded jump chain. From state `(s, i)` with
/// `i > 0` the next event is an infection with probability
/// `lambda s / (lambda s + gamma n)` (the factor `i` cancels between the
/// competing rates), else a recovery. Returns `pmf[z]` for `z` infections
/// among the initially susceptible.
pub fn ctmc_final_size_pmf(n: u64, m: u64, lambda: f64, gamma: f64) -> Vec<f64> {
    let susceptibles = (n - m) as usize;
    let max_i = n as usize;
    // dp[s][i] = probability the jump chain ever visits (s, i) "for the
    // first time along each path" — summed in topological order (s
    // descending, i descending) this is the visit probability.
    let mut dp = vec![vec![0.0f64; max_i + 2]; susceptibles + 1];
    dp[susceptibles][m as usize] = 1.0;
    let mut pmf = vec![0.0f64; susceptibles + 1];
    for s in (0..=susceptibles).rev() {
        for i in (1..=max_i).rev() {
            let mass = dp[s][i];
            if mass == 0.0 {
                continue;
            }
            let p_inf = if s > 0 {
                lambda * s as f64 / (lambda * s as f64 + gamma * n as f64)
            } else {
                0.0
            };
            if s > 0 {
                dp[s - 1][i + 1] += mass * p_inf;
            }
            dp[s][i - 1] += mass * (1.0 - p_inf);
        }
        pmf[susceptibles - s] += dp[s][0];
    }
    pmf
}

/// Exact final-size pmf of the Reed-Frost chain-binomial model: in each
/// generation every susceptible independently escapes all `i` current
/// infectives with probability `(1 - p_edge)^i`. Matches the constant
///-period SIR when `p_edge = 1 - exp(-lambda c / n)`.
pub fn reed_frost_pmf(n: u64, m: u64, p_edge: f64) -> Vec<f64> {
    let susceptibles = (n - m) as usize;
    let mut dp = vec![vec![0.0f64; n as usize + 1]; susceptibles + 1];
    dp[susceptibles][m as usize] = 1.0;
    let mut pmf = vec![0.0f64; susceptibles + 1];
    for s in (0..=susceptibles).rev() {
        for i in 1..=(n as usize) {
            let mass = dp[s][i];
            if mass == 0.0 {
                continue;
            }
            let escape = (1.0 - p_edge).powi(i as i32);
            for j in 0..=s {
                let prob = binomial_pmf(s as u64, j as u64, 1.0 - escape);
                if j == 0 {
                    pmf[susceptibles - s] += mass * prob;
                } else {
                    dp[s - j][j] += mass * prob;
                }
            }
        }
    }
    pmf
}

fn binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    let mut coeff = 1.0f64;
    for j in 0..k {
        coeff *= (n - j) as f64 / (j + 1) as f64;
    }
    coeff * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// Chi-square goodness-of-fit p-value of observed counts against expected
/// probabilities. Adjacent cells are pooled left to right until each
/// pooled cell has expected count at least 5 (the last pool absorbs any
/// remainder); degrees of freedom = pooled cells - 1.
pub fn chi_square_gof_p(observed: &[u64], expected_probs: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected_probs.len());
    let total: u64 = observed.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        acc_o += o as f64;
        acc_e += p * total as f64;
        if acc_e >= 5.0 {
            cells.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc_o;
                last.1 += acc_e;
            }
            None => cells.push((acc_o, acc_e)),
        }
    }
    assert!(cells.len() >= 2, "need at least two pooled cells");
    let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Two-sample chi-square homogeneity p-value for two histograms over the
/// same support, with the same left-to-right pooling rule applied to the
/// smaller expected count of the two samples.
pub fn chi_square_two_sample_p(a: &[u64], b: &[u64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let n = (na + nb) as f64;
    let mut cells: Vec<(f64, f64, f64)> = Vec::new(); // (obs_a, obs_b, pooled)
    let (mut acc_a, mut acc_b) = (0.0, 0.0);
    for (&oa, &ob) in a.iter().zip(b) {
        acc_a += oa as f64;
        acc_b += ob as f64;
        let pooled = acc_a + acc_b;
        let min_exp = (pooled / n * na as f64).min(pooled / n * nb as f64);
        if min_exp >= 5.0 {
            cells.push((acc_a, acc_b, pooled));
            acc_a = 0.0;
            acc_b = 0.0;
        }
    }
    if acc_a + acc_b > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc_a;
                last.1 += acc_b;
                last.2 += acc_a + acc_b;
            }
            None => cells.push((acc_a, acc_b, acc_a + acc_b)),
        }
    }
    assert!(cells.len() >= 2, "need at least two pooled cells");
    let mut stat = 0.0;
    for (oa, ob, pooled) in &cells {
        let ea = pooled / n * na as f64;
        let eb = pooled / n * nb as f64;
        stat += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
    }
    let dof = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Histogram of values over `0..=max`.
pub fn histogram(values: impl IntoIterator<Item = u64>, max: u64) -> Vec<u64> {
    let mut h = vec![0u64; max as usize + 1];
    for v in values {
        h[v as usize] += 1;
    }
    h
}

/// Sample mean and (n-1)-normalised standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
