//! One function per subcommand. Each returns the JSON payload plus the
//! master seed it consumed (None for deterministic commands); CSV
//! artifacts are written before returning so an I/O failure surfaces as
//! the command's error, not after a summary has already been printed.

use std::path::Path;

use episim_core::asymp::{
    clt_standard_deviation, deterministic_trajectory, extinction_probability, final_size_fraction,
};
use episim_core::endemic::{
    endemic_equilibrium, equilibrium_counts, simulate_endemic, EndemicParams, EndemicRun,
};
use episim_core::exact;
use episim_core::household::{
    household_outbreak_mean, household_r0, run_household_replicates, summarize_households,
    HouseholdParams,
};
use episim_core::infer::{estimate_r0, estimate_vc, OutbreakObservation};
use episim_core::multitype::{
    is_reducible, mean_offspring_matrix, r0_multitype, simulate_multitype, MultitypeParams,
};
use episim_core::sim::{
    self, auto_threshold, simulate_reed_frost_graph, simulate_sellke, MonteCarloSummary,
};
use episim_core::vacc::{imperfect_critical_coverage, post_vaccination_r, CriticalCoverage};
use episim_core::{streams, EpidemicParams};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::{artifact, CliError, CmdOutput, ThresholdArg};
use crate::{
    AsymptoticsArgs, DurationArgs, EndemicArgs, EstimateArgs, ExactPmfArgs, HouseholdsArgs,
    MultitypeArgs, OdeArgs, ReedFrostArgs, SellkeArgs, SimulateArgs, VaccinateArgs,
};

pub fn exact_pmf(a: &ExactPmfArgs) -> Result<CmdOutput, CliError> {
    let pmf = exact::final_size_pmf(a.n, a.m, a.lambda, &a.dist, a.precision_bits)?;
    if let Some(path) = &a.out {
        artifact::write_csv(
            path,
            "k,probability",
            pmf.probabilities
                .iter()
                .enumerate()
                .map(|(k, p)| format!("{k},{p}")),
        )?;
    }
    let mean = pmf.mean();
    let mut payload = serde_json::to_value(&pmf)?;
    payload["lambda"] = a.lambda.into();
    payload["mean_final_size"] = mean.into();
    Ok((payload, None))
}

/// Serialize a campaign summary without its histogram (that is the CSV
/// artifact's job) and with the model parameters alongside.
fn summary_payload(summary: &MonteCarloSummary, params: &EpidemicParams) -> Result<Value, CliError> {
    let mut payload = serde_json::to_value(summary)?;
    let map = payload.as_object_mut().expect("summary serializes to an object");
    map.remove("histogram");
    map.remove("master_seed");
    map.insert("n".into(), params.n().into());
    map.insert("m".into(), params.m().into());
    map.insert("r0".into(), params.r0().into());
    Ok(payload)
}

fn write_histogram(path: Option<&Path>, histogram: &[u64]) -> Result<(), CliError> {
    if let Some(path) = path {
        artifact::write_csv(
            path,
            "final_size,count",
            histogram
                .iter()
                .enumerate()
                .map(|(z, c)| format!("{z},{c}")),
        )?;
    }
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<CmdOutput, CliError> {
    let mut params = EpidemicParams::new(a.n, a.m, a.lambda, a.dist.clone())?;
    if let Some(latent) = &a.latent {
        params = params.with_latent(latent.clone());
    }
    let results = sim::run_replicates(&params, a.reps, a.seed);
    let summary = sim::summarize(&params, &results, a.threshold.into(), a.seed)?;
    write_histogram(a.histogram.as_deref(), &summary.histogram)?;
    Ok((summary_payload(&summary, &params)?, Some(a.seed)))
}

/// Shared tail for the simulators that yield bare final sizes: histogram,
/// threshold resolution and the minor/major split.
fn classify_sizes(
    sizes: &[u64],
    n: u64,
    m: u64,
    threshold: ThresholdArg,
) -> (Vec<u64>, Value) {
    let mut histogram = vec![0u64; (n - m + 1) as usize];
    for &z in sizes {
        histogram[z as usize] += 1;
    }
    let threshold = match threshold {
        ThresholdArg::Auto => auto_threshold(&histogram, n),
        ThresholdArg::Fixed(z) => z,
    };
    let majors: Vec<f64> = sizes
        .iter()
        .filter(|&&z| z >= threshold)
        .map(|&z| z as f64)
        .collect();
    let major_count = majors.len() as u64;
    let (major_mean, major_sd) = if majors.is_empty() {
        (Value::Null, Value::Null)
    } else {
        let mean = majors.iter().sum::<f64>() / majors.len() as f64;
        let var = majors.iter().map(|z| (z - mean).powi(2)).sum::<f64>()
            / (majors.len().max(2) - 1) as f64;
        (mean.into(), var.sqrt().into())
    };
    let payload = json!({
        "replicates": sizes.len() as u64,
        "threshold": threshold,
        "minor_fraction": (sizes.len() as u64 - major_count) as f64 / sizes.len() as f64,
        "major_count": major_count,
        "major_mean_size": major_mean,
        "major_sd_size": major_sd,
    });
    (histogram, payload)
}

pub fn sellke(a: &SellkeArgs) -> Result<CmdOutput, CliError> {
    let params = EpidemicParams::new(a.n, a.m, a.lambda, a.dist.clone())?;
    let sizes = (0..a.reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams::replicate_rng(a.seed, i);
            simulate_sellke(&params, &mut rng)
        })
        .collect::<episim_core::Result<Vec<u64>>>()?;
    let (histogram, mut payload) = classify_sizes(&sizes, a.n, a.m, a.threshold);
    write_histogram(a.histogram.as_deref(), &histogram)?;
    payload["n"] = a.n.into();
    payload["m"] = a.m.into();
    payload["r0"] = params.r0().into();
    Ok((payload, Some(a.seed)))
}

pub fn reed_frost(a: &ReedFrostArgs) -> Result<CmdOutput, CliError> {
    let sizes = (0..a.reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams::replicate_rng(a.seed, i);
            simulate_reed_frost_graph(a.n, a.m, a.lambda, a.gamma, &mut rng)
        })
        .collect::<episim_core::Result<Vec<u64>>>()?;
    let (histogram, mut payload) = classify_sizes(&sizes, a.n, a.m, a.threshold);
    write_histogram(a.histogram.as_deref(), &histogram)?;
    payload["n"] = a.n.into();
    payload["m"] = a.m.into();
    payload["r0"] = (a.lambda / a.gamma).into();
    Ok((payload, Some(a.seed)))
}

pub fn asymptotics(a: &AsymptoticsArgs) -> Result<CmdOutput, CliError> {
    let branching = extinction_probability(a.lambda, &a.dist, a.m)?;
    let z_star = final_size_fraction(branching.r0, a.eps)?;
    let mut payload = serde_json::to_value(branching)?;
    payload["m"] = a.m.into();
    payload["final_size_fraction"] = z_star.into();
    payload["clt_sd"] = match a.n {
        Some(n) if branching.r0 > 1.0 => {
            let mean = a.dist.mean();
            let scv = a.dist.variance() / (mean * mean);
            clt_standard_deviation(n, branching.r0, scv, z_star)?.into()
        }
        _ => Value::Null,
    };
    payload["n"] = a.n.map_or(Value::Null, Into::into);
    Ok((payload, None))
}

pub fn ode(a: &OdeArgs) -> Result<CmdOutput, CliError> {
    let s0 = a.s0.unwrap_or(1.0 - a.i0);
    // 1 - s0 - i0 carries float dust when the fractions are round numbers.
    let mut r0_frac = (1.0 - s0 - a.i0).max(0.0);
    if r0_frac < 1e-12 {
        r0_frac = 0.0;
    }
    let initial = (s0, a.i0, r0_frac);
    let trajectory = deterministic_trajectory(a.lambda, a.gamma, initial, a.t_end, a.step)?;
    if let Some(path) = &a.out {
        artifact::write_csv(
            path,
            "t,s,i,r",
            trajectory
                .iter()
                .map(|p| format!("{},{},{},{}", p.t, p.s, p.i, p.r)),
        )?;
    }
    let last = trajectory.last().expect("trajectory contains the initial state");
    let payload = json!({
        "lambda": a.lambda,
        "gamma": a.gamma,
        "r0": a.lambda / a.gamma,
        "initial": { "s": initial.0, "i": initial.1, "r": initial.2 },
        "final": { "t": last.t, "s": last.s, "i": last.i, "r": last.r },
        "ultimate_infected_fraction": s0 - last.s,
    });
    Ok((payload, None))
}

pub fn estimate(a: &EstimateArgs) -> Result<CmdOutput, CliError> {
    let obs = OutbreakObservation::new(a.z, a.n, a.m)?.with_scv(a.r2)?;
    let r0 = estimate_r0(&obs)?;
    let vc = estimate_vc(&obs)?;
    let payload = json!({
        "z": a.z,
        "n": a.n,
        "m": a.m,
        "scv": a.r2,
        "r0": r0.point,
        "r0_se": r0.se,
        "vc": vc.point,
        "vc_se": vc.se,
    });
    Ok((payload, None))
}

pub fn vaccinate(a: &VaccinateArgs) -> Result<CmdOutput, CliError> {
    // Both vaccine actions thin the reproduction number the same way; the
    // mode matters for simulation, not for these summary quantities.
    let r_v = post_vaccination_r(a.r0, a.v * a.efficacy)?;
    let critical = imperfect_critical_coverage(a.r0, a.efficacy)?;
    let (v_c, achievable, required) = match critical {
        CriticalCoverage::Achievable { coverage } => (Value::from(coverage), true, Value::Null),
        CriticalCoverage::NotAchievable { required } => (Value::Null, false, Value::from(required)),
    };
    let payload = json!({
        "r0": a.r0,
        "coverage": a.v,
        "efficacy": a.efficacy,
        "mode": a.mode,
        "r_v": r_v,
        "v_c": v_c,
        "achievable": achievable,
        "required_coverage": required,
    });
    Ok((payload, None))
}

/// The scenario file carries the structured parameters: `fractions` (type
/// proportions), `matrix` (contact rates), `dists` (one period spec per
/// type) and optionally `seeds` (index cases per type, default one of
/// type 0). Scalar keys in the same file feed the ordinary flags.
fn multitype_scenario(path: &Path) -> Result<(MultitypeParams, Option<Vec<u64>>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file '{}': {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config file '{}' is not valid JSON: {e}", path.display())))?;

    let field = |key: &str| {
        doc.get(key)
            .cloned()
            .ok_or_else(|| CliError::Usage(format!("multitype config needs a '{key}' array")))
    };
    let fractions: Vec<f64> = serde_json::from_value(field("fractions")?)
        .map_err(|e| CliError::Usage(format!("config key 'fractions': {e}")))?;
    let matrix: Vec<Vec<f64>> = serde_json::from_value(field("matrix")?)
        .map_err(|e| CliError::Usage(format!("config key 'matrix': {e}")))?;
    let specs: Vec<String> = serde_json::from_value(field("dists")?)
        .map_err(|e| CliError::Usage(format!("config key 'dists': {e}")))?;
    let mut dists = Vec::with_capacity(specs.len());
    for spec in &specs {
        dists.push(crate::parse_dist(spec).map_err(CliError::Usage)?);
    }
    let seeds = match doc.get("seeds") {
        None => None,
        Some(v) => Some(
            serde_json::from_value::<Vec<u64>>(v.clone())
                .map_err(|e| CliError::Usage(format!("config key 'seeds': {e}")))?,
        ),
    };
    Ok((MultitypeParams::new(fractions, matrix, dists)?, seeds))
}

pub fn multitype(a: &MultitypeArgs, config: Option<&Path>) -> Result<CmdOutput, CliError> {
    let Some(path) = config else {
        return Err(CliError::Usage(
            "multitype requires --config FILE with keys fractions, matrix and dists".into(),
        ));
    };
    let (params, seeds) = multitype_scenario(path)?;
    let k = params.types();
    let offspring = mean_offspring_matrix(&params);
    let r0 = r0_multitype(&params)?;

    let mut payload = json!({
        "types": k,
        "fractions": params.fractions(),
        "contact_matrix": params.contact_rates(),
        "offspring_matrix": offspring,
        "r0": r0,
        "is_reducible": is_reducible(&offspring),
    });

    let mut consumed_seed = None;
    match (a.n, a.reps) {
        (Some(n), Some(reps)) => {
            if reps == 0 {
                return Err(CliError::Runtime("reps must be >= 1".into()));
            }
            let seeds = seeds.unwrap_or_else(|| {
                let mut s = vec![0u64; k];
                s[0] = 1;
                s
            });
            let by_type = (0..reps)
                .into_par_iter()
                .map(|i| {
                    let mut rng = streams::replicate_rng(a.seed, i);
                    simulate_multitype(&params, n, &seeds, &mut rng)
                })
                .collect::<episim_core::Result<Vec<Vec<u64>>>>()?;
            let totals: Vec<u64> = by_type.iter().map(|v| v.iter().sum()).collect();
            let m_total: u64 = seeds.iter().sum();
            let (histogram, mut sim_payload) = classify_sizes(&totals, n, m_total, a.threshold);
            write_histogram(a.histogram.as_deref(), &histogram)?;
            let mean_by_type: Vec<f64> = (0..k)
                .map(|j| by_type.iter().map(|v| v[j] as f64).sum::<f64>() / reps as f64)
                .collect();
            sim_payload["n"] = n.into();
            sim_payload["initial_infectives"] = seeds.into();
            sim_payload["mean_by_type"] = mean_by_type.into();
            payload["simulation"] = sim_payload;
            consumed_seed = Some(a.seed);
        }
        (None, None) => {}
        _ => {
            return Err(CliError::Usage(
                "--n and --reps must be given together to simulate".into(),
            ))
        }
    }
    Ok((payload, consumed_seed))
}

pub fn households(a: &HouseholdsArgs) -> Result<CmdOutput, CliError> {
    let params = HouseholdParams::new(a.size_dist.clone(), a.lambda_h, a.lambda_g, a.dist.clone())?;
    let mu_h = household_outbreak_mean(&params)?;
    let r0 = household_r0(&params)?;
    let mut payload = json!({
        "size_dist": a.size_dist,
        "lambda_h": a.lambda_h,
        "lambda_g": a.lambda_g,
        "mu_h": mu_h,
        "r0": r0,
    });
    let mut consumed_seed = None;
    if let Some(n_households) = a.households {
        let outbreaks = run_household_replicates(&params, n_households, a.m, a.reps, a.seed)?;
        let summary = summarize_households(&outbreaks, a.threshold.into(), a.seed)?;
        write_histogram(a.histogram.as_deref(), &summary.histogram)?;
        let mut sim_payload = serde_json::to_value(&summary)?;
        let map = sim_payload.as_object_mut().expect("summary serializes to an object");
        map.remove("histogram");
        map.remove("master_seed");
        map.insert("households".into(), n_households.into());
        map.insert("m".into(), a.m.into());
        payload["simulation"] = sim_payload;
        consumed_seed = Some(a.seed);
    }
    Ok((payload, consumed_seed))
}

pub fn endemic(a: &EndemicArgs) -> Result<CmdOutput, CliError> {
    let params = EndemicParams::new(a.n, a.lambda, a.gamma, a.mu)?;
    let (s_hat, i_hat, r_hat) = endemic_equilibrium(&params)?;
    let counts = equilibrium_counts(&params)?;
    let start = match (a.s0, a.i0, a.r0_init) {
        (Some(s), Some(i), Some(r)) => (s, i, r),
        (None, None, None) => counts,
        _ => {
            return Err(CliError::Usage(
                "--s0, --i0 and --r0-init must be given together".into(),
            ))
        }
    };
    if a.reps == 0 {
        return Err(CliError::Runtime("reps must be >= 1".into()));
    }
    let record = a.trajectory.as_ref().map(|_| a.record_step);
    let runs = (0..a.reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams::replicate_rng(a.seed, i);
            let step = if i == 0 { record } else { None };
            simulate_endemic(&params, start, a.t_max, step, &mut rng)
        })
        .collect::<episim_core::Result<Vec<EndemicRun>>>()?;

    if let Some(path) = &a.trajectory {
        artifact::write_csv(
            path,
            "t,S,I,R",
            runs[0]
                .trajectory
                .iter()
                .map(|p| format!("{},{},{},{}", p.t, p.s, p.i, p.r)),
        )?;
    }

    let survivors: Vec<&EndemicRun> = runs.iter().filter(|r| r.extinction_time.is_none()).collect();
    let extinct: Vec<f64> = runs.iter().filter_map(|r| r.extinction_time).collect();
    let survivor_mean_prevalence = if survivors.is_empty() {
        Value::Null
    } else {
        (survivors.iter().map(|r| r.mean_infective_fraction).sum::<f64>()
            / survivors.len() as f64)
            .into()
    };
    let mean_extinction_time = if extinct.is_empty() {
        Value::Null
    } else {
        (extinct.iter().sum::<f64>() / extinct.len() as f64).into()
    };

    let payload = json!({
        "n": a.n,
        "r0": params.r0(),
        "delta": params.delta(),
        "equilibrium": {
            "fractions": { "s": s_hat, "i": i_hat, "r": r_hat },
            "counts": { "s": counts.0, "i": counts.1, "r": counts.2 },
        },
        "initial": { "s": start.0, "i": start.1, "r": start.2 },
        "t_max": a.t_max,
        "replicates": a.reps,
        "surviving_runs": survivors.len() as u64,
        "survivor_mean_prevalence": survivor_mean_prevalence,
        "mean_extinction_time": mean_extinction_time,
    });
    Ok((payload, Some(a.seed)))
}

pub fn duration_experiment(a: &DurationArgs) -> Result<CmdOutput, CliError> {
    let scaling =
        sim::duration_scaling_experiment(a.lambda, &a.dist, a.m, &a.n_grid, a.reps, a.seed)?;
    if let Some(path) = &a.out {
        artifact::write_csv(
            path,
            "n,mean_T,se_T",
            scaling
                .points
                .iter()
                .map(|p| format!("{},{},{}", p.n, p.mean_duration, p.se_duration)),
        )?;
    }
    let mut payload = serde_json::to_value(&scaling)?;
    payload["lambda"] = a.lambda.into();
    payload["m"] = a.m.into();
    Ok((payload, Some(a.seed)))
}
