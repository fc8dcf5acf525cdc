//! Vaccination algebra, the parameter transform, and herd immunity
//! demonstrated end-to-end by simulation.

mod common;

use episim_core::asymp::extinction_probability;
use episim_core::dists::DurationDistribution;
use episim_core::sim::OutbreakResult;
use episim_core::vacc::{
    critical_coverage, imperfect_critical_coverage, post_vaccination_r, simulate_with_policy,
    transform_for_vaccination, CriticalCoverage, VaccinationPolicy, VaccineMode,
};
use episim_core::{streams, EpidemicParams};

#[test]
fn reproduction_number_algebra() {
    assert!((post_vaccination_r(1.5, 1.0 / 3.0).unwrap() - 1.0).abs() < 1e-12);
    assert!((post_vaccination_r(2.0, 0.0).unwrap() - 2.0).abs() < 1e-15);
    assert!((post_vaccination_r(2.0, 0.25).unwrap() - 1.5).abs() < 1e-15);

    assert!((critical_coverage(1.5).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!((critical_coverage(4.0).unwrap() - 0.75).abs() < 1e-15);
    assert_eq!(critical_coverage(0.8).unwrap(), 0.0);
    assert_eq!(critical_coverage(1.0).unwrap(), 0.0);

    // Vaccinating exactly the critical fraction lands on threshold.
    for r0 in [1.2, 1.5, 2.0, 5.0, 12.0] {
        let v = critical_coverage(r0).unwrap();
        assert!((post_vaccination_r(r0, v).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn imperfect_vaccine_threshold() {
    match imperfect_critical_coverage(1.5, 1.0).unwrap() {
        CriticalCoverage::Achievable { coverage } => {
            assert!((coverage - 1.0 / 3.0).abs() < 1e-12)
        }
        other => panic!("expected achievable, got {other:?}"),
    }
    match imperfect_critical_coverage(1.5, 0.5).unwrap() {
        CriticalCoverage::Achievable { coverage } => {
            assert!((coverage - 2.0 / 3.0).abs() < 1e-12)
        }
        other => panic!("expected achievable, got {other:?}"),
    }
    match imperfect_critical_coverage(4.0, 0.5).unwrap() {
        CriticalCoverage::NotAchievable { required } => {
            assert!((required - 1.5).abs() < 1e-12)
        }
        other => panic!("expected not achievable, got {other:?}"),
    }
    assert!(imperfect_critical_coverage(1.5, 0.0).is_err());
}

#[test]
fn transform_reuses_standard_machinery() {
    let dist = DurationDistribution::exponential(1.0).unwrap();
    let params = EpidemicParams::new(1000, 1, 1.5, dist.clone()).unwrap();

    let same = transform_for_vaccination(&params, 0.0).unwrap();
    assert_eq!(same.n(), 1000);
    assert_eq!(same.m(), 1);
    assert!((same.lambda() - 1.5).abs() < 1e-15);

    let at_vc = transform_for_vaccination(&params, 1.0 / 3.0).unwrap();
    assert_eq!(at_vc.n(), 667);
    assert!((at_vc.lambda() - 1.0).abs() < 1e-12);
    // Downstream: at threshold the branching view gives no major outbreak.
    let approx = extinction_probability(at_vc.lambda(), &dist, at_vc.m()).unwrap();
    assert!(approx.major_outbreak_probability.abs() < 1e-10);

    // Vaccinating essentially everyone leaves no one to seed.
    assert!(transform_for_vaccination(&params, 0.9999).is_err());
}

/// Fraction of replicates infecting at least 10% of the community. Near
/// the vaccination threshold there is no bimodal gap, so a fixed cut is
/// the honest classifier; 10% keeps clear of the near-critical tail.
fn major_fraction(params: &EpidemicParams, policy: &VaccinationPolicy, reps: u64, seed: u64) -> f64 {
    let mut majors = 0u64;
    for i in 0..reps {
        let mut rng = streams::replicate_rng(seed, i);
        let r: OutbreakResult = simulate_with_policy(params, policy, &mut rng).unwrap();
        if r.final_size >= params.n() / 10 {
            majors += 1;
        }
    }
    majors as f64 / reps as f64
}

#[test]
fn herd_immunity_end_to_end() {
    // Perfect vaccine 5 points above the critical third: major outbreaks
    // essentially vanish in a community of 2000.
    let params = EpidemicParams::new(
        2000,
        1,
        1.5,
        DurationDistribution::exponential(1.0).unwrap(),
    )
    .unwrap();
    let policy = VaccinationPolicy::perfect(1.0 / 3.0 + 0.05).unwrap();
    let fraction = major_fraction(&params, &policy, 2000, 8101);
    assert!(fraction < 0.02, "major fraction {fraction} above v_C");
}

#[test]
fn leaky_and_all_or_nothing_share_the_threshold() {
    // Efficacy 0.75 against R0 = 1.5 needs coverage 4/9; five points
    // above it both vaccine responses suppress major outbreaks.
    let params = EpidemicParams::new(
        1000,
        1,
        1.5,
        DurationDistribution::exponential(1.0).unwrap(),
    )
    .unwrap();
    let vc = match imperfect_critical_coverage(1.5, 0.75).unwrap() {
        CriticalCoverage::Achievable { coverage } => coverage,
        other => panic!("expected achievable, got {other:?}"),
    };
    assert!((vc - 4.0 / 9.0).abs() < 1e-12);

    let above = vc + 0.1;
    let leaky = VaccinationPolicy::new(above, 0.75, VaccineMode::Leaky).unwrap();
    let aon = VaccinationPolicy::new(above, 0.75, VaccineMode::AllOrNothing).unwrap();
    let f_leaky = major_fraction(&params, &leaky, 2000, 8102);
    let f_aon = major_fraction(&params, &aon, 2000, 8103);
    assert!(f_leaky < 0.02, "leaky major fraction {f_leaky}");
    assert!(f_aon < 0.02, "all-or-nothing major fraction {f_aon}");
    assert!((f_leaky - f_aon).abs() < 0.02);

    // Below the threshold both modes thin transmission by the same factor
    // 1 - v e, so their major-outbreak rates agree to Monte Carlo error.
    let below = 0.2;
    let leaky = VaccinationPolicy::new(below, 0.75, VaccineMode::Leaky).unwrap();
    let aon = VaccinationPolicy::new(below, 0.75, VaccineMode::AllOrNothing).unwrap();
    let f_leaky = major_fraction(&params, &leaky, 2000, 8104);
    let f_aon = major_fraction(&params, &aon, 2000, 8105);
    assert!(
        (f_leaky - f_aon).abs() < 0.05,
        "leaky {f_leaky} vs all-or-nothing {f_aon} at v = 0.2"
    );
    assert!(f_leaky > 0.05 && f_aon > 0.05);
}

#[test]
fn policy_validation() {
    assert!(VaccinationPolicy::new(-0.1, 1.0, VaccineMode::Leaky).is_err());
    assert!(VaccinationPolicy::new(1.1, 1.0, VaccineMode::Leaky).is_err());
    assert!(VaccinationPolicy::new(0.5, 0.0, VaccineMode::Leaky).is_err());
    assert!(VaccinationPolicy::new(0.5, 1.5, VaccineMode::Leaky).is_err());
    let p = VaccinationPolicy::perfect(0.5).unwrap();
    assert_eq!(p.coverage(), 0.5);
    assert_eq!(p.efficacy(), 1.0);
    assert_eq!(p.mode(), VaccineMode::AllOrNothing);
}
