//! Cross-module property suite: the fast invariants plus the Monte Carlo
//! calibration checks of the estimators under the null.

mod common;

use common::*;
use dte_core::*;
use proptest::prelude::*;

fn run_property(outcome: PropertyOutcome) {
    match outcome {
        Ok(detail) => println!("PASS: {detail}"),
        Err(detail) => panic!("{detail}"),
    }
}

#[test]
fn cp_gao_self_consistency() {
    run_property(check_cp_gao_self_consistency());
}

#[test]
fn zero_weights_match_plain_logrank() {
    run_property(check_zero_weights_match_plain_logrank());
}

#[test]
fn arm_swap_antisymmetry() {
    run_property(check_arm_swap_antisymmetry());
}

#[test]
fn survival_continuity_and_density_normalization() {
    run_property(check_continuity_and_normalization());
}

#[test]
fn seed_and_worker_determinism() {
    run_property(check_seed_and_worker_determinism());
}

#[test]
fn fixed_increase_non_disclosure() {
    run_property(check_fixed_increase_non_disclosure());
}

// ---------------------------------------------------------------------------
// Null-calibration Monte Carlo checks
// ---------------------------------------------------------------------------

/// Interim statistics across null replicates of the published design: the
/// weighted log-rank z is standard normal to Monte Carlo accuracy and its
/// one-sided p-value is uniform.
#[test]
fn null_statistic_calibration_and_p_uniformity() {
    let model = DelayedEffectModel::new(LN2 / 6.0, 1.0, 0.0).unwrap();
    let enrollment = paper_enrollment();
    let m = 10_000usize;
    let stats: Vec<(f64, f64)> = (0..m)
        .map(|rep| {
            let mut rng = replicate_rng(MASTER_SEED, 910, rep);
            let data = simulate_cohort(&model, &enrollment, 330, (0.5, 0.5), 0, &mut rng).unwrap();
            let view = censor_at_event_count(&data, 258).unwrap();
            let r = weighted_logrank(&view, WeightSpec::logrank(), WeightTiming::LeftLimit)
                .unwrap();
            (r.z, r.one_sided_p)
        })
        .collect();

    let mean = stats.iter().map(|s| s.0).sum::<f64>() / m as f64;
    let var = stats.iter().map(|s| (s.0 - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    assert!(mean.abs() < 0.03, "null mean {mean}");
    assert!((0.95..=1.05).contains(&var), "null variance {var}");

    let mut ps: Vec<f64> = stats.iter().map(|s| s.1).collect();
    let d = ks_distance_uniform(&mut ps);
    assert!(d < 0.02, "KS distance from uniform: {d}");
}

// ---------------------------------------------------------------------------
// Structural invariants over random inputs
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Model invariants: survival monotone from 1, continuous at the delay.
    #[test]
    fn survival_monotone_and_continuous(
        lambda in 0.02f64..0.5,
        psi in 0.2f64..2.0,
        eps in 0.0f64..8.0,
    ) {
        let m = DelayedEffectModel::new(lambda, psi, eps).unwrap();
        let mut last = 1.0f64;
        for i in 0..400 {
            let t = i as f64 * 0.1;
            let s = m.survival(Arm::Experimental, t).unwrap();
            prop_assert!(s <= last + 1e-12);
            prop_assert!((0.0..=1.0).contains(&s));
            last = s;
        }
        let pre = (-lambda * eps).exp();
        let post = m.c * (-psi * lambda * eps).exp();
        prop_assert!((pre - post).abs() < 1e-12);
    }

    /// Risk-table bookkeeping invariants on simulated cohorts.
    #[test]
    fn risk_table_invariants(seed in 0u64..500, cut_frac in 0.3f64..1.0) {
        let model = paper_model(2.0);
        let enrollment = paper_enrollment();
        let mut rng = replicate_rng(seed, 912, 0);
        let data = simulate_cohort(&model, &enrollment, 60, (0.5, 0.5), seed, &mut rng).unwrap();
        let k = ((60.0 * cut_frac) as usize).max(1);
        let view = censor_at_event_count(&data, k).unwrap();
        let rt = risk_table(&view).unwrap();
        let mut last_t = f64::NEG_INFINITY;
        let mut last_n = usize::MAX;
        for row in &rt.rows {
            prop_assert!(row.time > last_t);
            prop_assert!(row.at_risk <= last_n);
            prop_assert!(row.control_events <= row.events);
            prop_assert!(row.control_events <= row.control_at_risk);
            prop_assert_eq!(row.at_risk, row.control_at_risk + row.experimental_at_risk);
            last_t = row.time;
            last_n = row.at_risk;
        }
        let total_events: usize = rt.rows.iter().map(|r| r.events).sum();
        prop_assert_eq!(total_events, view.events_observed);
    }

    /// Kaplan-Meier estimates stay in [0, 1] and never increase.
    #[test]
    fn kaplan_meier_bounds_and_monotonicity(seed in 0u64..500) {
        let model = paper_model(1.0);
        let enrollment = paper_enrollment();
        let mut rng = replicate_rng(seed, 913, 0);
        let data = simulate_cohort(&model, &enrollment, 40, (0.5, 0.5), seed, &mut rng).unwrap();
        let view = censor_at_event_count(&data, 30).unwrap();
        let km = kaplan_meier(&view, None).unwrap();
        let mut last = 1.0;
        for &(_, s) in &km.steps {
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(s <= last + 1e-12);
            last = s;
        }
    }

    /// Raising the event-count cut never turns an event into a censoring.
    #[test]
    fn censoring_monotonicity(seed in 0u64..500, k1 in 5usize..30, extra in 1usize..30) {
        let model = paper_model(2.0);
        let enrollment = paper_enrollment();
        let mut rng = replicate_rng(seed, 914, 0);
        let data = simulate_cohort(&model, &enrollment, 60, (0.5, 0.5), seed, &mut rng).unwrap();
        let k2 = (k1 + extra).min(60);
        let early = censor_at_event_count(&data, k1).unwrap();
        let late = censor_at_event_count(&data, k2).unwrap();
        // every event recorded at the early cut (identified by time and arm)
        // must still be an event at the later cut
        let collect = |v: &CensoredView| {
            let mut e: Vec<(u64, bool)> = v
                .observations
                .iter()
                .filter(|o| o.status == EventStatus::Event)
                .map(|o| (o.time.to_bits(), o.arm == Arm::Control))
                .collect();
            e.sort_unstable();
            e
        };
        let early_events = collect(&early);
        let late_events = collect(&late);
        let mut j = 0;
        for ev in &early_events {
            while j < late_events.len() && &late_events[j] < ev {
                j += 1;
            }
            prop_assert!(j < late_events.len() && &late_events[j] == ev);
            j += 1;
        }
        prop_assert!(late.events_observed >= early.events_observed);
    }

    /// Combination weights from planned stages are a unit vector and the
    /// statistic is monotone in each stage's evidence.
    #[test]
    fn combination_weight_invariants(n1 in 10.0f64..400.0, n2 in 10.0f64..400.0,
                                     p1 in 0.001f64..0.999, p2 in 0.001f64..0.999) {
        let c = CombinationInputs::from_planned_stages(p1, p2, n1, n2).unwrap();
        prop_assert!((c.xi1 * c.xi1 + c.xi2 * c.xi2 - 1.0).abs() < 1e-12);
        let r = inverse_normal_combine(&c, 0.025).unwrap();
        let stronger = CombinationInputs { p1: p1 * 0.5, ..c };
        let r2 = inverse_normal_combine(&stronger, 0.025).unwrap();
        prop_assert!(r2.z_star >= r.z_star);
    }
}
