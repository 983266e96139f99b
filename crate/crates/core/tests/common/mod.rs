//! Shared fixtures and independent oracles for the integration suites.
#![allow(dead_code)] // each test target uses a different subset
//!
//! Oracles here deliberately avoid the crate's own computation paths: the
//! plain log-rank statistic is coded from the hypergeometric moments, the
//! density integral uses adaptive Simpson, and conditional power is checked
//! by simulating the score increment directly.

use dte_core::*;

pub const LN2: f64 = std::f64::consts::LN_2;
/// Master seed of the acceptance and property suites.
pub const MASTER_SEED: u64 = 7;

pub fn paper_model(epsilon: f64) -> DelayedEffectModel {
    DelayedEffectModel::new(LN2 / 6.0, 2.0 / 3.0, epsilon).unwrap()
}

pub fn paper_enrollment() -> EnrollmentModel {
    EnrollmentModel::new(EnrollmentMode::PerSubjectPoisson, 10.0, 17.5, 7.5).unwrap()
}

/// Scenario base with the published-table (monthly) sizing grid.
pub fn paper_base_monthly() -> ScenarioBase {
    ScenarioBase {
        lambda: LN2 / 6.0,
        psi: 2.0 / 3.0,
        enrollment: paper_enrollment(),
        alpha: 0.025,
        beta: 0.10,
        fractions: vec![0.75, 1.0],
        intervals: 25,
        timing: WeightTiming::LeftLimit,
    }
}

/// Scenario base with the converged (fine) sizing grid.
pub fn paper_base_fine() -> ScenarioBase {
    ScenarioBase { intervals: 2500, ..paper_base_monthly() }
}

pub fn w00() -> WeightSpec {
    WeightSpec::logrank()
}

pub fn w01() -> WeightSpec {
    WeightSpec::new(0.0, 1.0).unwrap()
}

/// Promising-zone configuration used throughout the adaptive scenarios;
/// the event cap is the frozen free parameter (16x the planned events).
pub fn pz_config(cp_min: f64, planned_events: f64) -> AdaptiveConfig {
    AdaptiveConfig {
        cp_min,
        max_events: 16.0 * planned_events,
        eta: AdaptiveConfig::default_eta(planned_events),
        rule: ReestimationRule::PromisingZone,
        fixed_increase_policy: FixedIncreasePolicy::AtZoneMinimum,
    }
}

/// Penalty frozen at the value best matching the 0.001-bound promising
/// zone's power over delays 4..6 (fitted once at the master seed; the curves
/// cross, so the per-delay match is within one point at delays 4-5 and about
/// 1.1 points at delay 6).
pub const JT_ETA_FROZEN: f64 = 4.0e-5;

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

/// Plain (unweighted) log-rank z statistic coded independently of the crate.
pub fn plain_logrank_oracle(view: &CensoredView) -> f64 {
    let mut obs: Vec<_> = view.observations.clone();
    obs.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut event_times: Vec<f64> = obs
        .iter()
        .filter(|o| o.status == EventStatus::Event)
        .map(|o| o.time)
        .collect();
    event_times.dedup();
    let mut num = 0.0;
    let mut var = 0.0;
    for &t in &event_times {
        let ni = obs.iter().filter(|o| o.time >= t).count() as f64;
        let n1 = obs.iter().filter(|o| o.time >= t && o.arm == Arm::Control).count() as f64;
        let d = obs.iter().filter(|o| o.time == t && o.status == EventStatus::Event).count() as f64;
        let d1 = obs
            .iter()
            .filter(|o| o.time == t && o.status == EventStatus::Event && o.arm == Arm::Control)
            .count() as f64;
        num += d1 - n1 * d / ni;
        if ni > 1.0 {
            var += n1 * (ni - n1) * d * (ni - d) / (ni * ni * (ni - 1.0));
        }
    }
    num / var.sqrt()
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// Kolmogorov-Smirnov distance of a sample from Uniform(0, 1).
pub fn ks_distance_uniform(sample: &mut [f64]) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sample.iter().enumerate() {
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((x - lo).abs()).max((hi - x).abs());
    }
    d
}

// ---------------------------------------------------------------------------
// Criterion-7 property checks (shared between the suites)
// ---------------------------------------------------------------------------

pub type PropertyOutcome = std::result::Result<String, String>;

/// Conditional power at the closed-form second-stage target equals the
/// design power to 1e-10 whenever the budget is unconstrained.
pub fn check_cp_gao_self_consistency() -> PropertyOutcome {
    let mut worst: f64 = 0.0;
    for &(n1, n2) in &[(194.0, 258.0), (277.0, 369.0), (100.0, 400.0)] {
        for i in 1..=40 {
            let z1 = i as f64 * 0.1;
            let state = InterimState::new(z1, n1, n2).unwrap();
            // the exact target is only attainable when the interim is not
            // already powered past it
            if conditional_power(&state, n1, 0.025).unwrap() >= 0.90 {
                continue;
            }
            match gao_second_stage(&state, 0.025, 0.10) {
                SecondStage::Events(total) => {
                    let cp = conditional_power(&state, total, 0.025).unwrap();
                    worst = worst.max((cp - 0.90).abs());
                }
                SecondStage::Infeasible => return Err(format!("infeasible at z1={z1}")),
            }
        }
    }
    if worst < 1e-10 {
        Ok(format!("max |CP(gao) - 0.9| = {worst:.2e}"))
    } else {
        Err(format!("max |CP(gao) - 0.9| = {worst:.2e} exceeds 1e-10"))
    }
}

/// Zero Fleming-Harrington exponents reproduce the plain log-rank oracle to
/// 1e-12 on simulated censored datasets.
pub fn check_zero_weights_match_plain_logrank() -> PropertyOutcome {
    let model = paper_model(2.0);
    let enrollment = paper_enrollment();
    let mut worst: f64 = 0.0;
    for rep in 0..40 {
        let mut rng = replicate_rng(MASTER_SEED, 900, rep);
        let data = simulate_cohort(&model, &enrollment, 60, (0.5, 0.5), 0, &mut rng).unwrap();
        let view = censor_at_event_count(&data, 45).unwrap();
        let ours = weighted_logrank(&view, WeightSpec::logrank(), WeightTiming::LeftLimit)
            .unwrap()
            .z;
        let oracle = plain_logrank_oracle(&view);
        worst = worst.max((ours - oracle).abs());
    }
    if worst < 1e-12 {
        Ok(format!("max |z - oracle| = {worst:.2e}"))
    } else {
        Err(format!("max |z - oracle| = {worst:.2e} exceeds 1e-12"))
    }
}

/// Swapping arm labels negates the statistic exactly.
pub fn check_arm_swap_antisymmetry() -> PropertyOutcome {
    let model = paper_model(1.0);
    let enrollment = paper_enrollment();
    let mut worst: f64 = 0.0;
    for rep in 0..25 {
        let mut rng = replicate_rng(MASTER_SEED, 901, rep);
        let data = simulate_cohort(&model, &enrollment, 80, (0.5, 0.5), 0, &mut rng).unwrap();
        let view = censor_at_event_count(&data, 60).unwrap();
        let swapped = CensoredView {
            observations: view
                .observations
                .iter()
                .map(|o| Observation {
                    time: o.time,
                    status: o.status,
                    arm: match o.arm {
                        Arm::Control => Arm::Experimental,
                        Arm::Experimental => Arm::Control,
                    },
                })
                .collect(),
            cut_calendar_time: view.cut_calendar_time,
            events_observed: view.events_observed,
        };
        for w in [WeightSpec::logrank(), WeightSpec::new(0.0, 1.0).unwrap()] {
            let a = weighted_logrank(&view, w, WeightTiming::LeftLimit).unwrap().z;
            let b = weighted_logrank(&swapped, w, WeightTiming::LeftLimit).unwrap().z;
            worst = worst.max((a + b).abs());
        }
    }
    if worst < 1e-12 {
        Ok(format!("max |z + z_swapped| = {worst:.2e}"))
    } else {
        Err(format!("max |z + z_swapped| = {worst:.2e} exceeds 1e-12"))
    }
}

pub use dte_core::survival::Observation;

/// Survival continuity at the delay and unit mass of the experimental-arm
/// density, integrated numerically.
pub fn check_continuity_and_normalization() -> PropertyOutcome {
    let mut worst_jump: f64 = 0.0;
    let mut worst_mass: f64 = 0.0;
    for &(lambda, psi, eps) in &[
        (LN2 / 6.0, 2.0 / 3.0, 2.0),
        (LN2 / 6.0, 2.0 / 3.0, 5.0),
        (0.3, 0.5, 1.0),
        (0.05, 1.5, 4.0),
        (0.2, 1.0, 3.0),
    ] {
        let m = DelayedEffectModel::new(lambda, psi, eps).unwrap();
        let pre = (-m.lambda * m.epsilon).exp();
        let post = m.c * (-m.psi * m.lambda * m.epsilon).exp();
        worst_jump = worst_jump.max((pre - post).abs());
        let f = |t: f64| m.density(Arm::Experimental, t).unwrap();
        // split at the hazard step, then integrate out to 1e4 mean lifetimes
        let mass = adaptive_simpson(&f, 0.0, eps, 1e-10)
            + adaptive_simpson(&f, eps, 1e4 / lambda, 1e-10);
        worst_mass = worst_mass.max((mass - 1.0).abs());
    }
    if worst_jump < 1e-12 && worst_mass < 1e-8 {
        Ok(format!("max jump {worst_jump:.2e}, max |mass - 1| {worst_mass:.2e}"))
    } else {
        Err(format!(
            "jump {worst_jump:.2e} (tol 1e-12), |mass - 1| {worst_mass:.2e} (tol 1e-8)"
        ))
    }
}

/// Same seed, different worker counts: bit-identical grid results.
pub fn check_seed_and_worker_determinism() -> PropertyOutcome {
    let base = paper_base_monthly();
    let grid = ScenarioGrid {
        delays: vec![0.0, 2.0],
        weights: vec![w00()],
        truth: Truth::Alternative,
        sizing: SizingPolicy::FixedAtZeroDelay,
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            estimate_oc(&grid, &base, &Engine::GroupSequential, 400, MASTER_SEED).unwrap()
        })
    };
    let one = run(1);
    let two = run(2);
    let four = run(4);
    if one == two && two == four {
        Ok("identical cells across 1/2/4 workers".into())
    } else {
        Err("grid results differ across worker counts".into())
    }
}

/// The fixed-increase rule returns one constant over the promising zone.
pub fn check_fixed_increase_non_disclosure() -> PropertyOutcome {
    let cfg = AdaptiveConfig {
        cp_min: 0.1,
        max_events: 16.0 * 369.0,
        eta: 0.0,
        rule: ReestimationRule::FixedIncrease,
        fixed_increase_policy: FixedIncreasePolicy::AtZoneMinimum,
    };
    let mut targets = Vec::new();
    for i in 0..200 {
        let z1 = 0.05 + i as f64 * 0.02;
        let state = InterimState::new(z1, 277.0, 369.0).unwrap();
        let cp = conditional_power(&state, 369.0, 0.025).unwrap();
        if cp >= cfg.cp_min && cp < 0.90 {
            targets.push(fixed_increase_rule(&state, &cfg, 0.025, 0.10).unwrap());
        }
    }
    if targets.len() < 10 {
        return Err("promising zone scan too sparse".into());
    }
    let first = targets[0];
    if targets.iter().all(|t| (t - first).abs() < 1e-9) {
        Ok(format!("constant target {first:.2} events over {} promising states", targets.len()))
    } else {
        Err("fixed-increase target varies across the promising zone".into())
    }
}
