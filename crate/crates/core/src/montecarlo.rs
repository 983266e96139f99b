//! Replicated-trial engine: group-sequential and adaptive trial flows,
//! operating-characteristic estimation over scenario grids, and type-I
//! recalibration of the nominal level.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{
    combine_stage_one_only, decide_new_total, inverse_normal_combine, AdaptiveConfig,
    CombinationInputs, InterimState,
};
use crate::boundaries::{obf_boundaries, LookSchedule};
use crate::design::{hasegawa_sample_size, DesignSpec};
use crate::error::{Error, Result};
use crate::estimators::{weighted_logrank, WeightSpec, WeightTiming};
use crate::rng::replicate_rng;
use crate::stats::mc_standard_error;
use crate::survival::{
    censor_at_calendar, event_count_cut, extend_cohort, simulate_cohort, DelayedEffectModel,
    EnrollmentModel,
};

// ---------------------------------------------------------------------------
// Outcomes
// ---------------------------------------------------------------------------

/// Analysis at which a trial ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Interim,
    Final,
}

/// What one simulated trial did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub rejected: bool,
    pub stage_stopped: Stage,
    /// Events at the decisive analysis.
    pub final_events: usize,
    pub resized: bool,
    /// New total events over originally planned events (1 when not resized).
    pub resize_ratio: f64,
    /// New patient total over originally planned patients.
    pub patient_ratio: f64,
    /// Replicate hit a degenerate analysis (zero events / one arm) and was
    /// counted as a non-rejection.
    pub pathological: bool,
}

// ---------------------------------------------------------------------------
// Group-sequential flow
// ---------------------------------------------------------------------------

/// Everything needed to run one group-sequential replicate.
#[derive(Debug, Clone)]
pub struct GsdTrialPlan {
    pub model: DelayedEffectModel,
    pub enrollment: EnrollmentModel,
    pub subjects: usize,
    pub allocation: (f64, f64),
    pub weights: WeightSpec,
    pub timing: WeightTiming,
    /// Cumulative event counts per look.
    pub look_events: Vec<usize>,
    /// One-sided z boundaries per look.
    pub boundaries: Vec<f64>,
}

/// Run one group-sequential trial: test at each look's event count against
/// its boundary, stopping at the first crossing.
pub fn run_gsd_trial<R: Rng + ?Sized>(plan: &GsdTrialPlan, rng: &mut R) -> Result<TrialOutcome> {
    if plan.look_events.len() != plan.boundaries.len() || plan.look_events.is_empty() {
        return Err(Error::Validation("look schedule and boundaries must align".into()));
    }
    let data = simulate_cohort(
        &plan.model,
        &plan.enrollment,
        plan.subjects,
        plan.allocation,
        0,
        rng,
    )?;
    let last = plan.look_events.len() - 1;
    for (k, (&events, &boundary)) in
        plan.look_events.iter().zip(&plan.boundaries).enumerate()
    {
        let cut = event_count_cut(&data, events)?;
        let view = censor_at_calendar(&data, cut);
        match weighted_logrank(&view, plan.weights, plan.timing) {
            Ok(r) => {
                if r.z > boundary {
                    return Ok(TrialOutcome {
                        rejected: true,
                        stage_stopped: if k < last { Stage::Interim } else { Stage::Final },
                        final_events: events,
                        resized: false,
                        resize_ratio: 1.0,
                        patient_ratio: 1.0,
                        pathological: false,
                    });
                }
            }
            Err(Error::NoEvents | Error::OneArm | Error::ZeroVariance) => {
                return Ok(TrialOutcome {
                    rejected: false,
                    stage_stopped: Stage::Final,
                    final_events: events,
                    resized: false,
                    resize_ratio: 1.0,
                    patient_ratio: 1.0,
                    pathological: true,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TrialOutcome {
        rejected: false,
        stage_stopped: Stage::Final,
        final_events: *plan.look_events.last().unwrap(),
        resized: false,
        resize_ratio: 1.0,
        patient_ratio: 1.0,
        pathological: false,
    })
}

// ---------------------------------------------------------------------------
// Adaptive flow
// ---------------------------------------------------------------------------

/// Everything needed to run one adaptive replicate.
#[derive(Debug, Clone)]
pub struct AdaptiveTrialPlan {
    pub model: DelayedEffectModel,
    pub enrollment: EnrollmentModel,
    pub subjects: usize,
    pub allocation: (f64, f64),
    pub weights: WeightSpec,
    pub timing: WeightTiming,
    /// Planned interim event count.
    pub interim_events: usize,
    /// Planned total event count.
    pub planned_events: usize,
    /// Nominal one-sided level of the combination test (after any
    /// recalibration).
    pub alpha: f64,
    pub beta: f64,
    pub config: AdaptiveConfig,
    /// Patients enrolled per expected event, from the sizing step; drives how
    /// many extra patients a resize enrolls.
    pub patients_per_event: f64,
}

/// Run one adaptive trial: re-estimate the event target at the interim,
/// enroll proportionally more patients if needed, then decide with the
/// enrollment-split combination test at final follow-up. No early efficacy
/// stop is possible.
pub fn run_adaptive_trial<R: Rng + ?Sized>(
    plan: &AdaptiveTrialPlan,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let mut data = simulate_cohort(
        &plan.model,
        &plan.enrollment,
        plan.subjects,
        plan.allocation,
        0,
        rng,
    )?;

    let interim_cut = event_count_cut(&data, plan.interim_events)?;
    let interim_view = censor_at_calendar(&data, interim_cut);
    let z1 = match weighted_logrank(&interim_view, plan.weights, plan.timing) {
        Ok(r) => r.z,
        Err(Error::NoEvents | Error::OneArm | Error::ZeroVariance) => {
            return Ok(pathological_outcome(plan.planned_events));
        }
        Err(e) => return Err(e),
    };

    let state =
        InterimState::new(z1, plan.interim_events as f64, plan.planned_events as f64)?;
    let decision = decide_new_total(&state, &plan.config, plan.alpha, plan.beta)?;
    let new_total = decision
        .new_total_events
        .ceil()
        .min(plan.config.max_events.floor())
        .max(plan.planned_events as f64) as usize;
    let resized = new_total > plan.planned_events;

    // keep the patients-per-event relationship of the original design; the
    // extra cohort enrolls under the same law with the clock restarted at the
    // interim calendar time
    let mut total_patients = plan.subjects;
    if resized {
        let target_patients =
            (new_total as f64 * plan.patients_per_event).ceil() as usize;
        let mut extra = target_patients.saturating_sub(plan.subjects);
        if extra % 2 == 1 {
            extra += 1;
        }
        if extra > 0 {
            extend_cohort(
                &mut data,
                &plan.model,
                &plan.enrollment,
                extra,
                plan.allocation,
                interim_cut,
                rng,
            )?;
            total_patients += extra;
        }
    }

    let final_cut = event_count_cut(&data, new_total)?;
    let split = match crate::adaptive::jenkins_split(
        &data,
        interim_cut,
        final_cut,
        plan.weights,
        plan.timing,
    ) {
        Ok(s) => s,
        Err(Error::NoEvents | Error::OneArm | Error::ZeroVariance) => {
            return Ok(pathological_outcome(new_total));
        }
        Err(e) => return Err(e),
    };

    let stage2_planned = (plan.planned_events - plan.interim_events) as f64;
    let combo = match split.p2 {
        Some(p2) => {
            let inputs = CombinationInputs::from_planned_stages(
                split.p1,
                p2,
                plan.interim_events as f64,
                stage2_planned,
            )?;
            inverse_normal_combine(&inputs, plan.alpha)?
        }
        None => combine_stage_one_only(split.p1, plan.alpha),
    };

    Ok(TrialOutcome {
        rejected: combo.reject,
        stage_stopped: Stage::Final,
        final_events: new_total,
        resized,
        resize_ratio: new_total as f64 / plan.planned_events as f64,
        patient_ratio: total_patients as f64 / plan.subjects as f64,
        pathological: false,
    })
}

fn pathological_outcome(events: usize) -> TrialOutcome {
    TrialOutcome {
        rejected: false,
        stage_stopped: Stage::Final,
        final_events: events,
        resized: false,
        resize_ratio: 1.0,
        patient_ratio: 1.0,
        pathological: true,
    }
}

// ---------------------------------------------------------------------------
// Scenario grids
// ---------------------------------------------------------------------------

/// Hypothesis under which trials are simulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truth {
    /// No treatment effect (`psi = 1`); rejection rate estimates type-I error.
    Null,
    /// The design alternative with the cell's delay.
    Alternative,
}

/// How the per-cell design is sized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SizingPolicy {
    /// One design sized assuming no delay, reused for every cell.
    FixedAtZeroDelay,
    /// Each cell sized at its own delay.
    ResizedPerDelay,
}

/// Cartesian scenario grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGrid {
    pub delays: Vec<f64>,
    pub weights: Vec<WeightSpec>,
    pub truth: Truth,
    pub sizing: SizingPolicy,
}

impl ScenarioGrid {
    pub fn validate(&self) -> Result<()> {
        if self.delays.is_empty() || self.weights.is_empty() {
            return Err(Error::Validation("scenario grid axes must be nonempty".into()));
        }
        if self.delays.iter().any(|d| *d < 0.0) {
            return Err(Error::Validation("delays must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Design constants shared by all cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBase {
    /// Control-arm hazard.
    pub lambda: f64,
    /// Post-delay hazard multiplier of the design alternative.
    pub psi: f64,
    pub enrollment: EnrollmentModel,
    /// Nominal one-sided level (use the recalibrated value where relevant).
    pub alpha: f64,
    pub beta: f64,
    /// Information fractions of the look schedule (last = 1).
    pub fractions: Vec<f64>,
    /// Markov-recursion interval count for sizing.
    pub intervals: usize,
    pub timing: WeightTiming,
}

/// Which trial flow a grid runs.
#[derive(Debug, Clone, PartialEq)]
pub enum Engine {
    GroupSequential,
    Adaptive(AdaptiveConfig),
}

/// Operating characteristics of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub delay: f64,
    pub rho: f64,
    pub gamma: f64,
    pub truth: Truth,
    /// Empirical power (alternative cells) or type-I error (null cells).
    pub rejection_rate: f64,
    pub mc_se: f64,
    /// Fraction of replicates stopping early (group-sequential only).
    pub interim_stop_rate: f64,
    /// Fraction of replicates that re-estimated upward.
    pub resize_frequency: f64,
    /// Mean event ratio among resized replicates (1 when none resized).
    pub mean_resize_ratio: f64,
    /// Mean patient ratio among resized replicates.
    pub mean_patient_ratio: f64,
    /// Mean events at the decisive analysis across all replicates.
    pub mean_final_events: f64,
    pub pathological: usize,
    /// Design sizes used for the cell.
    pub planned_patients: usize,
    pub planned_events: usize,
    pub replicates: usize,
}

fn design_for(
    base: &ScenarioBase,
    weights: WeightSpec,
    sizing_delay: f64,
) -> Result<DesignSpec> {
    DesignSpec::new(
        DelayedEffectModel::new(base.lambda, base.psi, sizing_delay)?,
        base.enrollment.accrual,
        base.enrollment.min_followup,
        (0.5, 0.5),
        base.alpha,
        base.beta,
        weights,
        base.intervals,
    )
}

fn aggregate(
    outcomes: &[TrialOutcome],
    delay: f64,
    weights: WeightSpec,
    truth: Truth,
    patients: usize,
    events: usize,
) -> CellResult {
    let m = outcomes.len();
    let mut rejections = 0usize;
    let mut interim_stops = 0usize;
    let mut resized = 0usize;
    let mut ratio_sum = 0.0;
    let mut patient_ratio_sum = 0.0;
    let mut events_sum = 0.0;
    let mut pathological = 0usize;
    for o in outcomes {
        if o.rejected {
            rejections += 1;
        }
        if o.stage_stopped == Stage::Interim {
            interim_stops += 1;
        }
        if o.resized {
            resized += 1;
            ratio_sum += o.resize_ratio;
            patient_ratio_sum += o.patient_ratio;
        }
        events_sum += o.final_events as f64;
        if o.pathological {
            pathological += 1;
        }
    }
    let rate = rejections as f64 / m as f64;
    CellResult {
        delay,
        rho: weights.rho,
        gamma: weights.gamma,
        truth,
        rejection_rate: rate,
        mc_se: mc_standard_error(rate, m),
        interim_stop_rate: interim_stops as f64 / m as f64,
        resize_frequency: resized as f64 / m as f64,
        mean_resize_ratio: if resized > 0 { ratio_sum / resized as f64 } else { 1.0 },
        mean_patient_ratio: if resized > 0 { patient_ratio_sum / resized as f64 } else { 1.0 },
        mean_final_events: events_sum / m as f64,
        pathological,
        planned_patients: patients,
        planned_events: events,
        replicates: m,
    }
}

/// Estimate operating characteristics over the scenario grid.
///
/// Deterministic in `seed` regardless of the rayon worker count: replicate
/// `r` of cell `c` always uses the stream keyed by `(seed, c, r)` and results
/// are reduced in replicate order.
pub fn estimate_oc(
    grid: &ScenarioGrid,
    base: &ScenarioBase,
    engine: &Engine,
    replicates: usize,
    seed: u64,
) -> Result<Vec<CellResult>> {
    grid.validate()?;
    if replicates == 0 {
        return Err(Error::Validation("replicates must be positive".into()));
    }
    let schedule: LookSchedule = obf_boundaries(&base.fractions, base.alpha, None)?;

    let mut results = Vec::new();
    let mut cell_index = 0usize;
    for &weights in &grid.weights {
        for &delay in &grid.delays {
            let sizing_delay = match grid.sizing {
                SizingPolicy::FixedAtZeroDelay => 0.0,
                SizingPolicy::ResizedPerDelay => delay,
            };
            let design = design_for(base, weights, sizing_delay)?;
            let ss = hasegawa_sample_size(&design)?;
            let sim_model = match grid.truth {
                Truth::Null => DelayedEffectModel::new(base.lambda, 1.0, delay)?,
                Truth::Alternative => DelayedEffectModel::new(base.lambda, base.psi, delay)?,
            };

            let outcomes: Vec<TrialOutcome> = match engine {
                Engine::GroupSequential => {
                    let plan = GsdTrialPlan {
                        model: sim_model,
                        enrollment: base.enrollment,
                        subjects: ss.patients,
                        allocation: (0.5, 0.5),
                        weights,
                        timing: base.timing,
                        look_events: schedule.look_events(ss.events),
                        boundaries: schedule.boundaries.clone(),
                    };
                    (0..replicates)
                        .into_par_iter()
                        .map(|r| {
                            let mut rng = replicate_rng(seed, cell_index, r);
                            run_gsd_trial(&plan, &mut rng)
                        })
                        .collect::<Result<Vec<_>>>()?
                }
                Engine::Adaptive(config) => {
                    config.validate(ss.events as f64, base.beta)?;
                    let look_events = schedule.look_events(ss.events);
                    if look_events.len() != 2 {
                        return Err(Error::Validation(
                            "adaptive flow expects exactly one interim look".into(),
                        ));
                    }
                    let plan = AdaptiveTrialPlan {
                        model: sim_model,
                        enrollment: base.enrollment,
                        subjects: ss.patients,
                        allocation: (0.5, 0.5),
                        weights,
                        timing: base.timing,
                        interim_events: look_events[0],
                        planned_events: ss.events,
                        alpha: base.alpha,
                        beta: base.beta,
                        config: *config,
                        patients_per_event: ss.patients as f64 / ss.events as f64,
                    };
                    (0..replicates)
                        .into_par_iter()
                        .map(|r| {
                            let mut rng = replicate_rng(seed, cell_index, r);
                            run_adaptive_trial(&plan, &mut rng)
                        })
                        .collect::<Result<Vec<_>>>()?
                }
            };
            results.push(aggregate(
                &outcomes,
                delay,
                weights,
                grid.truth,
                ss.patients,
                ss.events,
            ));
            cell_index += 1;
        }
    }
    Ok(results)
}

// ---------------------------------------------------------------------------
// Type-I recalibration
// ---------------------------------------------------------------------------

/// Result of the nominal-level recalibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recalibration {
    /// Nominal level to use so the empirical type-I error meets the target.
    pub nominal_alpha: f64,
    /// Empirical type-I error achieved at `nominal_alpha`.
    pub achieved: f64,
    pub mc_se: f64,
    pub evaluations: u32,
    /// Present when no recalibration was needed or possible.
    pub note: Option<String>,
}

/// Monotone bisection of the nominal level until the empirical type-I error
/// under the null is within `tolerance` of `target`.
///
/// `evaluate` must return the empirical type-I error at a given nominal
/// level, using common random numbers across calls so the map is monotone.
pub fn recalibrate_alpha(
    mut evaluate: impl FnMut(f64) -> Result<f64>,
    target: f64,
    tolerance: f64,
    max_evaluations: u32,
) -> Result<Recalibration> {
    if !(target > 0.0 && target < 0.5) {
        return Err(Error::Validation(format!("target must be in (0, 0.5), got {target}")));
    }
    if !(tolerance > 0.0) {
        return Err(Error::Validation("tolerance must be positive".into()));
    }
    let mut evaluations = 0u32;
    let mut eval = |a: f64, evaluations: &mut u32| -> Result<f64> {
        *evaluations += 1;
        evaluate(a)
    };

    let at_target = eval(target, &mut evaluations)?;
    if at_target <= target {
        return Ok(Recalibration {
            nominal_alpha: target,
            achieved: at_target,
            mc_se: 0.0,
            evaluations,
            note: Some("type-I error at or below target already; nominal level unchanged".into()),
        });
    }
    if (at_target - target).abs() <= tolerance {
        return Ok(Recalibration {
            nominal_alpha: target,
            achieved: at_target,
            mc_se: 0.0,
            evaluations,
            note: None,
        });
    }

    // bracket downward
    let mut hi = target;
    let mut lo = target / 2.0;
    let mut lo_rate = eval(lo, &mut evaluations)?;
    while lo_rate > target && evaluations < max_evaluations {
        hi = lo;
        lo /= 2.0;
        lo_rate = eval(lo, &mut evaluations)?;
    }

    let mut best = (lo, lo_rate);
    while evaluations < max_evaluations {
        let mid = 0.5 * (lo + hi);
        let rate = eval(mid, &mut evaluations)?;
        if (rate - target).abs() < (best.1 - target).abs() {
            best = (mid, rate);
        }
        if (rate - target).abs() <= tolerance || (hi - lo) < 1e-6 {
            return Ok(Recalibration {
                nominal_alpha: mid,
                achieved: rate,
                mc_se: 0.0,
                evaluations,
                note: None,
            });
        }
        if rate > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Recalibration {
        nominal_alpha: best.0,
        achieved: best.1,
        mc_se: 0.0,
        evaluations,
        note: Some("evaluation budget exhausted; returning closest level".into()),
    })
}

/// Empirical type-I error of the group-sequential design at a nominal level.
///
/// The design is re-sized at `nominal_alpha` under the alternative, then
/// simulated under the null.
pub fn gsd_type_one_error(
    base: &ScenarioBase,
    weights: WeightSpec,
    sizing_delay: f64,
    nominal_alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<f64> {
    let rebased = ScenarioBase { alpha: nominal_alpha, ..base.clone() };
    let grid = ScenarioGrid {
        delays: vec![sizing_delay],
        weights: vec![weights],
        truth: Truth::Null,
        sizing: SizingPolicy::ResizedPerDelay,
    };
    let cells = estimate_oc(&grid, &rebased, &Engine::GroupSequential, replicates, seed)?;
    Ok(cells[0].rejection_rate)
}

/// Empirical type-I error of an adaptive design at a nominal level.
pub fn adaptive_type_one_error(
    base: &ScenarioBase,
    config: &AdaptiveConfig,
    weights: WeightSpec,
    sizing_delay: f64,
    nominal_alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<f64> {
    let rebased = ScenarioBase { alpha: nominal_alpha, ..base.clone() };
    let grid = ScenarioGrid {
        delays: vec![sizing_delay],
        weights: vec![weights],
        truth: Truth::Null,
        sizing: SizingPolicy::ResizedPerDelay,
    };
    let cells = estimate_oc(&grid, &rebased, &Engine::Adaptive(*config), replicates, seed)?;
    Ok(cells[0].rejection_rate)
}
