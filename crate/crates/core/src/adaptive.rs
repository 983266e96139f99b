//! Interim-analysis machinery: conditional power, second-stage event
//! re-estimation rules, the inverse-normal combination test and the
//! enrollment-cohort split that permits event-count re-estimation without
//! early efficacy stopping.
//!
//! All counts in this module are event counts (statistical information),
//! not patient counts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{weighted_logrank, WeightSpec, WeightTiming};
use crate::stats::{normal_cdf, normal_quantile};
use crate::survival::{censor_subjects_at, TrialDataset};

// ---------------------------------------------------------------------------
// Interim state and configuration
// ---------------------------------------------------------------------------

/// What is known at the interim analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterimState {
    /// Interim test statistic.
    pub z1: f64,
    /// Events observed at the interim.
    pub interim_events: f64,
    /// Originally planned total events.
    pub planned_events: f64,
}

impl InterimState {
    pub fn new(z1: f64, interim_events: f64, planned_events: f64) -> Result<Self> {
        if !z1.is_finite() {
            return Err(Error::Validation("interim statistic must be finite".into()));
        }
        if !(interim_events > 0.0 && planned_events > interim_events) {
            return Err(Error::Validation(format!(
                "need 0 < interim events < planned events, got {interim_events} vs {planned_events}"
            )));
        }
        Ok(Self { z1, interim_events, planned_events })
    }

    /// Interim hazard-ratio estimate from the 1:1 Schoenfeld inversion
    /// `ln(hr) = -2 z1 / sqrt(n1)`. Reporting convenience only.
    pub fn hazard_ratio_estimate(&self) -> f64 {
        (-2.0 * self.z1 / self.interim_events.sqrt()).exp()
    }
}

/// Second-stage re-estimation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReestimationRule {
    /// Increase to the conditional-power target inside the promising zone.
    PromisingZone,
    /// Promising zone with the lower bound clamped to 0.5, the guard under
    /// which a naive increase cannot inflate the type-I error.
    ChwGuarded,
    /// Maximize conditional power minus a per-event penalty.
    JennisonTurnbull,
    /// A pre-computed constant increase inside the promising zone, so the
    /// announced second-stage size discloses nothing about the interim effect.
    FixedIncrease,
}

/// Which edge of the promising zone fixes the constant increase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedIncreasePolicy {
    /// Size at the zone's minimum conditional power (maximum increase).
    #[default]
    AtZoneMinimum,
    /// Size at the zone's maximum conditional power (minimum increase).
    AtZoneMaximum,
}

/// Configuration of the re-estimation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    /// Lower bound of the promising zone on the conditional-power scale.
    pub cp_min: f64,
    /// Largest total event count the sponsor allows.
    pub max_events: f64,
    /// Per-event penalty of the optimizing rule.
    pub eta: f64,
    pub rule: ReestimationRule,
    pub fixed_increase_policy: FixedIncreasePolicy,
}

impl AdaptiveConfig {
    /// Check the configuration against a design's planned events and power.
    pub fn validate(&self, planned_events: f64, beta: f64) -> Result<()> {
        if !(self.cp_min > 0.0 && self.cp_min < 1.0 - beta) {
            return Err(Error::Validation(format!(
                "cp_min must lie in (0, 1-beta), got {} with beta={beta}",
                self.cp_min
            )));
        }
        if self.max_events < planned_events {
            return Err(Error::Validation(format!(
                "max_events {} below planned events {planned_events}",
                self.max_events
            )));
        }
        if self.eta < 0.0 {
            return Err(Error::Validation(format!("eta must be >= 0, got {}", self.eta)));
        }
        Ok(())
    }

    /// Scale-free default penalty: one point of conditional power per percent
    /// of the originally planned information.
    pub fn default_eta(planned_events: f64) -> f64 {
        0.25 / planned_events
    }
}

// ---------------------------------------------------------------------------
// Conditional power and its inversion
// ---------------------------------------------------------------------------

/// Which algebraic form of conditional power to evaluate.
///
/// `Consistent` treats the candidate total as information on the Brownian
/// path and is the exact inverse of [`gao_second_stage`]; it is the form used
/// everywhere in this crate. `AsPrinted` reproduces a published variant with
/// the candidate total in both denominators, kept only for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CpForm {
    #[default]
    Consistent,
    AsPrinted,
}

fn z_alpha_sqrt_term(state: &InterimState, alpha: f64) -> f64 {
    let z_alpha = normal_quantile(1.0 - alpha);
    (z_alpha * state.planned_events.sqrt() - state.z1 * state.interim_events.sqrt())
        / (state.planned_events - state.interim_events).sqrt()
}

/// Conditional power of the final test at `candidate_total` events, given the
/// interim statistic, evaluated under the interim drift estimate.
pub fn conditional_power(state: &InterimState, candidate_total: f64, alpha: f64) -> Result<f64> {
    conditional_power_with_form(state, candidate_total, alpha, CpForm::Consistent)
}

/// Conditional power with an explicit choice of algebraic form.
pub fn conditional_power_with_form(
    state: &InterimState,
    candidate_total: f64,
    alpha: f64,
    form: CpForm,
) -> Result<f64> {
    if candidate_total < state.interim_events {
        return Err(Error::Validation(format!(
            "candidate total {candidate_total} below interim events {}",
            state.interim_events
        )));
    }
    let n1 = state.interim_events;
    let arg = match form {
        CpForm::Consistent => {
            z_alpha_sqrt_term(state, alpha) - state.z1 * (candidate_total - n1).sqrt() / n1.sqrt()
        }
        CpForm::AsPrinted => {
            let z_alpha = normal_quantile(1.0 - alpha);
            (z_alpha * state.planned_events.sqrt() - state.z1 * n1.sqrt())
                / candidate_total.sqrt()
                - state.z1 * candidate_total.sqrt() / n1.sqrt()
        }
    };
    Ok(1.0 - normal_cdf(arg))
}

/// Second-stage requirement: the total event count at which conditional power
/// reaches `1 - beta`, or `Infeasible` when the interim points the wrong way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SecondStage {
    /// Total events bringing conditional power to the target.
    Events(f64),
    /// No finite total suffices (`z1 <= 0`).
    Infeasible,
}

/// Closed-form inversion of [`conditional_power`] at target `1 - beta`.
///
/// When the interim is already powered beyond the target (conditional power
/// at the interim information exceeds `1 - beta`), no admissible total
/// reaches the target exactly and the interim event count itself is
/// returned; conditional power is at least the target everywhere then.
pub fn gao_second_stage(state: &InterimState, alpha: f64, beta: f64) -> SecondStage {
    if state.z1 <= 0.0 {
        return SecondStage::Infeasible;
    }
    let z_beta = normal_quantile(1.0 - beta);
    let a = z_alpha_sqrt_term(state, alpha);
    let n1 = state.interim_events;
    let shortfall = (a + z_beta).max(0.0);
    SecondStage::Events(n1 + (n1 / (state.z1 * state.z1)) * shortfall * shortfall)
}

// ---------------------------------------------------------------------------
// Zone classification and re-estimation rules
// ---------------------------------------------------------------------------

/// Promising-zone classification of an interim result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Zone {
    Favorable,
    Promising,
    Unfavorable,
}

/// Outcome of the re-estimation decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneDecision {
    pub zone: Zone,
    /// Conditional power at the originally planned total.
    pub conditional_power: f64,
    /// New total event target (equals the plan outside the promising zone).
    pub new_total_events: f64,
}

/// Classify the interim into favorable/promising/unfavorable and return the
/// promising-zone event target `min(gao, max_events)`.
pub fn classify_zone(
    state: &InterimState,
    config: &AdaptiveConfig,
    alpha: f64,
    beta: f64,
) -> Result<ZoneDecision> {
    let cp_min = match config.rule {
        ReestimationRule::ChwGuarded => config.cp_min.max(0.5),
        _ => config.cp_min,
    };
    let cp = conditional_power(state, state.planned_events, alpha)?;
    let (zone, new_total) = if cp >= 1.0 - beta {
        (Zone::Favorable, state.planned_events)
    } else if cp >= cp_min {
        let target = match gao_second_stage(state, alpha, beta) {
            SecondStage::Events(e) => e.min(config.max_events),
            // cp >= cp_min > 0 implies z1 > 0, but guard anyway
            SecondStage::Infeasible => config.max_events,
        };
        (Zone::Promising, target.max(state.planned_events))
    } else {
        (Zone::Unfavorable, state.planned_events)
    };
    Ok(ZoneDecision { zone, conditional_power: cp, new_total_events: new_total })
}

/// Maximizer of `CP(z1, n) - eta (n - planned)` over `[planned, max_events]`,
/// located to within half an event (coarse scan plus local refinement).
pub fn jt_optimize(state: &InterimState, config: &AdaptiveConfig, alpha: f64, beta: f64) -> Result<f64> {
    let _ = beta;
    let lo = state.planned_events;
    let hi = config.max_events;
    if hi <= lo {
        return Ok(lo);
    }
    let objective = |n: f64| -> f64 {
        conditional_power(state, n, alpha).unwrap_or(0.0) - config.eta * (n - lo)
    };

    let step = 0.5;
    let mut best_n = lo;
    let mut best_f = objective(lo);
    let mut n = lo + step;
    while n < hi + step {
        let x = n.min(hi);
        let f = objective(x);
        // strict improvement keeps the smallest maximizer on plateaus
        if f > best_f + 1e-15 {
            best_f = f;
            best_n = x;
        }
        n += step;
    }

    // golden-section refinement around the best coarse point
    let mut a = (best_n - step).max(lo);
    let mut b = (best_n + step).min(hi);
    const PHI: f64 = 0.6180339887498949;
    let mut x1 = b - PHI * (b - a);
    let mut x2 = a + PHI * (b - a);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    for _ in 0..40 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - PHI * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + PHI * (b - a);
            f2 = objective(x2);
        }
    }
    let refined = 0.5 * (a + b);
    Ok(if objective(refined) > best_f { refined } else { best_n })
}

/// Interim statistic at which conditional power (at the planned total) equals
/// `target`; conditional power is strictly increasing in `z1`.
fn z1_at_conditional_power(
    interim_events: f64,
    planned_events: f64,
    alpha: f64,
    target: f64,
) -> f64 {
    let (mut lo, mut hi) = (-10.0f64, 10.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let state = InterimState { z1: mid, interim_events, planned_events };
        let cp = conditional_power(&state, planned_events, alpha).unwrap();
        if cp < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Pre-computable constant event target of the fixed-increase rule: the
/// second-stage requirement evaluated at the chosen promising-zone edge,
/// capped at `max_events`. Identical for every promising interim outcome.
pub fn fixed_increase_target(
    config: &AdaptiveConfig,
    interim_events: f64,
    planned_events: f64,
    alpha: f64,
    beta: f64,
) -> f64 {
    let edge_cp = match config.fixed_increase_policy {
        FixedIncreasePolicy::AtZoneMinimum => config.cp_min,
        FixedIncreasePolicy::AtZoneMaximum => 1.0 - beta,
    };
    let z_edge = z1_at_conditional_power(interim_events, planned_events, alpha, edge_cp);
    let state = InterimState { z1: z_edge, interim_events, planned_events };
    match gao_second_stage(&state, alpha, beta) {
        SecondStage::Events(e) => e.min(config.max_events).max(planned_events),
        SecondStage::Infeasible => config.max_events,
    }
}

/// Fixed-increase rule: the pre-computed constant inside the promising zone,
/// the planned total outside it.
pub fn fixed_increase_rule(
    state: &InterimState,
    config: &AdaptiveConfig,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let cp = conditional_power(state, state.planned_events, alpha)?;
    if cp >= config.cp_min && cp < 1.0 - beta {
        Ok(fixed_increase_target(
            config,
            state.interim_events,
            state.planned_events,
            alpha,
            beta,
        ))
    } else {
        Ok(state.planned_events)
    }
}

/// Apply the configured rule to an interim state.
pub fn decide_new_total(
    state: &InterimState,
    config: &AdaptiveConfig,
    alpha: f64,
    beta: f64,
) -> Result<ZoneDecision> {
    let base = classify_zone(state, config, alpha, beta)?;
    let new_total = match config.rule {
        ReestimationRule::PromisingZone | ReestimationRule::ChwGuarded => base.new_total_events,
        ReestimationRule::JennisonTurnbull => jt_optimize(state, config, alpha, beta)?,
        ReestimationRule::FixedIncrease => fixed_increase_rule(state, config, alpha, beta)?,
    };
    Ok(ZoneDecision { new_total_events: new_total, ..base })
}

// ---------------------------------------------------------------------------
// Inverse-normal combination test
// ---------------------------------------------------------------------------

/// Stage-wise p-values and pre-specified weights.
///
/// Weights must be fixed from the planned per-stage event counts before any
/// adaptation: `xi1^2 = n1/(n1+n2)`, `xi2^2 = n2/(n1+n2)` with `n1`, `n2` the
/// planned stage-1 and stage-2 events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinationInputs {
    pub p1: f64,
    pub p2: f64,
    pub xi1: f64,
    pub xi2: f64,
}

impl CombinationInputs {
    /// Weights from planned per-stage event counts.
    pub fn from_planned_stages(p1: f64, p2: f64, stage1_events: f64, stage2_events: f64) -> Result<Self> {
        if !(stage1_events > 0.0 && stage2_events > 0.0) {
            return Err(Error::Validation(
                "planned stage event counts must be positive".into(),
            ));
        }
        let total = stage1_events + stage2_events;
        Ok(Self {
            p1,
            p2,
            xi1: (stage1_events / total).sqrt(),
            xi2: (stage2_events / total).sqrt(),
        })
    }
}

/// Result of the combination test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinationResult {
    pub z_star: f64,
    pub reject: bool,
    /// True when a degenerate p-value had to be clamped away from {0, 1}.
    pub clamped: bool,
}

const P_CLAMP: f64 = 1e-12;

/// Weighted inverse-normal combination of two stage p-values; rejects when
/// the combined statistic exceeds the one-sided critical value.
pub fn inverse_normal_combine(inputs: &CombinationInputs, alpha: f64) -> Result<CombinationResult> {
    if (inputs.xi1 * inputs.xi1 + inputs.xi2 * inputs.xi2 - 1.0).abs() > 1e-9 {
        return Err(Error::Validation("combination weights must satisfy xi1^2 + xi2^2 = 1".into()));
    }
    let mut clamped = false;
    let mut clamp = |p: f64| -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Validation(format!("p-value {p} outside [0, 1]")));
        }
        if p < P_CLAMP || p > 1.0 - P_CLAMP {
            clamped = true;
            Ok(p.clamp(P_CLAMP, 1.0 - P_CLAMP))
        } else {
            Ok(p)
        }
    };
    let p1 = clamp(inputs.p1)?;
    let p2 = clamp(inputs.p2)?;
    let z_star = inputs.xi1 * normal_quantile(1.0 - p1) + inputs.xi2 * normal_quantile(1.0 - p2);
    Ok(CombinationResult { z_star, reject: z_star > normal_quantile(1.0 - alpha), clamped })
}

/// Final decision when the second cohort is empty.
///
/// An empty second cohort means the first cohort is the entire trial, so its
/// final-analysis p-value carries full weight: reject when `p1 <= alpha`.
/// Down-weighting by `xi1` here would leave the test far below its nominal
/// level whenever enrollment finishes before the interim cut, which is the
/// typical case under front-loaded enrollment.
pub fn combine_stage_one_only(p1: f64, alpha: f64) -> CombinationResult {
    let clamped = p1 < P_CLAMP || p1 > 1.0 - P_CLAMP;
    let p1 = p1.clamp(P_CLAMP, 1.0 - P_CLAMP);
    let z_star = normal_quantile(1.0 - p1);
    CombinationResult { z_star, reject: z_star > normal_quantile(1.0 - alpha), clamped }
}

// ---------------------------------------------------------------------------
// Enrollment-cohort split
// ---------------------------------------------------------------------------

/// Stage-wise p-values from the enrollment split at the interim cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JenkinsSplit {
    /// First-cohort p-value, computed at final follow-up.
    pub p1: f64,
    /// Second-cohort p-value at final follow-up; `None` when the second
    /// cohort is empty or its test is degenerate.
    pub p2: Option<f64>,
    pub stage1_subjects: usize,
    pub stage2_subjects: usize,
}

/// Split subjects by enrollment relative to the interim cut and compute each
/// cohort's weighted log-rank p-value with all follow-up to the final cut.
///
/// Both cohorts are censored at `final_cut`; the first cohort is everyone
/// enrolled strictly before `interim_cut`. Early efficacy stopping is
/// impossible because the first-stage p-value only exists at the end.
pub fn jenkins_split(
    data: &TrialDataset,
    interim_cut: f64,
    final_cut: f64,
    weights: WeightSpec,
    timing: WeightTiming,
) -> Result<JenkinsSplit> {
    if !(interim_cut < final_cut) {
        return Err(Error::Validation(format!(
            "interim cut {interim_cut} must precede final cut {final_cut}"
        )));
    }
    let stage1: Vec<_> = data.subjects.iter().filter(|s| s.entry < interim_cut).collect();
    let stage2: Vec<_> = data.subjects.iter().filter(|s| s.entry >= interim_cut).collect();
    let stage1_subjects = stage1.len();
    let stage2_subjects = stage2.len();

    let view1 = censor_subjects_at(stage1.into_iter(), final_cut);
    let p1 = weighted_logrank(&view1, weights, timing)?.one_sided_p;

    let p2 = if stage2_subjects == 0 {
        None
    } else {
        let view2 = censor_subjects_at(stage2.into_iter(), final_cut);
        weighted_logrank(&view2, weights, timing).ok().map(|r| r.one_sided_p)
    };

    Ok(JenkinsSplit { p1, p2, stage1_subjects, stage2_subjects })
}

/// Convenience: interim statistic from a censored dataset cut.
pub fn interim_statistic(
    data: &TrialDataset,
    interim_events: usize,
    weights: WeightSpec,
    timing: WeightTiming,
) -> Result<(f64, f64)> {
    let view = crate::survival::censor_at_event_count(data, interim_events)?;
    let r = weighted_logrank(&view, weights, timing)?;
    Ok((r.z, view.cut_calendar_time))
}

/// Monte Carlo oracle for one conditional-power value: simulate the Brownian
/// increment under the interim drift estimate.
pub fn conditional_power_mc_oracle<R: Rng + ?Sized>(
    state: &InterimState,
    alpha: f64,
    replicates: usize,
    rng: &mut R,
) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    let n1 = state.interim_events;
    let n2 = state.planned_events;
    let drift = state.z1 / n1.sqrt();
    let threshold = normal_quantile(1.0 - alpha) * n2.sqrt();
    let b1 = state.z1 * n1.sqrt();
    let sd = (n2 - n1).sqrt();
    let mean = drift * (n2 - n1);
    let mut hits = 0usize;
    for _ in 0..replicates {
        let z: f64 = StandardNormal.sample(rng);
        if b1 + mean + sd * z > threshold {
            hits += 1;
        }
    }
    hits as f64 / replicates as f64
}
