//! Design, sizing and Monte Carlo evaluation of two-arm survival trials with
//! delayed treatment effects.
//!
//! The crate covers the full pipeline:
//!
//! - [`survival`]: the piecewise-exponential delayed-effect model, cohort
//!   simulation with staggered entry, and event-count-triggered censoring.
//! - [`estimators`]: risk tables, Kaplan-Meier, and the Fleming-Harrington
//!   weighted log-rank test.
//! - [`design`]: the Markov at-risk recursion for sample size under delayed
//!   effects, plus the Schoenfeld cross-check.
//! - [`boundaries`]: O'Brien-Fleming-type group-sequential boundaries via
//!   alpha spending and recursive quadrature.
//! - [`adaptive`]: conditional power, event-target re-estimation rules, the
//!   inverse-normal combination test and the enrollment-cohort split.
//! - [`montecarlo`]: replicated group-sequential and adaptive trials, grid
//!   operating characteristics, and type-I recalibration.

pub mod adaptive;
pub mod boundaries;
pub mod design;
pub mod error;
pub mod estimators;
pub mod montecarlo;
pub mod rng;
pub mod stats;
pub mod survival;

pub use adaptive::{
    classify_zone, conditional_power, decide_new_total, fixed_increase_rule, gao_second_stage,
    inverse_normal_combine, jenkins_split, jt_optimize, AdaptiveConfig, CombinationInputs,
    FixedIncreasePolicy, InterimState, ReestimationRule, SecondStage, Zone,
};
pub use boundaries::{obf_boundaries, obf_with_power, power_drift, LookSchedule};
pub use design::{
    hasegawa_sample_size, markov_evaluate, schoenfeld_events, DesignSpec, MarkovResult,
    SampleSizeResult,
};
pub use error::{Error, Result};
pub use estimators::{
    kaplan_meier, risk_table, weighted_logrank, KaplanMeier, LogrankResult, RiskTable, WeightSpec,
    WeightTiming,
};
pub use montecarlo::{
    estimate_oc, recalibrate_alpha, run_adaptive_trial, run_gsd_trial, AdaptiveTrialPlan,
    CellResult, Engine, GsdTrialPlan, Recalibration, ScenarioBase, ScenarioGrid, SizingPolicy,
    Stage, TrialOutcome, Truth,
};
pub use rng::replicate_rng;
pub use survival::{
    censor_at_calendar, censor_at_event_count, simulate_cohort, Arm, CensoredView,
    DelayedEffectModel, EnrollmentMode, EnrollmentModel, EventStatus, Subject, TrialDataset,
};
