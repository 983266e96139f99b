//! Two-arm survival model with a delayed treatment effect, staggered-entry
//! cohort simulation and event-count-triggered administrative censoring.
//!
//! The control arm is exponential with rate `lambda`. The experimental arm
//! shares the control hazard until the delay `epsilon` and then switches to
//! `psi * lambda`, so the post-delay hazard ratio (experimental/control) is
//! `psi`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treatment arm label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Experimental,
}

/// Event/censoring status of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventStatus {
    Event,
    Censored,
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Piecewise-exponential two-arm model with a delayed effect.
///
/// The experimental-arm survival is
/// `S2(t) = exp(-lambda t)` for `t < epsilon` and `c exp(-psi lambda t)`
/// afterwards. Continuity at `epsilon` and a unit integral of the density
/// both force `c = exp(epsilon * lambda * (psi - 1))`, which is the constant
/// stored here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayedEffectModel {
    /// Control-arm hazard rate (1/month).
    pub lambda: f64,
    /// Post-delay hazard multiplier; post-delay hazard ratio is `psi`.
    pub psi: f64,
    /// Delay duration in months.
    pub epsilon: f64,
    /// Normalization constant of the post-delay survival branch (derived).
    pub c: f64,
}

impl DelayedEffectModel {
    pub fn new(lambda: f64, psi: f64, epsilon: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Validation(format!("lambda must be > 0, got {lambda}")));
        }
        if !(psi > 0.0) || !psi.is_finite() {
            return Err(Error::Validation(format!("psi must be > 0, got {psi}")));
        }
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::Validation(format!("epsilon must be >= 0, got {epsilon}")));
        }
        let c = (epsilon * lambda * (psi - 1.0)).exp();
        Ok(Self { lambda, psi, epsilon, c })
    }

    /// Model with median control survival `median` months (lambda = ln2/median).
    pub fn from_control_median(median: f64, psi: f64, epsilon: f64) -> Result<Self> {
        if !(median > 0.0) {
            return Err(Error::Validation(format!("median must be > 0, got {median}")));
        }
        Self::new(std::f64::consts::LN_2 / median, psi, epsilon)
    }

    /// Null version of this model (`psi = 1`): both arms identical.
    pub fn null(&self) -> Self {
        Self::new(self.lambda, 1.0, self.epsilon).expect("valid null model")
    }

    /// True when both arms share one survival function.
    pub fn is_null(&self) -> bool {
        self.psi == 1.0
    }

    /// Survival function of the given arm at time `t` (months).
    pub fn survival(&self, arm: Arm, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Validation(format!("negative time t={t}")));
        }
        Ok(match arm {
            Arm::Control => (-self.lambda * t).exp(),
            Arm::Experimental => {
                if t < self.epsilon {
                    (-self.lambda * t).exp()
                } else {
                    self.c * (-self.psi * self.lambda * t).exp()
                }
            }
        })
    }

    /// Hazard function of the given arm at time `t`.
    pub fn hazard(&self, arm: Arm, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Validation(format!("negative time t={t}")));
        }
        Ok(match arm {
            Arm::Control => self.lambda,
            Arm::Experimental => {
                if t < self.epsilon {
                    self.lambda
                } else {
                    self.psi * self.lambda
                }
            }
        })
    }

    /// Density of the given arm at time `t`.
    pub fn density(&self, arm: Arm, t: f64) -> Result<f64> {
        Ok(self.hazard(arm, t)? * self.survival(arm, t)?)
    }

    /// Event-time draw for one subject.
    ///
    /// Control draws an exponential with rate `lambda`. The experimental arm
    /// draws the same exponential and, when the draw exceeds the delay,
    /// redraws the remainder as `epsilon + Exp(psi lambda)`. The conditional
    /// survival past `epsilon` is exponential with rate `psi lambda`, so the
    /// construction samples the piecewise density exactly.
    pub fn sample_event_time<R: Rng + ?Sized>(&self, arm: Arm, rng: &mut R) -> f64 {
        let base = Exp::new(self.lambda).expect("lambda > 0");
        let draw = base.sample(rng);
        match arm {
            Arm::Control => draw,
            Arm::Experimental => {
                if draw > self.epsilon {
                    let post = Exp::new(self.psi * self.lambda).expect("psi*lambda > 0");
                    self.epsilon + post.sample(rng)
                } else {
                    draw
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Enrollment
// ---------------------------------------------------------------------------

/// How entry times are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnrollmentMode {
    /// Each subject's entry is an independent Poisson(rate) month count.
    PerSubjectPoisson,
    /// Arrival process with `rate` patients per month.
    PoissonProcess,
    /// Entries uniform over the accrual window.
    Uniform,
}

/// Enrollment scheme plus the study time horizons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentModel {
    pub mode: EnrollmentMode,
    /// Patients per month (`PoissonProcess`) or mean entry month (`PerSubjectPoisson`).
    pub rate: f64,
    /// Accrual horizon T in months.
    pub accrual: f64,
    /// Minimum follow-up tau in months.
    pub min_followup: f64,
}

impl EnrollmentModel {
    pub fn new(mode: EnrollmentMode, rate: f64, accrual: f64, min_followup: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::Validation(format!("enrollment rate must be > 0, got {rate}")));
        }
        if !(accrual > 0.0) {
            return Err(Error::Validation(format!("accrual must be > 0, got {accrual}")));
        }
        if !(min_followup >= 0.0) {
            return Err(Error::Validation(format!(
                "min_followup must be >= 0, got {min_followup}"
            )));
        }
        Ok(Self { mode, rate, accrual, min_followup })
    }

    /// Total study horizon T + tau.
    pub fn horizon(&self) -> f64 {
        self.accrual + self.min_followup
    }

    fn sample_entries<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self.mode {
            EnrollmentMode::PerSubjectPoisson => {
                let pois = Poisson::new(self.rate).expect("rate > 0");
                (0..n).map(|_| pois.sample(rng)).collect()
            }
            EnrollmentMode::PoissonProcess => {
                let gap = Exp::new(self.rate).expect("rate > 0");
                let mut t = 0.0;
                (0..n)
                    .map(|_| {
                        t += gap.sample(rng);
                        t
                    })
                    .collect()
            }
            EnrollmentMode::Uniform => {
                let u = Uniform::new(0.0, self.accrual);
                (0..n).map(|_| u.sample(rng)).collect()
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Cohorts
// ---------------------------------------------------------------------------

/// One randomized subject with latent (uncensored) event time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub arm: Arm,
    /// Calendar entry time in months from study start.
    pub entry: f64,
    /// Event time in months from entry.
    pub event_time: f64,
}

impl Subject {
    /// Calendar time of the event ("pseudo-survival" time).
    #[inline]
    pub fn pseudo_survival(&self) -> f64 {
        self.entry + self.event_time
    }
}

/// A simulated trial cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDataset {
    pub subjects: Vec<Subject>,
    /// Seed recorded for reproducibility bookkeeping.
    pub seed: u64,
}

/// Split `n` into per-arm counts honoring the allocation exactly.
fn arm_counts(n: usize, w1: f64, w2: f64) -> Result<(usize, usize)> {
    if !(w1 > 0.0 && w2 > 0.0) || (w1 + w2 - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "allocation fractions must be positive and sum to 1, got ({w1}, {w2})"
        )));
    }
    let n1 = n as f64 * w1;
    if (n1 - n1.round()).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "n={n} is not compatible with allocation ({w1}, {w2})"
        )));
    }
    let n1 = n1.round() as usize;
    Ok((n1, n - n1))
}

/// Simulate a cohort of `n` subjects with entries from the enrollment model
/// and latent event times from the delayed-effect model.
///
/// The first `n*w1` subjects are control, the rest experimental. Draw order
/// is entries first, then event times in subject order.
pub fn simulate_cohort<R: Rng + ?Sized>(
    model: &DelayedEffectModel,
    enrollment: &EnrollmentModel,
    n: usize,
    allocation: (f64, f64),
    seed: u64,
    rng: &mut R,
) -> Result<TrialDataset> {
    if n == 0 {
        return Err(Error::Validation("cohort size must be positive".into()));
    }
    let (n1, _n2) = arm_counts(n, allocation.0, allocation.1)?;
    let entries = enrollment.sample_entries(n, rng);
    let subjects = entries
        .into_iter()
        .enumerate()
        .map(|(i, entry)| {
            let arm = if i < n1 { Arm::Control } else { Arm::Experimental };
            Subject { arm, entry, event_time: model.sample_event_time(arm, rng) }
        })
        .collect();
    Ok(TrialDataset { subjects, seed })
}

/// Append `extra` newly enrolled subjects whose entry clock starts at
/// `calendar_offset` (the second-stage enrollment law equals the first).
pub fn extend_cohort<R: Rng + ?Sized>(
    data: &mut TrialDataset,
    model: &DelayedEffectModel,
    enrollment: &EnrollmentModel,
    extra: usize,
    allocation: (f64, f64),
    calendar_offset: f64,
    rng: &mut R,
) -> Result<()> {
    if extra == 0 {
        return Ok(());
    }
    let (n1, _n2) = arm_counts(extra, allocation.0, allocation.1)?;
    let entries = enrollment.sample_entries(extra, rng);
    data.subjects.extend(entries.into_iter().enumerate().map(|(i, e)| {
        let arm = if i < n1 { Arm::Control } else { Arm::Experimental };
        Subject { arm, entry: calendar_offset + e, event_time: model.sample_event_time(arm, rng) }
    }));
    Ok(())
}

// ---------------------------------------------------------------------------
// Censored views
// ---------------------------------------------------------------------------

/// One subject as seen at an analysis cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Observed time in months from entry.
    pub time: f64,
    pub status: EventStatus,
    pub arm: Arm,
}

/// The dataset censored administratively at a calendar cut.
///
/// Only subjects with `entry < cut` are included; a subject is an event
/// exactly when their pseudo-survival time is at or before the cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredView {
    pub observations: Vec<Observation>,
    pub cut_calendar_time: f64,
    pub events_observed: usize,
}

/// Build the censored view of `subjects` at calendar time `cut`.
pub fn censor_subjects_at<'a>(
    subjects: impl Iterator<Item = &'a Subject>,
    cut: f64,
) -> CensoredView {
    let mut observations = Vec::new();
    let mut events = 0;
    for s in subjects {
        if s.entry < cut {
            if s.pseudo_survival() <= cut {
                events += 1;
                observations.push(Observation {
                    time: s.event_time,
                    status: EventStatus::Event,
                    arm: s.arm,
                });
            } else {
                observations.push(Observation {
                    time: cut - s.entry,
                    status: EventStatus::Censored,
                    arm: s.arm,
                });
            }
        }
    }
    CensoredView { observations, cut_calendar_time: cut, events_observed: events }
}

/// Censor the full dataset at a given calendar time.
pub fn censor_at_calendar(data: &TrialDataset, cut: f64) -> CensoredView {
    censor_subjects_at(data.subjects.iter(), cut)
}

/// Calendar time at which the k-th event occurs (k-th order statistic of the
/// pseudo-survival times; ties keep subject order).
pub fn event_count_cut(data: &TrialDataset, k: usize) -> Result<f64> {
    let n = data.subjects.len();
    if k == 0 || k > n {
        return Err(Error::Validation(format!("event count k={k} outside 1..={n}")));
    }
    let mut pseudo: Vec<f64> = data.subjects.iter().map(|s| s.pseudo_survival()).collect();
    pseudo.sort_by(f64::total_cmp);
    Ok(pseudo[k - 1])
}

/// Censor the dataset at the calendar time of the k-th event.
pub fn censor_at_event_count(data: &TrialDataset, k: usize) -> Result<CensoredView> {
    let cut = event_count_cut(data, k)?;
    Ok(censor_at_calendar(data, cut))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
