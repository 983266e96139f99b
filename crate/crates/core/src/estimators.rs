//! Nonparametric estimation on censored data: risk tables, the Kaplan-Meier
//! estimator and the Fleming-Harrington weighted log-rank statistic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::normal_cdf;
use crate::survival::{Arm, CensoredView, EventStatus};

/// Fleming-Harrington weight exponents.
///
/// `rho = gamma = 0` gives the plain log-rank test; `gamma > 0` weights late
/// differences, `rho > 0` early ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub rho: f64,
    pub gamma: f64,
}

impl WeightSpec {
    pub fn new(rho: f64, gamma: f64) -> Result<Self> {
        if !(rho >= 0.0 && gamma >= 0.0) {
            return Err(Error::Validation(format!(
                "weight exponents must be >= 0, got ({rho}, {gamma})"
            )));
        }
        Ok(Self { rho, gamma })
    }

    /// Plain log-rank weights.
    pub fn logrank() -> Self {
        Self { rho: 0.0, gamma: 0.0 }
    }
}

/// Which side of the pooled survival step feeds the weight at an event time.
///
/// The left limit uses survival strictly prior to the event time, keeping
/// weights predictable from earlier data; the right limit is exposed for
/// sensitivity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightTiming {
    #[default]
    LeftLimit,
    RightLimit,
}

// ---------------------------------------------------------------------------
// Risk table
// ---------------------------------------------------------------------------

/// Per-event-time risk set bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    /// Distinct event time.
    pub time: f64,
    /// Total events at this time.
    pub events: usize,
    /// Control-arm events at this time.
    pub control_events: usize,
    /// Subjects at risk just before this time (censored ties included).
    pub at_risk: usize,
    pub control_at_risk: usize,
    pub experimental_at_risk: usize,
}

/// Ordered risk table over the distinct event times of a censored view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    pub rows: Vec<RiskRow>,
}

/// Sort order: by observed time, ties kept in subject order so results are
/// reproducible bit-for-bit. Censorings at an event time stay in the risk set
/// for that time (censorings happen after events).
fn sorted_indices(view: &CensoredView) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..view.observations.len()).collect();
    idx.sort_by(|&a, &b| view.observations[a].time.total_cmp(&view.observations[b].time));
    idx
}

/// Build the risk table of a censored view.
pub fn risk_table(view: &CensoredView) -> Result<RiskTable> {
    if view.observations.iter().all(|o| o.status == EventStatus::Censored) {
        return Err(Error::NoEvents);
    }
    let idx = sorted_indices(view);
    let mut at_risk = view.observations.len();
    let mut control_at_risk =
        view.observations.iter().filter(|o| o.arm == Arm::Control).count();
    let mut rows = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let t = view.observations[idx[i]].time;
        let mut j = i;
        let mut events = 0;
        let mut control_events = 0;
        let mut removed = 0;
        let mut control_removed = 0;
        while j < idx.len() && view.observations[idx[j]].time == t {
            let o = &view.observations[idx[j]];
            if o.status == EventStatus::Event {
                events += 1;
                if o.arm == Arm::Control {
                    control_events += 1;
                }
            }
            removed += 1;
            if o.arm == Arm::Control {
                control_removed += 1;
            }
            j += 1;
        }
        if events > 0 {
            rows.push(RiskRow {
                time: t,
                events,
                control_events,
                at_risk,
                control_at_risk,
                experimental_at_risk: at_risk - control_at_risk,
            });
        }
        at_risk -= removed;
        control_at_risk -= control_removed;
        i = j;
    }
    Ok(RiskTable { rows })
}

// ---------------------------------------------------------------------------
// Kaplan-Meier
// ---------------------------------------------------------------------------

/// Product-limit survival estimate as a right-continuous step function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaplanMeier {
    /// `(time, survival)` after each distinct event time, in time order.
    pub steps: Vec<(f64, f64)>,
}

impl KaplanMeier {
    /// Estimate at time `t` (right-continuous).
    pub fn survival_at(&self, t: f64) -> f64 {
        let mut s = 1.0;
        for &(time, surv) in &self.steps {
            if time <= t {
                s = surv;
            } else {
                break;
            }
        }
        s
    }

    /// Left limit just before `t`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let mut s = 1.0;
        for &(time, surv) in &self.steps {
            if time < t {
                s = surv;
            } else {
                break;
            }
        }
        s
    }
}

/// Kaplan-Meier estimator; `arm = None` pools both arms.
pub fn kaplan_meier(view: &CensoredView, arm: Option<Arm>) -> Result<KaplanMeier> {
    let filtered: Vec<_> = view
        .observations
        .iter()
        .filter(|o| arm.map_or(true, |a| o.arm == a))
        .copied()
        .collect();
    if filtered.is_empty() {
        return Err(Error::Validation("empty view".into()));
    }
    let sub = CensoredView {
        observations: filtered,
        cut_calendar_time: view.cut_calendar_time,
        events_observed: 0,
    };
    let mut idx = sorted_indices(&sub);
    let mut at_risk = sub.observations.len();
    let mut s = 1.0;
    let mut steps = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let t = sub.observations[idx[i]].time;
        let mut j = i;
        let mut events = 0;
        let mut removed = 0;
        while j < idx.len() && sub.observations[idx[j]].time == t {
            if sub.observations[idx[j]].status == EventStatus::Event {
                events += 1;
            }
            removed += 1;
            j += 1;
        }
        if events > 0 {
            s *= 1.0 - events as f64 / at_risk as f64;
            steps.push((t, s));
        }
        at_risk -= removed;
        i = j;
    }
    idx.clear();
    Ok(KaplanMeier { steps })
}

// ---------------------------------------------------------------------------
// Weighted log-rank
// ---------------------------------------------------------------------------

/// Result of the weighted log-rank test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogrankResult {
    /// Standard-normal-scale statistic; positive values favor the
    /// experimental arm.
    pub z: f64,
    /// One-sided p-value `1 - Phi(z)`.
    pub one_sided_p: f64,
    /// Number of distinct event times used.
    pub event_times: usize,
}

/// G^{rho,gamma} weighted log-rank statistic.
///
/// Weights come from the pooled Kaplan-Meier estimate; with the default
/// left-limit timing the weight at an event time only uses strictly earlier
/// data. Risk sets of size one contribute no variance.
pub fn weighted_logrank(
    view: &CensoredView,
    weights: WeightSpec,
    timing: WeightTiming,
) -> Result<LogrankResult> {
    let n = view.observations.len();
    if n == 0 {
        return Err(Error::Validation("empty view".into()));
    }
    let has_control = view.observations.iter().any(|o| o.arm == Arm::Control);
    let has_experimental = view.observations.iter().any(|o| o.arm == Arm::Experimental);
    if !(has_control && has_experimental) {
        return Err(Error::OneArm);
    }
    if view.observations.iter().all(|o| o.status == EventStatus::Censored) {
        return Err(Error::NoEvents);
    }

    let idx = sorted_indices(view);
    let mut at_risk = n;
    let mut control_at_risk =
        view.observations.iter().filter(|o| o.arm == Arm::Control).count();
    let mut km = 1.0; // pooled KM, running value (left limit before update)
    let mut num = 0.0;
    let mut var = 0.0;
    let mut event_times = 0;

    let mut i = 0;
    while i < idx.len() {
        let t = view.observations[idx[i]].time;
        let mut j = i;
        let mut events = 0usize;
        let mut control_events = 0usize;
        let mut removed = 0usize;
        let mut control_removed = 0usize;
        while j < idx.len() && view.observations[idx[j]].time == t {
            let o = &view.observations[idx[j]];
            if o.status == EventStatus::Event {
                events += 1;
                if o.arm == Arm::Control {
                    control_events += 1;
                }
            }
            removed += 1;
            if o.arm == Arm::Control {
                control_removed += 1;
            }
            j += 1;
        }
        if events > 0 {
            event_times += 1;
            let ni = at_risk as f64;
            let n1 = control_at_risk as f64;
            let n2 = ni - n1;
            let d = events as f64;
            let d1 = control_events as f64;
            let km_after = km * (1.0 - d / ni);
            let s = match timing {
                WeightTiming::LeftLimit => km,
                WeightTiming::RightLimit => km_after,
            };
            let w = s.powf(weights.rho) * (1.0 - s).powf(weights.gamma);
            num += w * (d1 - n1 * d / ni);
            if at_risk > 1 {
                var += w * w * (n1 * n2 * d * (ni - d)) / (ni * ni * (ni - 1.0));
            }
            km = km_after;
        }
        at_risk -= removed;
        control_at_risk -= control_removed;
        i = j;
    }

    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let z = num / var.sqrt();
    Ok(LogrankResult { z, one_sided_p: 1.0 - normal_cdf(z), event_times })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::Observation;
    use approx::assert_abs_diff_eq;

    fn obs(time: f64, event: bool, arm: Arm) -> Observation {
        Observation {
            time,
            status: if event { EventStatus::Event } else { EventStatus::Censored },
            arm,
        }
    }

    fn view(observations: Vec<Observation>) -> CensoredView {
        let events = observations.iter().filter(|o| o.status == EventStatus::Event).count();
        CensoredView { observations, cut_calendar_time: f64::INFINITY, events_observed: events }
    }

    /// Independently coded unweighted log-rank used as an oracle.
    fn plain_logrank_oracle(v: &CensoredView) -> f64 {
        let mut obs: Vec<_> = v.observations.clone();
        obs.sort_by(|a, b| a.time.total_cmp(&b.time));
        let times: Vec<f64> = {
            let mut t: Vec<f64> = obs
                .iter()
                .filter(|o| o.status == EventStatus::Event)
                .map(|o| o.time)
                .collect();
            t.dedup();
            t
        };
        let mut num = 0.0;
        let mut var = 0.0;
        for &t in &times {
            let ni = obs.iter().filter(|o| o.time >= t).count() as f64;
            let n1 = obs.iter().filter(|o| o.time >= t && o.arm == Arm::Control).count() as f64;
            let d = obs
                .iter()
                .filter(|o| o.time == t && o.status == EventStatus::Event)
                .count() as f64;
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

    #[test]
    fn risk_table_two_subjects() {
        let v = view(vec![obs(1.0, true, Arm::Control), obs(2.0, true, Arm::Experimental)]);
        let rt = risk_table(&v).unwrap();
        assert_eq!(rt.rows.len(), 2);
        let r0 = rt.rows[0];
        assert_eq!((r0.events, r0.control_events, r0.at_risk, r0.control_at_risk), (1, 1, 2, 1));
        assert_eq!(r0.experimental_at_risk, 1);
        let r1 = rt.rows[1];
        assert_eq!((r1.events, r1.control_events, r1.at_risk, r1.control_at_risk), (1, 0, 1, 0));
    }

    #[test]
    fn risk_table_all_censored_errors() {
        let v = view(vec![obs(1.0, false, Arm::Control), obs(2.0, false, Arm::Experimental)]);
        assert!(matches!(risk_table(&v), Err(Error::NoEvents)));
    }

    #[test]
    fn risk_table_aggregates_ties() {
        let v = view(vec![
            obs(1.0, true, Arm::Control),
            obs(1.0, true, Arm::Experimental),
            obs(2.0, false, Arm::Control),
        ]);
        let rt = risk_table(&v).unwrap();
        assert_eq!(rt.rows.len(), 1);
        assert_eq!(rt.rows[0].events, 2);
        assert_eq!(rt.rows[0].at_risk, 3);
    }

    #[test]
    fn km_no_censoring_hand_product() {
        let v = view(vec![
            obs(1.0, true, Arm::Control),
            obs(2.0, true, Arm::Experimental),
            obs(3.0, true, Arm::Control),
        ]);
        let km = kaplan_meier(&v, None).unwrap();
        assert_abs_diff_eq!(km.survival_at(1.0), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(km.survival_at(2.5), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(km.survival_at(3.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(km.left_limit(1.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn km_without_events_is_one() {
        let v = view(vec![obs(1.0, false, Arm::Control), obs(2.0, false, Arm::Experimental)]);
        let km = kaplan_meier(&v, None).unwrap();
        assert!(km.steps.is_empty());
        assert_abs_diff_eq!(km.survival_at(10.0), 1.0, epsilon = 0.0);
    }

    #[test]
    fn pooled_km_on_identical_arms_matches_per_arm() {
        let mut observations = Vec::new();
        for t in [1.0, 2.0, 4.0, 7.0] {
            observations.push(obs(t, true, Arm::Control));
            observations.push(obs(t, true, Arm::Experimental));
        }
        let v = view(observations);
        let pooled = kaplan_meier(&v, None).unwrap();
        let ctrl = kaplan_meier(&v, Some(Arm::Control)).unwrap();
        for t in [0.5, 1.0, 3.0, 7.0] {
            assert_abs_diff_eq!(pooled.survival_at(t), ctrl.survival_at(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn two_subject_hand_statistic() {
        // one event per arm, control first: |Z| = (1 - 0.5)/sqrt(0.25) = 1
        let v = view(vec![obs(1.0, true, Arm::Control), obs(2.0, true, Arm::Experimental)]);
        let r = weighted_logrank(&v, WeightSpec::logrank(), WeightTiming::LeftLimit).unwrap();
        assert_abs_diff_eq!(r.z.abs(), 1.0, epsilon = 1e-12);
        // control event came first, so the statistic favors the experimental arm
        assert!(r.z > 0.0);
        assert_abs_diff_eq!(r.one_sided_p, 1.0 - normal_cdf(1.0), epsilon = 1e-12);
    }

    #[test]
    fn zero_weights_match_plain_logrank_oracle() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..25 {
            let n = rng.gen_range(10..60);
            let observations: Vec<_> = (0..n)
                .map(|i| {
                    obs(
                        rng.gen_range(0.1..20.0),
                        rng.gen_bool(0.7),
                        if i % 2 == 0 { Arm::Control } else { Arm::Experimental },
                    )
                })
                .collect();
            let v = view(observations);
            if v.events_observed == 0 {
                continue;
            }
            let ours = weighted_logrank(&v, WeightSpec::logrank(), WeightTiming::LeftLimit);
            if let Ok(r) = ours {
                let oracle = plain_logrank_oracle(&v);
                assert_abs_diff_eq!(r.z, oracle, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn first_event_carries_zero_weight_for_late_weights() {
        // with gamma > 0 and left-limit timing, r_1 = (1 - 1)^gamma = 0;
        // reconstruct the statistic from the risk table and pooled KM
        let v = view(vec![
            obs(1.0, true, Arm::Control),
            obs(2.0, true, Arm::Experimental),
            obs(3.0, true, Arm::Control),
            obs(4.0, true, Arm::Experimental),
        ]);
        let w = WeightSpec::new(0.0, 1.0).unwrap();
        let rt = risk_table(&v).unwrap();
        let km = kaplan_meier(&v, None).unwrap();
        let mut num = 0.0;
        let mut var = 0.0;
        let mut first_weight = f64::NAN;
        for (i, row) in rt.rows.iter().enumerate() {
            let s = km.left_limit(row.time);
            let r = s.powf(w.rho) * (1.0 - s).powf(w.gamma);
            if i == 0 {
                first_weight = r;
            }
            let (ni, n1, d, d1) = (
                row.at_risk as f64,
                row.control_at_risk as f64,
                row.events as f64,
                row.control_events as f64,
            );
            num += r * (d1 - n1 * d / ni);
            if row.at_risk > 1 {
                let n2 = ni - n1;
                var += r * r * n1 * n2 * d * (ni - d) / (ni * ni * (ni - 1.0));
            }
        }
        assert_abs_diff_eq!(first_weight, 0.0, epsilon = 0.0);
        let direct = weighted_logrank(&v, w, WeightTiming::LeftLimit).unwrap();
        assert_abs_diff_eq!(direct.z, num / var.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn right_limit_timing_differs() {
        let v = view(vec![
            obs(1.0, true, Arm::Control),
            obs(2.0, true, Arm::Experimental),
            obs(3.0, true, Arm::Control),
            obs(4.0, true, Arm::Experimental),
        ]);
        let w = WeightSpec::new(0.0, 1.0).unwrap();
        let left = weighted_logrank(&v, w, WeightTiming::LeftLimit).unwrap();
        let right = weighted_logrank(&v, w, WeightTiming::RightLimit).unwrap();
        assert!((left.z - right.z).abs() > 1e-6);
    }

    #[test]
    fn one_arm_rejected() {
        let v = view(vec![obs(1.0, true, Arm::Control), obs(2.0, true, Arm::Control)]);
        assert!(matches!(
            weighted_logrank(&v, WeightSpec::logrank(), WeightTiming::LeftLimit),
            Err(Error::OneArm)
        ));
    }

    #[test]
    fn arm_swap_negates_z() {
        let v = view(vec![
            obs(1.0, true, Arm::Control),
            obs(2.0, true, Arm::Experimental),
            obs(2.5, false, Arm::Control),
            obs(3.0, true, Arm::Experimental),
            obs(5.0, true, Arm::Control),
        ]);
        let swapped = view(
            v.observations
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
        );
        for (rho, gamma) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (0.5, 0.5)] {
            let w = WeightSpec::new(rho, gamma).unwrap();
            let a = weighted_logrank(&v, w, WeightTiming::LeftLimit).unwrap();
            let b = weighted_logrank(&swapped, w, WeightTiming::LeftLimit).unwrap();
            assert_abs_diff_eq!(a.z, -b.z, epsilon = 1e-12);
        }
    }
}
