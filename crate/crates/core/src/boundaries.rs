//! Group-sequential efficacy boundaries of the O'Brien-Fleming type.
//!
//! Boundaries are derived from the one-sided O'Brien-Fleming-type spending
//! function `a*(t) = 2(1 - Phi(z_{alpha/2}/sqrt(t)))`: the boundary at each
//! look spends the increment of `a*` at that information fraction, with the
//! joint crossing probability evaluated by the standard recursive grid
//! quadrature over the score process (sub-density propagation between looks).
//! With a single look this reduces to the fixed-sample critical value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{normal_cdf, normal_pdf, normal_quantile, normal_sf};

/// Number of quadrature nodes for the score-scale sub-density (odd, Simpson).
const GRID_POINTS: usize = 1201;
/// Half-width of the integration band in standard deviations.
const BAND_SIGMA: f64 = 8.5;

/// A group-sequential look schedule with efficacy boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookSchedule {
    /// Information fractions, strictly increasing, last equals 1.
    pub fractions: Vec<f64>,
    /// One-sided z-scale efficacy boundaries per look.
    pub boundaries: Vec<f64>,
    /// Cumulative type-I error spent through each look.
    pub cumulative_alpha: Vec<f64>,
    /// Incremental crossing probabilities under `drift`, when one was given.
    pub crossing_probabilities: Option<Vec<f64>>,
    /// Drift of the final-look statistic used for the crossing probabilities.
    pub drift: Option<f64>,
    /// Overall one-sided level.
    pub alpha: f64,
}

impl LookSchedule {
    /// Event counts per look for a final event target `d`.
    pub fn look_events(&self, total_events: usize) -> Vec<usize> {
        self.fractions
            .iter()
            .map(|f| (f * total_events as f64).ceil() as usize)
            .collect()
    }
}

/// One-sided O'Brien-Fleming-type spending function.
fn of_spending(alpha: f64, t: f64) -> f64 {
    if t >= 1.0 {
        return alpha;
    }
    let z = normal_quantile(1.0 - alpha / 2.0);
    2.0 * (1.0 - normal_cdf(z / t.sqrt()))
}

// ---------------------------------------------------------------------------
// Sub-density propagation on the score scale
// ---------------------------------------------------------------------------

/// Sub-density of the score process `B(t_k) = Z_k sqrt(t_k)` over paths that
/// have not crossed any earlier boundary.
struct ScoreDensity {
    grid: Vec<f64>,
    density: Vec<f64>,
    t: f64,
}

/// Composite-Simpson integral of `values` sampled on the uniform `grid`.
fn simpson(grid: &[f64], values: &[f64]) -> f64 {
    let n = grid.len();
    debug_assert!(n >= 3 && n % 2 == 1);
    let h = (grid[n - 1] - grid[0]) / (n - 1) as f64;
    let mut acc = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

impl ScoreDensity {
    /// Initialize at the first look and return its crossing probability.
    fn first_look(t1: f64, boundary: f64, drift: f64) -> (Self, f64) {
        let mean = drift * t1;
        let sd = t1.sqrt();
        let threshold = boundary * sd;
        let lo = (mean - BAND_SIGMA * sd).min(threshold - 1.0);
        let step = (threshold - lo) / (GRID_POINTS - 1) as f64;
        let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + i as f64 * step).collect();
        let density: Vec<f64> =
            grid.iter().map(|&x| normal_pdf((x - mean) / sd) / sd).collect();
        let crossing = normal_sf(boundary - drift * t1.sqrt());
        (Self { grid, density, t: t1 }, crossing)
    }

    /// Probability of crossing `boundary` at information `t_next`, leaving the
    /// stored density untouched.
    fn crossing_probability(&self, t_next: f64, boundary: f64, drift: f64) -> f64 {
        let dt = t_next - self.t;
        let sd = dt.sqrt();
        let threshold = boundary * t_next.sqrt();
        let tails: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.density)
            .map(|(&x, &f)| f * normal_sf((threshold - x - drift * dt) / sd))
            .collect();
        simpson(&self.grid, &tails)
    }

    /// Advance the sub-density past a non-crossing look.
    fn advance(&mut self, t_next: f64, boundary: f64, drift: f64) {
        let dt = t_next - self.t;
        let sd = dt.sqrt();
        let threshold = boundary * t_next.sqrt();
        let lo = (self.grid[0] + drift * dt - BAND_SIGMA * sd).min(threshold - 1.0);
        let step = (threshold - lo) / (GRID_POINTS - 1) as f64;
        let new_grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + i as f64 * step).collect();
        let new_density: Vec<f64> = new_grid
            .iter()
            .map(|&y| {
                let integrand: Vec<f64> = self
                    .grid
                    .iter()
                    .zip(&self.density)
                    .map(|(&x, &f)| f * normal_pdf((y - x - drift * dt) / sd) / sd)
                    .collect();
                simpson(&self.grid, &integrand)
            })
            .collect();
        self.grid = new_grid;
        self.density = new_density;
        self.t = t_next;
    }
}

/// Incremental boundary-crossing probabilities of a boundary set under a
/// given drift of the final-look statistic (mean of `Z_k` is `drift*sqrt(t_k)`).
pub fn crossing_probabilities(fractions: &[f64], boundaries: &[f64], drift: f64) -> Vec<f64> {
    let (mut density, first) = ScoreDensity::first_look(fractions[0], boundaries[0], drift);
    let mut probs = vec![first];
    for k in 1..fractions.len() {
        probs.push(density.crossing_probability(fractions[k], boundaries[k], drift));
        if k + 1 < fractions.len() {
            density.advance(fractions[k], boundaries[k], drift);
        }
    }
    probs
}

fn validate_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.is_empty() {
        return Err(Error::Validation("at least one look required".into()));
    }
    for (i, &f) in fractions.iter().enumerate() {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Validation(format!(
                "information fraction [{i}] = {f} outside (0, 1]"
            )));
        }
    }
    for w in fractions.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Validation(
                "information fractions must be strictly increasing".into(),
            ));
        }
    }
    if (fractions[fractions.len() - 1] - 1.0).abs() > 1e-12 {
        return Err(Error::Validation("last information fraction must be 1".into()));
    }
    Ok(())
}

/// O'Brien-Fleming-type boundaries for the given look fractions.
///
/// When `drift` is provided, the schedule also carries the incremental
/// crossing probabilities under that drift; use [`power_drift`] for the drift
/// at which the schedule's total crossing probability is a target power.
pub fn obf_boundaries(fractions: &[f64], alpha: f64, drift: Option<f64>) -> Result<LookSchedule> {
    validate_fractions(fractions)?;
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Validation(format!("alpha must be in (0, 0.5), got {alpha}")));
    }

    let k = fractions.len();
    let mut boundaries = Vec::with_capacity(k);
    let mut cumulative = Vec::with_capacity(k);

    // look 1 spends a*(t1) directly
    let spend1 = of_spending(alpha, fractions[0]);
    boundaries.push(normal_quantile(1.0 - spend1));
    cumulative.push(spend1);

    let mut density: Option<ScoreDensity> = if k > 1 {
        let (d, _) = ScoreDensity::first_look(fractions[0], boundaries[0], 0.0);
        Some(d)
    } else {
        None
    };

    let mut spent = spend1;
    for look in 1..k {
        let target = of_spending(alpha, fractions[look]);
        let increment = (target - spent).max(0.0);
        let dens = density.as_mut().expect("density exists for k > 1");

        // bisection on the boundary; crossing probability decreases in b
        let (mut lo, mut hi) = (0.0f64, 10.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let p = dens.crossing_probability(fractions[look], mid, 0.0);
            if p > increment {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let b = 0.5 * (lo + hi);
        boundaries.push(b);
        cumulative.push(target);
        spent = target;
        if look + 1 < k {
            dens.advance(fractions[look], b, 0.0);
        }
    }

    let crossing = drift.map(|th| crossing_probabilities(fractions, &boundaries, th));
    Ok(LookSchedule {
        fractions: fractions.to_vec(),
        boundaries,
        cumulative_alpha: cumulative,
        crossing_probabilities: crossing,
        drift,
        alpha,
    })
}

/// Drift at which the schedule's total crossing probability equals `1 - beta`.
pub fn power_drift(fractions: &[f64], boundaries: &[f64], beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Validation(format!("beta must be in (0, 1), got {beta}")));
    }
    let target = 1.0 - beta;
    let total = |drift: f64| -> f64 {
        crossing_probabilities(fractions, boundaries, drift).iter().sum()
    };
    let (mut lo, mut hi) = (0.0f64, 8.0f64);
    if total(hi) < target {
        return Err(Error::Computation(format!(
            "no drift in [0, 8] reaches power {target}; bracket failed"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Boundaries plus crossing probabilities under the drift that attains the
/// design power `1 - beta`.
pub fn obf_with_power(fractions: &[f64], alpha: f64, beta: f64) -> Result<LookSchedule> {
    let schedule = obf_boundaries(fractions, alpha, None)?;
    let drift = power_drift(&schedule.fractions, &schedule.boundaries, beta)?;
    let crossing = crossing_probabilities(&schedule.fractions, &schedule.boundaries, drift);
    Ok(LookSchedule {
        crossing_probabilities: Some(crossing),
        drift: Some(drift),
        ..schedule
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_look_is_fixed_sample() {
        let s = obf_boundaries(&[1.0], 0.025, None).unwrap();
        assert_abs_diff_eq!(s.boundaries[0], 1.959964, epsilon = 1e-5);
        assert_abs_diff_eq!(s.cumulative_alpha[0], 0.025, epsilon = 1e-12);
    }

    #[test]
    fn paper_schedule_values() {
        let s = obf_with_power(&[0.75, 1.0], 0.025, 0.10).unwrap();
        assert_abs_diff_eq!(s.boundaries[0], 2.34, epsilon = 0.01);
        assert_abs_diff_eq!(s.boundaries[1], 2.012, epsilon = 0.01);
        assert_abs_diff_eq!(s.cumulative_alpha[0], 0.01, epsilon = 0.001);
        assert_abs_diff_eq!(s.cumulative_alpha[1], 0.025, epsilon = 0.001);
        let cp = s.crossing_probabilities.as_ref().unwrap();
        assert_abs_diff_eq!(cp[0], 0.688, epsilon = 0.01);
        assert_abs_diff_eq!(cp[1], 0.212, epsilon = 0.01);
        assert_abs_diff_eq!(cp.iter().sum::<f64>(), 0.90, epsilon = 1e-6);
    }

    #[test]
    fn boundaries_decrease_over_looks() {
        let s = obf_boundaries(&[0.25, 0.5, 0.75, 1.0], 0.025, None).unwrap();
        for w in s.boundaries.windows(2) {
            assert!(w[0] > w[1]);
        }
        assert!(s.boundaries[0] > 4.0, "very conservative first look");
    }

    #[test]
    fn null_crossing_exhausts_alpha() {
        // independent check: total crossing under zero drift equals alpha
        for fracs in [vec![0.75, 1.0], vec![0.3, 0.6, 1.0]] {
            let s = obf_boundaries(&fracs, 0.025, Some(0.0)).unwrap();
            let total: f64 = s.crossing_probabilities.unwrap().iter().sum();
            assert_abs_diff_eq!(total, 0.025, epsilon = 1e-4);
        }
    }

    #[test]
    fn bivariate_quadrature_oracle_reproduces_alpha() {
        // direct conditional-integral evaluation of
        //   P(Z1 > b1) + P(Z1 <= b1, Z2 > b2),  corr = sqrt(t1/t2)
        let s = obf_boundaries(&[0.75, 1.0], 0.025, None).unwrap();
        let (b1, b2) = (s.boundaries[0], s.boundaries[1]);
        let rho = 0.75f64.sqrt();
        let n = 20_001;
        let lo = -9.0;
        let h = (b1 - lo) / (n - 1) as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let z = lo + i as f64 * h;
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * normal_pdf(z) * normal_sf((b2 - rho * z) / (1.0 - rho * rho).sqrt());
        }
        let p_continue_cross = acc * h / 3.0;
        let total = normal_sf(b1) + p_continue_cross;
        assert_abs_diff_eq!(total, 0.025, epsilon = 1e-4);
    }

    #[test]
    fn invalid_fractions_rejected() {
        assert!(obf_boundaries(&[], 0.025, None).is_err());
        assert!(obf_boundaries(&[0.5, 0.4, 1.0], 0.025, None).is_err());
        assert!(obf_boundaries(&[0.5, 0.9], 0.025, None).is_err());
        assert!(obf_boundaries(&[0.0, 1.0], 0.025, None).is_err());
        assert!(obf_boundaries(&[1.0], 0.8, None).is_err());
    }

    #[test]
    fn look_events_round_up() {
        let s = obf_boundaries(&[0.75, 1.0], 0.025, None).unwrap();
        assert_eq!(s.look_events(258), vec![194, 258]);
        assert_eq!(s.look_events(369), vec![277, 369]);
    }
}
