//! Run configuration: a TOML file with strict field checking, plus the
//! command-line overrides that win over it.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use dte_core::adaptive::{AdaptiveConfig, FixedIncreasePolicy, ReestimationRule};
use dte_core::montecarlo::{ScenarioBase, ScenarioGrid, SizingPolicy, Truth};
use dte_core::survival::{EnrollmentMode, EnrollmentModel};
use dte_core::{DesignSpec, WeightSpec, WeightTiming};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ModelSection {
    /// Control-arm hazard rate per month; give this or `control-median`.
    pub lambda: Option<f64>,
    /// Control-arm median survival in months.
    pub control_median: Option<f64>,
    /// Post-delay hazard multiplier (hazard ratio after the delay).
    pub psi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EnrollmentSection {
    pub mode: EnrollmentMode,
    pub rate: f64,
    pub accrual: f64,
    pub min_followup: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct DesignSection {
    pub alpha: f64,
    pub beta: f64,
    /// Allocation fractions (control, experimental).
    pub allocation: [f64; 2],
    /// Information fractions of the look schedule; last must be 1.
    pub look_fractions: Vec<f64>,
    /// Subintervals of the sizing recursion. Defaults to the converged fine
    /// grid; set to the number of study months to reproduce published
    /// monthly-step tables.
    pub intervals: Option<usize>,
    /// Weight-timing convention of the test statistic.
    #[serde(default)]
    pub weight_timing: WeightTiming,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GridSection {
    pub delays: Vec<f64>,
    /// `[rho, gamma]` pairs.
    pub weights: Vec<[f64; 2]>,
    pub truth: Truth,
    pub sizing: SizingPolicy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AdaptiveSection {
    pub rule: ReestimationRule,
    pub cp_min: f64,
    /// Event cap as a multiple of the planned total events.
    pub max_events_ratio: f64,
    /// Per-event penalty of the optimizing rule; defaults to
    /// 0.25 / planned events.
    pub eta: Option<f64>,
    #[serde(default)]
    pub fixed_increase_policy: FixedIncreasePolicy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunSection {
    pub replicates: usize,
    pub seed: u64,
    /// Worker threads; 0 picks the number of cores. Results do not depend
    /// on this value.
    #[serde(default)]
    pub workers: usize,
    /// Absolute tolerance of the type-I recalibration.
    #[serde(default = "default_recal_tolerance")]
    pub recalibration_tolerance: f64,
}

fn default_recal_tolerance() -> f64 {
    0.002
}

/// The full parsed configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub model: ModelSection,
    pub enrollment: EnrollmentSection,
    pub design: DesignSection,
    pub grid: GridSection,
    pub adaptive: Option<AdaptiveSection>,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.model.lambda, self.model.control_median) {
            (Some(_), Some(_)) => {
                bail!("model: give exactly one of `lambda` and `control-median`, not both")
            }
            (None, None) => bail!("model: one of `lambda` or `control-median` is required"),
            _ => {}
        }
        if self.grid.delays.is_empty() {
            bail!("grid.delays: at least one delay is required");
        }
        if self.grid.weights.is_empty() {
            bail!("grid.weights: at least one (rho, gamma) pair is required");
        }
        if self.run.replicates == 0 {
            bail!("run.replicates: must be positive");
        }
        // surface core-level validation early with field names
        self.lambda().context("model")?;
        self.enrollment().context("enrollment")?;
        self.weight_specs().context("grid.weights")?;
        self.scenario_base().context("design")?;
        let spec = self.design_spec(self.weight_specs()?[0], 0.0).context("design")?;
        if let Some(a) = &self.adaptive {
            if !(a.max_events_ratio >= 1.0) {
                bail!("adaptive.max-events-ratio: must be at least 1");
            }
            if !(a.cp_min > 0.0 && a.cp_min < 1.0 - self.design.beta) {
                bail!(
                    "adaptive.cp-min: must lie in (0, 1 - beta) = (0, {})",
                    1.0 - self.design.beta
                );
            }
            if self.design.look_fractions.len() != 2 {
                bail!("design.look-fractions: adaptive runs need exactly one interim look");
            }
        }
        drop(spec);
        Ok(())
    }

    pub fn lambda(&self) -> Result<f64> {
        if let Some(l) = self.model.lambda {
            return Ok(l);
        }
        let median = self.model.control_median.unwrap();
        if !(median > 0.0) {
            bail!("control-median must be positive, got {median}");
        }
        Ok(std::f64::consts::LN_2 / median)
    }

    pub fn enrollment(&self) -> Result<EnrollmentModel> {
        Ok(EnrollmentModel::new(
            self.enrollment.mode,
            self.enrollment.rate,
            self.enrollment.accrual,
            self.enrollment.min_followup,
        )?)
    }

    pub fn intervals(&self) -> usize {
        self.design.intervals.unwrap_or_else(|| {
            DesignSpec::fine_grid(self.enrollment.accrual + self.enrollment.min_followup)
        })
    }

    pub fn weight_specs(&self) -> Result<Vec<WeightSpec>> {
        self.grid
            .weights
            .iter()
            .map(|w| Ok(WeightSpec::new(w[0], w[1])?))
            .collect()
    }

    pub fn scenario_grid(&self) -> Result<ScenarioGrid> {
        Ok(ScenarioGrid {
            delays: self.grid.delays.clone(),
            weights: self.weight_specs()?,
            truth: self.grid.truth,
            sizing: self.grid.sizing,
        })
    }

    pub fn scenario_base(&self) -> Result<ScenarioBase> {
        Ok(ScenarioBase {
            lambda: self.lambda()?,
            psi: self.model.psi,
            enrollment: self.enrollment()?,
            alpha: self.design.alpha,
            beta: self.design.beta,
            fractions: self.design.look_fractions.clone(),
            intervals: self.intervals(),
            timing: self.design.weight_timing,
        })
    }

    pub fn design_spec(&self, weights: WeightSpec, delay: f64) -> Result<DesignSpec> {
        Ok(DesignSpec::new(
            dte_core::DelayedEffectModel::new(self.lambda()?, self.model.psi, delay)?,
            self.enrollment.accrual,
            self.enrollment.min_followup,
            (self.design.allocation[0], self.design.allocation[1]),
            self.design.alpha,
            self.design.beta,
            weights,
            self.intervals(),
        )?)
    }

    /// Adaptive configuration resolved against a planned event total.
    pub fn adaptive_config(&self, planned_events: f64) -> Option<AdaptiveConfig> {
        self.adaptive.as_ref().map(|a| AdaptiveConfig {
            cp_min: a.cp_min,
            max_events: a.max_events_ratio * planned_events,
            eta: a.eta.unwrap_or_else(|| AdaptiveConfig::default_eta(planned_events)),
            rule: a.rule,
            fixed_increase_policy: a.fixed_increase_policy,
        })
    }
}

/// Flag overrides applied on top of the file; flags win.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub workers: Option<usize>,
}

pub fn apply_overrides(cfg: &mut RunConfig, o: Overrides) {
    if let Some(seed) = o.seed {
        cfg.run.seed = seed;
    }
    if let Some(replicates) = o.replicates {
        cfg.run.replicates = replicates;
    }
    if let Some(workers) = o.workers {
        cfg.run.workers = workers;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const EXAMPLE: &str = r#"
[model]
control-median = 6.0
psi = 0.6667

[enrollment]
mode = "per-subject-poisson"
rate = 10.0
accrual = 17.5
min-followup = 7.5

[design]
alpha = 0.025
beta = 0.10
allocation = [0.5, 0.5]
look-fractions = [0.75, 1.0]

[grid]
delays = [0.0, 1.0]
weights = [[0.0, 0.0]]
truth = "alternative"
sizing = "fixed-at-zero-delay"

[run]
replicates = 100
seed = 1
"#;

    #[test]
    fn parses_and_validates() {
        let cfg: RunConfig = toml::from_str(EXAMPLE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.intervals(), 2500);
        assert!((cfg.lambda().unwrap() - std::f64::consts::LN_2 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = EXAMPLE.replace("[run]", "[run]\nbogus-key = 1");
        let err = toml::from_str::<RunConfig>(&bad).unwrap_err().to_string();
        assert!(err.contains("bogus-key"), "{err}");
    }

    #[test]
    fn requires_exactly_one_hazard_input() {
        let both = EXAMPLE.replace("control-median = 6.0", "control-median = 6.0\nlambda = 0.1");
        let cfg: RunConfig = toml::from_str(&both).unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("exactly one"), "{err}");
    }

    #[test]
    fn empty_delays_rejected_with_field_name() {
        let bad = EXAMPLE.replace("delays = [0.0, 1.0]", "delays = []");
        let cfg: RunConfig = toml::from_str(&bad).unwrap();
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("grid.delays"), "{err}");
    }

    #[test]
    fn flags_win_over_file() {
        let mut cfg: RunConfig = toml::from_str(EXAMPLE).unwrap();
        apply_overrides(
            &mut cfg,
            Overrides { seed: Some(9), replicates: Some(77), workers: Some(2) },
        );
        assert_eq!((cfg.run.seed, cfg.run.replicates, cfg.run.workers), (9, 77, 2));
    }
}
