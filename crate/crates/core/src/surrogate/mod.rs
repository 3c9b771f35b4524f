//! Online surrogates for the exploratory stage.
//!
//! Each terminal target (battery SoC, tank median temperature) gets its own
//! model trained on `(irradiance forecast, target)` pairs gathered from
//! exploratory solves. A random forest reports the spread of its trees; a
//! boosted ensemble pairs a mean model with an upper-quantile model. The upper
//! bound decides whether the exploratory solve can be skipped.

mod boosting;
mod forest;
mod tree;

pub use boosting::{fit_gb, fit_gb_with, pinball_loss, BoostConfig, GradientBoosting, Loss};
pub use forest::{fit_forest, fit_forest_with, predict_forest, ForestConfig, RandomForest};
pub use tree::{RegressionTree, TreeConfig};

use serde::{Deserialize, Serialize};

use crate::analytics::{ExplorationEvent, TargetEvent};
use crate::error::{Error, Result};
use crate::plant::TerminalTargets;

/// 48 h of irradiance at 2 h spacing.
pub const FEATURE_DIM: usize = 24;

pub fn validate_features(phi: &[f64]) -> Result<()> {
    if phi.len() != FEATURE_DIM {
        return Err(Error::DimensionMismatch {
            expected: FEATURE_DIM,
            found: phi.len(),
        });
    }
    if let Some(v) = phi.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::validation(format!("irradiance feature {v} is negative or not finite")));
    }
    Ok(())
}

/// Training pairs for one target.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetDataset {
    features: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl TargetDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, phi: Vec<f64>, target: f64) -> Result<()> {
        if let Some(first) = self.features.first() {
            if first.len() != phi.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: phi.len(),
                });
            }
        }
        if phi.is_empty() || !target.is_finite() || phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("training pair must be finite and non-empty"));
        }
        self.features.push(phi);
        self.targets.push(target);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn clear(&mut self) {
        self.features.clear();
        self.targets.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Rf,
    Gb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UncertaintyConfig {
    pub model_kind: ModelKind,
    /// Spread multiplier for the forest bound.
    pub kappa: f64,
    /// Quantile level of the boosted upper model.
    pub alpha_quantile: f64,
    pub theta_soc: f64,
    /// °C
    pub theta_t_median: f64,
    /// Hours after a reset during which every cycle computes.
    pub t_warmup: f64,
    /// `None` disables the periodic trigger.
    pub t_periodic: Option<f64>,
    pub forest: ForestConfig,
    pub boost: BoostConfig,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        Self {
            model_kind: ModelKind::Rf,
            kappa: 1.0,
            alpha_quantile: 0.95,
            theta_soc: 0.01,
            theta_t_median: 71.0,
            t_warmup: 240.0,
            t_periodic: Some(120.0),
            forest: ForestConfig::default(),
            boost: BoostConfig::default(),
        }
    }
}

impl UncertaintyConfig {
    pub fn rf(kappa: f64) -> Self {
        Self {
            model_kind: ModelKind::Rf,
            kappa,
            ..Self::default()
        }
    }

    pub fn gb() -> Self {
        Self {
            model_kind: ModelKind::Gb,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::config("kappa must be positive"));
        }
        if !(self.alpha_quantile > 0.0 && self.alpha_quantile < 1.0) {
            return Err(Error::config("alpha_quantile must lie in (0, 1)"));
        }
        if !(self.t_warmup >= 0.0) {
            return Err(Error::config("t_warmup must be non-negative"));
        }
        if let Some(p) = self.t_periodic {
            if !(p > 0.0) {
                return Err(Error::config("t_periodic must be positive"));
            }
        }
        self.forest.validate()?;
        self.boost.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetModel {
    Rf {
        forest: RandomForest,
        kappa: f64,
    },
    Gb {
        mean: GradientBoosting,
        upper: GradientBoosting,
    },
}

impl TargetModel {
    pub fn fit(data: &TargetDataset, cfg: &UncertaintyConfig, rng_seed: u64) -> Result<Self> {
        Ok(match cfg.model_kind {
            ModelKind::Rf => TargetModel::Rf {
                forest: fit_forest_with(data, &cfg.forest, rng_seed)?,
                kappa: cfg.kappa,
            },
            ModelKind::Gb => TargetModel::Gb {
                mean: fit_gb_with(data, Loss::Squared, &cfg.boost)?,
                upper: fit_gb_with(data, Loss::Quantile(cfg.alpha_quantile), &cfg.boost)?,
            },
        })
    }

    pub fn predict(&self, phi: &[f64]) -> Result<Prediction> {
        match self {
            TargetModel::Rf { forest, kappa } => {
                let (mean, std) = forest.predict(phi)?;
                Ok(Prediction {
                    mean,
                    upper: mean + kappa * std,
                })
            }
            TargetModel::Gb { mean, upper } => Ok(Prediction {
                mean: mean.predict(phi)?,
                upper: upper.predict(phi)?,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetModels {
    pub soc: TargetModel,
    pub t_median: TargetModel,
}

/// Datasets and fitted models for both targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateState {
    pub soc_data: TargetDataset,
    pub t_median_data: TargetDataset,
    pub models: Option<TargetModels>,
    rng_seed: u64,
    fits: u64,
}

impl SurrogateState {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            soc_data: TargetDataset::new(),
            t_median_data: TargetDataset::new(),
            models: None,
            rng_seed,
            fits: 0,
        }
    }

    /// Drops all data and models (price-regime reset).
    pub fn reset(&mut self) {
        self.soc_data.clear();
        self.t_median_data.clear();
        self.models = None;
    }

    pub fn dataset_len(&self) -> usize {
        self.soc_data.len()
    }

    pub fn predict(&self, phi: &[f64]) -> Result<Option<[Prediction; 2]>> {
        match &self.models {
            None => Ok(None),
            Some(m) => Ok(Some([m.soc.predict(phi)?, m.t_median.predict(phi)?])),
        }
    }

    fn append_and_retrain(&mut self, phi: &[f64], targets: &TerminalTargets, cfg: &UncertaintyConfig) -> Result<()> {
        self.soc_data.push(phi.to_vec(), targets.soc_target)?;
        self.t_median_data.push(phi.to_vec(), targets.t_median_target)?;
        let base = self
            .rng_seed
            .wrapping_add(self.fits.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        self.fits += 1;
        let (soc, t_median) = rayon::join(
            || TargetModel::fit(&self.soc_data, cfg, base),
            || TargetModel::fit(&self.t_median_data, cfg, base ^ 0x5555_5555_5555_5555),
        );
        self.models = Some(TargetModels {
            soc: soc?,
            t_median: t_median?,
        });
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionPath {
    Predict,
    Compute,
}

/// Which bypass conditions fired for a cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triggers {
    pub warmup: bool,
    pub periodic: bool,
    pub uncertainty: bool,
    pub no_model: bool,
}

impl Triggers {
    pub fn any(&self) -> bool {
        self.warmup || self.periodic || self.uncertainty || self.no_model
    }

    pub fn uncertainty_only(&self) -> bool {
        self.uncertainty && !self.warmup && !self.periodic && !self.no_model
    }

    /// Dominant cause, in warm-up, periodic, missing-model, uncertainty order.
    pub fn cause(&self) -> Option<TriggerCause> {
        if self.warmup {
            Some(TriggerCause::Warmup)
        } else if self.periodic {
            Some(TriggerCause::Periodic)
        } else if self.no_model {
            Some(TriggerCause::NoModel)
        } else if self.uncertainty {
            Some(TriggerCause::Uncertainty)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerCause {
    Warmup,
    Periodic,
    NoModel,
    Uncertainty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub targets: TerminalTargets,
    pub path: DecisionPath,
    pub triggers: Triggers,
    /// `[soc, t_median]` model outputs when a model existed before the decision.
    pub predictions: Option<[Prediction; 2]>,
    pub event: Option<ExplorationEvent>,
    /// Objective evaluations spent by the exploratory solve (0 on the predict path).
    pub evaluations: usize,
}

fn is_multiple(t: f64, period: f64) -> bool {
    let r = t.rem_euclid(period);
    r < 1e-9 || period - r < 1e-9
}

/// Chooses between the surrogate's targets and an exploratory solve.
///
/// `compute` runs the exploratory stage and returns its targets with the
/// number of objective evaluations it spent.
pub fn decide_targets<F>(
    state: &mut SurrogateState,
    phi: &[f64],
    t_k: f64,
    t_reset: f64,
    cfg: &UncertaintyConfig,
    compute: F,
) -> Result<Decision>
where
    F: FnOnce() -> Result<(TerminalTargets, usize)>,
{
    validate_features(phi)?;
    let predictions = state.predict(phi)?;
    let triggers = Triggers {
        warmup: t_k - t_reset < cfg.t_warmup,
        periodic: cfg.t_periodic.is_some_and(|p| is_multiple(t_k, p)),
        uncertainty: predictions.is_some_and(|[soc, tm]| soc.upper >= cfg.theta_soc || tm.upper >= cfg.theta_t_median),
        no_model: predictions.is_none(),
    };

    if !triggers.any() {
        let [soc, tm] = predictions.expect("a model exists when no trigger fired");
        return Ok(Decision {
            targets: TerminalTargets {
                soc_target: soc.mean,
                t_median_target: tm.mean,
            },
            path: DecisionPath::Predict,
            triggers,
            predictions,
            event: None,
            evaluations: 0,
        });
    }

    let (targets, evaluations) = compute()?;
    let event = match predictions {
        Some([soc, tm]) if triggers.uncertainty_only() => Some(ExplorationEvent {
            t_hours: t_k,
            trigger_cause: TriggerCause::Uncertainty,
            soc: TargetEvent {
                y_hat: soc.mean,
                u: soc.upper,
                y: targets.soc_target,
                theta: cfg.theta_soc,
            },
            t_median: TargetEvent {
                y_hat: tm.mean,
                u: tm.upper,
                y: targets.t_median_target,
                theta: cfg.theta_t_median,
            },
            features: phi.to_vec(),
        }),
        _ => None,
    };
    state.append_and_retrain(phi, &targets, cfg)?;
    Ok(Decision {
        targets,
        path: DecisionPath::Compute,
        triggers,
        predictions,
        event,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(v: f64) -> Vec<f64> {
        vec![v; FEATURE_DIM]
    }

    fn fixed(soc: f64, t: f64) -> impl FnOnce() -> Result<(TerminalTargets, usize)> {
        move || {
            Ok((
                TerminalTargets {
                    soc_target: soc,
                    t_median_target: t,
                },
                4000,
            ))
        }
    }

    /// Forest trained on a single pair predicts it with zero spread.
    fn state_with(soc: f64, t: f64) -> SurrogateState {
        let mut s = SurrogateState::new(1);
        let cfg = UncertaintyConfig::rf(1.0);
        s.append_and_retrain(&phi(100.0), &TerminalTargets { soc_target: soc, t_median_target: t }, &cfg)
            .unwrap();
        s
    }

    fn never_called() -> Result<(TerminalTargets, usize)> {
        panic!("compute path was not expected")
    }

    #[test]
    fn warmup_forces_compute() {
        let mut s = state_with(0.0, 70.0);
        let d = decide_targets(&mut s, &phi(1.0), 100.0, 0.0, &UncertaintyConfig::default(), fixed(0.2, 75.0)).unwrap();
        assert_eq!(d.path, DecisionPath::Compute);
        assert!(d.triggers.warmup);
        assert_eq!(d.evaluations, 4000);
        assert!(d.event.is_none());
        assert_eq!(s.dataset_len(), 2);
    }

    #[test]
    fn periodic_trigger_at_multiple() {
        let mut s = state_with(0.0, 70.0);
        let d = decide_targets(&mut s, &phi(1.0), 360.0, 0.0, &UncertaintyConfig::default(), fixed(0.0, 70.0)).unwrap();
        assert_eq!(d.path, DecisionPath::Compute);
        assert!(d.triggers.periodic && !d.triggers.warmup);
    }

    #[test]
    fn no_model_forces_compute_even_after_warmup() {
        let mut s = SurrogateState::new(0);
        let d = decide_targets(&mut s, &phi(1.0), 1000.0, 0.0, &UncertaintyConfig::default(), fixed(0.0, 70.0)).unwrap();
        assert_eq!(d.path, DecisionPath::Compute);
        assert!(d.triggers.no_model);
        assert!(s.models.is_some());
    }

    #[test]
    fn ucb_above_threshold_computes_and_records_event() {
        // Oracle: UCB = 0 + 2·0.02 = 0.04 ≥ 0.01.
        let mut s = SurrogateState::new(0);
        s.models = Some(TargetModels {
            soc: fake_model(0.0, 0.02, 2.0),
            t_median: fake_model(70.0, 0.0, 2.0),
        });
        let cfg = UncertaintyConfig::rf(2.0);
        let d = decide_targets(&mut s, &phi(1.0), 1000.0, 0.0, &cfg, fixed(0.3, 72.0)).unwrap();
        assert_eq!(d.path, DecisionPath::Compute);
        let [soc, _] = d.predictions.unwrap();
        assert!((soc.upper - 0.04).abs() < 1e-12);
        let e = d.event.unwrap();
        assert_eq!(e.trigger_cause, TriggerCause::Uncertainty);
        assert_eq!(e.soc.y, 0.3);
        assert_eq!(e.t_median.y, 72.0);
        assert_eq!(e.soc.theta, 0.01);
    }

    #[test]
    fn bounds_below_thresholds_predict() {
        // Oracle: soc UCB 0.004, t_median UCB 70.5 < 71.
        let mut s = SurrogateState::new(0);
        s.models = Some(TargetModels {
            soc: fake_model(0.0, 0.004, 1.0),
            t_median: fake_model(70.0, 0.5, 1.0),
        });
        let d = decide_targets(&mut s, &phi(1.0), 1000.0, 0.0, &UncertaintyConfig::rf(1.0), never_called).unwrap();
        assert_eq!(d.path, DecisionPath::Predict);
        assert!((d.targets.soc_target - 0.0).abs() < 1e-12);
        assert!((d.targets.t_median_target - 70.0).abs() < 1e-12);
        assert_eq!(d.evaluations, 0);
        assert_eq!(s.dataset_len(), 0);
    }

    #[test]
    fn threshold_comparison_is_inclusive() {
        let mut s = state_with(0.01, 70.0);
        let d = decide_targets(&mut s, &phi(100.0), 1001.0, 0.0, &UncertaintyConfig::rf(1.0), fixed(0.0, 70.0)).unwrap();
        assert!(d.triggers.uncertainty);
    }

    #[test]
    fn gb_models_train_and_predict() {
        let cfg = UncertaintyConfig::gb();
        let mut s = SurrogateState::new(3);
        for i in 0..5 {
            let d = decide_targets(&mut s, &phi(i as f64), i as f64 * 24.0, 0.0, &cfg, fixed(0.0, 70.0)).unwrap();
            assert_eq!(d.path, DecisionPath::Compute);
        }
        let p = s.predict(&phi(2.0)).unwrap().unwrap();
        assert_eq!(p[0].mean, 0.0);
        assert_eq!(p[1].upper, 70.0);
        let json = serde_json::to_string(&s).unwrap();
        let back: SurrogateState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn reset_clears_everything() {
        let mut s = state_with(0.5, 80.0);
        s.reset();
        assert_eq!(s.dataset_len(), 0);
        assert!(s.models.is_none());
    }

    #[test]
    fn rejects_bad_features() {
        let mut s = SurrogateState::new(0);
        let cfg = UncertaintyConfig::default();
        assert!(decide_targets(&mut s, &[1.0; 3], 0.0, 0.0, &cfg, never_called).is_err());
        let mut neg = phi(1.0);
        neg[4] = -1.0;
        assert!(decide_targets(&mut s, &neg, 0.0, 0.0, &cfg, never_called).is_err());
    }

    /// Forest whose trees output `mean ± std` in equal halves.
    fn fake_model(mean: f64, std: f64, kappa: f64) -> TargetModel {
        let mut d = TargetDataset::new();
        d.push(vec![0.0; FEATURE_DIM], mean - std).unwrap();
        let mut lo = fit_forest(&d, 1, 0).unwrap();
        let mut d2 = TargetDataset::new();
        d2.push(vec![0.0; FEATURE_DIM], mean + std).unwrap();
        let hi = fit_forest(&d2, 1, 0).unwrap();
        lo.absorb(hi);
        TargetModel::Rf { forest: lo, kappa }
    }
}
