//! Gradient-boosted trees for mean (squared loss) and quantile (pinball loss) regression.

use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeConfig};
use super::TargetDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Squared,
    Quantile(f64),
}

impl Loss {
    fn validate(&self) -> Result<()> {
        match *self {
            Loss::Quantile(a) if !(a > 0.0 && a < 1.0) => {
                Err(Error::config(format!("quantile level must lie in (0, 1), got {a}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            n_stages: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 1,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be finite and non-negative"));
        }
        if self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(Error::config("max_depth and min_samples_leaf must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    loss: Loss,
    dim: usize,
    init: f64,
    learning_rate: f64,
    stages: Vec<RegressionTree>,
}

/// `max(α(z − ẑ), (α − 1)(z − ẑ))`.
pub fn pinball_loss(z: f64, zhat: f64, alpha: f64) -> f64 {
    let r = z - zhat;
    (alpha * r).max((alpha - 1.0) * r)
}

/// Lower empirical α-quantile: the smallest value whose empirical CDF reaches α.
fn quantile(values: &mut [f64], alpha: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let k = ((alpha * n as f64 - 1e-9).ceil() as usize).clamp(1, n) - 1;
    values[k]
}

pub fn fit_gb(
    data: &TargetDataset,
    loss: Loss,
    n_stages: usize,
    learning_rate: f64,
    max_depth: usize,
) -> Result<GradientBoosting> {
    fit_gb_with(
        data,
        loss,
        &BoostConfig {
            n_stages,
            learning_rate,
            max_depth,
            ..BoostConfig::default()
        },
    )
}

pub fn fit_gb_with(data: &TargetDataset, loss: Loss, cfg: &BoostConfig) -> Result<GradientBoosting> {
    loss.validate()?;
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let x = data.features();
    let y = data.targets();
    let n = y.len();
    let init = match loss {
        Loss::Squared => y.iter().sum::<f64>() / n as f64,
        Loss::Quantile(a) => quantile(&mut y.to_vec(), a),
    };
    let tree_cfg = TreeConfig {
        max_depth: Some(cfg.max_depth),
        min_samples_leaf: cfg.min_samples_leaf,
        max_features: None,
    };
    let mut f = vec![init; n];
    let mut stages = Vec::with_capacity(cfg.n_stages);
    for _ in 0..cfg.n_stages {
        let grad: Vec<f64> = match loss {
            Loss::Squared => y.iter().zip(&f).map(|(z, fz)| z - fz).collect(),
            Loss::Quantile(a) => y
                .iter()
                .zip(&f)
                .map(|(z, fz)| if z < fz { a - 1.0 } else { a })
                .collect(),
        };
        let fitted = RegressionTree::fit(x, &grad, (0..n).collect(), tree_cfg, None);
        let mut tree = fitted.tree;
        if let Loss::Quantile(a) = loss {
            // Line search per leaf: the pinball-optimal step is the α-quantile of the residuals.
            for (leaf, members) in &fitted.leaf_members {
                let mut r: Vec<f64> = members.iter().map(|&i| y[i] - f[i]).collect();
                tree.set_leaf_value(*leaf, quantile(&mut r, a));
            }
        }
        for (i, fi) in f.iter_mut().enumerate() {
            *fi += cfg.learning_rate * tree.predict(&x[i]);
        }
        stages.push(tree);
    }
    Ok(GradientBoosting {
        loss,
        dim: data.dim(),
        init,
        learning_rate: cfg.learning_rate,
        stages,
    })
}

impl GradientBoosting {
    pub fn predict(&self, phi: &[f64]) -> Result<f64> {
        if phi.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: phi.len(),
            });
        }
        Ok(self
            .stages
            .iter()
            .fold(self.init, |acc, t| acc + self.learning_rate * t.predict(phi)))
    }

    pub fn initial_value(&self) -> f64 {
        self.init
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }
}
