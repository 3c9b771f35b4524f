//! Bootstrap-aggregated regression trees; the spread of tree outputs is the uncertainty.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeConfig};
use super::TargetDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: None,
            min_samples_leaf: 1,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config("forest needs at least one tree"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::config("min_samples_leaf must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    dim: usize,
    trees: Vec<RegressionTree>,
}

pub fn fit_forest(data: &TargetDataset, n_trees: usize, rng_seed: u64) -> Result<RandomForest> {
    fit_forest_with(
        data,
        &ForestConfig {
            n_trees,
            ..ForestConfig::default()
        },
        rng_seed,
    )
}

pub fn fit_forest_with(data: &TargetDataset, cfg: &ForestConfig, rng_seed: u64) -> Result<RandomForest> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.len();
    let dim = data.dim();
    let tree_cfg = TreeConfig {
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
        max_features: Some(dim.div_ceil(3).max(1)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let trees = (0..cfg.n_trees)
        .map(|_| {
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            RegressionTree::fit(data.features(), data.targets(), sample, tree_cfg, Some(&mut rng)).tree
        })
        .collect();
    Ok(RandomForest { dim, trees })
}

impl RandomForest {
    /// Mean and population standard deviation of the tree outputs.
    pub fn predict(&self, phi: &[f64]) -> Result<(f64, f64)> {
        if phi.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: phi.len(),
            });
        }
        let outputs: Vec<f64> = self.trees.iter().map(|t| t.predict(phi)).collect();
        let n = outputs.len() as f64;
        let mean = outputs.iter().sum::<f64>() / n;
        // Agreeing trees must report exactly zero spread.
        if outputs.iter().all(|&v| v == outputs[0]) {
            return Ok((outputs[0], 0.0));
        }
        let var = outputs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok((mean, var.sqrt()))
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[cfg(test)]
    pub(crate) fn absorb(&mut self, other: RandomForest) {
        self.trees.extend(other.trees);
    }
}

pub fn predict_forest(model: &RandomForest, phi: &[f64]) -> Result<(f64, f64)> {
    model.predict(phi)
}
