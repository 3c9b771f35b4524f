//! CART regression tree with a squared-error split criterion.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` examines all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    cfg: TreeConfig,
    nodes: Vec<Node>,
    leaf_members: Vec<(usize, Vec<usize>)>,
}

fn mean(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

impl Builder<'_> {
    fn push_leaf(&mut self, idx: Vec<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: mean(self.y, &idx),
        });
        self.leaf_members.push((id, idx));
        id
    }

    /// Best split of `idx` on `feature`: (sse, threshold, n_left) over sorted order.
    fn best_split_on(&self, idx: &mut [usize], feature: usize) -> Option<(f64, f64)> {
        let x = self.x;
        idx.sort_by(|&a, &b| x[a][feature].total_cmp(&x[b][feature]));
        let n = idx.len();
        let min_leaf = self.cfg.min_samples_leaf.max(1);
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        let mut best: Option<(f64, f64)> = None;
        for k in 0..n - 1 {
            let yi = self.y[idx[k]];
            left_sum += yi;
            left_sq += yi * yi;
            let n_left = k + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let a = x[idx[k]][feature];
            let b = x[idx[k + 1]][feature];
            if !(b > a) {
                continue;
            }
            let right_sum = total - left_sum;
            let right_sq = total_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / n_left as f64)
                + (right_sq - right_sum * right_sum / n_right as f64);
            let threshold = a + 0.5 * (b - a);
            let threshold = if threshold < b { threshold } else { a };
            if best.is_none_or(|(s, _)| sse < s) {
                best = Some((sse, threshold));
            }
        }
        best
    }

    fn build(&mut self, mut idx: Vec<usize>, depth: usize, rng: &mut Option<&mut ChaCha8Rng>) -> usize {
        let n = idx.len();
        let min_leaf = self.cfg.min_samples_leaf.max(1);
        let depth_ok = self.cfg.max_depth.is_none_or(|d| depth < d);
        let first = self.y[idx[0]];
        let pure = idx.iter().all(|&i| self.y[i] == first);
        if !depth_ok || pure || n < 2 * min_leaf {
            return self.push_leaf(idx);
        }

        let d = self.x[idx[0]].len();
        let mut features: Vec<usize> = (0..d).collect();
        let wanted = match self.cfg.max_features {
            Some(m) => {
                if let Some(rng) = rng.as_deref_mut() {
                    features.shuffle(rng);
                }
                m.clamp(1, d)
            }
            None => d,
        };

        let parent_sse = {
            let m = mean(self.y, &idx);
            idx.iter().map(|&i| (self.y[i] - m).powi(2)).sum::<f64>()
        };
        let mut best: Option<(f64, usize, f64)> = None;
        let mut examined = 0;
        for &feature in &features {
            // Like common CART implementations, constant features do not count
            // toward the per-split feature quota.
            if examined >= wanted {
                break;
            }
            let first = self.x[idx[0]][feature];
            if idx.iter().all(|&i| self.x[i][feature] == first) {
                continue;
            }
            examined += 1;
            if let Some((sse, threshold)) = self.best_split_on(&mut idx, feature) {
                if best.is_none_or(|(s, _, _)| sse < s) {
                    best = Some((sse, feature, threshold));
                }
            }
        }
        let Some((sse, feature, threshold)) = best else {
            return self.push_leaf(idx);
        };
        if !(sse < parent_sse) {
            return self.push_leaf(idx);
        }

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let left = self.build(left_idx, depth + 1, rng);
        let right = self.build(right_idx, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// A fitted tree together with the training rows that reached each leaf.
pub(crate) struct FittedTree {
    pub tree: RegressionTree,
    pub leaf_members: Vec<(usize, Vec<usize>)>,
}

impl RegressionTree {
    /// Fit on the rows listed in `sample` (repeats allowed, as in a bootstrap).
    pub(crate) fn fit(
        x: &[Vec<f64>],
        y: &[f64],
        sample: Vec<usize>,
        cfg: TreeConfig,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> FittedTree {
        assert!(!sample.is_empty(), "cannot fit a tree on no samples");
        let mut builder = Builder {
            x,
            y,
            cfg,
            nodes: Vec::new(),
            leaf_members: Vec::new(),
        };
        builder.build(sample, 0, &mut rng);
        FittedTree {
            tree: RegressionTree {
                nodes: builder.nodes,
            },
            leaf_members: builder.leaf_members,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub(crate) fn leaf_index(&self, x: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub(crate) fn set_leaf_value(&mut self, id: usize, v: f64) {
        if let Node::Leaf { value } = &mut self.nodes[id] {
            *value = v;
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}
