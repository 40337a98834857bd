//! Random-forest regression from scratch: full-depth CART trees on
//! bootstrap resamples, variance-reduction splits considering every
//! feature at every node (the per-split feature sample equals the feature
//! count for regression), per-leaf mean vectors for multi-output targets,
//! predictions averaged over trees.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::stream_seed;

#[derive(Debug, Clone)]
pub struct RfConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl RfConfig {
    pub fn new(n_trees: usize, seed: u64) -> Self {
        RfConfig {
            n_trees,
            bootstrap: true,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        value: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<Vec<Node>>,
    n_outputs: usize,
}

struct TreeBuilder<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DMatrix<f64>,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    fn leaf_value(&self, indices: &[usize]) -> Vec<f64> {
        let t = self.y.ncols();
        let mut mean = vec![0.0; t];
        for &i in indices {
            for o in 0..t {
                mean[o] += self.y[(i, o)];
            }
        }
        let inv = 1.0 / indices.len() as f64;
        for v in &mut mean {
            *v *= inv;
        }
        mean
    }

    /// Total squared error of a candidate split, scanned per feature with
    /// prefix sums over the sorted node rows.
    fn best_split(&self, indices: &[usize]) -> Option<(usize, f64, f64)> {
        let n = indices.len();
        let t = self.y.ncols();
        let mut total_sum = vec![0.0; t];
        let mut total_sq = 0.0;
        for &i in indices {
            for o in 0..t {
                let v = self.y[(i, o)];
                total_sum[o] += v;
                total_sq += v * v;
            }
        }
        let parent_sse =
            total_sq - total_sum.iter().map(|s| s * s).sum::<f64>() / n as f64;
        if parent_sse <= 1e-12 {
            return None;
        }

        let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, child sse)
        let mut sorted = indices.to_vec();
        let mut left_sum = vec![0.0; t];
        for feature in 0..self.x.ncols() {
            sorted.sort_by(|&a, &b| {
                self.x[(a, feature)]
                    .total_cmp(&self.x[(b, feature)])
                    .then(a.cmp(&b))
            });
            left_sum.iter_mut().for_each(|v| *v = 0.0);
            for split_at in 1..n {
                let prev = sorted[split_at - 1];
                for o in 0..t {
                    left_sum[o] += self.y[(prev, o)];
                }
                let lo = self.x[(prev, feature)];
                let hi = self.x[(sorted[split_at], feature)];
                if lo == hi {
                    continue;
                }
                let n_left = split_at as f64;
                let n_right = (n - split_at) as f64;
                let mut left_norm = 0.0;
                let mut right_norm = 0.0;
                for o in 0..t {
                    left_norm += left_sum[o] * left_sum[o];
                    let r = total_sum[o] - left_sum[o];
                    right_norm += r * r;
                }
                let child_sse = total_sq - left_norm / n_left - right_norm / n_right;
                let threshold = 0.5 * (lo + hi);
                let better = match best {
                    None => true,
                    Some((_, _, sse)) => child_sse < sse - 1e-15,
                };
                if better {
                    best = Some((feature, threshold, child_sse));
                }
            }
        }
        // Require an actual improvement over keeping the node whole.
        best.filter(|&(_, _, sse)| sse < parent_sse - 1e-12)
    }

    fn grow(&mut self, indices: Vec<usize>) -> usize {
        if indices.len() < 2 {
            let value = self.leaf_value(&indices);
            self.nodes.push(Node::Leaf { value });
            return self.nodes.len() - 1;
        }
        match self.best_split(&indices) {
            None => {
                let value = self.leaf_value(&indices);
                self.nodes.push(Node::Leaf { value });
                self.nodes.len() - 1
            }
            Some((feature, threshold, _)) => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                    .into_iter()
                    .partition(|&i| self.x[(i, feature)] <= threshold);
                let left = self.grow(left_idx);
                let right = self.grow(right_idx);
                self.nodes.push(Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                });
                self.nodes.len() - 1
            }
        }
    }
}

pub fn rfr_fit(x: &DMatrix<f64>, y: &DMatrix<f64>, cfg: &RfConfig) -> Forest {
    assert_eq!(x.nrows(), y.nrows(), "feature/target row mismatch");
    assert!(x.nrows() > 0, "empty training set");
    assert!(cfg.n_trees >= 1, "need at least one tree");
    let n = x.nrows();
    let trees = (0..cfg.n_trees)
        .map(|tree_index| {
            let indices: Vec<usize> = if cfg.bootstrap {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, tree_index as u64));
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut builder = TreeBuilder {
                x,
                y,
                nodes: Vec::new(),
            };
            builder.grow(indices);
            builder.nodes
        })
        .collect();
    Forest {
        trees,
        n_outputs: y.ncols(),
    }
}

fn tree_predict<'a>(nodes: &'a [Node], x: &DMatrix<f64>, row: usize) -> &'a [f64] {
    // The root is always the last node pushed.
    let mut at = nodes.len() - 1;
    loop {
        match &nodes[at] {
            Node::Leaf { value } => return value,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                at = if x[(row, *feature)] <= *threshold {
                    *left
                } else {
                    *right
                };
            }
        }
    }
}

/// Mean prediction over all trees.
pub fn rfr_predict(forest: &Forest, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), forest.n_outputs);
    for nodes in &forest.trees {
        for row in 0..x.nrows() {
            let leaf = tree_predict(nodes, x, row);
            for o in 0..forest.n_outputs {
                out[(row, o)] += leaf[o];
            }
        }
    }
    out / forest.trees.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_unbootstrapped_tree_interpolates() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let x = DMatrix::from_fn(25, 3, |_, _| rng.gen_range(-5.0..5.0));
        let y = DMatrix::from_fn(25, 2, |i, o| {
            if o == 0 {
                x[(i, 0)] * 2.0
            } else {
                x[(i, 1)] - x[(i, 2)]
            }
        });
        let forest = rfr_fit(
            &x,
            &y,
            &RfConfig {
                n_trees: 1,
                bootstrap: false,
                seed: 0,
            },
        );
        let pred = rfr_predict(&forest, &x);
        let err = (&pred - &y).abs().max();
        assert!(err < 1e-12, "training error {err}");
    }

    #[test]
    fn constant_target_predicts_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let x = DMatrix::from_fn(30, 2, |_, _| rng.gen_range(0.0..1.0));
        let y = DMatrix::from_element(30, 1, 6.25);
        let forest = rfr_fit(&x, &y, &RfConfig::new(20, 5));
        let pred = rfr_predict(&forest, &x);
        assert!(pred.iter().all(|&p| (p - 6.25).abs() < 1e-12));
    }

    #[test]
    fn forest_size_stability() {
        // Nearby ensemble sizes give nearby predictions on held-out points.
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let x = DMatrix::from_fn(30, 2, |_, _| rng.gen_range(-1.0..1.0));
        let y = DMatrix::from_fn(30, 1, |i, _| x[(i, 0)] * x[(i, 1)] + rng.gen_range(-0.05..0.05));
        let x_new = DMatrix::from_fn(10, 2, |_, _| rng.gen_range(-1.0..1.0));
        let p200 = rfr_predict(&rfr_fit(&x, &y, &RfConfig::new(200, 9)), &x_new);
        let p201 = rfr_predict(&rfr_fit(&x, &y, &RfConfig::new(201, 9)), &x_new);
        let diff: Vec<f64> = (0..10).map(|i| p200[(i, 0)] - p201[(i, 0)]).collect();
        let rms = (diff.iter().map(|d| d * d).sum::<f64>() / 10.0).sqrt();
        let scale = (p200.iter().map(|v| v * v).sum::<f64>() / 10.0).sqrt();
        assert!(rms < 0.05 * scale.max(0.1), "rms drift {rms} vs scale {scale}");
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let x = DMatrix::from_fn(20, 2, |_, _| rng.gen_range(-1.0..1.0));
        let y = DMatrix::from_fn(20, 1, |i, _| x[(i, 0)]);
        let a = rfr_predict(&rfr_fit(&x, &y, &RfConfig::new(30, 4)), &x);
        let b = rfr_predict(&rfr_fit(&x, &y, &RfConfig::new(30, 4)), &x);
        assert_eq!(a, b);
    }
}
