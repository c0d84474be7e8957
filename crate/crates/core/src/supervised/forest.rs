//! Bagged CART trees with Gini impurity: random attribute subsets per
//! split, majority vote, vote fraction as confidence.

use std::collections::BTreeSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    /// Stop splitting nodes at or below this size.
    pub min_leaf: usize,
    /// Attributes sampled per split; `None` means sqrt(attribute count).
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 100,
            min_leaf: 2,
            features_per_split: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        /// Class share among the training instances reaching this leaf.
        dist: Vec<f64>,
    },
    Split {
        attr: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf_dist<'a>(&'a self, x: &[f64]) -> &'a [f64] {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { dist } => return dist,
                Node::Split {
                    attr,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*attr] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub classes: Vec<String>,
    trees: Vec<Tree>,
    pub config: ForestConfig,
    /// Set when training saw a single class; every prediction is constant.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestPrediction {
    pub class: String,
    pub class_idx: usize,
    /// Vote fraction for the winning class.
    pub confidence: f64,
    /// Vote fractions per class; sums to 1.
    pub votes: Vec<f64>,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

struct TreeBuilder<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [usize],
    n_classes: usize,
    features_per_split: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, indices: Vec<usize>, rng: &mut ChaCha8Rng) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &i in &indices {
            counts[self.labels[i]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || indices.len() <= self.min_leaf {
            return self.push_leaf(&counts, indices.len());
        }
        match self.best_split(&indices, &counts, rng) {
            Some((attr, threshold)) => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                    .into_iter()
                    .partition(|&i| self.features[i][attr] <= threshold);
                let slot = self.nodes.len();
                self.nodes.push(Node::Leaf { dist: Vec::new() }); // placeholder
                let left = self.build(left_idx, rng);
                let right = self.build(right_idx, rng);
                self.nodes[slot] = Node::Split {
                    attr,
                    threshold,
                    left,
                    right,
                };
                slot
            }
            None => self.push_leaf(&counts, indices.len()),
        }
    }

    fn push_leaf(&mut self, counts: &[usize], total: usize) -> usize {
        let dist = counts
            .iter()
            .map(|&c| c as f64 / total.max(1) as f64)
            .collect();
        self.nodes.push(Node::Leaf { dist });
        self.nodes.len() - 1
    }

    fn best_split(
        &self,
        indices: &[usize],
        parent_counts: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Option<(usize, f64)> {
        let p = self.features[0].len();
        let mut attrs: Vec<usize> = (0..p).collect();
        attrs.shuffle(rng);
        attrs.truncate(self.features_per_split.min(p));

        let n = indices.len();
        let parent_gini = gini(parent_counts, n);
        let mut best: Option<(f64, usize, f64)> = None; // (impurity drop, attr, threshold)
        for &attr in &attrs {
            let mut order: Vec<usize> = indices.to_vec();
            order.sort_by(|&a, &b| self.features[a][attr].total_cmp(&self.features[b][attr]));
            let mut left_counts = vec![0usize; self.n_classes];
            let mut right_counts = parent_counts.to_vec();
            for w in 0..n - 1 {
                let i = order[w];
                left_counts[self.labels[i]] += 1;
                right_counts[self.labels[i]] -= 1;
                let v = self.features[i][attr];
                let next = self.features[order[w + 1]][attr];
                if next <= v {
                    continue; // no distinct boundary here
                }
                let n_left = w + 1;
                let n_right = n - n_left;
                let weighted = (n_left as f64 * gini(&left_counts, n_left)
                    + n_right as f64 * gini(&right_counts, n_right))
                    / n as f64;
                let drop = parent_gini - weighted;
                if drop > 1e-12 && best.map_or(true, |(d, _, _)| drop > d) {
                    best = Some((drop, attr, (v + next) / 2.0));
                }
            }
        }
        best.map(|(_, attr, threshold)| (attr, threshold))
    }
}

/// Trains a bagged forest. Labels are matched against the sorted distinct
/// label set; a single-class training set yields a degenerate constant
/// model.
pub fn forest_train(
    features: &[Vec<f64>],
    labels: &[String],
    config: &ForestConfig,
) -> Result<ForestModel> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::invalid(format!(
            "forest_train: {} feature rows vs {} labels",
            features.len(),
            labels.len()
        )));
    }
    let classes: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let class_idx: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).unwrap())
        .collect();
    let degenerate = classes.len() < 2;

    let p = features[0].len();
    let features_per_split = config
        .features_per_split
        .unwrap_or_else(|| (p as f64).sqrt().round().max(1.0) as usize);

    let n = features.len();
    let mut trees = Vec::with_capacity(config.trees);
    for t in 0..config.trees {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(t as u64));
        // bootstrap sample
        let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut builder = TreeBuilder {
            features,
            labels: &class_idx,
            n_classes: classes.len(),
            features_per_split,
            min_leaf: config.min_leaf,
            nodes: Vec::new(),
        };
        builder.build(sample, &mut rng);
        trees.push(Tree {
            nodes: builder.nodes,
        });
    }
    Ok(ForestModel {
        classes,
        trees,
        config: config.clone(),
        degenerate,
    })
}

impl ForestModel {
    /// Majority vote over trees; confidence is the winner's vote fraction.
    pub fn predict(&self, x: &[f64]) -> ForestPrediction {
        let mut votes = vec![0.0; self.classes.len()];
        for tree in &self.trees {
            let dist = tree.leaf_dist(x);
            let winner = dist
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.total_cmp(b))
                .map(|(i, _)| i)
                .unwrap();
            votes[winner] += 1.0;
        }
        let total: f64 = votes.iter().sum();
        for v in votes.iter_mut() {
            *v /= total;
        }
        let class_idx = votes
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.total_cmp(b))
            .map(|(i, _)| i)
            .unwrap();
        ForestPrediction {
            class: self.classes[class_idx].clone(),
            class_idx,
            confidence: votes[class_idx],
            votes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n_per: usize) -> (Vec<Vec<f64>>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (label, cx) in [("low", 0.0), ("high", 10.0)] {
            for _ in 0..n_per {
                features.push(vec![
                    cx + rng.gen::<f64>(),
                    rng.gen::<f64>() * 5.0,
                    rng.gen::<f64>(),
                ]);
                labels.push(label.to_string());
            }
        }
        (features, labels)
    }

    #[test]
    fn separable_blobs_perfect_accuracy() {
        let (features, labels) = blobs(100);
        let model = forest_train(&features, &labels, &ForestConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..100 {
            let (expect, cx) = if rng.gen::<bool>() {
                ("low", 0.0)
            } else {
                ("high", 10.0)
            };
            let x = vec![cx + rng.gen::<f64>(), rng.gen::<f64>() * 5.0, rng.gen::<f64>()];
            let pred = model.predict(&x);
            assert_eq!(pred.class, expect);
        }
    }

    #[test]
    fn single_class_degenerate_constant() {
        let features = vec![vec![1.0, 2.0]; 10];
        let labels = vec!["only".to_string(); 10];
        let model = forest_train(&features, &labels, &ForestConfig::default()).unwrap();
        assert!(model.degenerate);
        let pred = model.predict(&[99.0, -4.0]);
        assert_eq!(pred.class, "only");
        assert_eq!(pred.confidence, 1.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let (features, labels) = blobs(40);
        let cfg = ForestConfig {
            trees: 20,
            seed: 5,
            ..ForestConfig::default()
        };
        let a = forest_train(&features, &labels, &cfg).unwrap();
        let b = forest_train(&features, &labels, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn votes_are_a_distribution() {
        let (features, labels) = blobs(40);
        let model = forest_train(&features, &labels, &ForestConfig::default()).unwrap();
        let pred = model.predict(&[5.0, 2.5, 0.5]); // between the blobs
        assert!((pred.votes.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(pred.votes.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(pred.confidence >= 1.0 / model.classes.len() as f64);
    }

    #[test]
    fn mismatched_rows_rejected() {
        let err = forest_train(&[vec![1.0]], &[], &ForestConfig::default());
        assert!(err.is_err());
    }
}
