//! Greedy top-down decision tree with per-node feature subsampling.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::BinaryLabel;
use crate::rng::stream;

/// Split-quality measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

/// Number of candidate features examined per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// Alias of `sqrt`.
    Auto,
    Sqrt,
    Log2,
    All,
}

impl MaxFeatures {
    fn count(self, n_features: usize) -> usize {
        let m = match self {
            MaxFeatures::Auto | MaxFeatures::Sqrt => (n_features as f64).sqrt() as usize,
            MaxFeatures::Log2 => (n_features as f64).log2() as usize,
            MaxFeatures::All => n_features,
        };
        m.clamp(1, n_features)
    }
}

/// Node-splitting strategy: exhaustive best threshold, or one uniformly
/// drawn threshold per candidate feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Splitter {
    Best,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DtParams {
    pub criterion: Criterion,
    pub max_features: MaxFeatures,
    pub splitter: Splitter,
}

impl Default for DtParams {
    fn default() -> Self {
        Self {
            criterion: Criterion::Gini,
            max_features: MaxFeatures::Auto,
            splitter: Splitter::Best,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        mi_weight: f64,
        total_weight: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
}

impl DecisionTree {
    /// Positive-class weight fraction at the reached leaf.
    pub fn predict_score(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf {
                    mi_weight,
                    total_weight,
                } => {
                    return if *total_weight > 0.0 {
                        mi_weight / total_weight
                    } else {
                        0.5
                    };
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

fn impurity(criterion: Criterion, mi: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = mi / total;
    match criterion {
        Criterion::Gini => 2.0 * p * (1.0 - p),
        Criterion::Entropy => {
            let term = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
            term(p) + term(1.0 - p)
        }
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn evaluate_threshold(
    x: &[Vec<f64>],
    y: &[BinaryLabel],
    weights: &[f64],
    indices: &[usize],
    feature: usize,
    threshold: f64,
    criterion: Criterion,
    parent_impurity: f64,
    total: f64,
    total_mi: f64,
) -> Option<f64> {
    let (mut l_total, mut l_mi) = (0.0, 0.0);
    for &i in indices {
        if x[i][feature] <= threshold {
            l_total += weights[i];
            if y[i].is_mi() {
                l_mi += weights[i];
            }
        }
    }
    let r_total = total - l_total;
    if l_total <= 0.0 || r_total <= 0.0 {
        return None;
    }
    let r_mi = total_mi - l_mi;
    let child = (l_total * impurity(criterion, l_mi, l_total)
        + r_total * impurity(criterion, r_mi, r_total))
        / total;
    Some(parent_impurity - child)
}

fn best_threshold_for_feature(
    x: &[Vec<f64>],
    y: &[BinaryLabel],
    weights: &[f64],
    indices: &[usize],
    feature: usize,
    criterion: Criterion,
    parent_impurity: f64,
    total: f64,
    total_mi: f64,
) -> Option<(f64, f64)> {
    let mut order: Vec<usize> = indices.to_vec();
    order.sort_by(|&a, &b| x[a][feature].partial_cmp(&x[b][feature]).unwrap());

    let (mut l_total, mut l_mi) = (0.0, 0.0);
    let mut best: Option<(f64, f64)> = None;
    for w in order.windows(2) {
        let (i, j) = (w[0], w[1]);
        l_total += weights[i];
        if y[i].is_mi() {
            l_mi += weights[i];
        }
        let (a, b) = (x[i][feature], x[j][feature]);
        if a == b {
            continue;
        }
        let r_total = total - l_total;
        if l_total <= 0.0 || r_total <= 0.0 {
            continue;
        }
        let r_mi = total_mi - l_mi;
        let child = (l_total * impurity(criterion, l_mi, l_total)
            + r_total * impurity(criterion, r_mi, r_total))
            / total;
        let gain = parent_impurity - child;
        let threshold = 0.5 * (a + b);
        if best.map_or(true, |(g, t)| gain > g || (gain == g && threshold < t)) {
            best = Some((gain, threshold));
        }
    }
    best.map(|(g, t)| (t, g))
}

fn find_split(
    x: &[Vec<f64>],
    y: &[BinaryLabel],
    weights: &[f64],
    indices: &[usize],
    candidates: &[usize],
    params: &DtParams,
    rng: &mut ChaCha8Rng,
    parent_impurity: f64,
    total: f64,
    total_mi: f64,
) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    for &feature in candidates {
        let (lo, hi) = indices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(x[i][feature]), hi.max(x[i][feature]))
        });
        if lo == hi {
            continue;
        }
        let found = match params.splitter {
            Splitter::Best => best_threshold_for_feature(
                x,
                y,
                weights,
                indices,
                feature,
                params.criterion,
                parent_impurity,
                total,
                total_mi,
            ),
            Splitter::Random => {
                let threshold = rng.random_range(lo..hi);
                evaluate_threshold(
                    x,
                    y,
                    weights,
                    indices,
                    feature,
                    threshold,
                    params.criterion,
                    parent_impurity,
                    total,
                    total_mi,
                )
                .map(|gain| (threshold, gain))
            }
        };
        if let Some((threshold, gain)) = found {
            let better = match &best {
                None => true,
                Some(b) => {
                    gain > b.gain
                        || (gain == b.gain
                            && (feature < b.feature
                                || (feature == b.feature && threshold < b.threshold)))
                }
            };
            // Zero-gain splits are kept: on parity-style data the first
            // split pays off only one level deeper.
            if better && gain > -1e-9 {
                best = Some(Candidate {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

/// Grows a tree to purity (no depth limit). The per-node candidate feature
/// subset is drawn from `rng`; when no candidate admits a useful split the
/// search falls back to an exhaustive best split over all features, so
/// consistent data always reaches pure leaves.
pub(crate) fn fit_tree(
    x: &[Vec<f64>],
    y: &[BinaryLabel],
    weights: &[f64],
    params: &DtParams,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let n_features = x[0].len();
    let m = params.max_features.count(n_features);
    let mut nodes = Vec::new();
    let root: Vec<usize> = (0..x.len()).collect();
    let mut stack: Vec<(usize, Vec<usize>)> = Vec::new();

    nodes.push(TreeNode::Leaf {
        mi_weight: 0.0,
        total_weight: 0.0,
    });
    stack.push((0, root));

    while let Some((slot, indices)) = stack.pop() {
        let total: f64 = indices.iter().map(|&i| weights[i]).sum();
        let total_mi: f64 = indices
            .iter()
            .filter(|&&i| y[i].is_mi())
            .map(|&i| weights[i])
            .sum();
        let parent_impurity = impurity(params.criterion, total_mi, total);

        let make_leaf = |nodes: &mut Vec<TreeNode>| {
            nodes[slot] = TreeNode::Leaf {
                mi_weight: total_mi,
                total_weight: total,
            };
        };

        if parent_impurity <= 0.0 || indices.len() < 2 {
            make_leaf(&mut nodes);
            continue;
        }

        let mut features: Vec<usize> = (0..n_features).collect();
        features.shuffle(rng);
        features.truncate(m);
        features.sort_unstable();

        let mut split = find_split(
            x,
            y,
            weights,
            &indices,
            &features,
            params,
            rng,
            parent_impurity,
            total,
            total_mi,
        );
        if split.is_none() && m < n_features {
            let all: Vec<usize> = (0..n_features).collect();
            let exhaustive = DtParams {
                splitter: Splitter::Best,
                ..params.clone()
            };
            split = find_split(
                x,
                y,
                weights,
                &indices,
                &all,
                &exhaustive,
                rng,
                parent_impurity,
                total,
                total_mi,
            );
        }

        match split {
            None => make_leaf(&mut nodes),
            Some(c) => {
                let (mut left_idx, mut right_idx) = (Vec::new(), Vec::new());
                for &i in &indices {
                    if x[i][c.feature] <= c.threshold {
                        left_idx.push(i);
                    } else {
                        right_idx.push(i);
                    }
                }
                let left_slot = nodes.len();
                nodes.push(TreeNode::Leaf {
                    mi_weight: 0.0,
                    total_weight: 0.0,
                });
                let right_slot = nodes.len();
                nodes.push(TreeNode::Leaf {
                    mi_weight: 0.0,
                    total_weight: 0.0,
                });
                nodes[slot] = TreeNode::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left: left_slot,
                    right: right_slot,
                };
                stack.push((right_slot, right_idx));
                stack.push((left_slot, left_idx));
            }
        }
    }

    DecisionTree { nodes, n_features }
}

/// Standalone tree training; shares its stream derivation with the first
/// forest member so a one-tree forest reproduces it exactly.
pub(crate) fn fit_standalone(
    x: &[Vec<f64>],
    y: &[BinaryLabel],
    params: &DtParams,
    seed: u64,
) -> DecisionTree {
    let weights = vec![1.0; x.len()];
    let mut rng = stream(seed, "tree", 0);
    fit_tree(x, y, &weights, params, &mut rng)
}
