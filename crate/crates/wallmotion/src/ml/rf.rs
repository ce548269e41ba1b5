//! Random forest: bagged decision trees with majority voting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::BinaryLabel;
use crate::rng::stream;

use super::dt::{self, Criterion, DecisionTree, DtParams, MaxFeatures, Splitter};

/// Sample reweighting mode. `Balanced` weights classes inversely to their
/// frequency in the full training set, `BalancedSubsample` recomputes the
/// weights on each tree's bootstrap sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeight {
    None,
    Balanced,
    BalancedSubsample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfParams {
    pub bootstrap: bool,
    pub class_weight: ClassWeight,
    pub criterion: Criterion,
    pub max_features: MaxFeatures,
    /// Stored for configuration compatibility; a single fit call has no
    /// previous ensemble to extend, so the flag has no effect here.
    pub warm_start: bool,
    pub n_trees: usize,
}

impl Default for RfParams {
    fn default() -> Self {
        Self {
            bootstrap: true,
            class_weight: ClassWeight::Balanced,
            criterion: Criterion::Gini,
            max_features: MaxFeatures::Auto,
            warm_start: false,
            n_trees: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
}

impl RandomForest {
    /// Fraction of trees voting for the positive class; each tree votes by
    /// its leaf majority, leaf ties voting positive.
    pub fn predict_score(&self, x: &[f64]) -> f64 {
        let votes = self
            .trees
            .iter()
            .filter(|t| t.predict_score(x) >= 0.5)
            .count();
        votes as f64 / self.trees.len() as f64
    }
}

fn class_weights(y: &[BinaryLabel]) -> (f64, f64) {
    let n = y.len() as f64;
    let mi = y.iter().filter(|l| l.is_mi()).count() as f64;
    let non = n - mi;
    if mi == 0.0 || non == 0.0 {
        return (1.0, 1.0);
    }
    (n / (2.0 * non), n / (2.0 * mi))
}

pub(crate) fn fit(x: &[Vec<f64>], y: &[BinaryLabel], params: &RfParams, seed: u64) -> RandomForest {
    let n = x.len();
    let tree_params = DtParams {
        criterion: params.criterion,
        max_features: params.max_features,
        splitter: Splitter::Best,
    };
    let full_weights = class_weights(y);

    let mut trees = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        let indices: Vec<usize> = if params.bootstrap {
            let mut rng = stream(seed, "bootstrap", t as u64);
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let xs: Vec<Vec<f64>> = indices.iter().map(|&i| x[i].clone()).collect();
        let ys: Vec<BinaryLabel> = indices.iter().map(|&i| y[i]).collect();
        let (w_non, w_mi) = match params.class_weight {
            ClassWeight::None => (1.0, 1.0),
            ClassWeight::Balanced => full_weights,
            ClassWeight::BalancedSubsample => class_weights(&ys),
        };
        let weights: Vec<f64> = ys
            .iter()
            .map(|l| if l.is_mi() { w_mi } else { w_non })
            .collect();
        let mut rng = stream(seed, "tree", t as u64);
        trees.push(dt::fit_tree(&xs, &ys, &weights, &tree_params, &mut rng));
    }
    RandomForest {
        trees,
        n_features: x[0].len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::dt::TreeNode;

    fn leaf_tree(mi: bool) -> DecisionTree {
        DecisionTree {
            nodes: vec![TreeNode::Leaf {
                mi_weight: if mi { 1.0 } else { 0.0 },
                total_weight: 1.0,
            }],
            n_features: 1,
        }
    }

    #[test]
    fn vote_fraction_is_the_score() {
        let forest = RandomForest {
            trees: (0..10).map(|i| leaf_tree(i < 4)).collect(),
            n_features: 1,
        };
        let score = forest.predict_score(&[0.0]);
        assert!((score - 0.4).abs() < 1e-12);
        // 4 of 10 votes: below the 0.5 threshold, negative class.
        assert!(score < 0.5);
    }

    #[test]
    fn balanced_weights_invert_class_frequency() {
        let y = vec![
            BinaryLabel::Mi,
            BinaryLabel::NonMi,
            BinaryLabel::NonMi,
            BinaryLabel::NonMi,
        ];
        let (w_non, w_mi) = class_weights(&y);
        assert!((w_non - 4.0 / 6.0).abs() < 1e-12);
        assert!((w_mi - 2.0).abs() < 1e-12);
    }
}
