//! Model persistence: JSON with learned float arrays packed as base64
//! little-endian 64-bit values.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataio::BinaryLabel;

use super::cnn::{CnnDims, CnnModel, CnnParams};
use super::dt::{DecisionTree, DtParams, TreeNode};
use super::knn::{KnnModel, KnnParams};
use super::rf::{RandomForest, RfParams};
use super::svm::{SvmModel, SvmParams};
use super::{MlError, TrainedModel};

/// Float array stored as base64 of little-endian bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct F64Base64(pub Vec<f64>);

impl Serialize for F64Base64 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut bytes = Vec::with_capacity(self.0.len() * 8);
        for v in &self.0 {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        serializer.serialize_str(&B64.encode(bytes))
    }
}

impl<'de> Deserialize<'de> for F64Base64 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        let bytes = B64
            .decode(text.as_bytes())
            .map_err(serde::de::Error::custom)?;
        if bytes.len() % 8 != 0 {
            return Err(serde::de::Error::custom("float array length not a multiple of 8"));
        }
        Ok(F64Base64(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ))
    }
}

#[derive(Serialize, Deserialize)]
struct TreeFile {
    /// Split feature per node, -1 for leaves.
    feature: Vec<i64>,
    threshold: F64Base64,
    left: Vec<i64>,
    right: Vec<i64>,
    leaf_mi: F64Base64,
    leaf_total: F64Base64,
    n_features: usize,
}

impl From<&DecisionTree> for TreeFile {
    fn from(tree: &DecisionTree) -> Self {
        let n = tree.nodes.len();
        let mut out = TreeFile {
            feature: vec![-1; n],
            threshold: F64Base64(vec![0.0; n]),
            left: vec![-1; n],
            right: vec![-1; n],
            leaf_mi: F64Base64(vec![0.0; n]),
            leaf_total: F64Base64(vec![0.0; n]),
            n_features: tree.n_features,
        };
        for (i, node) in tree.nodes.iter().enumerate() {
            match node {
                TreeNode::Leaf {
                    mi_weight,
                    total_weight,
                } => {
                    out.leaf_mi.0[i] = *mi_weight;
                    out.leaf_total.0[i] = *total_weight;
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    out.feature[i] = *feature as i64;
                    out.threshold.0[i] = *threshold;
                    out.left[i] = *left as i64;
                    out.right[i] = *right as i64;
                }
            }
        }
        out
    }
}

impl TryFrom<&TreeFile> for DecisionTree {
    type Error = MlError;
    fn try_from(file: &TreeFile) -> Result<Self, MlError> {
        let n = file.feature.len();
        if [
            file.threshold.0.len(),
            file.left.len(),
            file.right.len(),
            file.leaf_mi.0.len(),
            file.leaf_total.0.len(),
        ]
        .iter()
        .any(|&len| len != n)
        {
            return Err(MlError::Serialization("tree arrays disagree in length".into()));
        }
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            if file.feature[i] < 0 {
                nodes.push(TreeNode::Leaf {
                    mi_weight: file.leaf_mi.0[i],
                    total_weight: file.leaf_total.0[i],
                });
            } else {
                let (l, r) = (file.left[i], file.right[i]);
                if l < 0 || r < 0 || l as usize >= n || r as usize >= n {
                    return Err(MlError::Serialization(format!("bad child index at node {i}")));
                }
                nodes.push(TreeNode::Split {
                    feature: file.feature[i] as usize,
                    threshold: file.threshold.0[i],
                    left: l as usize,
                    right: r as usize,
                });
            }
        }
        Ok(DecisionTree {
            nodes,
            n_features: file.n_features,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ModelFile {
    Dt {
        hyperparameters: DtParams,
        tree: TreeFile,
    },
    Rf {
        hyperparameters: RfParams,
        trees: Vec<TreeFile>,
        n_features: usize,
    },
    Svm {
        hyperparameters: SvmParams,
        n_features: usize,
        support: F64Base64,
        coef: F64Base64,
        bias: f64,
    },
    Knn {
        hyperparameters: KnnParams,
        n_features: usize,
        x: F64Base64,
        /// 1 marks the positive class.
        y: Vec<u8>,
    },
    #[serde(rename = "cnn")]
    Cnn {
        hyperparameters: CnnParams,
        input_len: usize,
        theta: F64Base64,
    },
}

fn unflatten(flat: &[f64], dim: usize) -> Result<Vec<Vec<f64>>, MlError> {
    if dim == 0 || flat.len() % dim != 0 {
        return Err(MlError::Serialization(format!(
            "array of {} values is not a multiple of dimension {dim}",
            flat.len()
        )));
    }
    Ok(flat.chunks_exact(dim).map(|c| c.to_vec()).collect())
}

pub(super) fn to_json(model: &TrainedModel) -> Result<String, MlError> {
    let file = match model {
        TrainedModel::Dt(m) => ModelFile::Dt {
            hyperparameters: DtParams::default(),
            tree: TreeFile::from(m),
        },
        TrainedModel::Rf(m) => ModelFile::Rf {
            hyperparameters: RfParams::default(),
            trees: m.trees.iter().map(TreeFile::from).collect(),
            n_features: m.n_features,
        },
        TrainedModel::Svm(m) => ModelFile::Svm {
            hyperparameters: m.params.clone(),
            n_features: m.n_features,
            support: F64Base64(m.support.iter().flatten().copied().collect()),
            coef: F64Base64(m.coef.clone()),
            bias: m.bias,
        },
        TrainedModel::Knn(m) => ModelFile::Knn {
            hyperparameters: m.params.clone(),
            n_features: m.n_features(),
            x: F64Base64(m.x.iter().flatten().copied().collect()),
            y: m.y.iter().map(|l| if l.is_mi() { 1 } else { 0 }).collect(),
        },
        TrainedModel::Cnn(m) => ModelFile::Cnn {
            hyperparameters: m.params.clone(),
            input_len: m.input_len,
            theta: F64Base64(m.theta.clone()),
        },
    };
    serde_json::to_string_pretty(&file).map_err(|e| MlError::Serialization(e.to_string()))
}

pub(super) fn from_json(json: &str) -> Result<TrainedModel, MlError> {
    let file: ModelFile =
        serde_json::from_str(json).map_err(|e| MlError::Serialization(e.to_string()))?;
    Ok(match file {
        ModelFile::Dt { tree, .. } => TrainedModel::Dt(DecisionTree::try_from(&tree)?),
        ModelFile::Rf {
            trees, n_features, ..
        } => TrainedModel::Rf(RandomForest {
            trees: trees
                .iter()
                .map(DecisionTree::try_from)
                .collect::<Result<_, _>>()?,
            n_features,
        }),
        ModelFile::Svm {
            hyperparameters,
            n_features,
            support,
            coef,
            bias,
        } => TrainedModel::Svm(SvmModel {
            params: hyperparameters,
            n_features,
            support: unflatten(&support.0, n_features)?,
            coef: coef.0,
            bias,
        }),
        ModelFile::Knn {
            hyperparameters,
            n_features,
            x,
            y,
        } => TrainedModel::Knn(KnnModel {
            params: hyperparameters,
            x: unflatten(&x.0, n_features)?,
            y: y.iter()
                .map(|&b| if b == 1 { BinaryLabel::Mi } else { BinaryLabel::NonMi })
                .collect(),
        }),
        ModelFile::Cnn {
            hyperparameters,
            input_len,
            theta,
        } => {
            let dims = CnnDims::for_arch(input_len, &hyperparameters)?;
            TrainedModel::Cnn(CnnModel {
                params: hyperparameters,
                input_len,
                dims,
                theta: theta.0,
            })
        }
    })
}
