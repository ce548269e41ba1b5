//! k-nearest-neighbor classifier over the stored training set.

use serde::{Deserialize, Serialize};

use crate::dataio::BinaryLabel;

/// Neighbor-search backend selector. Recorded for compatibility with the
/// hyperparameter grid; all options share the brute-force scan, which is
/// exact, so the choice affects neither predictions nor scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnnAlgorithm {
    Auto,
    Brute,
    BallTree,
    KdTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnnWeights {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    Manhattan,
    Euclidean,
}

impl DistanceMetric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceMetric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            DistanceMetric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub algorithm: KnnAlgorithm,
    pub weights: KnnWeights,
    pub k: usize,
    pub metric: DistanceMetric,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self {
            algorithm: KnnAlgorithm::Auto,
            weights: KnnWeights::Uniform,
            k: 5,
            metric: DistanceMetric::Euclidean,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    pub params: KnnParams,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<BinaryLabel>,
}

impl KnnModel {
    pub fn fit(x: &[Vec<f64>], y: &[BinaryLabel], params: KnnParams) -> Self {
        Self {
            params,
            x: x.to_vec(),
            y: y.to_vec(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.x[0].len()
    }

    /// Positive-class weight among the k nearest neighbors. Neighbor ties
    /// at equal distance resolve by training index; exact matches dominate
    /// distance weighting.
    pub fn predict_score(&self, probe: &[f64]) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, xi)| (self.params.metric.distance(probe, xi), i))
            .collect();
        dist.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let neighbors = &dist[..self.params.k.min(dist.len())];

        match self.params.weights {
            KnnWeights::Uniform => {
                let mi = neighbors
                    .iter()
                    .filter(|(_, i)| self.y[*i].is_mi())
                    .count();
                mi as f64 / neighbors.len() as f64
            }
            KnnWeights::Distance => {
                let exact: Vec<&(f64, usize)> =
                    neighbors.iter().filter(|(d, _)| *d < 1e-12).collect();
                if !exact.is_empty() {
                    let mi = exact.iter().filter(|(_, i)| self.y[*i].is_mi()).count();
                    return mi as f64 / exact.len() as f64;
                }
                let mut total = 0.0;
                let mut mi = 0.0;
                for (d, i) in neighbors {
                    let w = 1.0 / d;
                    total += w;
                    if self.y[*i].is_mi() {
                        mi += w;
                    }
                }
                mi / total
            }
        }
    }
}
