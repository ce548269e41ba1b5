//! Soft-margin support vector machine solved by sequential minimal
//! optimization.
//!
//! Training canonicalizes the sample order (lexicographic by feature
//! vector, then label) before optimizing, so the fitted decision function
//! is identical for any permutation of the input.

use serde::{Deserialize, Serialize};

use crate::dataio::BinaryLabel;

const KKT_TOL: f64 = 1e-3;
const MAX_PASSES: usize = 10_000;
const ALPHA_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvmKernel {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub kernel: SvmKernel,
    pub c: f64,
    pub gamma: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            kernel: SvmKernel::Rbf,
            c: 1.0,
            gamma: 0.1,
        }
    }
}

impl SvmParams {
    fn kernel_eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kernel {
            SvmKernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            SvmKernel::Rbf => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
                (-self.gamma * sq).exp()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvmModel {
    pub params: SvmParams,
    pub n_features: usize,
    pub support: Vec<Vec<f64>>,
    /// Per support vector: alpha times the signed label.
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(self.coef.iter())
            .map(|(sv, c)| c * self.params.kernel_eval(sv, x))
            .sum::<f64>()
            + self.bias
    }

    /// Margin squashed to `[0, 1]` by the logistic function.
    pub fn predict_score(&self, x: &[f64]) -> f64 {
        1.0 / (1.0 + (-self.decision(x)).exp())
    }
}

/// Fit output with the full dual solution, in canonical sample order.
#[derive(Debug, Clone)]
pub struct SvmFit {
    pub model: SvmModel,
    pub alphas: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

fn canonical_order(x: &[Vec<f64>], y: &[BinaryLabel]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| {
        x[a].iter()
            .zip(x[b].iter())
            .find_map(|(p, q)| match p.partial_cmp(q).unwrap() {
                std::cmp::Ordering::Equal => None,
                other => Some(other),
            })
            .unwrap_or_else(|| y[a].cmp(&y[b]))
    });
    idx
}

struct Smo<'a> {
    k: Vec<f64>,
    n: usize,
    y: &'a [f64],
    c: f64,
    alpha: Vec<f64>,
    errors: Vec<f64>,
    bias: f64,
}

impl Smo<'_> {
    fn kernel(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    /// Joint optimization of the pair `(i, j)`. Returns true when the pair
    /// made progress.
    fn take_step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (ai, aj) = (self.alpha[i], self.alpha[j]);
        let (yi, yj) = (self.y[i], self.y[j]);
        let (l, h) = if yi != yj {
            ((aj - ai).max(0.0), (self.c + aj - ai).min(self.c))
        } else {
            ((ai + aj - self.c).max(0.0), (ai + aj).min(self.c))
        };
        if l >= h {
            return false;
        }
        let eta = self.kernel(i, i) + self.kernel(j, j) - 2.0 * self.kernel(i, j);
        if eta <= 1e-12 {
            return false;
        }
        let mut aj_new = aj + yj * (self.errors[i] - self.errors[j]) / eta;
        aj_new = aj_new.clamp(l, h);
        if (aj_new - aj).abs() < 1e-8 * (aj_new + aj + 1e-8) {
            return false;
        }
        let ai_new = ai + yi * yj * (aj - aj_new);

        let d_i = yi * (ai_new - ai);
        let d_j = yj * (aj_new - aj);
        let b1 = self.bias - self.errors[i] - d_i * self.kernel(i, i) - d_j * self.kernel(i, j);
        let b2 = self.bias - self.errors[j] - d_i * self.kernel(i, j) - d_j * self.kernel(j, j);
        let new_bias = if ai_new > 0.0 && ai_new < self.c {
            b1
        } else if aj_new > 0.0 && aj_new < self.c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let d_b = new_bias - self.bias;

        self.alpha[i] = ai_new;
        self.alpha[j] = aj_new;
        self.bias = new_bias;
        for t in 0..self.n {
            self.errors[t] += d_i * self.kernel(i, t) + d_j * self.kernel(j, t) + d_b;
        }
        true
    }

    fn examine(&mut self, i: usize) -> bool {
        let r = self.errors[i] * self.y[i];
        let violates = (r < -KKT_TOL && self.alpha[i] < self.c) || (r > KKT_TOL && self.alpha[i] > 0.0);
        if !violates {
            return false;
        }
        // Second-choice heuristic: the partner maximizing |E_i - E_j|,
        // then every remaining index in order.
        let best_j = (0..self.n)
            .filter(|&j| j != i)
            .max_by(|&a, &b| {
                let da = (self.errors[i] - self.errors[a]).abs();
                let db = (self.errors[i] - self.errors[b]).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        if self.take_step(i, best_j) {
            return true;
        }
        for j in 0..self.n {
            if j != best_j && self.take_step(i, j) {
                return true;
            }
        }
        false
    }
}

pub fn fit(x: &[Vec<f64>], y_labels: &[BinaryLabel], params: &SvmParams) -> SvmFit {
    let order = canonical_order(x, y_labels);
    let xs: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let ys: Vec<f64> = order
        .iter()
        .map(|&i| if y_labels[i].is_mi() { 1.0 } else { -1.0 })
        .collect();
    let n = xs.len();

    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = params.kernel_eval(&xs[i], &xs[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }

    let mut smo = Smo {
        k,
        n,
        y: &ys,
        c: params.c,
        alpha: vec![0.0; n],
        errors: ys.iter().map(|&v| -v).collect(),
        bias: 0.0,
    };

    for _pass in 0..MAX_PASSES {
        let mut changed = 0usize;
        for i in 0..n {
            if smo.examine(i) {
                changed += 1;
            }
        }
        if changed == 0 {
            break;
        }
    }

    let mut support = Vec::new();
    let mut coef = Vec::new();
    for i in 0..n {
        if smo.alpha[i] > ALPHA_EPS {
            support.push(xs[i].clone());
            coef.push(smo.alpha[i] * ys[i]);
        }
    }
    SvmFit {
        model: SvmModel {
            params: params.clone(),
            n_features: x[0].len(),
            support,
            coef,
            bias: smo.bias,
        },
        alphas: smo.alpha,
        x: xs,
        y: ys,
    }
}

/// Karush-Kuhn-Tucker residuals of a fit, one per training sample: the
/// amount by which the sample violates its optimality condition.
pub fn kkt_residuals(fit: &SvmFit, c: f64) -> Vec<f64> {
    fit.x
        .iter()
        .zip(fit.y.iter())
        .zip(fit.alphas.iter())
        .map(|((xi, &yi), &ai)| {
            let margin = yi * fit.model.decision(xi);
            if ai <= ALPHA_EPS {
                (1.0 - margin).max(0.0)
            } else if ai >= c - ALPHA_EPS {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            }
        })
        .collect()
}
