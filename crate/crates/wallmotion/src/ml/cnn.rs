//! Compact 1D convolutional network: two conv/ReLU/max-pool blocks, one
//! hidden fully connected layer, and a two-way softmax output, trained
//! full-batch with Adam on the cross-entropy loss.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataio::BinaryLabel;
use crate::rng::stream;

use super::MlError;

fn default_fc_width() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnParams {
    pub learning_rate: f64,
    /// Filter count of both convolutional layers.
    pub filters: usize,
    /// Kernel size of both convolutional layers, odd.
    pub kernel_size: usize,
    pub epochs: usize,
    /// Width of the hidden fully connected layer.
    #[serde(default = "default_fc_width")]
    pub fc_width: usize,
}

impl Default for CnnParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            filters: 8,
            kernel_size: 3,
            epochs: 50,
            fc_width: default_fc_width(),
        }
    }
}

/// Signal widths through the network; every stage must stay nonempty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnDims {
    pub input_len: usize,
    pub conv1_out: usize,
    pub pool1_out: usize,
    pub conv2_out: usize,
    pub pool2_out: usize,
    pub flat: usize,
}

impl CnnDims {
    pub fn for_arch(input_len: usize, params: &CnnParams) -> Result<Self, MlError> {
        let k = params.kernel_size;
        let fail = |stage: &str, len: i64| {
            MlError::CnnArchitecture(format!(
                "{stage} length {len} collapses for input {input_len} and kernel {k}"
            ))
        };
        let conv1 = input_len as i64 - k as i64 + 1;
        if conv1 < 1 {
            return Err(fail("conv1", conv1));
        }
        let pool1 = conv1 / 2;
        if pool1 < 1 {
            return Err(fail("pool1", pool1));
        }
        let conv2 = pool1 - k as i64 + 1;
        if conv2 < 1 {
            return Err(fail("conv2", conv2));
        }
        let pool2 = conv2 / 2;
        if pool2 < 1 {
            return Err(fail("pool2", pool2));
        }
        Ok(Self {
            input_len,
            conv1_out: conv1 as usize,
            pool1_out: pool1 as usize,
            conv2_out: conv2 as usize,
            pool2_out: pool2 as usize,
            flat: params.filters * pool2 as usize,
        })
    }
}

/// Flat parameter layout: both conv layers, the hidden layer, the output
/// layer, weights before biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    w1: (usize, usize),
    b1: (usize, usize),
    w2: (usize, usize),
    b2: (usize, usize),
    w_fc: (usize, usize),
    b_fc: (usize, usize),
    w_out: (usize, usize),
    b_out: (usize, usize),
    total: usize,
}

impl Layout {
    fn new(f: usize, k: usize, d: usize, flat: usize) -> Self {
        let mut at = 0;
        let mut seg = |len: usize| {
            let r = (at, at + len);
            at += len;
            r
        };
        Self {
            w1: seg(f * k),
            b1: seg(f),
            w2: seg(f * f * k),
            b2: seg(f),
            w_fc: seg(d * flat),
            b_fc: seg(d),
            w_out: seg(2 * d),
            b_out: seg(2),
            total: at,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CnnModel {
    pub params: CnnParams,
    pub input_len: usize,
    pub dims: CnnDims,
    /// All weights and biases, flat.
    pub theta: Vec<f64>,
}

impl CnnModel {
    fn layout(&self) -> Layout {
        Layout::new(
            self.params.filters,
            self.params.kernel_size,
            self.params.fc_width,
            self.dims.flat,
        )
    }
}

struct Tape {
    conv1_pre: Vec<f64>,
    pool1: Vec<f64>,
    pool1_arg: Vec<usize>,
    conv2_pre: Vec<f64>,
    pool2: Vec<f64>,
    pool2_arg: Vec<usize>,
    fc_pre: Vec<f64>,
    probs: [f64; 2],
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

fn forward_tape(model: &CnnModel, x: &[f64]) -> Tape {
    let f = model.params.filters;
    let k = model.params.kernel_size;
    let d = model.params.fc_width;
    let dims = model.dims;
    let l = model.layout();
    let t = &model.theta;
    let (w1, b1) = (&t[l.w1.0..l.w1.1], &t[l.b1.0..l.b1.1]);
    let (w2, b2) = (&t[l.w2.0..l.w2.1], &t[l.b2.0..l.b2.1]);
    let (w_fc, b_fc) = (&t[l.w_fc.0..l.w_fc.1], &t[l.b_fc.0..l.b_fc.1]);
    let (w_out, b_out) = (&t[l.w_out.0..l.w_out.1], &t[l.b_out.0..l.b_out.1]);

    let mut conv1_pre = vec![0.0; f * dims.conv1_out];
    for fi in 0..f {
        for i in 0..dims.conv1_out {
            let mut acc = b1[fi];
            for kk in 0..k {
                acc += w1[fi * k + kk] * x[i + kk];
            }
            conv1_pre[fi * dims.conv1_out + i] = acc;
        }
    }

    let mut pool1 = vec![0.0; f * dims.pool1_out];
    let mut pool1_arg = vec![0usize; f * dims.pool1_out];
    for fi in 0..f {
        for i in 0..dims.pool1_out {
            let a = relu(conv1_pre[fi * dims.conv1_out + 2 * i]);
            let b = relu(conv1_pre[fi * dims.conv1_out + 2 * i + 1]);
            let (v, arg) = if a >= b { (a, 2 * i) } else { (b, 2 * i + 1) };
            pool1[fi * dims.pool1_out + i] = v;
            pool1_arg[fi * dims.pool1_out + i] = arg;
        }
    }

    let mut conv2_pre = vec![0.0; f * dims.conv2_out];
    for g in 0..f {
        for i in 0..dims.conv2_out {
            let mut acc = b2[g];
            for c in 0..f {
                for kk in 0..k {
                    acc += w2[(g * f + c) * k + kk] * pool1[c * dims.pool1_out + i + kk];
                }
            }
            conv2_pre[g * dims.conv2_out + i] = acc;
        }
    }

    let mut pool2 = vec![0.0; f * dims.pool2_out];
    let mut pool2_arg = vec![0usize; f * dims.pool2_out];
    for g in 0..f {
        for i in 0..dims.pool2_out {
            let a = relu(conv2_pre[g * dims.conv2_out + 2 * i]);
            let b = relu(conv2_pre[g * dims.conv2_out + 2 * i + 1]);
            let (v, arg) = if a >= b { (a, 2 * i) } else { (b, 2 * i + 1) };
            pool2[g * dims.pool2_out + i] = v;
            pool2_arg[g * dims.pool2_out + i] = arg;
        }
    }

    let mut fc_pre = vec![0.0; d];
    for di in 0..d {
        let mut acc = b_fc[di];
        for j in 0..dims.flat {
            acc += w_fc[di * dims.flat + j] * pool2[j];
        }
        fc_pre[di] = acc;
    }

    let mut logits = [0.0; 2];
    for o in 0..2 {
        let mut acc = b_out[o];
        for di in 0..d {
            acc += w_out[o * d + di] * relu(fc_pre[di]);
        }
        logits[o] = acc;
    }
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;

    Tape {
        conv1_pre,
        pool1,
        pool1_arg,
        conv2_pre,
        pool2,
        pool2_arg,
        fc_pre,
        probs: [e0 / z, e1 / z],
    }
}

/// A freshly initialized network, before any training.
pub fn init_model(params: &CnnParams, seed: u64, input_len: usize) -> Result<CnnModel, MlError> {
    let dims = CnnDims::for_arch(input_len, params)?;
    Ok(CnnModel {
        params: params.clone(),
        input_len,
        dims,
        theta: initialize(params, dims, seed),
    })
}

/// Cross-entropy of one sample against a one-hot target class.
pub fn cnn_loss(model: &CnnModel, x: &[f64], target: usize) -> f64 {
    sample_loss(model, x, target)
}

/// Analytic gradient of the sample cross-entropy for every parameter.
pub fn cnn_gradient(model: &CnnModel, x: &[f64], target: usize) -> Vec<f64> {
    let mut grad = vec![0.0; model.theta.len()];
    accumulate_gradient(model, x, target, 1.0, &mut grad);
    grad
}

/// Class probabilities `[non-infarcted, infarcted]` for one input.
pub fn cnn_forward(model: &CnnModel, x: &[f64]) -> Result<[f64; 2], MlError> {
    if x.len() != model.input_len {
        return Err(MlError::DimensionMismatch {
            expected: model.input_len,
            got: x.len(),
        });
    }
    Ok(forward_tape(model, x).probs)
}

/// Cross-entropy of one sample against a one-hot target.
pub(crate) fn sample_loss(model: &CnnModel, x: &[f64], target: usize) -> f64 {
    let p = forward_tape(model, x).probs[target];
    -p.max(1e-12).ln()
}

/// Gradient of `scale` times the sample cross-entropy with respect to
/// every parameter, accumulated into `grad`.
pub(crate) fn accumulate_gradient(
    model: &CnnModel,
    x: &[f64],
    target: usize,
    scale: f64,
    grad: &mut [f64],
) {
    let f = model.params.filters;
    let k = model.params.kernel_size;
    let d = model.params.fc_width;
    let dims = model.dims;
    let l = model.layout();
    let t = &model.theta;
    let tape = forward_tape(model, x);

    // Output layer: d(loss)/d(logit) = p - onehot.
    let mut d_logits = [tape.probs[0], tape.probs[1]];
    d_logits[target] -= 1.0;
    d_logits[0] *= scale;
    d_logits[1] *= scale;

    let fc_post: Vec<f64> = tape.fc_pre.iter().map(|&v| relu(v)).collect();
    let mut d_fc_post = vec![0.0; d];
    for o in 0..2 {
        for di in 0..d {
            grad[l.w_out.0 + o * d + di] += d_logits[o] * fc_post[di];
            d_fc_post[di] += d_logits[o] * t[l.w_out.0 + o * d + di];
        }
        grad[l.b_out.0 + o] += d_logits[o];
    }

    let mut d_pool2 = vec![0.0; dims.flat];
    for di in 0..d {
        if tape.fc_pre[di] <= 0.0 {
            continue;
        }
        let g = d_fc_post[di];
        grad[l.b_fc.0 + di] += g;
        for j in 0..dims.flat {
            grad[l.w_fc.0 + di * dims.flat + j] += g * tape.pool2[j];
            d_pool2[j] += g * t[l.w_fc.0 + di * dims.flat + j];
        }
    }

    // Pool2 and the second convolution's ReLU.
    let mut d_conv2 = vec![0.0; f * dims.conv2_out];
    for g in 0..f {
        for i in 0..dims.pool2_out {
            let arg = tape.pool2_arg[g * dims.pool2_out + i];
            if tape.conv2_pre[g * dims.conv2_out + arg] > 0.0 {
                d_conv2[g * dims.conv2_out + arg] += d_pool2[g * dims.pool2_out + i];
            }
        }
    }

    let mut d_pool1 = vec![0.0; f * dims.pool1_out];
    for g in 0..f {
        for i in 0..dims.conv2_out {
            let dz = d_conv2[g * dims.conv2_out + i];
            if dz == 0.0 {
                continue;
            }
            grad[l.b2.0 + g] += dz;
            for c in 0..f {
                for kk in 0..k {
                    grad[l.w2.0 + (g * f + c) * k + kk] +=
                        dz * tape.pool1[c * dims.pool1_out + i + kk];
                    d_pool1[c * dims.pool1_out + i + kk] +=
                        dz * t[l.w2.0 + (g * f + c) * k + kk];
                }
            }
        }
    }

    // Pool1 and the first convolution's ReLU.
    let mut d_conv1 = vec![0.0; f * dims.conv1_out];
    for fi in 0..f {
        for i in 0..dims.pool1_out {
            let arg = tape.pool1_arg[fi * dims.pool1_out + i];
            if tape.conv1_pre[fi * dims.conv1_out + arg] > 0.0 {
                d_conv1[fi * dims.conv1_out + arg] += d_pool1[fi * dims.pool1_out + i];
            }
        }
    }
    for fi in 0..f {
        for i in 0..dims.conv1_out {
            let dz = d_conv1[fi * dims.conv1_out + i];
            if dz == 0.0 {
                continue;
            }
            grad[l.b1.0 + fi] += dz;
            for kk in 0..k {
                grad[l.w1.0 + fi * k + kk] += dz * x[i + kk];
            }
        }
    }
}

fn initialize(params: &CnnParams, dims: CnnDims, seed: u64) -> Vec<f64> {
    let f = params.filters;
    let k = params.kernel_size;
    let d = params.fc_width;
    let l = Layout::new(f, k, d, dims.flat);
    let mut theta = vec![0.0; l.total];
    let mut rng = stream(seed, "cnn-init", 0);
    let mut fill = |range: (usize, usize), fan_in: usize, theta: &mut Vec<f64>| {
        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
        for slot in &mut theta[range.0..range.1] {
            *slot = normal.sample(&mut rng);
        }
    };
    fill(l.w1, k, &mut theta);
    fill(l.w2, f * k, &mut theta);
    fill(l.w_fc, dims.flat, &mut theta);
    fill(l.w_out, d, &mut theta);
    theta
}

pub(crate) fn fit(
    x: &[Vec<f64>],
    y: &[BinaryLabel],
    params: &CnnParams,
    seed: u64,
    input_len: usize,
) -> Result<CnnModel, MlError> {
    let dims = CnnDims::for_arch(input_len, params)?;
    let mut model = CnnModel {
        params: params.clone(),
        input_len,
        dims,
        theta: initialize(params, dims, seed),
    };
    let targets: Vec<usize> = y.iter().map(|l| if l.is_mi() { 1 } else { 0 }).collect();

    // Full-batch Adam.
    let n_params = model.theta.len();
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let scale = 1.0 / x.len() as f64;
    for step in 1..=params.epochs {
        let mut grad = vec![0.0; n_params];
        for (xi, &ti) in x.iter().zip(targets.iter()) {
            accumulate_gradient(&model, xi, ti, scale, &mut grad);
        }
        let bc1 = 1.0 - beta1.powi(step as i32);
        let bc2 = 1.0 - beta2.powi(step as i32);
        for p in 0..n_params {
            m[p] = beta1 * m[p] + (1.0 - beta1) * grad[p];
            v[p] = beta2 * v[p] + (1.0 - beta2) * grad[p] * grad[p];
            let m_hat = m[p] / bc1;
            let v_hat = v[p] / bc2;
            model.theta[p] -= params.learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(model)
}
