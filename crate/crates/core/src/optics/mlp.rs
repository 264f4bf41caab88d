//! Reflectance MLP: `(∂H/∂x, ∂H/∂y, x/width, y/height) -> RGB`.
//!
//! Hidden layers are `linear (no bias) -> batch norm -> ReLU`; the output layer
//! is linear with bias. Inputs are standardized and outputs de-standardized with
//! statistics captured from the training set.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const INPUT_FEATURES: usize = 4;
pub const OUTPUT_CHANNELS: usize = 3;
pub const BN_EPSILON: f64 = 1e-5;

/// Batch-normalization parameters and population statistics for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
    pub scale: Vec<f32>,
    pub shift: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f32>,
    pub norm: BatchNormParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputLayer {
    pub inputs: usize,
    /// Row-major `3 x inputs`.
    pub weights: Vec<f32>,
    pub bias: [f32; OUTPUT_CHANNELS],
}

/// Trained reflectance function. Immutable once built.
#[derive(Debug, Clone)]
pub struct ReflectanceModel {
    pub input_mean: [f32; INPUT_FEATURES],
    pub input_std: [f32; INPUT_FEATURES],
    pub hidden: Vec<HiddenLayer>,
    pub output: OutputLayer,
    pub target_mean: [f32; OUTPUT_CHANNELS],
    pub target_std: [f32; OUTPUT_CHANNELS],
    /// Shuffle seed used for the train/validation split.
    pub seed: u64,
    plan: InferencePlan,
}

impl PartialEq for ReflectanceModel {
    fn eq(&self, other: &Self) -> bool {
        self.input_mean == other.input_mean
            && self.input_std == other.input_std
            && self.hidden == other.hidden
            && self.output == other.output
            && self.target_mean == other.target_mean
            && self.target_std == other.target_std
            && self.seed == other.seed
    }
}

/// Batch norm and standardization folded into plain affine layers, stored
/// input-major so the inner loop runs over contiguous outputs.
#[derive(Debug, Clone, Default)]
struct InferencePlan {
    layers: Vec<FoldedLayer>,
    max_width: usize,
}

#[derive(Debug, Clone)]
struct FoldedLayer {
    inputs: usize,
    outputs: usize,
    /// `inputs x outputs`.
    weights_t: Vec<f32>,
    bias: Vec<f32>,
    relu: bool,
}

impl ReflectanceModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        input_mean: [f32; INPUT_FEATURES],
        input_std: [f32; INPUT_FEATURES],
        hidden: Vec<HiddenLayer>,
        output: OutputLayer,
        target_mean: [f32; OUTPUT_CHANNELS],
        target_std: [f32; OUTPUT_CHANNELS],
        seed: u64,
    ) -> Result<Self> {
        let mut m = Self {
            input_mean,
            input_std,
            hidden,
            output,
            target_mean,
            target_std,
            seed,
            plan: InferencePlan::default(),
        };
        m.validate()?;
        m.plan = m.fold();
        Ok(m)
    }

    /// Layer widths, input to output: `[4, h1, .., 3]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![INPUT_FEATURES];
        sizes.extend(self.hidden.iter().map(|l| l.outputs));
        sizes.push(OUTPUT_CHANNELS);
        sizes
    }

    fn validate(&self) -> Result<()> {
        let mut width = INPUT_FEATURES;
        for (i, l) in self.hidden.iter().enumerate() {
            let ok = l.inputs == width
                && l.weights.len() == l.inputs * l.outputs
                && l.norm.mean.len() == l.outputs
                && l.norm.var.len() == l.outputs
                && l.norm.scale.len() == l.outputs
                && l.norm.shift.len() == l.outputs;
            if !ok {
                return Err(Error::Format(format!("hidden layer {i} shapes do not chain")));
            }
            if l.norm.var.iter().any(|v| *v < 0.0) {
                return Err(Error::Format(format!("hidden layer {i} has negative variance")));
            }
            width = l.outputs;
        }
        if self.output.inputs != width || self.output.weights.len() != width * OUTPUT_CHANNELS {
            return Err(Error::Format("output layer shape does not chain".into()));
        }
        if self.input_std.iter().chain(&self.target_std).any(|s| !(*s > 0.0)) {
            return Err(Error::Format("standardization scales must be positive".into()));
        }
        let all = self
            .hidden
            .iter()
            .flat_map(|l| {
                l.weights.iter().chain(&l.norm.mean).chain(&l.norm.var).chain(&l.norm.scale).chain(&l.norm.shift)
            })
            .chain(&self.output.weights)
            .chain(&self.output.bias)
            .chain(&self.input_mean)
            .chain(&self.target_mean);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite model parameter".into()));
        }
        Ok(())
    }

    fn fold(&self) -> InferencePlan {
        let mut layers = Vec::new();
        let mut pre_scale: Vec<f64> = self.input_std.iter().map(|s| 1.0 / *s as f64).collect();
        let mut pre_shift: Vec<f64> =
            self.input_mean.iter().zip(&self.input_std).map(|(m, s)| -(*m as f64) / *s as f64).collect();
        for l in &self.hidden {
            // z = W (a ∘ x + c); y = g (z - μ)/σ + β
            let mut weights_t = vec![0.0f32; l.inputs * l.outputs];
            let mut bias = vec![0.0f32; l.outputs];
            for o in 0..l.outputs {
                let k = l.norm.scale[o] as f64 / (l.norm.var[o] as f64 + BN_EPSILON).sqrt();
                let mut b = l.norm.shift[o] as f64 - k * l.norm.mean[o] as f64;
                for i in 0..l.inputs {
                    let w = l.weights[o * l.inputs + i] as f64;
                    weights_t[i * l.outputs + o] = (k * w * pre_scale[i]) as f32;
                    b += k * w * pre_shift[i];
                }
                bias[o] = b as f32;
            }
            layers.push(FoldedLayer { inputs: l.inputs, outputs: l.outputs, weights_t, bias, relu: true });
            pre_scale = vec![1.0; l.outputs];
            pre_shift = vec![0.0; l.outputs];
        }
        let n = self.output.inputs;
        let mut weights_t = vec![0.0f32; n * OUTPUT_CHANNELS];
        let mut bias = vec![0.0f32; OUTPUT_CHANNELS];
        for o in 0..OUTPUT_CHANNELS {
            let s = self.target_std[o] as f64;
            let mut b = self.output.bias[o] as f64 * s + self.target_mean[o] as f64;
            for i in 0..n {
                let w = self.output.weights[o * n + i] as f64;
                weights_t[i * OUTPUT_CHANNELS + o] = (w * s * pre_scale[i]) as f32;
                b += w * s * pre_shift[i];
            }
            bias[o] = b as f32;
        }
        layers.push(FoldedLayer { inputs: n, outputs: OUTPUT_CHANNELS, weights_t, bias, relu: false });
        let max_width = layers.iter().map(|l| l.outputs.max(l.inputs)).max().unwrap_or(4);
        InferencePlan { layers, max_width }
    }

    /// Scratch space for [`Self::predict_with`].
    pub fn scratch(&self) -> Vec<f32> {
        vec![0.0; 2 * self.plan.max_width]
    }

    /// RGB in `[0, 255]` for raw features `(gx, gy, x/width, y/height)`.
    pub fn predict(&self, features: [f32; INPUT_FEATURES]) -> [f32; OUTPUT_CHANNELS] {
        let mut scratch = self.scratch();
        self.predict_with(features, &mut scratch)
    }

    pub fn predict_with(&self, features: [f32; INPUT_FEATURES], scratch: &mut [f32]) -> [f32; OUTPUT_CHANNELS] {
        let w = self.plan.max_width;
        let (a, b) = scratch.split_at_mut(w);
        a[..INPUT_FEATURES].copy_from_slice(&features);
        let (mut cur, mut next) = (a, b);
        for layer in &self.plan.layers {
            let out = &mut next[..layer.outputs];
            out.copy_from_slice(&layer.bias);
            for (i, &x) in cur[..layer.inputs].iter().enumerate() {
                let row = &layer.weights_t[i * layer.outputs..(i + 1) * layer.outputs];
                for (o, wv) in out.iter_mut().zip(row) {
                    *o += x * wv;
                }
            }
            if layer.relu {
                for o in out.iter_mut() {
                    *o = o.max(0.0);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        [cur[0].clamp(0.0, 255.0), cur[1].clamp(0.0, 255.0), cur[2].clamp(0.0, 255.0)]
    }
}

/// Trainable f64 copy of the network, with analytic backpropagation.
///
/// Batch norm always runs in batch-statistics mode here; population statistics
/// are captured separately when exporting a [`ReflectanceModel`].
#[derive(Debug, Clone)]
pub struct Network {
    pub hidden: Vec<TrainHidden>,
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainHidden {
    /// `outputs x inputs`.
    pub w: Array2<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

struct HiddenCache {
    input: Array2<f64>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    pre_act: Array2<f64>,
}

impl Network {
    /// He-initialized network with the given hidden widths.
    pub fn new<R: Rng>(hidden_sizes: &[usize], rng: &mut R) -> Self {
        let mut inputs = INPUT_FEATURES;
        let mut hidden = Vec::new();
        for &n in hidden_sizes {
            let scale = (2.0 / inputs as f64).sqrt();
            let w = Array2::from_shape_fn((n, inputs), |_| scale * rng.sample::<f64, _>(StandardNormal));
            hidden.push(TrainHidden { w, gamma: Array1::ones(n), beta: Array1::zeros(n) });
            inputs = n;
        }
        let scale = (1.0 / inputs as f64).sqrt();
        let out_w = Array2::from_shape_fn((OUTPUT_CHANNELS, inputs), |_| scale * rng.sample::<f64, _>(StandardNormal));
        Self { hidden, out_w, out_b: Array1::zeros(OUTPUT_CHANNELS) }
    }

    pub fn param_count(&self) -> usize {
        self.hidden.iter().map(|l| l.w.len() + l.gamma.len() + l.beta.len()).sum::<usize>()
            + self.out_w.len()
            + self.out_b.len()
    }

    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        for l in &self.hidden {
            v.push(l.w.as_slice().expect("contiguous"));
            v.push(l.gamma.as_slice().expect("contiguous"));
            v.push(l.beta.as_slice().expect("contiguous"));
        }
        v.push(self.out_w.as_slice().expect("contiguous"));
        v.push(self.out_b.as_slice().expect("contiguous"));
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.hidden {
            v.push(l.w.as_slice_mut().expect("contiguous"));
            v.push(l.gamma.as_slice_mut().expect("contiguous"));
            v.push(l.beta.as_slice_mut().expect("contiguous"));
        }
        v.push(self.out_w.as_slice_mut().expect("contiguous"));
        v.push(self.out_b.as_slice_mut().expect("contiguous"));
        v
    }

    /// Flattened parameters in a fixed order (per hidden layer: W, γ, β; then output W, b).
    pub fn params(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    pub fn param(&self, index: usize) -> f64 {
        let mut i = index;
        for s in self.param_slices() {
            if i < s.len() {
                return s[i];
            }
            i -= s.len();
        }
        panic!("parameter index {index} out of range");
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let mut i = index;
        for s in self.param_slices_mut() {
            if i < s.len() {
                s[i] = value;
                return;
            }
            i -= s.len();
        }
        panic!("parameter index {index} out of range");
    }

    /// Adds `delta` element-wise to the flattened parameters.
    pub fn apply_update(&mut self, delta: &[f64]) {
        let mut off = 0;
        for s in self.param_slices_mut() {
            let n = s.len();
            for (p, d) in s.iter_mut().zip(&delta[off..off + n]) {
                *p += d;
            }
            off += n;
        }
    }

    fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, Vec<HiddenCache>) {
        let mut caches = Vec::with_capacity(self.hidden.len());
        let mut a = x.clone();
        for l in &self.hidden {
            let z = a.dot(&l.w.t());
            let n = z.nrows() as f64;
            let mean = z.sum_axis(Axis(0)) / n;
            let centered = &z - &mean;
            let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
            let inv_std = var.mapv(|v| 1.0 / (v + BN_EPSILON).sqrt());
            let xhat = &centered * &inv_std;
            let pre_act = &xhat * &l.gamma + &l.beta;
            let next = pre_act.mapv(|v| v.max(0.0));
            caches.push(HiddenCache { input: a, xhat, inv_std, pre_act });
            a = next;
        }
        let out = a.dot(&self.out_w.t()) + &self.out_b;
        caches.push(HiddenCache {
            input: a,
            xhat: Array2::zeros((0, 0)),
            inv_std: Array1::zeros(0),
            pre_act: Array2::zeros((0, 0)),
        });
        (out, caches)
    }

    /// Mean squared error over all samples and channels, batch-statistics mode.
    pub fn loss(&self, x: &Array2<f64>, targets: &Array2<f64>) -> f64 {
        let (out, _) = self.forward(x);
        mse(&out, targets)
    }

    /// Loss and its gradient w.r.t. the flattened parameters (order of [`Self::params`]).
    pub fn loss_and_gradient(&self, x: &Array2<f64>, targets: &Array2<f64>) -> (f64, Vec<f64>) {
        let (out, caches) = self.forward(x);
        let loss = mse(&out, targets);
        let scale = 2.0 / out.len() as f64;
        let d_out = (&out - targets) * scale;

        let last = caches.last().expect("output cache");
        let g_out_w = d_out.t().dot(&last.input);
        let g_out_b = d_out.sum_axis(Axis(0));
        let mut d_a = d_out.dot(&self.out_w);

        let mut layer_grads: Vec<(Array2<f64>, Array1<f64>, Array1<f64>)> = Vec::with_capacity(self.hidden.len());
        for (l, c) in self.hidden.iter().zip(&caches).rev() {
            let mut d_y = d_a;
            d_y.zip_mut_with(&c.pre_act, |d, y| {
                if *y <= 0.0 {
                    *d = 0.0
                }
            });
            let g_gamma = (&d_y * &c.xhat).sum_axis(Axis(0));
            let g_beta = d_y.sum_axis(Axis(0));
            let d_xhat = &d_y * &l.gamma;
            let n = d_xhat.nrows() as f64;
            let sum_dx = d_xhat.sum_axis(Axis(0));
            let sum_dx_xhat = (&d_xhat * &c.xhat).sum_axis(Axis(0));
            let d_z = ((&d_xhat * n) - &sum_dx - &(&c.xhat * &sum_dx_xhat)) * &(&c.inv_std / n);
            let g_w = d_z.t().dot(&c.input);
            d_a = d_z.dot(&l.w);
            layer_grads.push((g_w, g_gamma, g_beta));
        }
        layer_grads.reverse();
        let mut grad = Vec::with_capacity(self.param_count());
        for (g_w, g_gamma, g_beta) in &layer_grads {
            grad.extend(g_w.iter());
            grad.extend(g_gamma.iter());
            grad.extend(g_beta.iter());
        }
        grad.extend(g_out_w.iter());
        grad.extend(g_out_b.iter());
        (loss, grad)
    }

    /// Population batch-norm statistics over `x`, computed layer by layer in
    /// inference mode.
    pub fn population_stats(&self, x: &Array2<f64>) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut a = x.clone();
        let mut stats = Vec::new();
        for l in &self.hidden {
            let z = a.dot(&l.w.t());
            let n = z.nrows() as f64;
            let mean = z.sum_axis(Axis(0)) / n;
            let centered = &z - &mean;
            let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
            let inv_std = var.mapv(|v| 1.0 / (v + BN_EPSILON).sqrt());
            a = (&centered * &inv_std * &l.gamma + &l.beta).mapv(|v| v.max(0.0));
            stats.push((mean.to_vec(), var.to_vec()));
        }
        stats
    }

    /// Inference-mode forward pass using previously captured population statistics.
    pub fn predict_population(&self, x: &Array2<f64>, stats: &[(Vec<f64>, Vec<f64>)]) -> Array2<f64> {
        let mut a = x.clone();
        for (l, (mean, var)) in self.hidden.iter().zip(stats) {
            let mean = Array1::from_vec(mean.clone());
            let inv_std = Array1::from_vec(var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect());
            let z = a.dot(&l.w.t());
            a = ((&z - &mean) * &inv_std * &l.gamma + &l.beta).mapv(|v| v.max(0.0));
        }
        a.dot(&self.out_w.t()) + &self.out_b
    }

    pub(crate) fn export(
        &self,
        stats: &[(Vec<f64>, Vec<f64>)],
        input_mean: [f32; INPUT_FEATURES],
        input_std: [f32; INPUT_FEATURES],
        target_mean: [f32; OUTPUT_CHANNELS],
        target_std: [f32; OUTPUT_CHANNELS],
        seed: u64,
    ) -> Result<ReflectanceModel> {
        let to32 = |v: &[f64]| v.iter().map(|x| *x as f32).collect::<Vec<_>>();
        let hidden = self
            .hidden
            .iter()
            .zip(stats)
            .map(|(l, (mean, var))| HiddenLayer {
                inputs: l.w.ncols(),
                outputs: l.w.nrows(),
                weights: to32(l.w.as_slice().expect("contiguous")),
                norm: BatchNormParams {
                    mean: to32(mean),
                    var: to32(var),
                    scale: to32(l.gamma.as_slice().expect("contiguous")),
                    shift: to32(l.beta.as_slice().expect("contiguous")),
                },
            })
            .collect();
        let output = OutputLayer {
            inputs: self.out_w.ncols(),
            weights: to32(self.out_w.as_slice().expect("contiguous")),
            bias: [self.out_b[0] as f32, self.out_b[1] as f32, self.out_b[2] as f32],
        };
        ReflectanceModel::new(input_mean, input_std, hidden, output, target_mean, target_std, seed)
    }
}

fn mse(out: &Array2<f64>, targets: &Array2<f64>) -> f64 {
    let diff = out - targets;
    diff.mapv(|v| v * v).sum() / out.len() as f64
}
