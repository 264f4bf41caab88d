//! Minibatch Adam training of the reflectance MLP.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{RgbNormalDataset, RgbNormalRecord};
use super::mlp::{Network, ReflectanceModel, INPUT_FEATURES, OUTPUT_CHANNELS};
use crate::error::{Error, Result};
use crate::raster::TactileImage;

/// Per-layer batch-norm mean and variance.
type BnStats = (Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSpec {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    pub seed: u64,
    /// When a background image is supplied, zero-gradient samples of it are
    /// added on a grid with this pixel stride.
    pub anchor_stride: usize,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            epochs: 60,
            batch_size: 256,
            learning_rate: 3e-3,
            validation_fraction: 0.1,
            seed: 7,
            anchor_stride: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean minibatch loss per epoch (standardized units).
    pub epoch_losses: Vec<f64>,
    /// Validation loss per epoch (standardized units, population statistics).
    pub validation_losses: Vec<f64>,
    pub best_epoch: usize,
    /// Per-channel RMSE on the held-out split of the returned model, in intensity levels.
    pub validation_rmse: [f64; OUTPUT_CHANNELS],
    pub train_count: usize,
    pub validation_count: usize,
    pub anchor_count: usize,
    pub dataset_hash: String,
    pub seed: u64,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        *self.epoch_losses.last().unwrap_or(&f64::NAN)
    }

    pub fn first_loss(&self) -> f64 {
        *self.epoch_losses.first().unwrap_or(&f64::NAN)
    }
}

struct Standardizer {
    in_mean: [f64; INPUT_FEATURES],
    in_std: [f64; INPUT_FEATURES],
    out_mean: [f64; OUTPUT_CHANNELS],
    out_std: [f64; OUTPUT_CHANNELS],
}

impl Standardizer {
    fn fit(features: &[[f32; INPUT_FEATURES]], targets: &[[f32; OUTPUT_CHANNELS]]) -> Self {
        fn stats<const N: usize>(rows: &[[f32; N]], floor: f64) -> ([f64; N], [f64; N]) {
            let n = rows.len() as f64;
            let mut mean = [0.0; N];
            for r in rows {
                for k in 0..N {
                    mean[k] += r[k] as f64;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut var = [0.0; N];
            for r in rows {
                for k in 0..N {
                    var[k] += (r[k] as f64 - mean[k]).powi(2);
                }
            }
            let std = var.map(|v| (v / n).sqrt().max(floor));
            (mean, std)
        }
        let (in_mean, in_std) = stats(features, 1e-6);
        // one intensity level keeps constant targets well conditioned
        let (out_mean, out_std) = stats(targets, 1.0);
        Self { in_mean, in_std, out_mean, out_std }
    }

    fn inputs(&self, rows: &[[f32; INPUT_FEATURES]], idx: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((idx.len(), INPUT_FEATURES), |(r, k)| {
            (rows[idx[r]][k] as f64 - self.in_mean[k]) / self.in_std[k]
        })
    }

    fn targets(&self, rows: &[[f32; OUTPUT_CHANNELS]], idx: &[usize]) -> Array2<f64> {
        Array2::from_shape_fn((idx.len(), OUTPUT_CHANNELS), |(r, k)| {
            (rows[idx[r]][k] as f64 - self.out_mean[k]) / self.out_std[k]
        })
    }
}

fn anchors(background: &TactileImage, stride: usize) -> Vec<RgbNormalRecord> {
    let stride = stride.max(1);
    let mut out = Vec::new();
    for row in (0..background.height()).step_by(stride) {
        for col in (0..background.width()).step_by(stride) {
            let p = background.pixel(col, row);
            out.push(RgbNormalRecord {
                gx: 0.0,
                gy: 0.0,
                x: col as f32,
                y: row as f32,
                rgb: [p[0] as f32, p[1] as f32, p[2] as f32],
                image: u32::MAX,
                contact: 0,
            });
        }
    }
    out
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, grad: &[f64], lr: f64) -> Vec<f64> {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        grad.iter()
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
            .map(|(g, (m, v))| {
                *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                -lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS)
            })
            .collect()
    }
}

/// Trains the reflectance MLP on `ds`, returning the model with the lowest
/// held-out loss together with the training report.
pub fn train_reflectance(
    ds: &RgbNormalDataset,
    spec: &TrainSpec,
    background: Option<&TactileImage>,
) -> Result<(ReflectanceModel, TrainReport)> {
    if ds.is_empty() {
        return Err(Error::InsufficientData("RGB-Normal dataset is empty".into()));
    }
    if spec.epochs == 0 || spec.batch_size < 2 || spec.hidden.is_empty() {
        return Err(Error::invalid("training needs epochs >= 1, batch size >= 2 and a hidden layer"));
    }
    if !(0.0..1.0).contains(&spec.validation_fraction) {
        return Err(Error::invalid("validation fraction must lie in [0, 1)"));
    }
    let mut records = ds.records.clone();
    let anchor_count = match background {
        Some(bg) => {
            bg.ensure_dims((ds.width, ds.height))?;
            let a = anchors(bg, spec.anchor_stride);
            let n = a.len();
            records.extend(a);
            n
        }
        None => 0,
    };
    let features: Vec<[f32; INPUT_FEATURES]> = records.iter().map(|r| r.features(ds.width, ds.height)).collect();
    let targets: Vec<[f32; OUTPUT_CHANNELS]> = records.iter().map(|r| r.rgb).collect();
    let norm = Standardizer::fit(&features, &targets);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut rng);
    let n_val = if records.len() >= 10 {
        ((records.len() as f64 * spec.validation_fraction).round() as usize).max(1)
    } else {
        0
    };
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    // tiny datasets validate on the training data
    let val_idx: Vec<usize> = if val_idx.is_empty() { train_idx.clone() } else { val_idx.to_vec() };

    let x_train_all = norm.inputs(&features, &train_idx);
    let x_val = norm.inputs(&features, &val_idx);
    let t_val = norm.targets(&targets, &val_idx);

    let mut net = Network::new(&spec.hidden, &mut rng);
    let mut adam = Adam::new(net.param_count());
    let mut epoch_losses = Vec::with_capacity(spec.epochs);
    let mut validation_losses = Vec::with_capacity(spec.epochs);
    // (validation loss, epoch, weights, batch-norm statistics)
    let mut best: Option<(f64, usize, Network, Vec<BnStats>)> = None;
    let batch = spec.batch_size.min(train_idx.len()).max(1);

    for epoch in 0..spec.epochs {
        train_idx.shuffle(&mut rng);
        let progress = epoch as f64 / spec.epochs as f64;
        let lr = spec.learning_rate * (0.05 + 0.95 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()));
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in train_idx.chunks(batch) {
            if chunk.len() < 2 && batches > 0 {
                continue;
            }
            let x = norm.inputs(&features, chunk);
            let t = norm.targets(&targets, chunk);
            let (loss, grad) = net.loss_and_gradient(&x, &t);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch: epoch + 1, loss });
            }
            let delta = adam.step(&grad, lr);
            net.apply_update(&delta);
            total += loss;
            batches += 1;
        }
        let epoch_loss = total / batches.max(1) as f64;
        let stats = net.population_stats(&x_train_all);
        let pred = net.predict_population(&x_val, &stats);
        let val_loss = (&pred - &t_val).mapv(|v| v * v).mean().unwrap_or(f64::NAN);
        if !epoch_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Diverged {
                epoch: epoch + 1,
                loss: if epoch_loss.is_finite() { val_loss } else { epoch_loss },
            });
        }
        epoch_losses.push(epoch_loss);
        validation_losses.push(val_loss);
        if best.as_ref().is_none_or(|b| val_loss < b.0) {
            best = Some((val_loss, epoch + 1, net.clone(), stats));
        }
    }

    let (_, best_epoch, best_net, stats) = best.expect("at least one epoch");
    let pred = best_net.predict_population(&x_val, &stats);
    let mut rmse = [0.0; OUTPUT_CHANNELS];
    for c in 0..OUTPUT_CHANNELS {
        let mut acc = 0.0;
        for r in 0..pred.nrows() {
            let p = (pred[[r, c]] * norm.out_std[c] + norm.out_mean[c]).clamp(0.0, 255.0);
            let t = t_val[[r, c]] * norm.out_std[c] + norm.out_mean[c];
            acc += (p - t).powi(2);
        }
        rmse[c] = (acc / pred.nrows() as f64).sqrt();
    }
    let model = best_net.export(
        &stats,
        norm.in_mean.map(|v| v as f32),
        norm.in_std.map(|v| v as f32),
        norm.out_mean.map(|v| v as f32),
        norm.out_std.map(|v| v as f32),
        spec.seed,
    )?;
    let report = TrainReport {
        epoch_losses,
        validation_losses,
        best_epoch,
        validation_rmse: rmse,
        train_count: train_idx.len(),
        validation_count: if n_val == 0 { 0 } else { val_idx.len() },
        anchor_count,
        dataset_hash: ds.content_hash(),
        seed: spec.seed,
    };
    Ok((model, report))
}
