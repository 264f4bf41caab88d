//! Stage timing.

use std::time::Instant;

use rand::SeedableRng;

use crate::config::SensorConfig;
use crate::error::{Error, Result};
use crate::optics::mlp::INPUT_FEATURES;
use crate::optics::{Network, ReflectanceModel};
use crate::pipeline::Renderer;
use crate::raster::{HeightMap, TactileImage};
use crate::scene::ContactPose;

pub const MIN_ITERATIONS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub operation: String,
    pub width: usize,
    pub height: usize,
    pub iterations: usize,
    pub warmup: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub fps: f64,
    pub threads: usize,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        format!(
            "{:<14} {}x{}  iters={} warmup={} threads={}  mean={:.3} ms  median={:.3} ms  p95={:.3} ms  {:.1} fps\n",
            self.operation,
            self.width,
            self.height,
            self.iterations,
            self.warmup,
            self.threads,
            self.mean_ms,
            self.median_ms,
            self.p95_ms,
            self.fps
        )
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "operation={}\nwidth={}\nheight={}\niterations={}\nwarmup={}\nthreads={}\nmean_ms={}\nmedian_ms={}\np95_ms={}\nfps={}\n",
            self.operation,
            self.width,
            self.height,
            self.iterations,
            self.warmup,
            self.threads,
            self.mean_ms,
            self.median_ms,
            self.p95_ms,
            self.fps
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchSettings {
    pub iterations: usize,
    pub warmup: usize,
    pub threads: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self { iterations: 60, warmup: 5, threads: 1 }
    }
}

/// Times `f` for `warmup + iterations` calls, reporting the last `iterations`.
pub fn time_op(
    operation: &str,
    dims: (usize, usize),
    settings: &BenchSettings,
    mut f: impl FnMut() -> Result<()>,
) -> Result<BenchReport> {
    if settings.iterations < MIN_ITERATIONS {
        return Err(Error::invalid(format!(
            "benchmarks need at least {MIN_ITERATIONS} timed iterations, got {}",
            settings.iterations
        )));
    }
    for _ in 0..settings.warmup {
        f()?;
    }
    let mut samples = Vec::with_capacity(settings.iterations);
    for _ in 0..settings.iterations {
        let t = Instant::now();
        f()?;
        samples.push(t.elapsed().as_secs_f64() * 1e3);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let median = if n % 2 == 1 { samples[n / 2] } else { 0.5 * (samples[n / 2 - 1] + samples[n / 2]) };
    let p95 = samples[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1];
    Ok(BenchReport {
        operation: operation.to_string(),
        width: dims.0,
        height: dims.1,
        iterations: settings.iterations,
        warmup: settings.warmup,
        mean_ms: mean,
        median_ms: median,
        p95_ms: p95,
        fps: 1e3 / mean,
        threads: settings.threads,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Shade,
    ShadeShadows,
    Markers,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Shade, Stage::ShadeShadows, Stage::Markers];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Shade => "shade",
            Stage::ShadeShadows => "shade+shadows",
            Stage::Markers => "markers",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s || (s == "shadows" && *st == Stage::ShadeShadows))
    }
}

/// Runs one stage on `hm`. With more than one thread, shading runs on a
/// dedicated pool of that size.
pub fn bench_stage(
    renderer: &Renderer,
    hm: &HeightMap,
    pose: Option<&ContactPose>,
    stage: Stage,
    settings: &BenchSettings,
) -> Result<BenchReport> {
    let dims = hm.dims();
    let mut r = renderer.clone();
    r.shade.parallel = settings.threads > 1;
    let run = || -> Result<BenchReport> {
        match stage {
            Stage::Shade => time_op(stage.name(), dims, settings, || r.render_optical(hm, false).map(|_| ())),
            Stage::ShadeShadows => time_op(stage.name(), dims, settings, || r.render_optical(hm, true).map(|_| ())),
            Stage::Markers => {
                let img: TactileImage = r.background.clone();
                time_op(stage.name(), dims, settings, || r.render_marker_stage(&img, hm, pose).map(|_| ()))
            }
        }
    };
    if settings.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(settings.threads)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?;
        pool.install(run)
    } else {
        run()
    }
}

/// A reflectance model with the default architecture and random weights.
/// Timing does not depend on the weights.
pub fn untrained_model(seed: u64) -> Result<ReflectanceModel> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let net = Network::new(&[32, 32], &mut rng);
    let x = ndarray::Array2::from_shape_fn((64, INPUT_FEATURES), |(i, j)| ((i * 13 + j * 7) % 17) as f64 / 8.0 - 1.0);
    let stats = net.population_stats(&x);
    net.export(&stats, [0.0; 4], [1.0, 1.0, 0.3, 0.3], [128.0; 3], [30.0; 3], seed)
}

/// Renderer for timing: the config's lights and markers, a random model and
/// a flat grey background.
pub fn bench_renderer(cfg: &SensorConfig, seed: u64) -> Result<Renderer> {
    let bg = TactileImage::filled(cfg.sensor.width, cfg.sensor.height, [120, 120, 120]);
    Renderer::from_parts(cfg, untrained_model(seed)?, bg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics() {
        let s = BenchSettings { iterations: 30, warmup: 1, threads: 1 };
        let r = time_op("noop", (4, 4), &s, || Ok(())).unwrap();
        assert_eq!(r.iterations, 30);
        assert!(r.median_ms <= r.p95_ms + 1e-12);
        assert!((r.fps - 1e3 / r.mean_ms).abs() <= 1e-9 * r.fps.max(1.0));
    }

    #[test]
    fn too_few_iterations() {
        let s = BenchSettings { iterations: 0, warmup: 0, threads: 1 };
        assert!(time_op("noop", (4, 4), &s, || Ok(())).is_err());
    }
}
