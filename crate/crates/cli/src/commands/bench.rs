use tacsim::bench::{bench_renderer, bench_stage, BenchSettings, Stage, MIN_ITERATIONS};
use tacsim::pipeline::Renderer;
use tacsim::scene::render_height_map;
use tacsim::{ContactPose, IndenterShape};

use super::read_heightmap;
use crate::common::{CliError, CliResult, Context};
use crate::{BenchArgs, StageArg};

pub fn bench(ctx: &Context, a: &BenchArgs) -> CliResult {
    if a.iterations < MIN_ITERATIONS {
        return Err(CliError::Usage(format!("--iterations must be at least {MIN_ITERATIONS}, got {}", a.iterations)));
    }
    if a.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let (cfg, base) = ctx.config()?;
    let renderer = if a.random_model || cfg.optics.model.is_none() {
        bench_renderer(&cfg, ctx.seed)?
    } else {
        Renderer::from_config(&cfg, &base)?
    };
    let sensor = renderer.sensor;
    let (hm, pose) = match &a.heightmap {
        Some(p) => (renderer.foreground(&read_heightmap(p, None, &sensor)?)?, None),
        None => {
            let pose = ContactPose::pressed(sensor.center(), 0.8);
            (render_height_map(&IndenterShape::sphere(3.0), &pose, &sensor)?, Some(pose))
        }
    };
    let stages: Vec<Stage> = match a.stage {
        StageArg::All => Stage::ALL.to_vec(),
        StageArg::Shade => vec![Stage::Shade],
        StageArg::Shadows => vec![Stage::ShadeShadows],
        StageArg::Markers => vec![Stage::Markers],
    };
    let settings = BenchSettings { iterations: a.iterations, warmup: a.warmup, threads: a.threads };
    let mut reports = Vec::new();
    for (i, stage) in stages.iter().enumerate() {
        let r = bench_stage(&renderer, &hm, pose.as_ref(), *stage, &settings)?;
        if a.porcelain {
            if i > 0 {
                println!();
            }
            print!("{}", r.to_key_values());
        } else {
            print!("{}", r.to_text());
        }
        reports.push(r);
    }
    if !a.porcelain && reports.len() == 3 {
        println!("markers / shade+shadows speed ratio: {:.1}x", reports[2].fps / reports[1].fps);
    }
    Ok(())
}
