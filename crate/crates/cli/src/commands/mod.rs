mod bench;
mod calibrate;
mod synth;

use std::path::Path;

use tacsim::config::raster_io::{
    read_height_png, read_image_png, read_raster, write_height_png, write_image_png, write_raster,
};
use tacsim::config::table::{read_displacement_table, write_displacement_table};
use tacsim::config::SensorConfig;
use tacsim::marker::flow_image;
use tacsim::metrics::{image_metrics, marker_l1};
use tacsim::pipeline::{RenderOptions, Renderer};
use tacsim::scene::{contact_state_from_footprint, render_height_map};
use tacsim::{ContactPose, Error, HeightMap, IndenterShape, SensorGeometry};

pub use bench::bench;
pub use calibrate::{calibrate_lights, calibrate_markers, calibrate_optics};
pub use synth::synth;

use crate::common::{ensure_parent, CliError, CliResult, Context};
use crate::{CompareArgs, ConfigArgs, RenderArgs, SceneArgs, ShapeKind};

fn need(v: Option<f64>, flag: &str, shape: &str) -> CliResult<f64> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for a {shape}")))
}

fn shape_from_args(a: &SceneArgs) -> CliResult<IndenterShape> {
    let name = format!("{:?}", a.shape).to_lowercase();
    let n = name.as_str();
    Ok(match a.shape {
        ShapeKind::Sphere => IndenterShape::sphere(need(a.radius, "radius", n)?),
        ShapeKind::Cylinder => IndenterShape::Cylinder {
            radius: need(a.radius, "radius", n)?,
            length: need(a.length, "length", n)?,
            yaw_deg: a.yaw,
        },
        ShapeKind::Cuboid => IndenterShape::Cuboid {
            width: need(a.width, "width", n)?,
            length: need(a.length, "length", n)?,
            yaw_deg: a.yaw,
        },
        ShapeKind::Prism => IndenterShape::Prism {
            width: need(a.width, "width", n)?,
            ridge_height: need(a.ridge_height, "ridge-height", n)?,
            length: need(a.length, "length", n)?,
            yaw_deg: a.yaw,
        },
        ShapeKind::Cone => {
            IndenterShape::Cone { radius: need(a.radius, "radius", n)?, height: need(a.cone_height, "cone-height", n)? }
        }
    })
}

pub fn scene(ctx: &Context, a: &SceneArgs) -> CliResult {
    let (cfg, _) = ctx.config()?;
    let sensor = cfg.sensor_geometry();
    let shape = shape_from_args(a)?;
    let pose = ContactPose::pressed(a.center.unwrap_or_else(|| sensor.center()), a.depth);
    let hm = render_height_map(&shape, &pose, &sensor)?;
    ensure_parent(&a.out)?;
    write_raster(&hm, &a.out)?;
    if let Some(png) = &a.png {
        ensure_parent(png)?;
        write_height_png(&hm, png, a.png_scale)?;
    }
    let threshold = cfg.sensor.contact_threshold as f32;
    let contact = hm.count_above(threshold);
    let touched = hm.count_above(0.0);
    println!("scene {} {}x{} pitch={} mm", shape.name(), sensor.width, sensor.height, sensor.pitch);
    println!(
        "max_height={:.4} mm  contact_pixels={contact}  contact_area={:.4} mm2  touched_pixels={touched}",
        hm.max(),
        contact as f64 * sensor.pitch * sensor.pitch
    );
    Ok(())
}

fn is_png(p: &Path) -> bool {
    p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

pub fn read_heightmap(path: &Path, png_scale: Option<f64>, sensor: &SensorGeometry) -> CliResult<HeightMap> {
    let hm = if is_png(path) {
        let scale =
            png_scale.ok_or_else(|| CliError::Usage("PNG height maps need --png-scale (mm per level)".into()))?;
        read_height_png(path, scale, sensor.pitch)?
    } else {
        read_raster(path)?
    };
    if (hm.pitch() - sensor.pitch).abs() > 1e-9 * sensor.pitch {
        return Err(Error::Validation {
            path: "heightmap".into(),
            message: format!("pitch {} mm does not match the sensor pitch {} mm", hm.pitch(), sensor.pitch),
        }
        .into());
    }
    Ok(hm)
}

fn load_renderer(cfg: &SensorConfig, base: &Path) -> CliResult<Renderer> {
    Ok(Renderer::from_config(cfg, base)?)
}

pub fn render(ctx: &Context, a: &RenderArgs) -> CliResult {
    let (cfg, base) = ctx.config()?;
    let renderer = load_renderer(&cfg, &base)?;
    let hm = renderer.foreground(&read_heightmap(&a.heightmap, a.png_scale, &renderer.sensor)?)?;
    let threshold = cfg.sensor.contact_threshold;
    let pose = if a.center.is_some() || a.shear.is_some() || a.twist.is_some() {
        let shear = a.shear.unwrap_or((0.0, 0.0));
        let twist = a.twist.unwrap_or(0.0);
        let center = match a.center {
            Some(c) => c,
            None => contact_state_from_footprint(&hm, shear, twist, threshold)?
                .footprint_centroid()
                .unwrap_or_else(|| renderer.sensor.center()),
        };
        let pose = ContactPose { center, depth: hm.max() as f64, shear, twist_deg: twist };
        pose.validate(&renderer.sensor)?;
        Some(pose)
    } else {
        None
    };
    let opts = RenderOptions { shadows: !a.no_shadows, markers: !a.no_markers };
    let out = renderer.render(&hm, pose.as_ref(), opts)?;
    ensure_parent(&a.out)?;
    write_image_png(&out.image, &a.out)?;

    let initial = renderer.markers.positions();
    if let Some(motion) = &out.motion {
        if let Some(p) = &a.flow {
            ensure_parent(p)?;
            let img = flow_image(initial, &motion.positions, a.flow_scale, hm.dims(), renderer.sensor.pitch)?;
            write_image_png(&img, p)?;
        }
        if let Some(p) = &a.table {
            ensure_parent(p)?;
            write_displacement_table(initial, &motion.displacement, p)?;
        }
    } else if a.flow.is_some() || a.table.is_some() {
        return Err(CliError::Usage("--flow and --table need markers (drop --no-markers)".into()));
    }

    println!(
        "render {}x{} contact_pixels={} shadows={} markers={}",
        hm.width(),
        hm.height(),
        hm.count_above(threshold as f32),
        if opts.shadows { "on" } else { "off" },
        if opts.markers { initial.len() } else { 0 }
    );
    if let Some(m) = &out.motion {
        let max = m.displacement.vectors.iter().map(|v| v.0.hypot(v.1)).fold(0.0, f64::max);
        let clamped = m.clamped.iter().filter(|c| **c).count();
        println!("max_marker_displacement={max:.5} mm clamped={clamped}");
    }
    Ok(())
}

pub fn compare(a: &CompareArgs) -> CliResult {
    match (is_png(&a.a), is_png(&a.b)) {
        (true, true) => {
            let r = image_metrics(&read_image_png(&a.a)?, &read_image_png(&a.b)?)?;
            print!("{}", if a.porcelain { r.to_key_values() } else { r.to_text() });
        }
        (false, false) => {
            let (ia, fa) = read_displacement_table(&a.a)?;
            let (ib, fb) = read_displacement_table(&a.b)?;
            if ia.len() != ib.len() {
                return Err(Error::LengthMismatch { left: ia.len(), right: ib.len() }.into());
            }
            let l1 = marker_l1(&fa, &fb)?;
            if a.porcelain {
                println!("markers={}\nmarker_l1={l1}", fa.len());
            } else {
                println!("markers {}  marker L1 {l1:.6e} mm", fa.len());
            }
        }
        _ => return Err(CliError::Usage("compare two PNG images or two displacement tables, not one of each".into())),
    }
    Ok(())
}

pub fn config(a: &ConfigArgs) -> CliResult {
    let text = SensorConfig::bundled_text(&a.name)
        .ok_or_else(|| CliError::Usage(format!("no bundled config named `{}` (try digit, gelsight)", a.name)))?;
    match &a.out {
        Some(p) => {
            ensure_parent(p)?;
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}
