use std::path::{Path, PathBuf};

use tacsim::config::model_io::write_model;
use tacsim::config::raster_io::read_image_png;
use tacsim::config::save_config;
use tacsim::config::table::read_displacement_table;
use tacsim::marker::{fit_lambdas, MotionObservation};
use tacsim::optics::dataset::sphere_contact_radius;
use tacsim::optics::{build_rgb_normal_dataset, train_reflectance, CalibrationCapture, DatasetOptions, TrainSpec};
use tacsim::scene::{contact_state, render_height_map};
use tacsim::shadow::{
    calibrate_attenuation, calibrate_lights as fit_lights, detect_ball_shadows, LightKind, LightRig, ShadowSegmentation,
};
use tacsim::{Error, IndenterShape, TactileImage};

use crate::common::{
    base_dir, ensure_parent, path_for, rebase_config, save_config_to, write_report, CliError, CliResult, Context,
};
use crate::manifest::Manifest;
use crate::{CalibrateLightsArgs, CalibrateMarkersArgs, CalibrateOpticsArgs};

struct Presses {
    manifest: Manifest,
    background_path: PathBuf,
    background: TactileImage,
    images: Vec<TactileImage>,
}

fn load_presses(path: &Path) -> CliResult<Presses> {
    let (manifest, base) = Manifest::load(path)?;
    if manifest.press.is_empty() {
        return Err(Error::InsufficientData("the capture manifest lists no presses".into()).into());
    }
    let background_path = base.join(&manifest.background);
    let background = read_image_png(&background_path)?;
    let images = manifest.press.iter().map(|p| read_image_png(&base.join(&p.image))).collect::<Result<Vec<_>, _>>()?;
    Ok(Presses { manifest, background_path, background, images })
}

/// Per-press shadow masks (one per light) found by segmenting against the background.
fn shadow_masks(
    p: &Presses,
    rig: &LightRig,
    pitch: f64,
) -> CliResult<Vec<(tacsim::shadow::BallCapture, Vec<Vec<bool>>)>> {
    let r = p.manifest.radius;
    let seg = ShadowSegmentation::default();
    p.manifest
        .press
        .iter()
        .zip(&p.images)
        .map(|(press, img)| {
            let a = sphere_contact_radius(r, press.depth);
            let center = (press.center[0], press.center[1]);
            detect_ball_shadows(img, &p.background, rig, pitch, center, r, a, Some(press.depth - r), &seg)
                .map_err(CliError::from)
        })
        .collect()
}

pub fn calibrate_lights(ctx: &Context, a: &CalibrateLightsArgs) -> CliResult {
    let (mut cfg, base) = ctx.config()?;
    let template = cfg.light_rig()?;
    if template.lights.is_empty() {
        return Err(Error::Validation {
            path: "lights".into(),
            message: "the config lists no lights to calibrate".into(),
        }
        .into());
    }
    let p = load_presses(&a.input.captures)?;
    let detected = shadow_masks(&p, &template, cfg.sensor.pitch)?;
    let balls: Vec<_> = detected.iter().map(|(b, _)| b.clone()).collect();
    let (mut rig, report) = fit_lights(&balls, &template)?;
    let per_light: Vec<Vec<(&TactileImage, Vec<bool>)>> = (0..rig.lights.len())
        .map(|i| p.images.iter().zip(&detected).map(|(img, (_, m))| (img, m[i].clone())).collect())
        .collect();
    calibrate_attenuation(&mut rig, &p.background, &per_light)?;

    let mut text = report.to_text();
    for (i, l) in rig.lights.iter().enumerate() {
        let what = match l.kind {
            LightKind::Point { position: v } => format!("position=({:.4}, {:.4}, {:.4}) mm", v.x, v.y, v.z),
            LightKind::Directional { direction: v } => format!("direction=({:.5}, {:.5}, {:.5})", v.x, v.y, v.z),
        };
        text.push_str(&format!(
            "light {i}: {what} strength={:.4} tint=({:.3}, {:.3}, {:.3})\n",
            l.strength, l.tint[0], l.tint[1], l.tint[2]
        ));
    }
    cfg.set_light_rig(&rig);
    save_config_to(cfg, &base, &a.config_out)?;
    write_report(a.input.report.as_deref(), &text)
}

pub fn calibrate_optics(ctx: &Context, a: &CalibrateOpticsArgs) -> CliResult {
    if a.epochs == Some(0) {
        return Err(CliError::Usage("--epochs must be at least 1".into()));
    }
    let (mut cfg, base) = ctx.config()?;
    let sensor = cfg.sensor_geometry();
    let p = load_presses(&a.input.captures)?;
    let rig = cfg.light_rig()?;
    let unions: Option<Vec<Vec<bool>>> = if rig.lights.is_empty() {
        None
    } else {
        let n = sensor.width * sensor.height;
        Some(
            shadow_masks(&p, &rig, sensor.pitch)?
                .iter()
                .map(|(_, ms)| (0..n).map(|i| ms.iter().any(|m| m[i])).collect())
                .collect(),
        )
    };
    let captures: Vec<CalibrationCapture> = p
        .manifest
        .press
        .iter()
        .zip(&p.images)
        .enumerate()
        .map(|(k, (press, img))| CalibrationCapture {
            image: img,
            pose: press.pose(),
            shape: IndenterShape::sphere(p.manifest.radius),
            shadow_mask: unions.as_ref().map(|u| u[k].as_slice()),
        })
        .collect();
    let ds = build_rgb_normal_dataset(&captures, &p.background, &DatasetOptions::new(sensor))?;
    let mut spec = TrainSpec { seed: ctx.seed, ..TrainSpec::default() };
    if let Some(e) = a.epochs {
        spec.epochs = e;
    }
    let (model, report) = train_reflectance(&ds, &spec, Some(&p.background))?;
    ensure_parent(&a.model_out)?;
    write_model(&model, &a.model_out, Some(&report))?;

    let rmse = report.validation_rmse;
    let text = format!(
        "optics calibration\nrecords={} train={} validation={} anchors={}\nepochs={} best_epoch={} first_loss={:.6} final_loss={:.6}\nvalidation_rmse=({:.3}, {:.3}, {:.3}) levels\nmodel={}\n",
        ds.len(),
        report.train_count,
        report.validation_count,
        report.anchor_count,
        report.epoch_losses.len(),
        report.best_epoch,
        report.first_loss(),
        report.final_loss(),
        rmse[0],
        rmse[1],
        rmse[2],
        a.model_out.display()
    );
    write_report(a.input.report.as_deref(), &text)?;

    if let Some(out) = &a.config_out {
        ensure_parent(out)?;
        let dir = base_dir(out);
        rebase_config(&mut cfg, &base, &dir);
        cfg.optics.model = Some(path_for(&dir, &a.model_out));
        cfg.optics.background = Some(path_for(&dir, &p.background_path));
        save_config(&cfg, out)?;
    }

    if report.final_loss() > report.first_loss() {
        return Err(CliError::Numerical(format!(
            "training did not reduce the loss ({} -> {})",
            report.first_loss(),
            report.final_loss()
        )));
    }
    if let Some(max) = a.max_rmse {
        if rmse.iter().any(|r| *r > max) {
            return Err(CliError::Numerical(format!(
                "held-out RMSE ({:.3}, {:.3}, {:.3}) exceeds --max-rmse {max}",
                rmse[0], rmse[1], rmse[2]
            )));
        }
    }
    Ok(())
}

pub fn calibrate_markers(ctx: &Context, a: &CalibrateMarkersArgs) -> CliResult {
    let (mut cfg, base) = ctx.config()?;
    let sensor = cfg.sensor_geometry();
    let (manifest, mbase) = Manifest::load(&a.input.captures)?;
    if manifest.motion.is_empty() {
        return Err(Error::InsufficientData("the capture manifest lists no marker observations".into()).into());
    }
    let sphere = IndenterShape::sphere(manifest.radius);
    let mut observations = Vec::with_capacity(manifest.motion.len());
    for m in &manifest.motion {
        let (initial, field) = read_displacement_table(&mbase.join(&m.table))?;
        let pose = m.pose();
        let hm = render_height_map(&sphere, &pose, &sensor)?;
        let contact =
            contact_state(&hm, &pose, cfg.sensor.contact_threshold)?.subsampled(cfg.markers.stride, sensor.pitch);
        let observed = initial.iter().zip(&field.vectors).map(|(p, d)| (p.0 + d.0, p.1 + d.1)).collect();
        observations.push(MotionObservation { load: m.load.into(), contact, initial, observed });
    }
    let fit = fit_lambdas(&observations, &cfg.motion())?;
    cfg.set_motion(&fit.coefficients);
    save_config_to(cfg, &base, &a.config_out)?;
    write_report(a.input.report.as_deref(), &fit.to_text())
}
