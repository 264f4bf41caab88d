use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tacsim::config::raster_io::{write_image_png, write_raster};
use tacsim::config::table::write_displacement_table;
use tacsim::config::{save_config, SensorConfig};
use tacsim::marker::DisplacementField;
use tacsim::scene::render_height_map;
use tacsim::synthetic::SyntheticSensor;
use tacsim::{ContactPose, IndenterShape};

use crate::common::{CliError, CliResult, Context};
use crate::manifest::{LoadName, Manifest, Motion, Press};
use crate::SynthArgs;

fn held_out_shape(k: usize, rng: &mut ChaCha8Rng) -> IndenterShape {
    match k % 5 {
        0 => IndenterShape::sphere(rng.gen_range(1.5..3.0)),
        1 => IndenterShape::Cylinder {
            radius: rng.gen_range(1.0..2.5),
            length: rng.gen_range(3.0..6.0),
            yaw_deg: rng.gen_range(0.0..180.0),
        },
        2 => IndenterShape::Cuboid {
            width: rng.gen_range(1.5..3.0),
            length: rng.gen_range(2.0..4.0),
            yaw_deg: rng.gen_range(0.0..180.0),
        },
        3 => IndenterShape::Prism {
            width: rng.gen_range(2.0..3.0),
            ridge_height: rng.gen_range(0.5..1.5),
            length: rng.gen_range(2.0..4.0),
            yaw_deg: rng.gen_range(0.0..180.0),
        },
        _ => IndenterShape::Cone { radius: rng.gen_range(1.5..3.0), height: rng.gen_range(1.0..3.0) },
    }
}

/// Writes presses, marker observations, held-out scenes, a starting config
/// and the true parameters of the reference sensor into `a.out`.
pub fn synth(ctx: &Context, a: &SynthArgs) -> CliResult {
    if a.count == 0 {
        return Err(CliError::Usage("--count must be at least 1".into()));
    }
    let r = a.radius;
    if !(r.is_finite() && r > 0.0) {
        return Err(CliError::Usage(format!("--radius must be > 0, got {r}")));
    }
    let oracle = SyntheticSensor::reference();
    let s = oracle.sensor;
    let (w, h) = s.extent();
    let margin = r + 1.5;
    if w <= 2.0 * margin || h <= 2.0 * margin {
        return Err(CliError::Usage(format!("a {r} mm sphere does not fit the {w:.2}x{h:.2} mm sensor")));
    }
    let dir = &a.out;
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let bg = oracle.background();
    write_image_png(&bg, &dir.join("background.png"))?;

    let initial = oracle.markers.positions().to_vec();
    let sphere = IndenterShape::sphere(r);
    let mut manifest =
        Manifest { radius: r, background: "background.png".into(), press: Vec::new(), motion: Vec::new() };
    for k in 0..a.count {
        // deep enough that the shadow-casting rim of the ball sits above the gel
        let depth = rng.gen_range(0.3 * r..0.5 * r);
        let center = (rng.gen_range(margin..w - margin), rng.gen_range(margin..h - margin));
        let pose = ContactPose::pressed(center, depth);
        let hm = render_height_map(&sphere, &pose, &s)?;
        let image = PathBuf::from(format!("press_{k:03}.png"));
        write_image_png(&oracle.render(&hm, true), &dir.join(&image))?;
        manifest.press.push(Press { image, center: [center.0, center.1], depth });

        let pressed = oracle.marker_motion(&hm, &pose)?;
        let observed = DisplacementField {
            vectors: pressed.positions.iter().zip(&initial).map(|(p, m)| (p.0 - m.0, p.1 - m.1)).collect(),
        };
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let mag = rng.gen_range(0.1..0.6);
        let shear = (mag * angle.cos(), mag * angle.sin());
        let twist = rng.gen_range(3.0..12.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let loads = [
            (LoadName::Dilate, pose, None),
            (LoadName::Shear, ContactPose { shear, ..pose }, Some(&pressed)),
            (LoadName::Twist, ContactPose { twist_deg: twist, ..pose }, Some(&pressed)),
        ];
        for (load, p, base) in loads {
            let field = match base {
                None => observed.clone(),
                Some(pressed) => {
                    let m = oracle.marker_motion(&hm, &p)?;
                    DisplacementField {
                        vectors: m
                            .displacement
                            .vectors
                            .iter()
                            .zip(&pressed.displacement.vectors)
                            .map(|(a, b)| (a.0 - b.0, a.1 - b.1))
                            .collect(),
                    }
                }
            };
            let table = PathBuf::from(format!("motion_{k:03}_{}.txt", format!("{load:?}").to_lowercase()));
            write_displacement_table(&initial, &field, &dir.join(&table))?;
            manifest.motion.push(Motion {
                table,
                load,
                center: [center.0, center.1],
                depth,
                shear: [p.shear.0, p.shear.1],
                twist_deg: p.twist_deg,
            });
        }
    }
    manifest.save(&dir.join("captures.toml"))?;

    let mut heldout = String::from("# held-out scenes: height map, reference image and marker table\n");
    for k in 0..a.heldout {
        let shape = held_out_shape(k, &mut rng);
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let mag = rng.gen_range(0.0..0.5);
        let pose = ContactPose {
            center: (rng.gen_range(0.26 * w..0.74 * w), rng.gen_range(0.28 * h..0.72 * h)),
            depth: rng.gen_range(0.2..0.6),
            shear: (mag * angle.cos(), mag * angle.sin()),
            twist_deg: rng.gen_range(-10.0..10.0),
        };
        let hm = render_height_map(&shape, &pose, &s)?;
        let (img, motion) = oracle.capture(&hm, &pose)?;
        let stem = format!("heldout_{k:03}");
        write_raster(&hm, &dir.join(format!("{stem}.raster")))?;
        write_image_png(&img, &dir.join(format!("{stem}.png")))?;
        write_displacement_table(&initial, &motion.displacement, &dir.join(format!("{stem}.txt")))?;
        let _ = writeln!(
            heldout,
            "[[scene]]\nname = \"{stem}\"\nshape = \"{}\"\ncenter = [{}, {}]\ndepth = {}\nshear = [{}, {}]\ntwist_deg = {}\n",
            shape.name(),
            pose.center.0,
            pose.center.1,
            pose.depth,
            pose.shear.0,
            pose.shear.1,
            pose.twist_deg
        );
    }
    if a.heldout > 0 {
        std::fs::write(dir.join("heldout.toml"), heldout)?;
    }

    // starting config: the reference sensor's geometry and light kinds, no model yet
    let mut cfg = SensorConfig::bundled("digit")?;
    cfg.sensor.name = "synthetic".into();
    cfg.sensor.width = s.width;
    cfg.sensor.height = s.height;
    cfg.sensor.pitch = s.pitch;
    cfg.set_light_rig(&oracle.rig_template());
    save_config(&cfg, &dir.join("config.toml"))?;

    let mut truth = String::from("# true parameters of the reference sensor\n");
    for (i, p) in oracle.true_positions().iter().enumerate() {
        let _ = writeln!(truth, "light_{i} = [{}, {}, {}]", p.x, p.y, p.z);
    }
    let m = oracle.motion;
    let _ = writeln!(truth, "lambda_d = {}\nlambda_s = {}\nlambda_t = {}", m.lambda_d, m.lambda_s, m.lambda_t);
    std::fs::write(dir.join("truth.toml"), truth)?;

    println!(
        "synth: {} presses, {} marker observations, {} held-out scenes in {}",
        manifest.press.len(),
        manifest.motion.len(),
        a.heldout,
        dir.display()
    );
    Ok(())
}
