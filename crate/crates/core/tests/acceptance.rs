//! Acceptance suite: one check per headline requirement, run in order so the
//! timing criterion is not disturbed by other tests. Prints a PASS/FAIL line
//! per criterion and fails if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use tacsim::bench::{bench_renderer, bench_stage, BenchSettings, Stage};
use tacsim::config::{model_io, raster_io, SensorConfig};
use tacsim::marker::motion::{dilate_at, twist_at, twist_matrix};
use tacsim::marker::{
    compose_motion, dilate_displacement, fit_lambdas, shear_displacement, twist_displacement, LoadKind, MarkerField,
    MarkerLayout, MarkerStyle, MotionCoefficients, MotionObservation,
};
use tacsim::metrics::{image_metrics, marker_l1, ssim, Psnr};
use tacsim::optics::dataset::sphere_contact_radius;
use tacsim::optics::{
    build_rgb_normal_dataset, train_reflectance, CalibrationCapture, DatasetOptions, Network, RgbNormalDataset,
    RgbNormalRecord, TrainSpec,
};
use tacsim::pipeline::{RenderOptions, Renderer};
use tacsim::raster::{HeightMap, TactileImage};
use tacsim::scene::{
    contact_state, render_height_map, ContactPoint, ContactPose, ContactState, IndenterShape, SensorGeometry,
};
use tacsim::shadow::{
    calibrate_attenuation, calibrate_lights, detect_ball_shadows, project_directional_shadow, project_point_shadow,
    BallCapture, LightKind, LightRig, LightSource, ShadowPlane, ShadowSegmentation, Vec3,
};
use tacsim::synthetic::SyntheticSensor;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn unit(rng: &mut ChaCha8Rng) -> Vec3 {
    let n = Normal::new(0.0, 1.0).unwrap();
    Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng)).normalize()
}

// 1. Stage throughput

fn speed() -> Outcome {
    let cfg = SensorConfig::bundled("digit").map_err(|e| e.to_string())?;
    let renderer = bench_renderer(&cfg, 1).map_err(|e| e.to_string())?;
    let s = renderer.sensor;
    let pose = ContactPose::pressed(s.center(), 0.8);
    let hm = render_height_map(&IndenterShape::sphere(3.0), &pose, &s).map_err(|e| e.to_string())?;
    let settings = BenchSettings::default();
    let fps =
        |stage| bench_stage(&renderer, &hm, Some(&pose), stage, &settings).map(|r| r.fps).map_err(|e| e.to_string());
    let shade = fps(Stage::Shade)?;
    let shadows = fps(Stage::ShadeShadows)?;
    let markers = fps(Stage::Markers)?;
    let ratio = markers / shadows;
    check(
        shade >= 32.0 && shadows >= 25.0 && markers >= 300.0 && ratio >= 8.0,
        format!("shade {shade:.1} fps, shade+shadows {shadows:.1} fps, markers {markers:.1} fps, ratio {ratio:.1}x"),
    )
}

// 2. Calibrate against a synthetic sensor, then re-render held-out scenes

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

/// Observed positions of a single load: the loaded motion minus the motion of
/// the plain press.
fn isolate(initial: &[(f64, f64)], loaded: &[(f64, f64)], pressed: &[(f64, f64)]) -> Vec<(f64, f64)> {
    initial.iter().zip(loaded).zip(pressed).map(|((p, a), b)| (p.0 + a.0 - b.0, p.1 + a.1 - b.1)).collect()
}

fn synthetic_end_to_end() -> Outcome {
    let oracle = SyntheticSensor::reference();
    let s = oracle.sensor;
    let bg = oracle.background();
    let template = oracle.rig_template();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let radius = 2.0;

    let mut presses = Vec::new();
    for _ in 0..50 {
        let depth = rng.gen_range(0.6..1.0);
        let pose = ContactPose::pressed((rng.gen_range(3.5..15.7), rng.gen_range(3.5..10.9)), depth);
        let hm = render_height_map(&IndenterShape::sphere(radius), &pose, &s).map_err(|e| e.to_string())?;
        let img = oracle.render(&hm, true);
        presses.push((pose, hm, img));
    }

    // lights
    let seg = ShadowSegmentation::default();
    let mut balls = Vec::new();
    let mut masks = Vec::new();
    for (pose, _, img) in &presses {
        let a = sphere_contact_radius(radius, pose.depth);
        let (ball, m) =
            detect_ball_shadows(img, &bg, &template, s.pitch, pose.center, radius, a, Some(pose.depth - radius), &seg)
                .map_err(|e| e.to_string())?;
        balls.push(ball);
        masks.push(m);
    }
    let (mut rig, _) = calibrate_lights(&balls, &template).map_err(|e| e.to_string())?;
    let per_light: Vec<Vec<(&TactileImage, Vec<bool>)>> = (0..rig.lights.len())
        .map(|i| presses.iter().zip(&masks).map(|((_, _, img), m)| (img, m[i].clone())).collect())
        .collect();
    calibrate_attenuation(&mut rig, &bg, &per_light).map_err(|e| e.to_string())?;

    // optics
    let unions: Vec<Vec<bool>> =
        masks.iter().map(|ms| (0..s.width * s.height).map(|i| ms.iter().any(|m| m[i])).collect()).collect();
    let captures: Vec<CalibrationCapture> = presses
        .iter()
        .zip(&unions)
        .map(|((pose, _, img), u)| CalibrationCapture {
            image: img,
            pose: *pose,
            shape: IndenterShape::sphere(radius),
            shadow_mask: Some(u),
        })
        .collect();
    let ds = build_rgb_normal_dataset(&captures, &bg, &DatasetOptions::new(s)).map_err(|e| e.to_string())?;
    let (model, _) = train_reflectance(&ds, &TrainSpec::default(), Some(&bg)).map_err(|e| e.to_string())?;

    // markers, observed on the same presses under extra shear and twist
    let mut cfg = SensorConfig::bundled("digit").map_err(|e| e.to_string())?;
    let stride = cfg.markers.stride;
    let threshold = cfg.sensor.contact_threshold;
    let initial = oracle.markers.positions().to_vec();
    let mut observations = Vec::new();
    for (pose, hm, _) in &presses {
        let state = |p: &ContactPose| contact_state(hm, p, threshold).map(|c| c.subsampled(stride, s.pitch));
        let pressed = oracle.marker_motion(hm, pose).map_err(|e| e.to_string())?;
        observations.push(MotionObservation {
            load: LoadKind::Dilate,
            contact: state(pose).map_err(|e| e.to_string())?,
            initial: initial.clone(),
            observed: pressed.positions.clone(),
        });
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let mag = rng.gen_range(0.1..0.6);
        let sheared = ContactPose { shear: (mag * angle.cos(), mag * angle.sin()), ..*pose };
        let twist = rng.gen_range(3.0..12.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let twisted = ContactPose { twist_deg: twist, ..*pose };
        for (load, p) in [(LoadKind::Shear, sheared), (LoadKind::Twist, twisted)] {
            let m = oracle.marker_motion(hm, &p).map_err(|e| e.to_string())?;
            observations.push(MotionObservation {
                load,
                contact: state(&p).map_err(|e| e.to_string())?,
                initial: initial.clone(),
                observed: isolate(&initial, &m.displacement.vectors, &pressed.displacement.vectors),
            });
        }
    }
    let fit = fit_lambdas(&observations, &cfg.motion()).map_err(|e| e.to_string())?;
    cfg.set_light_rig(&rig);
    cfg.set_motion(&fit.coefficients);
    let renderer = Renderer::from_parts(&cfg, model, bg).map_err(|e| e.to_string())?;

    // held-out scenes with combined loads
    let (mut ssim_sum, mut mse_sum, mut l1_sum) = (0.0, 0.0, 0.0);
    let mut worst_ssim = 1.0f64;
    let scenes = 21;
    for k in 0..scenes {
        let shape = held_out_shape(k, &mut rng);
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let mag = rng.gen_range(0.0..0.5);
        let pose = ContactPose {
            center: (rng.gen_range(5.0..14.2), rng.gen_range(4.0..10.4)),
            depth: rng.gen_range(0.2..0.6),
            shear: (mag * angle.cos(), mag * angle.sin()),
            twist_deg: rng.gen_range(-10.0..10.0),
        };
        let hm = render_height_map(&shape, &pose, &s).map_err(|e| e.to_string())?;
        let (truth, truth_motion) = oracle.capture(&hm, &pose).map_err(|e| e.to_string())?;
        let out = renderer.render(&hm, Some(&pose), RenderOptions::default()).map_err(|e| e.to_string())?;
        let m = image_metrics(&out.image, &truth).map_err(|e| e.to_string())?;
        let motion = out.motion.ok_or("renderer produced no marker motion")?;
        ssim_sum += m.ssim;
        mse_sum += m.mse;
        worst_ssim = worst_ssim.min(m.ssim);
        l1_sum += marker_l1(&motion.displacement, &truth_motion.displacement).map_err(|e| e.to_string())?;
    }
    let n = scenes as f64;
    let (ssim_mean, mse_mean, l1_mean) = (ssim_sum / n, mse_sum / n, l1_sum / n);
    check(
        ssim_mean >= 0.95 && mse_mean <= 20.0 && l1_mean <= 2e-2,
        format!(
            "SSIM {ssim_mean:.4} (worst {worst_ssim:.4}), MSE {mse_mean:.2}, marker L1 {l1_mean:.2e} mm over {scenes} scenes; λ = ({:.3e}, {:.3e}, {:.3e})",
            fit.coefficients.lambda_d, fit.coefficients.lambda_s, fit.coefficients.lambda_t
        ),
    )
}

// 3. Shadow geometry

/// Farthest shadow point of the part of a ball above the plane, found by
/// projecting dense samples of the great circle through the light.
fn forward_vertex(light: &LightSource, o: (f64, f64), zc: f64, r: f64) -> (f64, f64) {
    let plane = ShadowPlane::gel();
    let az = light.shadow_azimuth(o).expect("light not overhead");
    let n = 200_000;
    let mut best = (f64::MIN, o);
    for k in 0..n {
        let phi = k as f64 / n as f64 * std::f64::consts::TAU;
        let p = Vec3::new(o.0 + r * phi.cos() * az.0, o.1 + r * phi.cos() * az.1, zc + r * phi.sin());
        if p.z <= 0.0 {
            continue;
        }
        let q = light.project(&p, &plane).expect("finite projection");
        let along = (q.x - o.0) * az.0 + (q.y - o.1) * az.1;
        if along > best.0 {
            best = (along, (q.x, q.y));
        }
    }
    best.1
}

fn shadow_geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_rel, mut worst_inc) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let mut u = unit(&mut rng);
        if u.z < 0.2 {
            u.z = 0.2 + u.z.abs();
            u = u.normalize();
        }
        let plane = ShadowPlane::new(u, rng.gen_range(-2.0..2.0)).map_err(|e| e.to_string())?;
        let d = plane.offset();
        // point light well above the plane, point between them
        let s = Vec3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), 0.0);
        let s = s + u * (rng.gen_range(4.0..12.0) - plane.signed_distance(&s));
        let p = Vec3::new(rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0), 0.0);
        let p = p + u * (rng.gen_range(0.0..3.0) - plane.signed_distance(&p));
        let got = project_point_shadow(&p, &s, &plane).map_err(|e| e.to_string())?;
        let t = -(u.dot(&s) + d) / u.dot(&(p - s));
        let want = s + (p - s) * t;
        worst_rel = worst_rel.max((got - want).norm() / want.norm().max(1.0));
        worst_inc = worst_inc.max(plane.signed_distance(&got).abs());

        let mut l = unit(&mut rng);
        if l.dot(&u) > -0.2 {
            l = (l - u * (l.dot(&u) + 0.2 + rng.gen_range(0.0..1.0))).normalize();
        }
        let got = project_directional_shadow(&p, &l, &plane).map_err(|e| e.to_string())?;
        let t = -(u.dot(&p) + d) / u.dot(&l);
        let want = p + l * t;
        worst_rel = worst_rel.max((got - want).norm() / want.norm().max(1.0));
        worst_inc = worst_inc.max(plane.signed_distance(&got).abs());
    }

    // calibration round trip from forward-projected vertices
    let (r, zc) = (2.0, -1.0);
    let centers = [(5.0, 4.0), (9.0, 10.0), (12.0, 6.0), (7.0, 11.0), (14.0, 3.0), (10.0, 7.0)];
    let true_point = Vec3::new(-4.0, 7.2, 6.0);
    let true_dir = Vec3::new(-0.6, 0.3, -0.75).normalize();
    let lights = [LightSource::point(true_point, [1.0; 3], 0.5), LightSource::directional(true_dir, [1.0; 3], 0.5)];
    let captures: Vec<BallCapture> = centers
        .iter()
        .map(|&o| BallCapture {
            center: o,
            radius: r,
            center_height: Some(zc),
            vertices: lights.iter().map(|l| Some(forward_vertex(l, o, zc, r))).collect(),
        })
        .collect();
    let template = LightRig {
        lights: vec![
            LightSource::point(Vec3::new(0.0, 0.0, 1.0), [1.0; 3], 0.5),
            LightSource::directional(-Vec3::z(), [1.0; 3], 0.5),
        ],
        plane: ShadowPlane::gel(),
    };
    let (rig, _) = calibrate_lights(&captures, &template).map_err(|e| e.to_string())?;
    let LightKind::Point { position } = rig.lights[0].kind else {
        return Err("light 0 changed kind".into());
    };
    let LightKind::Directional { direction } = rig.lights[1].kind else {
        return Err("light 1 changed kind".into());
    };
    let pos_err = (position - true_point).norm();
    let dir_err = direction.dot(&true_dir).clamp(-1.0, 1.0).acos().to_degrees();
    check(
        worst_rel <= 1e-9 && worst_inc <= 1e-6 && pos_err <= 1.0 && dir_err <= 1.0,
        format!(
            "2000 projections: max rel err {worst_rel:.2e}, max incidence {worst_inc:.2e} mm; point light {pos_err:.2e} mm, directional {dir_err:.2e} deg"
        ),
    )
}

// 4. Marker model

fn disc_contact(center: (f64, f64), radius: f64, dh: f64, shear: (f64, f64), twist_deg: f64) -> ContactState {
    let n = 6;
    let step = radius / n as f64;
    let mut points = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            let (x, y) = (i as f64 * step, j as f64 * step);
            if x.hypot(y) <= radius {
                points.push(ContactPoint {
                    position: (center.0 + x, center.1 + y),
                    dh: dh * (1.0 - (x * x + y * y) / (radius * radius)),
                    area: step * step,
                });
            }
        }
    }
    ContactState { points, origin: center, shear, twist_deg }
}

fn synthetic_observations(
    field: &MarkerField,
    truth: &MotionCoefficients,
    noise: f64,
    seed: u64,
) -> Vec<MotionObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let initial = field.positions().to_vec();
    let mut out = Vec::new();
    for k in 0..8 {
        let c = disc_contact(
            (4.0 + 1.5 * k as f64, 3.5 + k as f64),
            1.2 + 0.1 * k as f64,
            0.4 + 0.05 * k as f64,
            (0.3 - 0.05 * k as f64, 0.2),
            6.0 - 1.5 * k as f64,
        );
        for load in [LoadKind::Dilate, LoadKind::Shear, LoadKind::Twist] {
            let d = match load {
                LoadKind::Dilate => dilate_displacement(field, &c, truth),
                LoadKind::Shear => shear_displacement(field, &c, truth),
                LoadKind::Twist => twist_displacement(field, &c, truth),
            };
            let observed = initial
                .iter()
                .zip(&d.vectors)
                .map(|(p, v)| {
                    let mag = v.0.hypot(v.1);
                    (
                        p.0 + v.0 + noise * mag * normal.sample(&mut rng),
                        p.1 + v.1 + noise * mag * normal.sample(&mut rng),
                    )
                })
                .collect();
            out.push(MotionObservation { load, contact: c.clone(), initial: initial.clone(), observed });
        }
    }
    out
}

fn marker_model() -> Outcome {
    let cfg = SensorConfig::bundled("digit").map_err(|e| e.to_string())?;
    let paper = cfg.motion();

    // dilate profile of a single point
    let lambda = paper.lambda_d;
    let step = 0.01;
    let point = ContactState {
        points: vec![ContactPoint { position: (0.0, 0.0), dh: 1.0, area: 1.0 }],
        origin: (0.0, 0.0),
        shear: (0.0, 0.0),
        twist_deg: 0.0,
    };
    let samples: Vec<(f64, f64)> = (0..(3.0 / lambda.sqrt() / step) as usize).map(|k| (k as f64 * step, 0.0)).collect();
    let profile = dilate_at(&samples, &point, lambda);
    let peak = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.hypot(a.1 .1).total_cmp(&b.1 .0.hypot(b.1 .1)))
        .map(|(k, _)| k as f64 * step)
        .unwrap_or(0.0);
    let expected_peak = 1.0 / (2.0 * lambda).sqrt();
    let peak_ok = (peak - expected_peak).abs() <= step;

    // identities at random markers
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut identity_err = 0.0f64;
    for _ in 0..200 {
        let c = (rng.gen_range(0.0..19.2), rng.gen_range(0.0..14.4));
        let m = (rng.gen_range(0.0..19.2), rng.gen_range(0.0..14.4));
        let (rx, ry) = (m.0 - c.0, m.1 - c.1);
        let single = ContactState {
            points: vec![ContactPoint { position: c, dh: rng.gen_range(0.1..1.0), area: 0.0036 }],
            origin: c,
            shear: (0.0, 0.0),
            twist_deg: 0.0,
        };
        let d = dilate_at(&[m], &single, 0.05)[0];
        let scale = d.0.hypot(d.1) * rx.hypot(ry);
        identity_err = identity_err.max((d.0 * ry - d.1 * rx).abs() / scale.max(1e-300));

        let theta: f64 = rng.gen_range(-14.0..14.0);
        let lt = 0.02;
        let t = twist_at(&[m], c, theta, lt, 15.0)[0];
        let w = (-lt * (rx * rx + ry * ry)).exp();
        let r2 = rx * rx + ry * ry;
        let th = theta.to_radians();
        let dot = t.0 * rx + t.1 * ry;
        let cross = rx * t.1 - ry * t.0;
        identity_err = identity_err.max((dot - w * (th.cos() - 1.0) * r2).abs() / r2.max(1.0));
        identity_err = identity_err.max((cross - w * th.sin() * r2).abs() / r2.max(1.0));
        let mtx = twist_matrix(theta, 15.0);
        identity_err = identity_err.max((mtx[0][0] - mtx[1][1]).abs() + (mtx[0][1] + mtx[1][0]).abs());
    }

    // superposition
    let sensor = SensorGeometry::default();
    let field = MarkerField::from_layout(&MarkerLayout::digit_default(), &sensor, MarkerStyle::default())
        .map_err(|e| e.to_string())?;
    let loads = disc_contact((9.0, 7.0), 1.5, 0.5, (0.4, -0.3), 9.0);
    let combined = compose_motion(&field, &loads, &paper);
    let parts = dilate_displacement(&field, &loads, &paper)
        .add(&shear_displacement(&field, &loads, &paper))
        .and_then(|f| f.add(&twist_displacement(&field, &loads, &paper)))
        .map_err(|e| e.to_string())?;
    let superposition = combined.displacement == parts;

    // fits
    let truth = MotionCoefficients { lambda_d: 0.4, lambda_s: 0.06, lambda_t: 0.1, ..paper };
    let rel = |a: &MotionCoefficients| {
        [
            (a.lambda_d / truth.lambda_d - 1.0).abs(),
            (a.lambda_s / truth.lambda_s - 1.0).abs(),
            (a.lambda_t / truth.lambda_t - 1.0).abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    };
    let clean = fit_lambdas(&synthetic_observations(&field, &truth, 0.0, 1), &paper).map_err(|e| e.to_string())?;
    let noisy = fit_lambdas(&synthetic_observations(&field, &truth, 0.01, 2), &paper).map_err(|e| e.to_string())?;
    let paper_obs: Vec<_> =
        synthetic_observations(&field, &paper, 0.0, 3).into_iter().filter(|o| o.load == LoadKind::Dilate).collect();
    let paper_fit =
        fit_lambdas(&paper_obs, &MotionCoefficients { lambda_d: 0.1, ..paper }).map_err(|e| e.to_string())?;
    let paper_rel = (paper_fit.coefficients.lambda_d / paper.lambda_d - 1.0).abs();
    let (clean_rel, noisy_rel) = (rel(&clean.coefficients), rel(&noisy.coefficients));
    check(
        peak_ok && identity_err <= 1e-9 && superposition && clean_rel <= 0.02 && paper_rel <= 0.02 && noisy_rel <= 0.10,
        format!(
            "peak {peak:.2} mm vs {expected_peak:.2} mm; identity err {identity_err:.1e}; superposition {superposition}; fit err noiseless {clean_rel:.1e} (bundled λ_d {paper_rel:.1e}), 1% noise {noisy_rel:.1e}"
        ),
    )
}

// 5. Optics training

fn optics_training() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = Network::new(&[32, 32], &mut rng);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let x = ndarray::Array2::from_shape_fn((32, 4), |_| normal.sample(&mut rng));
    let t = ndarray::Array2::from_shape_fn((32, 3), |_| normal.sample(&mut rng));
    let (_, grad) = net.loss_and_gradient(&x, &t);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 20 {
        let i = rng.gen_range(0..net.param_count());
        let h = 1e-6;
        let mut p = net.clone();
        p.set_param(i, net.param(i) + h);
        let lp = p.loss(&x, &t);
        p.set_param(i, net.param(i) - h);
        let lm = p.loss(&x, &t);
        let fd = (lp - lm) / (2.0 * h);
        let denom = fd.abs().max(grad[i].abs());
        if denom < 1e-7 {
            continue;
        }
        worst = worst.max((fd - grad[i]).abs() / denom);
        checked += 1;
    }

    let linear = |gx: f32, gy: f32, u: f32, v: f32| {
        [120.0 + 40.0 * gx + 10.0 * u, 100.0 - 30.0 * gy + 5.0 * v, 90.0 + 20.0 * (gx + gy)]
    };
    let records: Vec<RgbNormalRecord> = (0..4000)
        .map(|_| {
            let (gx, gy) = (rng.gen_range(-1.0f32..1.0), rng.gen_range(-1.0f32..1.0));
            let (x, y) = (rng.gen_range(0.0f32..320.0), rng.gen_range(0.0f32..240.0));
            RgbNormalRecord { gx, gy, x, y, rgb: linear(gx, gy, x / 320.0, y / 240.0), image: 0, contact: 0 }
        })
        .collect();
    let ds = RgbNormalDataset { width: 320, height: 240, records };
    let (model, _) = train_reflectance(&ds, &TrainSpec::default(), None).map_err(|e| e.to_string())?;
    let mut se = 0.0;
    let n = 1000;
    for _ in 0..n {
        let (gx, gy) = (rng.gen_range(-1.0f32..1.0), rng.gen_range(-1.0f32..1.0));
        let (u, v) = (rng.gen_range(0.0f32..1.0), rng.gen_range(0.0f32..1.0));
        let got = model.predict([gx, gy, u, v]);
        let want = linear(gx, gy, u, v);
        se += (0..3).map(|c| ((got[c] - want[c]) as f64).powi(2)).sum::<f64>();
    }
    let rmse = (se / (3 * n) as f64).sqrt();
    check(
        worst <= 1e-4 && rmse < 2.0,
        format!("max gradient rel err {worst:.1e} over 20 params; linear oracle RMSE {rmse:.3} levels"),
    )
}

// 6. Metrics

fn metrics_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data: Vec<u8> = (0..64 * 48 * 3).map(|_| rng.gen_range(10..245)).collect();
    let a = TactileImage::from_vec(64, 48, data.clone()).map_err(|e| e.to_string())?;
    let same = image_metrics(&a, &a).map_err(|e| e.to_string())?;
    let sentinels = same.l1 == 0.0 && same.mse == 0.0 && same.psnr == Psnr::Infinite && same.ssim == 1.0;
    let shifted = TactileImage::from_vec(64, 48, data.iter().map(|v| v + 1).collect()).map_err(|e| e.to_string())?;
    let psnr = image_metrics(&a, &shifted).map_err(|e| e.to_string())?.psnr.value().unwrap_or(f64::INFINITY);
    let b = TactileImage::from_vec(64, 48, (0..64 * 48 * 3).map(|_| rng.gen_range(0..=255)).collect())
        .map_err(|e| e.to_string())?;
    let (ab, ba) = (ssim(&a, &b).map_err(|e| e.to_string())?, ssim(&b, &a).map_err(|e| e.to_string())?);
    check(
        sentinels && (psnr - 48.13).abs() <= 0.01 && ab == ba,
        format!("identical: L1 {} MSE {} SSIM {} PSNR {:?}; +1 offset PSNR {psnr:.4} dB; SSIM(a,b) {ab:.6} = SSIM(b,a) {ba:.6}", same.l1, same.mse, same.ssim, same.psnr),
    )
}

// 7. Persistence

fn persistence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    let mut ok = true;

    for name in ["digit", "gelsight"] {
        let cfg = SensorConfig::bundled(name).map_err(|e| e.to_string())?;
        let text = cfg.to_toml_string().map_err(|e| e.to_string())?;
        let back = SensorConfig::from_toml_str(&text).map_err(|e| e.to_string())?;
        let same = back == cfg && Some(text.as_str()) == SensorConfig::bundled_text(name);
        ok &= same;
        notes.push(format!("{name} config {}", if same { "lossless" } else { "differs" }));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = tacsim::bench::untrained_model(4).map_err(|e| e.to_string())?;
    let path = dir.path().join("model.bin");
    model_io::write_model(&model, &path, None).map_err(|e| e.to_string())?;
    let back = model_io::read_model(&path).map_err(|e| e.to_string())?;
    let same = back == model && model_io::encode_model(&back) == model_io::encode_model(&model);
    ok &= same;
    notes.push(format!("model {}", if same { "lossless" } else { "differs" }));

    let hm = HeightMap::from_vec(37, 23, 0.06, (0..37 * 23).map(|_| rng.gen_range(0.0f32..2.0)).collect())
        .map_err(|e| e.to_string())?;
    let path = dir.path().join("depth.raster");
    raster_io::write_raster(&hm, &path).map_err(|e| e.to_string())?;
    let back = raster_io::read_raster(&path).map_err(|e| e.to_string())?;
    let same = back.dims() == hm.dims()
        && back.pitch() == hm.pitch()
        && back.data().iter().zip(hm.data()).all(|(a, b)| a.to_bits() == b.to_bits());
    ok &= same;
    notes.push(format!("raster {}", if same { "lossless" } else { "differs" }));

    let m = SensorConfig::bundled("digit").map_err(|e| e.to_string())?.motion();
    let lambdas = m.lambda_d == 1.25e-3 && m.lambda_s == 2.10e-4 && m.lambda_t == 3.80e-4;
    ok &= lambdas;
    notes.push(format!("bundled λ = ({:e}, {:e}, {:e})", m.lambda_d, m.lambda_s, m.lambda_t));
    check(ok, notes.join("; "))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("speed", speed),
        ("synthetic end-to-end", synthetic_end_to_end),
        ("shadow geometry", shadow_geometry),
        ("marker model", marker_model),
        ("optics training", optics_training),
        ("metrics", metrics_consistency),
        ("persistence", persistence),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} [{name}]: PASS ({secs:.1} s) {detail}", i + 1),
            Err(detail) => {
                println!("criterion {} [{name}]: FAIL ({secs:.1} s) {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
