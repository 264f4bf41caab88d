use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tacsim::bench::untrained_model;
use tacsim::config::model_io::write_model;
use tacsim::config::raster_io::{read_image_png, read_raster, write_image_png, write_raster};
use tacsim::config::{load_config, save_config, SensorConfig};
use tacsim::scene::render_height_map;
use tacsim::shadow::{cast_rig_masks, LightKind};
use tacsim::{ContactPose, HeightMap, IndenterShape, TactileImage};
use tempfile::TempDir;

fn tacsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tacsim")).args(args).env_remove("TACSIM_CONFIG").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn kv(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no `{key}` in:\n{text}"))
        .to_string()
}

/// A config with a random model and a flat background, for render tests.
fn render_setup(dir: &Path) -> PathBuf {
    let mut cfg = SensorConfig::bundled("digit").unwrap();
    write_model(&untrained_model(3).unwrap(), &dir.join("model.tsm"), None).unwrap();
    let bg = TactileImage::filled(cfg.sensor.width, cfg.sensor.height, [140, 130, 120]);
    write_image_png(&bg, &dir.join("bg.png")).unwrap();
    cfg.optics.model = Some("model.tsm".into());
    cfg.optics.background = Some("bg.png".into());
    let path = dir.join("render.toml");
    save_config(&cfg, &path).unwrap();
    path
}

#[test]
fn help_and_usage_errors() {
    let o = tacsim(&["--help"]);
    assert_eq!(code(&o), 0);
    for cmd in ["scene", "render", "calibrate", "compare", "bench", "synth"] {
        assert!(stdout(&o).contains(cmd), "help lists {cmd}");
    }
    assert_eq!(code(&tacsim(&["render", "--bogus"])), 1);
    assert_eq!(code(&tacsim(&["frobnicate"])), 1);
    assert_eq!(code(&tacsim(&["scene", "--shape", "sphere", "--depth", "1", "--out", "x.raster"])), 1);
}

#[test]
fn scene_writes_rasters() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sphere.raster");
    let o = tacsim(&[
        "scene",
        "--shape",
        "sphere",
        "--radius",
        "2",
        "--depth",
        "0.5",
        "--center",
        "9.6,7.2",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let hm = read_raster(&out).unwrap();
    assert_eq!(hm.dims(), (320, 240));
    assert!((hm.max() - 0.5).abs() < 1e-6);
    assert!(stdout(&o).contains("contact_pixels="));

    let zero = dir.path().join("zero.raster");
    let o = tacsim(&["scene", "--shape", "sphere", "--radius", "2", "--depth", "0", "--out", s(&zero)]);
    assert_eq!(code(&o), 0);
    assert!(read_raster(&zero).unwrap().is_zero());

    let cuboid = dir.path().join("cuboid.raster");
    let png = dir.path().join("cuboid.png");
    let o = tacsim(&[
        "scene",
        "--shape",
        "cuboid",
        "--width",
        "2",
        "--length",
        "3",
        "--yaw",
        "-30",
        "--depth",
        "0.37",
        "--out",
        s(&cuboid),
        "--png",
        s(&png),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let hm = read_raster(&cuboid).unwrap();
    assert_eq!(hm.max(), 0.37f32);
    assert!(png.is_file());

    let o = tacsim(&[
        "scene",
        "--shape",
        "sphere",
        "--radius",
        "2",
        "--depth",
        "0.5",
        "--center",
        "90,1",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 2, "off-sensor centre is a validation error");
}

#[test]
fn config_env_var_selects_the_sensor() {
    let dir = TempDir::new().unwrap();
    let mut cfg = SensorConfig::bundled("digit").unwrap();
    cfg.sensor.width = 120;
    cfg.sensor.height = 100;
    cfg.markers.rows = 3;
    cfg.markers.cols = 3;
    let path = dir.path().join("small.toml");
    save_config(&cfg, &path).unwrap();
    let out = dir.path().join("hm.raster");
    let o = Command::new(env!("CARGO_BIN_EXE_tacsim"))
        .args(["scene", "--shape", "cone", "--radius", "1", "--cone-height", "1", "--depth", "0.3", "--out", s(&out)])
        .env("TACSIM_CONFIG", &path)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read_raster(&out).unwrap().dims(), (120, 100));

    std::fs::write(&path, std::fs::read_to_string(&path).unwrap().replace("pitch = 0.06", "pitch = -0.06")).unwrap();
    let o = tacsim(&[
        "--config",
        s(&path),
        "scene",
        "--shape",
        "sphere",
        "--radius",
        "1",
        "--depth",
        "0.3",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sensor.pitch"), "{}", stderr(&o));
}

#[test]
fn config_prints_bundled_files() {
    let o = tacsim(&["config", "gelsight"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), SensorConfig::bundled_text("gelsight").unwrap());
    assert_eq!(code(&tacsim(&["config", "nope"])), 1);
}

#[test]
fn compare_images_and_tables() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    let c = dir.path().join("c.png");
    write_image_png(&TactileImage::filled(64, 48, [100, 110, 120]), &a).unwrap();
    write_image_png(&TactileImage::filled(64, 48, [101, 111, 121]), &b).unwrap();
    write_image_png(&TactileImage::filled(32, 48, [0, 0, 0]), &c).unwrap();

    let o = tacsim(&["compare", s(&a), s(&a), "--porcelain"]);
    assert_eq!(code(&o), 0);
    let t = stdout(&o);
    assert_eq!(kv(&t, "mse"), "0");
    assert_eq!(kv(&t, "l1"), "0");
    assert_eq!(kv(&t, "ssim"), "1");
    assert_eq!(kv(&t, "psnr"), "inf");

    let t = stdout(&tacsim(&["compare", s(&a), s(&b), "--porcelain"]));
    // 10·log10(255² / 1)
    let expected = 20.0 * 255f64.log10();
    assert!((kv(&t, "psnr").parse::<f64>().unwrap() - expected).abs() < 1e-9);
    assert!((expected - 48.1308).abs() < 1e-4);

    assert_eq!(code(&tacsim(&["compare", s(&a), s(&c)])), 2);

    let t1 = dir.path().join("t1.txt");
    std::fs::write(&t1, "# index x0_mm y0_mm dx_mm dy_mm\n0 1 1 0.1 0.2\n1 2 1 -0.3 0\n").unwrap();
    let t = stdout(&tacsim(&["compare", s(&t1), s(&t1), "--porcelain"]));
    assert_eq!(kv(&t, "marker_l1"), "0");
    assert_eq!(kv(&t, "markers"), "2");
    assert_eq!(code(&tacsim(&["compare", s(&t1), s(&a)])), 1);
}

#[test]
fn bench_reports_and_validates_flags() {
    let o = tacsim(&["bench", "--stage", "markers", "--iterations", "30", "--warmup", "1", "--porcelain"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = stdout(&o);
    assert_eq!(kv(&t, "operation"), "markers");
    assert_eq!(kv(&t, "iterations"), "30");
    assert_eq!(kv(&t, "threads"), "1");
    assert_eq!(kv(&t, "width"), "320");
    let fps: f64 = kv(&t, "fps").parse().unwrap();
    let mean: f64 = kv(&t, "mean_ms").parse().unwrap();
    assert!((fps - 1000.0 / mean).abs() < 1e-6 * fps);

    assert_eq!(code(&tacsim(&["bench", "--iterations", "0"])), 1);
    assert_eq!(code(&tacsim(&["bench", "--iterations", "29"])), 1);
    assert_eq!(code(&tacsim(&["bench", "--threads", "0"])), 1);
}

#[test]
fn render_without_a_model_explains_what_to_do() {
    let dir = TempDir::new().unwrap();
    let hm = dir.path().join("hm.raster");
    write_raster(&HeightMap::zeros(320, 240, 0.06), &hm).unwrap();
    let o = tacsim(&["render", "--heightmap", s(&hm), "--out", s(&dir.path().join("o.png"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("calibrate optics"), "{}", stderr(&o));
}

#[test]
fn render_paths() {
    let dir = TempDir::new().unwrap();
    let cfg_path = render_setup(dir.path());
    let cfg = load_config(&cfg_path).unwrap();
    let bg = read_image_png(&dir.path().join("bg.png")).unwrap();
    let run = |hm: &Path, out: &Path, extra: &[&str]| {
        let mut args = vec!["--config", s(&cfg_path), "render", "--heightmap", s(hm), "--out", s(out)];
        args.extend_from_slice(extra);
        let o = tacsim(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        read_image_png(out).unwrap()
    };

    // no contact: background only, plus one disc per marker when markers are on
    let flat = dir.path().join("flat.raster");
    write_raster(&HeightMap::zeros(320, 240, 0.06), &flat).unwrap();
    let plain = run(&flat, &dir.path().join("plain.png"), &["--no-markers"]);
    assert_eq!(plain, bg);
    let dotted = run(&flat, &dir.path().join("dotted.png"), &[]);
    let changed: Vec<bool> =
        (0..320 * 240).map(|i| dotted.data()[3 * i..3 * i + 3] != bg.data()[3 * i..3 * i + 3]).collect();
    assert_eq!(blobs(&changed, 320, 240), 63);

    // shadows only change pixels inside the shadow masks
    let pose = ContactPose::pressed((9.6, 7.2), 0.9);
    let hm = render_height_map(&IndenterShape::sphere(2.5), &pose, &cfg.sensor_geometry()).unwrap();
    let press = dir.path().join("press.raster");
    write_raster(&hm, &press).unwrap();
    let lit = run(&press, &dir.path().join("lit.png"), &["--no-markers"]);
    let unlit = run(&press, &dir.path().join("unlit.png"), &["--no-markers", "--no-shadows"]);
    let masks = cast_rig_masks(&hm, &cfg.light_rig().unwrap(), &cfg.mask_params()).unwrap();
    let mut differing = 0;
    for row in 0..240 {
        for col in 0..320 {
            if lit.pixel(col, row) != unlit.pixel(col, row) {
                differing += 1;
                assert!(masks.iter().any(|m| m.get(col, row) > 0.0), "({col},{row}) changed outside every mask");
            }
        }
    }
    assert!(differing > 100, "shadows visible");

    // loads, flow image and table
    let flow = dir.path().join("flow.png");
    let table = dir.path().join("motion.txt");
    let out = dir.path().join("loaded.png");
    let flow_s = flow.to_str().unwrap().to_string();
    let table_s = table.to_str().unwrap().to_string();
    run(
        &press,
        &out,
        &["--center", "9.6,7.2", "--shear", "-0.3,0.2", "--twist", "-5", "--flow", &flow_s, "--table", &table_s],
    );
    assert_eq!(read_image_png(&flow).unwrap().dims(), (320, 240));
    let (initial, field) = tacsim::config::table::read_displacement_table(&table).unwrap();
    assert_eq!(initial.len(), 63);
    assert!(field.vectors.iter().any(|v| v.0.hypot(v.1) > 1e-3));
}

/// 8-connected components of `set`.
fn blobs(set: &[bool], w: usize, h: usize) -> usize {
    let mut seen = vec![false; set.len()];
    let mut count = 0;
    for start in 0..set.len() {
        if !set[start] || seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            let (c, r) = ((i % w) as i64, (i / w) as i64);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nc, nr) = (c + dc, r + dr);
                    if nc >= 0 && nr >= 0 && nc < w as i64 && nr < h as i64 {
                        let j = nr as usize * w + nc as usize;
                        if set[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
    }
    count
}

#[test]
fn synth_is_deterministic_under_a_seed() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for d in [&a, &b] {
        let o = tacsim(&["--seed", "42", "synth", "--out", s(d.path()), "--count", "2", "--heldout", "1"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["captures.toml", "press_001.png", "motion_001_twist.txt", "heldout_000.png", "config.toml"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let c = TempDir::new().unwrap();
    tacsim(&["--seed", "43", "synth", "--out", s(c.path()), "--count", "2"]);
    assert_ne!(
        std::fs::read(a.path().join("captures.toml")).unwrap(),
        std::fs::read(c.path().join("captures.toml")).unwrap()
    );
}

fn parse_truth(dir: &Path) -> toml::Table {
    std::fs::read_to_string(dir.join("truth.toml")).unwrap().parse().unwrap()
}

#[test]
fn calibration_workflow_recovers_the_reference_sensor() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let o = tacsim(&["--seed", "9", "synth", "--out", s(d), "--count", "24", "--heldout", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let captures = d.join("captures.toml");
    let truth = parse_truth(d);

    // lights
    let lit = d.join("lit.toml");
    let o = tacsim(&[
        "--config",
        s(&d.join("config.toml")),
        "calibrate",
        "lights",
        "--captures",
        s(&captures),
        "--config-out",
        s(&lit),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rig = load_config(&lit).unwrap().light_rig().unwrap();
    for (i, l) in rig.lights.iter().enumerate() {
        let t: Vec<f64> = truth[&format!("light_{i}")]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_float().unwrap_or_else(|| v.as_integer().unwrap() as f64))
            .collect();
        let LightKind::Point { position } = l.kind else { panic!("point light expected") };
        let err = ((position.x - t[0]).powi(2) + (position.y - t[1]).powi(2) + (position.z - t[2]).powi(2)).sqrt();
        assert!(err < 1.0, "light {i} off by {err} mm");
    }

    // optics, gated on held-out RMSE
    let model = d.join("model.tsm");
    let opt = d.join("optics.toml");
    let report = d.join("optics.txt");
    let o = tacsim(&[
        "--config",
        s(&lit),
        "calibrate",
        "optics",
        "--captures",
        s(&captures),
        "--model-out",
        s(&model),
        "--config-out",
        s(&opt),
        "--max-rmse",
        "5",
        "--report",
        s(&report),
    ]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(model.is_file() && tacsim::config::model_io::manifest_path(&model).is_file());
    assert!(std::fs::read_to_string(&report).unwrap().contains("validation_rmse"));

    // a gate that cannot be met is a numerical failure
    let o = tacsim(&[
        "--config",
        s(&lit),
        "calibrate",
        "optics",
        "--captures",
        s(&captures),
        "--model-out",
        s(&d.join("m2.tsm")),
        "--epochs",
        "1",
        "--max-rmse",
        "0.01",
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    // markers
    let fin = d.join("final.toml");
    let o = tacsim(&["--config", s(&opt), "calibrate", "markers", "--captures", s(&captures), "--config-out", s(&fin)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let motion = load_config(&fin).unwrap().motion();
    for (name, got) in [("lambda_d", motion.lambda_d), ("lambda_s", motion.lambda_s), ("lambda_t", motion.lambda_t)] {
        let want = truth[name].as_float().unwrap();
        assert!(((got - want) / want).abs() < 0.02, "{name}: {got} vs {want}");
    }

    // the calibrated config renders held-out scenes close to the reference
    let scenes: toml::Table = std::fs::read_to_string(d.join("heldout.toml")).unwrap().parse().unwrap();
    for scene in scenes["scene"].as_array().unwrap() {
        let name = scene["name"].as_str().unwrap();
        let f = |k: &str, i: usize| scene[k].as_array().unwrap()[i].as_float().unwrap();
        let out = d.join(format!("{name}_sim.png"));
        let table = d.join(format!("{name}_sim.txt"));
        let o = tacsim(&[
            "--config",
            s(&fin),
            "render",
            "--heightmap",
            s(&d.join(format!("{name}.raster"))),
            "--out",
            s(&out),
            &format!("--center={},{}", f("center", 0), f("center", 1)),
            &format!("--shear={},{}", f("shear", 0), f("shear", 1)),
            &format!("--twist={}", scene["twist_deg"].as_float().unwrap()),
            "--table",
            s(&table),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let t = stdout(&tacsim(&["compare", s(&out), s(&d.join(format!("{name}.png"))), "--porcelain"]));
        let ssim: f64 = kv(&t, "ssim").parse().unwrap();
        assert!(ssim > 0.95, "{name}: SSIM {ssim}");
        let t = stdout(&tacsim(&["compare", s(&table), s(&d.join(format!("{name}.txt"))), "--porcelain"]));
        let l1: f64 = kv(&t, "marker_l1").parse().unwrap();
        assert!(l1 < 2e-2, "{name}: marker L1 {l1}");
    }
}
