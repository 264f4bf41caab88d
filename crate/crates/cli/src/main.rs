//! `tacsim`: scene synthesis, rendering, calibration, comparison and timing
//! for the tactile simulator.

mod commands;
mod common;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use common::{parse_pair, CliError};

#[derive(Debug, Parser)]
#[command(name = "tacsim", version, about = "CPU simulator for vision-based tactile sensors")]
struct Cli {
    /// Sensor config file. Falls back to the bundled DIGIT config.
    #[arg(long, global = true, env = "TACSIM_CONFIG")]
    config: Option<PathBuf>,

    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Press a parametric indenter into the gel and write the height map.
    Scene(SceneArgs),
    /// Render a height map to a tactile image.
    Render(RenderArgs),
    /// Calibrate one stage from sphere-press captures.
    #[command(subcommand)]
    Calibrate(CalibrateCommand),
    /// Compare two images (PNG) or two displacement tables.
    Compare(CompareArgs),
    /// Time the pipeline stages.
    Bench(BenchArgs),
    /// Generate a synthetic calibration set from the reference sensor.
    Synth(SynthArgs),
    /// Print a bundled config.
    Config(ConfigArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeKind {
    Sphere,
    Cylinder,
    Cuboid,
    Prism,
    Cone,
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    #[arg(long, value_enum)]
    pub shape: ShapeKind,
    /// mm (sphere, cylinder, cone).
    #[arg(long)]
    pub radius: Option<f64>,
    /// mm (cylinder, cuboid, prism).
    #[arg(long)]
    pub length: Option<f64>,
    /// mm (cuboid, prism).
    #[arg(long)]
    pub width: Option<f64>,
    /// Ridge height of a prism, mm.
    #[arg(long)]
    pub ridge_height: Option<f64>,
    /// Cone height, mm.
    #[arg(long)]
    pub cone_height: Option<f64>,
    /// In-plane orientation, degrees.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub yaw: f64,
    /// Contact centre `x,y` in mm; defaults to the sensor centre.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub center: Option<(f64, f64)>,
    /// Penetration depth, mm.
    #[arg(long)]
    pub depth: f64,
    /// Output raster file.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a 16-bit PNG preview.
    #[arg(long)]
    pub png: Option<PathBuf>,
    /// mm per PNG level.
    #[arg(long, default_value_t = 1e-4)]
    pub png_scale: f64,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Height map (raster file, or 16-bit PNG with --png-scale).
    #[arg(long)]
    pub heightmap: PathBuf,
    /// mm per level when the height map is a PNG.
    #[arg(long)]
    pub png_scale: Option<f64>,
    /// Output image (PNG).
    #[arg(long)]
    pub out: PathBuf,
    /// Skip cast shadows.
    #[arg(long)]
    pub no_shadows: bool,
    /// Skip markers.
    #[arg(long)]
    pub no_markers: bool,
    /// Projection of the object origin `x,y` in mm; defaults to the footprint centroid.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub center: Option<(f64, f64)>,
    /// Tangential load `dx,dy` in mm.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub shear: Option<(f64, f64)>,
    /// In-plane rotation, degrees.
    #[arg(long, allow_hyphen_values = true)]
    pub twist: Option<f64>,
    /// Write the marker flow visualization here.
    #[arg(long)]
    pub flow: Option<PathBuf>,
    /// Arrow length multiplier for the flow image.
    #[arg(long, default_value_t = 5.0)]
    pub flow_scale: f64,
    /// Write the marker displacement table here.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CalibrateCommand {
    /// Train the reflectance model from sphere presses.
    Optics(CalibrateOpticsArgs),
    /// Locate the lights from ball shadows and estimate their attenuation.
    Lights(CalibrateLightsArgs),
    /// Fit the marker decay coefficients.
    Markers(CalibrateMarkersArgs),
}

#[derive(Debug, Args)]
pub struct CapturesArg {
    /// Capture manifest (TOML).
    #[arg(long)]
    pub captures: PathBuf,
    /// Also write the report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateOpticsArgs {
    #[command(flatten)]
    pub input: CapturesArg,
    /// Model file to write; a `.manifest` file is written next to it.
    #[arg(long)]
    pub model_out: PathBuf,
    /// Write a config pointing at the new model and background.
    #[arg(long)]
    pub config_out: Option<PathBuf>,
    /// Training epochs; defaults to the trainer's setting.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Fail (exit 3) when the held-out RMSE of any channel exceeds this.
    #[arg(long)]
    pub max_rmse: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CalibrateLightsArgs {
    #[command(flatten)]
    pub input: CapturesArg,
    /// Config to write with the calibrated lights.
    #[arg(long)]
    pub config_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateMarkersArgs {
    #[command(flatten)]
    pub input: CapturesArg,
    /// Config to write with the fitted coefficients.
    #[arg(long)]
    pub config_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// key=value output.
    #[arg(long)]
    pub porcelain: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    All,
    Shade,
    Shadows,
    Markers,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = StageArg::All)]
    pub stage: StageArg,
    /// Timed iterations per stage (at least 30).
    #[arg(long, default_value_t = 60)]
    pub iterations: usize,
    #[arg(long, default_value_t = 5)]
    pub warmup: usize,
    /// Shading threads; 1 is the reference setting.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Input height map; defaults to a sphere pressed at the sensor centre.
    #[arg(long)]
    pub heightmap: Option<PathBuf>,
    /// Time against a randomly initialized model instead of the configured one.
    #[arg(long)]
    pub random_model: bool,
    /// key=value output.
    #[arg(long)]
    pub porcelain: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of sphere presses.
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    /// Calibration sphere radius, mm.
    #[arg(long, default_value_t = 2.0)]
    pub radius: f64,
    /// Held-out scenes (height map plus reference image) to write.
    #[arg(long, default_value_t = 0)]
    pub heldout: usize,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Bundled config name (digit or gelsight).
    #[arg(default_value = "digit")]
    pub name: String,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = common::Context::new(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::Scene(a) => commands::scene(&ctx, &a),
        Command::Render(a) => commands::render(&ctx, &a),
        Command::Calibrate(CalibrateCommand::Optics(a)) => commands::calibrate_optics(&ctx, &a),
        Command::Calibrate(CalibrateCommand::Lights(a)) => commands::calibrate_lights(&ctx, &a),
        Command::Calibrate(CalibrateCommand::Markers(a)) => commands::calibrate_markers(&ctx, &a),
        Command::Compare(a) => commands::compare(&a),
        Command::Bench(a) => commands::bench(&ctx, &a),
        Command::Synth(a) => commands::synth(&ctx, &a),
        Command::Config(a) => commands::config(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
