//! `optifuse`: synthesize, degrade, reconstruct and evaluate opti-acoustic scenes.

mod commands;
mod frames;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use optifuse::turbidity::{AttenuationMode, WaterType};

#[derive(Parser)]
#[command(name = "optifuse", version, about = "Opti-acoustic scene reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse paired sonar frames and camera images into a point cloud.
    Reconstruct(ReconstructArgs),
    /// Render paired sonar frames and camera images of an analytic scene.
    Synth(SynthArgs),
    /// Degrade an RGB image with synthetic water turbidity.
    Turbidity(TurbidityArgs),
    /// Evaluate a point cloud.
    #[command(subcommand)]
    Eval(EvalCommand),
}

#[derive(Args)]
struct ReconstructArgs {
    /// Sonar frame file, or a directory of numbered frames.
    #[arg(long)]
    sonar: PathBuf,
    /// Camera image file, or a directory of numbered images.
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    calib: PathBuf,
    /// Pipeline configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// World poses (`world_from_camera`), one per frame; aggregates all frames.
    #[arg(long)]
    poses: Option<PathBuf>,
    /// Output PLY. Without poses, several frames are written as `<stem>_<index>.ply`.
    #[arg(long)]
    out: PathBuf,
    /// Add region label and image column to every vertex.
    #[arg(long)]
    provenance: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// `pier`, `seawall` or a scene file.
    #[arg(long)]
    scene: String,
    /// Camera poses, one frame per pose; a single pose at the origin looking along +x otherwise.
    #[arg(long)]
    poses: Option<PathBuf>,
    /// Rig calibration; the bundled rig otherwise.
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    beams: usize,
    #[arg(long, default_value_t = 512)]
    bins: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TurbidityArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    water_type: WaterType,
    #[arg(long, default_value_t = 1.0)]
    depth: f64,
    /// Overrides `turbidity_mode` from the configuration.
    #[arg(long)]
    mode: Option<AttenuationMode>,
    /// Pipeline configuration supplying the attenuation mode and column order.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Count occupied voxels.
    Coverage {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long, default_value_t = optifuse::metrics::DEFAULT_VOXEL_RESOLUTION)]
        resolution: f64,
    },
    /// Distance from every point to the scene model.
    Error {
        #[arg(long)]
        cloud: PathBuf,
        /// `pier`, `seawall` or a scene file.
        #[arg(long)]
        scene: String,
        /// Per-point CSV report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Synth(a) => commands::synth(a),
        Command::Turbidity(a) => commands::turbidity(a),
        Command::Eval(EvalCommand::Coverage { cloud, resolution }) => commands::coverage(&cloud, resolution),
        Command::Eval(EvalCommand::Error { cloud, scene, report }) => commands::error(&cloud, &scene, report.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", render_error(&e));
            ExitCode::from(2)
        }
    }
}

/// Join the error chain on one line, dropping causes that an outer message
/// already spells out.
fn render_error(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.ends_with(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}
