//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use optifuse::cloud::{encode_poses, read_ply, read_poses, write_ply};
use optifuse::fusion::{aggregate_clouds, reconstruct_frame, FrameReconstruction, FusedCloud};
use optifuse::geometry::{Calibration, RigidTransform};
use optifuse::metrics::{absolute_error, voxel_count};
use optifuse::simulate::{default_calibration, forward_camera_pose, render_pair, PairParams, SceneModel};
use optifuse::sonar::{SonarEncoding, SonarFrame};
use optifuse::turbidity::{apply_turbidity, TurbidityParams};
use optifuse::{CameraImage, PipelineConfig};

use crate::frames::pair_frames;
use crate::{ReconstructArgs, SynthArgs, TurbidityArgs};

/// Real-time target per frame, seconds.
const FRAME_TARGET_S: f64 = 0.2;

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::read(p)?,
        None => PipelineConfig::new(),
    })
}

/// Worker pool from `OPTIFUSE_THREADS`: unset uses every core, 0 runs sequentially.
fn thread_count() -> Result<Option<usize>> {
    match std::env::var("OPTIFUSE_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .with_context(|| format!("OPTIFUSE_THREADS: expected a non-negative integer, got `{v}`")),
    }
}

fn process<T: Send, R: Send>(items: Vec<T>, f: impl Fn(T) -> R + Send + Sync) -> Result<Vec<R>> {
    match thread_count()? {
        Some(0) => Ok(items.into_iter().map(f).collect()),
        threads => {
            let mut builder = rayon::ThreadPoolBuilder::new();
            if let Some(n) = threads {
                builder = builder.num_threads(n);
            }
            let pool = builder.build().context("cannot start worker pool")?;
            Ok(pool.install(|| items.into_par_iter().map(f).collect()))
        }
    }
}

fn reconstruct_pair(sonar: &Path, image: &Path, calib: &Calibration, config: &PipelineConfig) -> Result<FrameReconstruction> {
    let frame = SonarFrame::read(sonar)?;
    let img = CameraImage::read(image)?;
    reconstruct_frame(&frame, &img, calib, &config.fusion)
        .with_context(|| format!("{} + {}", sonar.display(), image.display()))
}

fn numbered_output(out: &Path, index: u64) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("cloud");
    out.with_file_name(format!("{stem}_{index:04}.ply"))
}

pub fn reconstruct(args: ReconstructArgs) -> Result<()> {
    let calib = Calibration::read(&args.calib)?;
    let config = load_config(args.config.as_deref())?;
    let pairs = pair_frames(&args.sonar, &args.image)?;
    let poses = args.poses.as_deref().map(read_poses).transpose()?;
    if let Some(p) = &poses {
        if p.len() != pairs.len() {
            bail!(
                "{}: {} poses for {} frames",
                args.poses.as_ref().unwrap().display(),
                p.len(),
                pairs.len()
            );
        }
    }

    let start = Instant::now();
    let results = process(pairs, |(i, s, im)| {
        let t = Instant::now();
        let r = reconstruct_pair(&s, &im, &calib, &config);
        (i, r, t.elapsed().as_secs_f64())
    })?;
    let wall = start.elapsed().as_secs_f64();

    let mut clouds: Vec<(u64, FusedCloud)> = Vec::with_capacity(results.len());
    let mut busy = 0.0;
    for (i, r, secs) in results {
        let rec = r?;
        let t = rec.timings;
        busy += secs;
        println!(
            "frame {i:04}: {} points, {} regions, {} clusters, {} matches, {:.1} ms (segment {:.1}, sonar {:.1}, fusion {:.1})",
            rec.cloud.len(),
            rec.regions.num_regions(),
            rec.clusters.len(),
            rec.matches.len(),
            secs * 1e3,
            t.segment * 1e3,
            t.sonar * 1e3,
            t.fusion * 1e3
        );
        clouds.push((i, rec.cloud));
    }
    let n = clouds.len();
    let mean = busy / n as f64;
    println!(
        "{n} frame(s) in {:.1} ms, mean {:.1} ms/frame ({} the {:.0} ms real-time target)",
        wall * 1e3,
        mean * 1e3,
        if mean <= FRAME_TARGET_S { "within" } else { "over" },
        FRAME_TARGET_S * 1e3
    );

    let with_prov = |c: &FusedCloud| args.provenance.then(|| c.provenance.clone());
    match poses {
        Some(poses) => {
            let only: Vec<FusedCloud> = clouds.into_iter().map(|(_, c)| c).collect();
            let world = aggregate_clouds(&only, &poses)?;
            let prov: Vec<_> = only.iter().flat_map(|c| c.provenance.iter().copied()).collect();
            write_ply(&args.out, &world, args.provenance.then_some(prov.as_slice()))?;
            println!("wrote {} points to {}", world.len(), args.out.display());
        }
        None if n == 1 => {
            let c = &clouds[0].1;
            write_ply(&args.out, &c.points, with_prov(c).as_deref())?;
            println!("wrote {} points to {}", c.len(), args.out.display());
        }
        None => {
            for (i, c) in &clouds {
                let path = numbered_output(&args.out, *i);
                write_ply(&path, &c.points, with_prov(c).as_deref())?;
                println!("wrote {} points to {}", c.len(), path.display());
            }
        }
    }
    Ok(())
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("{}: cannot write", path.display()))
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let scene = SceneModel::from_name_or_file(&args.scene)?;
    let calib = match &args.calib {
        Some(p) => Calibration::read(p)?,
        None => default_calibration(),
    };
    let config = load_config(args.config.as_deref())?;
    let poses = match &args.poses {
        Some(p) => read_poses(p)?,
        None => vec![forward_camera_pose(Default::default())],
    };
    if poses.is_empty() {
        bail!("{}: no poses", args.poses.as_ref().unwrap().display());
    }
    let params = PairParams {
        num_beams: args.beams,
        num_bins: args.bins,
        elevation_samples: config.elevation_samples,
        noise: config.noise,
        ..PairParams::default()
    };
    SonarFrame::zeros(calib.sonar, args.beams, args.bins).context("invalid sonar frame size")?;

    let out = &args.out_dir;
    for sub in ["sonar", "images", "masks"] {
        let dir = out.join(sub);
        fs::create_dir_all(&dir).with_context(|| format!("{}: cannot create directory", dir.display()))?;
    }
    let indexed: Vec<(usize, RigidTransform)> = poses.iter().copied().enumerate().collect();
    let rendered = process(indexed, |(i, pose)| (i, render_pair(&scene, &pose, &calib, &params)))?;
    for (i, (sonar, camera)) in rendered {
        sonar.write(&out.join(format!("sonar/{i:04}.sonar")), SonarEncoding::F64Le)?;
        camera.image.write_pnm(&out.join(format!("images/{i:04}.ppm")))?;
        write(&out.join(format!("masks/{i:04}.pgm")), camera.silhouettes.to_pgm())?;
    }
    write(&out.join("poses.txt"), encode_poses(&poses))?;
    write(&out.join("scene.txt"), scene.to_string())?;
    write(&out.join("calib.txt"), calib.to_string())?;
    println!("wrote {} frame(s) to {}", poses.len(), out.display());
    Ok(())
}

pub fn turbidity(args: TurbidityArgs) -> Result<()> {
    let img = CameraImage::read(&args.input)?;
    let config = load_config(args.config.as_deref())?;
    let mode = args.mode.unwrap_or(config.turbidity_mode);
    let mut params = TurbidityParams::new(args.water_type, args.depth, mode);
    params.column_order = config.turbidity_columns;
    let out = apply_turbidity(&img, &params).with_context(|| args.input.display().to_string())?;
    out.write_pnm(&args.out)?;
    Ok(())
}

pub fn coverage(cloud: &Path, resolution: f64) -> Result<()> {
    let points = read_ply(cloud)?;
    println!("{}", voxel_count(&points, resolution)?);
    Ok(())
}

pub fn error(cloud: &Path, scene: &str, report: Option<&Path>) -> Result<()> {
    let points = read_ply(cloud)?;
    let scene = SceneModel::from_name_or_file(scene)?;
    let r = absolute_error(&points, &scene).with_context(|| cloud.display().to_string())?;
    if let Some(path) = report {
        let mut csv = String::from("index,x,y,z,distance\n");
        for (i, (p, d)) in points.iter().zip(&r.distances).enumerate() {
            let _ = writeln!(csv, "{i},{},{},{},{d}", p.x, p.y, p.z);
        }
        write(path, csv)?;
    }
    println!("points {}", points.len());
    for (name, v) in [
        ("median", r.median),
        ("mean", r.mean),
        ("max", r.max),
        ("p50", r.p50),
        ("p90", r.p90),
        ("p95", r.p95),
    ] {
        println!("{name} {v:.6}");
    }
    Ok(())
}
