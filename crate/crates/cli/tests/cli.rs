use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn optifuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optifuse"))
        .args(args)
        .env("OPTIFUSE_THREADS", "2")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = optifuse(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn vertex_count(ply: &Path) -> usize {
    fs::read_to_string(ply)
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix("element vertex "))
        .unwrap()
        .parse()
        .unwrap()
}

/// Poses stepping sideways along the pier, camera looking along +x.
fn pose_file(dir: &Path, n: usize) -> PathBuf {
    let text: String = (0..n)
        .map(|i| format!("0 0 1 -1 0 0 0 -1 0 0 {} 0\n", 0.02 * i as f64 - 0.1))
        .collect();
    let path = dir.join("in_poses.txt");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn synth_writes_one_pair_and_mask_per_pose() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("synth");
    let poses = pose_file(dir.path(), 2);
    ok(&["synth", "--scene", "pier", "--poses", s(&poses), "--out-dir", s(&out)]);
    for sub in ["sonar", "images", "masks"] {
        let mut names: Vec<String> = fs::read_dir(out.join(sub))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        let ext = match sub {
            "sonar" => "sonar",
            "images" => "ppm",
            _ => "pgm",
        };
        assert_eq!(names, vec![format!("0000.{ext}"), format!("0001.{ext}")]);
    }
    for f in ["poses.txt", "scene.txt", "calib.txt"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    assert!(fs::read(out.join("images/0000.ppm")).unwrap().starts_with(b"P6"));
    assert!(fs::read(out.join("masks/0000.pgm")).unwrap().starts_with(b"P5"));
}

#[test]
fn single_pair_reconstructs() {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("synth");
    ok(&["synth", "--scene", "pier", "--out-dir", s(&synth)]);
    let ply = dir.path().join("one.ply");
    let stdout = ok(&[
        "reconstruct",
        "--sonar",
        s(&synth.join("sonar/0000.sonar")),
        "--image",
        s(&synth.join("images/0000.ppm")),
        "--calib",
        s(&synth.join("calib.txt")),
        "--out",
        s(&ply),
    ]);
    assert!(stdout.contains("frame 0000:") && stdout.contains("ms/frame"), "{stdout}");
    assert!(vertex_count(&ply) >= 1);

    let report = dir.path().join("report.csv");
    let summary = ok(&["eval", "error", "--cloud", s(&ply), "--scene", "pier", "--report", s(&report)]);
    assert!(summary.contains("median"));
    let csv = fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("index,x,y,z,distance\n"));
    assert_eq!(csv.lines().count(), vertex_count(&ply) + 1);
}

#[test]
fn missing_calibration_exits_2_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let calib = dir.path().join("nowhere/calib.txt");
    let out = optifuse(&[
        "reconstruct",
        "--sonar",
        "a.sonar",
        "--image",
        "a.ppm",
        "--calib",
        s(&calib),
        "--out",
        s(&dir.path().join("x.ply")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: ") && err.contains(s(&calib)), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn unmatched_frames_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("synth");
    let poses = pose_file(dir.path(), 2);
    ok(&["synth", "--scene", "pier", "--poses", s(&poses), "--out-dir", s(&synth)]);
    fs::remove_file(synth.join("images/0001.ppm")).unwrap();
    let out = optifuse(&[
        "reconstruct",
        "--sonar",
        s(&synth.join("sonar")),
        "--image",
        s(&synth.join("images")),
        "--calib",
        s(&synth.join("calib.txt")),
        "--out",
        s(&dir.path().join("x.ply")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("0001.sonar"));
}

#[test]
fn aggregated_cloud_has_every_frame() {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("synth");
    let poses = pose_file(dir.path(), 10);
    ok(&["synth", "--scene", "pier", "--poses", s(&poses), "--out-dir", s(&synth)]);
    let (sonar, images, calib) = (synth.join("sonar"), synth.join("images"), synth.join("calib.txt"));
    let common = ["reconstruct", "--sonar", s(&sonar), "--image", s(&images), "--calib", s(&calib)];

    let frames = dir.path().join("frame.ply");
    let mut args = common.to_vec();
    args.extend(["--out", s(&frames)]);
    ok(&args);
    let per_frame: usize = (0..10).map(|i| vertex_count(&dir.path().join(format!("frame_{i:04}.ply")))).sum();

    let world = dir.path().join("world.ply");
    let synth_poses = synth.join("poses.txt");
    let mut args = common.to_vec();
    args.extend(["--poses", s(&synth_poses), "--out", s(&world)]);
    let stdout = ok(&args);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("frame ")).count(), 10);
    assert!(per_frame > 0);
    assert_eq!(vertex_count(&world), per_frame);

    let scene = synth.join("scene.txt");
    let summary = ok(&["eval", "error", "--cloud", s(&world), "--scene", s(&scene)]);
    let median: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("median "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(median < 0.006, "{summary}");
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("synth");
    let poses = pose_file(dir.path(), 3);
    ok(&["synth", "--scene", "seawall", "--poses", s(&poses), "--out-dir", s(&synth)]);
    let mut outputs = Vec::new();
    for threads in ["0", "1", "3"] {
        let ply = dir.path().join(format!("t{threads}.ply"));
        let out = Command::new(env!("CARGO_BIN_EXE_optifuse"))
            .args([
                "reconstruct",
                "--sonar",
                s(&synth.join("sonar")),
                "--image",
                s(&synth.join("images")),
                "--calib",
                s(&synth.join("calib.txt")),
                "--poses",
                s(&synth.join("poses.txt")),
                "--provenance",
                "--out",
                s(&ply),
            ])
            .env("OPTIFUSE_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success());
        outputs.push(fs::read(&ply).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));

    let out = Command::new(env!("CARGO_BIN_EXE_optifuse"))
        .args(["eval", "coverage", "--cloud", s(&dir.path().join("t0.ply"))])
        .env("OPTIFUSE_THREADS", "many")
        .output()
        .unwrap();
    assert!(out.status.success(), "eval does not read the thread setting");
}

#[test]
fn turbidity_type_one_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("synth");
    ok(&["synth", "--scene", "pier", "--out-dir", s(&synth)]);
    let input = synth.join("images/0000.ppm");
    let clear = dir.path().join("clear.ppm");
    ok(&["turbidity", "--in", s(&input), "--water-type", "I", "--out", s(&clear)]);
    assert_eq!(fs::read(&input).unwrap(), fs::read(&clear).unwrap());

    let murky = dir.path().join("murky.ppm");
    ok(&[
        "turbidity",
        "--in",
        s(&input),
        "--water-type",
        "9C",
        "--mode",
        "absolute",
        "--depth",
        "1",
        "--out",
        s(&murky),
    ]);
    assert_ne!(fs::read(&input).unwrap(), fs::read(&murky).unwrap());

    let cfg = dir.path().join("absolute.cfg");
    fs::write(&cfg, "turbidity_mode=absolute\n").unwrap();
    let from_config = dir.path().join("from_config.ppm");
    ok(&["turbidity", "--in", s(&input), "--water-type", "9c", "--config", s(&cfg), "--out", s(&from_config)]);
    assert_eq!(fs::read(&murky).unwrap(), fs::read(&from_config).unwrap());
}

#[test]
fn coverage_of_empty_cloud_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let ply = dir.path().join("empty.ply");
    fs::write(
        &ply,
        "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
    )
    .unwrap();
    assert_eq!(ok(&["eval", "coverage", "--cloud", s(&ply)]), "0\n");

    let out = optifuse(&["eval", "error", "--cloud", s(&ply), "--scene", "pier"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "cfar_alpha=-1\n").unwrap();
    let out = optifuse(&["synth", "--scene", "pier", "--config", s(&cfg), "--out-dir", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.cfg") && err.contains("cfar_alpha"), "{err}");
}
