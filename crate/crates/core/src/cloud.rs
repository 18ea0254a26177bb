//! Point cloud and pose interchange: ASCII PLY, XYZ CSV and pose lists.

use std::fmt::Write as _;
use std::path::Path;

use crate::format::{self, FormatError};
use crate::fusion::Provenance;
use crate::geometry::{join, Point3, RigidTransform};

/// ASCII PLY with `float` coordinates. With `provenance`, every vertex also
/// carries `uint region` and `uint column`.
pub fn encode_ply(points: &[Point3], provenance: Option<&[Provenance]>) -> String {
    if let Some(p) = provenance {
        assert_eq!(p.len(), points.len(), "one provenance entry per point");
    }
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", points.len());
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    if provenance.is_some() {
        out.push_str("property uint region\nproperty uint column\n");
    }
    out.push_str("end_header\n");
    for (i, p) in points.iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x as f32, p.y as f32, p.z as f32);
        if let Some(prov) = provenance {
            let _ = write!(out, " {} {}", prov[i].region_label, prov[i].column);
        }
        out.push('\n');
    }
    out
}

pub fn write_ply(path: &Path, points: &[Point3], provenance: Option<&[Provenance]>) -> Result<(), FormatError> {
    format::write_bytes(path, encode_ply(points, provenance).as_bytes())
}

/// Read vertex positions from an ASCII PLY. Extra scalar vertex properties
/// are skipped; other elements are not supported.
pub fn decode_ply(text: &str) -> Result<Vec<Point3>, FormatError> {
    let mut lines = text.lines().enumerate();
    let bad = |line: usize, msg: &str| FormatError::line(line + 1, msg.to_string());
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(FormatError::line(1, "expected `ply`")),
    }
    let mut count: Option<usize> = None;
    let mut props: Vec<String> = Vec::new();
    let mut in_vertex = false;
    loop {
        let Some((i, line)) = lines.next() else {
            return Err(FormatError::invalid("missing `end_header`"));
        };
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["format", "ascii", "1.0"] => {}
            ["format", ..] => return Err(bad(i, "only `format ascii 1.0` is supported")),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", "vertex", n] => {
                count = Some(n.parse().map_err(|_| bad(i, "invalid vertex count"))?);
                in_vertex = true;
            }
            ["element", ..] => return Err(bad(i, "only the vertex element is supported")),
            ["property", "list", ..] => return Err(bad(i, "list properties are not supported")),
            ["property", _ty, name] if in_vertex => props.push(name.to_string()),
            ["end_header"] => break,
            _ => return Err(bad(i, "unrecognised header line")),
        }
    }
    let count = format::require(count, "element vertex")?;
    let col = |name: &str| {
        props
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| FormatError::invalid(format!("missing vertex property `{name}`")))
    };
    let (xi, yi, zi) = (col("x")?, col("y")?, col("z")?);
    let mut points = Vec::with_capacity(count);
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if points.len() == count {
            return Err(bad(i, "more vertices than declared"));
        }
        let v = format::parse_floats(line).map_err(|m| FormatError::line(i + 1, m))?;
        if v.len() != props.len() {
            return Err(bad(i, "wrong number of vertex values"));
        }
        points.push(Point3::new(v[xi], v[yi], v[zi]));
    }
    if points.len() != count {
        return Err(FormatError::invalid(format!(
            "declared {count} vertices, found {}",
            points.len()
        )));
    }
    Ok(points)
}

pub fn read_ply(path: &Path) -> Result<Vec<Point3>, FormatError> {
    decode_ply(&format::read_text(path)?).map_err(|e| e.in_file(path))
}

/// `x,y,z` header followed by one point per line.
pub fn encode_xyz_csv(points: &[Point3]) -> String {
    let mut out = String::from("x,y,z\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.x as f32, p.y as f32, p.z as f32);
    }
    out
}

/// One pose per line: 9 rotation entries (row-major) then 3 translation
/// entries. Blank lines and `#` comments are ignored.
pub fn parse_poses(text: &str) -> Result<Vec<RigidTransform>, FormatError> {
    let mut poses = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = format::strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let v = format::parse_floats(line).map_err(|m| FormatError::line(i + 1, m))?;
        if v.len() != 12 {
            return Err(FormatError::line(i + 1, format!("expected 12 numbers, got {}", v.len())));
        }
        let rot: [f64; 9] = v[..9].try_into().unwrap();
        let trans: [f64; 3] = v[9..].try_into().unwrap();
        poses.push(RigidTransform::from_rows(rot, trans).map_err(|e| FormatError::line(i + 1, e.to_string()))?);
    }
    Ok(poses)
}

pub fn read_poses(path: &Path) -> Result<Vec<RigidTransform>, FormatError> {
    parse_poses(&format::read_text(path)?).map_err(|e| e.in_file(path))
}

pub fn encode_poses(poses: &[RigidTransform]) -> String {
    let mut out = String::new();
    for p in poses {
        let _ = writeln!(out, "{} {}", join(&p.rotation_rows()), join(p.translation().as_slice()));
    }
    out
}
