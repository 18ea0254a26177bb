//! Frame discovery and pairing by numeric filename suffix.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Trailing decimal digits of the file stem, e.g. `frame_0012.sonar` → 12.
pub fn frame_index(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits = stem.len() - stem.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    stem[stem.len() - digits..].parse().ok()
}

/// Numbered files of a directory, keyed by index. Hidden files are ignored;
/// any other file without an index, or a repeated index, is an error.
pub fn numbered_files(dir: &Path) -> Result<BTreeMap<u64, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).with_context(|| format!("{}: cannot list directory", dir.display()))?;
    for entry in entries {
        let path = entry.with_context(|| format!("{}: cannot list directory", dir.display()))?.path();
        let hidden = path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.'));
        if hidden || !path.is_file() {
            continue;
        }
        let Some(i) = frame_index(&path) else {
            bail!("{}: file name has no frame number", path.display());
        };
        if let Some(prev) = out.insert(i, path.clone()) {
            bail!("{} and {}: duplicate frame number {i}", prev.display(), path.display());
        }
    }
    Ok(out)
}

/// One sonar/image pair per frame index, in index order.
pub fn pair_frames(sonar: &Path, image: &Path) -> Result<Vec<(u64, PathBuf, PathBuf)>> {
    match (sonar.is_dir(), image.is_dir()) {
        (false, false) => {
            for p in [sonar, image] {
                if !p.exists() {
                    bail!("{}: no such file", p.display());
                }
            }
            Ok(vec![(frame_index(sonar).unwrap_or(0), sonar.to_path_buf(), image.to_path_buf())])
        }
        (true, true) => {
            let s = numbered_files(sonar)?;
            let mut im = numbered_files(image)?;
            let mut out = Vec::with_capacity(s.len());
            for (i, sp) in s {
                let Some(ip) = im.remove(&i) else {
                    bail!("{}: no image with frame number {i} in {}", sp.display(), image.display());
                };
                out.push((i, sp, ip));
            }
            if let Some((i, ip)) = im.into_iter().next() {
                bail!("{}: no sonar frame with frame number {i} in {}", ip.display(), sonar.display());
            }
            if out.is_empty() {
                bail!("{}: no frames found", sonar.display());
            }
            Ok(out)
        }
        _ => bail!(
            "{} and {}: pass two files or two directories",
            sonar.display(),
            image.display()
        ),
    }
}
