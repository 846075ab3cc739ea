//! Binary PGM (P5) grid dumps of batch samples, with a text manifest that
//! records each tile's age and heaviest lineage origins.

use std::fs;
use std::path::{Path, PathBuf};

use crate::pipeline::Sample;

use super::HarnessError;

/// Tile `batch` row-major into `cols` columns of `h`×`w` images and write a
/// maxval-255 P5 PGM to `path`, plus a manifest alongside it (same path with
/// a `.txt` extension).
///
/// Manifest lines are `tile age origins top-weights…`, one per sample, where
/// the weights column lists up to the three heaviest `origin:weight` entries
/// (or `-` when lineage tracking was disabled).
pub fn dump_mixed_grid(
    batch: &[Sample],
    h: usize,
    w: usize,
    cols: usize,
    path: &Path,
) -> Result<PathBuf, HarnessError> {
    if batch.is_empty() {
        return Err(HarnessError::DimMismatch("empty batch".into()));
    }
    if h == 0 || w == 0 || cols == 0 {
        return Err(HarnessError::DimMismatch(format!(
            "degenerate grid geometry h={h} w={w} cols={cols}"
        )));
    }
    for (i, s) in batch.iter().enumerate() {
        if s.features.len() != h * w {
            return Err(HarnessError::DimMismatch(format!(
                "sample {i} has {} features, expected {}x{}={}",
                s.features.len(),
                h,
                w,
                h * w
            )));
        }
    }

    let grid_rows = batch.len().div_ceil(cols);
    let (width_px, height_px) = (cols * w, grid_rows * h);
    let mut pixels = vec![0u8; width_px * height_px];
    for (t, s) in batch.iter().enumerate() {
        let (tile_row, tile_col) = (t / cols, t % cols);
        for y in 0..h {
            let dst = (tile_row * h + y) * width_px + tile_col * w;
            for x in 0..w {
                let v = (s.features[y * w + x] * 255.0).round().clamp(0.0, 255.0);
                pixels[dst + x] = v as u8;
            }
        }
    }

    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut pgm = format!("P5\n{width_px} {height_px}\n255\n").into_bytes();
    pgm.extend_from_slice(&pixels);
    fs::write(path, pgm)?;

    let manifest_path = path.with_extension("txt");
    fs::write(&manifest_path, manifest_text(batch))?;
    Ok(manifest_path)
}

fn manifest_text(batch: &[Sample]) -> String {
    let mut out = String::from("tile age origins top_weights\n");
    for (t, s) in batch.iter().enumerate() {
        let mut entries: Vec<(usize, f64)> =
            s.lineage.iter().map(|(&o, &w)| (o, w)).collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let top: Vec<String> = entries
            .iter()
            .take(3)
            .map(|(o, w)| format!("{o}:{w:.6}"))
            .collect();
        let top = if top.is_empty() {
            "-".to_string()
        } else {
            top.join(" ")
        };
        out.push_str(&format!("{t} {} {} {top}\n", s.age, s.lineage.len()));
    }
    out
}

/// A parsed manifest line; the reading half of the grid interface.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub tile: usize,
    pub age: u32,
    pub origins: usize,
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, HarnessError> {
    let mut lines = text.lines();
    match lines.next() {
        Some("tile age origins top_weights") => {}
        other => {
            return Err(HarnessError::MalformedCsv(format!(
                "bad manifest header {other:?}"
            )))
        }
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let mut it = l.split_whitespace();
            let bad = || HarnessError::MalformedCsv(format!("bad manifest line {l:?}"));
            Ok(ManifestEntry {
                tile: it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?,
                age: it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?,
                origins: it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
