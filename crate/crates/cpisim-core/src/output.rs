//! Deterministic output writers: 16-bit binary PGM images with text
//! sidecars, and CSV intensity profiles. No timestamps, no environment
//! leakage; identical inputs give byte-identical files.

use crate::error::{Error, Result};
use crate::refocus::{Image, Normalization};
use std::io::Write;
use std::path::Path;

/// Write a peak-normalized image as a 16-bit binary portable graymap
/// (magic P5, maxval 65535, big-endian samples, rows top to bottom with
/// +y up), plus a text sidecar carrying the grid and provenance metadata.
pub fn write_image(image: &Image, path: &Path, scenario_hash: &str) -> Result<()> {
    if image.normalization != Normalization::Peak {
        return Err(Error::Validation(
            "write_image requires a peak-normalized image (center-normalized \
             profiles go to CSV)"
                .into(),
        ));
    }
    let g = &image.grid;
    let (width, height) = if g.dim == 1 {
        (g.count, 1)
    } else {
        (g.count, g.count)
    };
    let mut payload = Vec::with_capacity(64 + 2 * width * height);
    payload.extend_from_slice(format!("P5\n{width} {height}\n65535\n").as_bytes());
    let mut push_sample = |v: f64| {
        let level = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        payload.extend_from_slice(&level.to_be_bytes());
    };
    if g.dim == 1 {
        for v in &image.values {
            push_sample(*v);
        }
    } else {
        // Row-major storage has iy ascending; PGM rows run top-down.
        for iy in (0..g.count).rev() {
            for ix in 0..g.count {
                push_sample(image.values[iy * g.count + ix]);
            }
        }
    }
    std::fs::write(path, payload)?;

    let sidecar = path.with_extension("txt");
    let mut meta = String::new();
    meta.push_str(&format!(
        "image = {}\n",
        path.file_name().unwrap_or_default().to_string_lossy()
    ));
    meta.push_str(&format!("label = {}\n", image.label));
    meta.push_str(&format!("dim = {}\n", g.dim));
    meta.push_str(&format!("count = {}\n", g.count));
    meta.push_str(&format!("pitch_mm = {}\n", g.pitch));
    meta.push_str(&format!("extent_mm = {}\n", g.extent()));
    meta.push_str(&format!("center_mm = {} {}\n", g.center[0], g.center[1]));
    meta.push_str("normalization = peak\n");
    meta.push_str(&format!("scenario_sha256 = {scenario_hash}\n"));
    std::fs::write(sidecar, meta)?;
    Ok(())
}

/// Write a 1-D profile as CSV: header `rho_a_mm,intensity`, one row per
/// sample, nine significant digits, LF line endings.
pub fn write_profile(image: &Image, path: &Path) -> Result<()> {
    if image.grid.dim != 1 {
        return Err(Error::Validation(
            "write_profile takes 1-D images only".into(),
        ));
    }
    let mut out = Vec::with_capacity(32 * (image.values.len() + 1));
    out.write_all(b"rho_a_mm,intensity\n")?;
    for (i, v) in image.values.iter().enumerate() {
        let rho = image.grid.axis_coord(0, i);
        out.write_all(format!("{rho:.8e},{v:.8e}\n").as_bytes())?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse a profile CSV back into (rho, intensity) pairs; used by tests and
/// reprocessing.
pub fn read_profile(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("rho_a_mm,intensity") => {}
        other => {
            return Err(Error::Parse {
                line: 1,
                message: format!("bad profile header {other:?}"),
            })
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let (a, b) = line.split_once(',').ok_or(Error::Parse {
                line: i + 2,
                message: "expected two comma-separated columns".into(),
            })?;
            let parse = |tok: &str| {
                tok.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 2,
                    message: format!("bad number `{tok}`"),
                })
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}
