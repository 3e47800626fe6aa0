//! Heatmap serialization: an exact-valued "HM1" sidecar next to an 8-bit
//! rendering of the rectified heatmap.
//!
//! Sidecar layout: ASCII header `HM1 <H> <W>\n` followed by row-major
//! little-endian 32-bit floats.

use std::fs;
use std::path::{Path, PathBuf};

use crate::data::pgm::write_pgm;
use crate::error::{Error, Result};
use crate::lrp::Heatmap;
use crate::tensor::Tensor;

fn grid_shape(t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [h, w] => Ok((*h, *w)),
        [n] => Ok((1, *n)),
        other => Err(Error::ShapeMismatch(format!(
            "heatmaps must be 1-D or 2-D, got {other:?}"
        ))),
    }
}

/// Write `<stem>.hm` (exact sidecar) and `<stem>.pgm` (rectified rendering
/// scaled so the maximum maps to 255; all-zero maps render all-black).
/// Returns the two paths.
pub fn write_heatmap(heatmap: &Heatmap, stem: &Path) -> Result<(PathBuf, PathBuf)> {
    heatmap.values.check_finite("heatmap")?;
    let (h, w) = grid_shape(&heatmap.values)?;

    let sidecar = stem.with_extension("hm");
    let mut bytes = format!("HM1 {h} {w}\n").into_bytes();
    for &v in heatmap.values.values() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(&sidecar, bytes).map_err(|e| Error::io(&sidecar, e))?;

    let rendering = stem.with_extension("pgm");
    let rectified: Vec<f64> = heatmap.values.values().iter().map(|v| v.max(0.0)).collect();
    let max = rectified.iter().cloned().fold(0.0_f64, f64::max);
    let pixels: Vec<u8> = if max == 0.0 {
        vec![0; h * w]
    } else {
        rectified
            .iter()
            .map(|v| (v / max * 255.0).round() as u8)
            .collect()
    };
    write_pgm(&rendering, h, w, &pixels)?;
    Ok((sidecar, rendering))
}

/// Read a sidecar back; values are the f32 payload widened to f64.
pub fn read_heatmap_sidecar(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: &str| Error::format(path, reason);

    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header line"))?;
    let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| bad("non-ascii header"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("HM1") {
        return Err(bad("bad magic, expected HM1"));
    }
    let h: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad height"))?;
    let w: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad width"))?;

    let payload = &bytes[newline + 1..];
    if payload.len() != h * w * 4 {
        return Err(Error::format(
            path,
            format!("expected {} payload bytes, found {}", h * w * 4, payload.len()),
        ));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Tensor::new(vec![h, w], values)
}
