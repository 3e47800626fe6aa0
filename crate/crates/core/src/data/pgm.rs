//! Binary 8-bit portable graymap (P5) reading and writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub fn write_pgm(path: &Path, height: usize, width: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != height * width {
        return Err(Error::ShapeMismatch(format!(
            "pgm {height}x{width} wants {} pixels, got {}",
            height * width,
            pixels.len()
        )));
    }
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(pixels);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Returns `(height, width, row-major pixels)`. Only maxval 255 is accepted.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: &str| Error::format(path, reason);

    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(bad("not a binary graymap (missing P5 magic)"));
    }

    // read three whitespace-separated header tokens after the magic,
    // skipping '#' comment lines
    let mut pos = 2;
    let mut tokens = Vec::with_capacity(3);
    while tokens.len() < 3 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        let token = std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?;
        tokens.push(
            token
                .parse::<usize>()
                .map_err(|_| Error::format(path, format!("bad header token {token:?}")))?,
        );
    }
    let (width, height, maxval) = (tokens[0], tokens[1], tokens[2]);
    if maxval != 255 {
        return Err(Error::format(
            path,
            format!("unsupported maxval {maxval}, expected 255"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(bad("zero image dimension"));
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("missing header terminator"));
    }
    pos += 1;

    let want = width * height;
    if bytes.len() - pos != want {
        return Err(Error::format(
            path,
            format!("expected {want} payload bytes, found {}", bytes.len() - pos),
        ));
    }
    Ok((height, width, bytes[pos..].to_vec()))
}
