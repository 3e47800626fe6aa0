//! The "HLW1" layer-stack weight file.
//!
//! ASCII header: a magic line `HLW1`, one line per layer, then a blank line.
//! Layer lines:
//!
//! ```text
//! linear <out> <in> <bias:0|1>
//! relu
//! sqdist <K> <in>
//! neglse <gamma>
//! avgpool <N>
//! ```
//!
//! The payload concatenates each layer's parameters in declaration order as
//! row-major little-endian 32-bit floats: weights then bias for `linear`,
//! templates for `sqdist`. Values are widened to f64 on load.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::neural::Layer;
use crate::tensor::Tensor;

pub const MAGIC: &str = "HLW1";

pub fn save_stack(path: &Path, layers: &[Layer]) -> Result<()> {
    let mut header = String::from(MAGIC);
    header.push('\n');
    let mut payload: Vec<u8> = Vec::new();

    for layer in layers {
        match layer {
            Layer::Linear { weights, bias } => {
                header.push_str(&format!(
                    "linear {} {} {}\n",
                    weights.rows(),
                    weights.cols(),
                    if bias.is_some() { 1 } else { 0 }
                ));
                push_f32(&mut payload, weights.values());
                if let Some(b) = bias {
                    push_f32(&mut payload, b.values());
                }
            }
            Layer::Relu => header.push_str("relu\n"),
            Layer::SquaredDistance { templates } => {
                header.push_str(&format!("sqdist {} {}\n", templates.rows(), templates.cols()));
                push_f32(&mut payload, templates.values());
            }
            Layer::NegLogSumExp { stiffness } => {
                header.push_str(&format!("neglse {stiffness}\n"));
            }
            Layer::AveragePool { size } => {
                header.push_str(&format!("avgpool {size}\n"));
            }
        }
    }
    header.push('\n');

    let mut bytes = header.into_bytes();
    bytes.extend_from_slice(&payload);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_stack(path: &Path) -> Result<Vec<Layer>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: &str| Error::format(path, reason);

    // header ends at the first blank line
    let mut header_end = None;
    let mut search = 0;
    while let Some(pos) = bytes[search..].iter().position(|&b| b == b'\n') {
        let at = search + pos;
        if bytes.get(at + 1) == Some(&b'\n') {
            header_end = Some(at + 2);
            break;
        }
        search = at + 1;
    }
    let header_end = header_end.ok_or_else(|| bad("missing blank line after header"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| bad("header is not utf-8"))?;

    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(bad("bad magic, expected HLW1"));
    }

    let mut layers = Vec::new();
    let mut cursor = header_end;
    let mut take_f32 = |count: usize, what: &str| -> Result<Vec<f64>> {
        let len = count * 4;
        if cursor + len > bytes.len() {
            return Err(Error::format(path, format!("payload truncated reading {what}")));
        }
        let out: Vec<f64> = bytes[cursor..cursor + len]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        cursor += len;
        Ok(out)
    };

    for line in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let kind = parts.next().unwrap_or("");
        let mut num = |what: &str| -> Result<usize> {
            parts
                .next()
                .and_then(|t| t.parse::<usize>().ok())
                .ok_or_else(|| Error::format(path, format!("bad {what} in line {line:?}")))
        };
        match kind {
            "linear" => {
                let (out, inp) = (num("out dim")?, num("in dim")?);
                let has_bias = num("bias flag")? == 1;
                let weights = Tensor::from_rows(out, inp, take_f32(out * inp, "linear weights")?)?;
                let bias = if has_bias {
                    Some(Tensor::from_vec(take_f32(out, "linear bias")?)?)
                } else {
                    None
                };
                layers.push(Layer::linear(weights, bias)?);
            }
            "relu" => layers.push(Layer::Relu),
            "sqdist" => {
                let (k, inp) = (num("template count")?, num("in dim")?);
                let templates = Tensor::from_rows(k, inp, take_f32(k * inp, "templates")?)?;
                layers.push(Layer::squared_distance(templates)?);
            }
            "neglse" => {
                let gamma: f64 = line
                    .split_whitespace()
                    .nth(1)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad("bad stiffness in neglse line"))?;
                layers.push(Layer::neg_log_sum_exp(gamma)?);
            }
            "avgpool" => {
                layers.push(Layer::average_pool(num("pool size")?)?);
            }
            other => {
                return Err(Error::format(path, format!("unknown layer kind {other:?}")));
            }
        }
    }

    if cursor != bytes.len() {
        return Err(bad("trailing bytes after declared payload"));
    }
    Ok(layers)
}

fn push_f32(buf: &mut Vec<u8>, values: &[f64]) {
    for &v in values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
}
