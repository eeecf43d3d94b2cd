//! Versioned binary model file.
//!
//! Layout, all integers little-endian:
//!
//! | bytes        | content                                                   |
//! |--------------|-----------------------------------------------------------|
//! | 8            | magic `SIGNCNN\0`                                         |
//! | 4            | format version (`u32`)                                    |
//! | 4            | descriptor length `d` (`u32`)                             |
//! | d            | UTF-8 architecture descriptor, one layer per line         |
//! | 8            | weight count `w` (`u64`)                                  |
//! | 4·w          | `f32` weights: per layer, kernel then bias, row-major     |
//! | 8            | XXH64 (seed 0) of every byte from the version field up to |
//! |              | the end of the weights                                    |
//!
//! Descriptor lines look like `conv2d in=1 filters=32 kernel=3 activation=relu`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use twox_hash::XxHash64;

use super::{Layer, SequentialModel};
use crate::error::{Error, ModelFileError, Result};
use crate::fsutil::write_atomic;
use crate::layers::{Activation, Conv2D, Dense, Dropout, MaxPool2D};
use crate::tensor::Tensor;

pub const MAGIC: [u8; 8] = *b"SIGNCNN\0";
pub const FORMAT_VERSION: u32 = 1;

fn descriptor(model: &SequentialModel<f32>) -> String {
    let [h, w, c] = model.input_dims();
    let mut s = format!("input height={h} width={w} channels={c}\n");
    for layer in model.layers() {
        match layer {
            Layer::Conv2D(conv) => writeln!(
                s,
                "conv2d in={} filters={} kernel={} activation={}",
                conv.in_channels(),
                conv.filters(),
                Conv2D::<f32>::KERNEL,
                if conv.has_relu() { "relu" } else { "none" }
            ),
            Layer::MaxPool2D(_) => writeln!(s, "maxpool2d window={}", MaxPool2D::WINDOW),
            Layer::Flatten => writeln!(s, "flatten"),
            Layer::Dense(d) => writeln!(
                s,
                "dense in={} units={} activation={}",
                d.in_features(),
                d.units(),
                d.activation().name()
            ),
            Layer::Dropout(d) => writeln!(s, "dropout rate={}", d.rate()),
        }
        .expect("writing to a String cannot fail");
    }
    s
}

pub fn to_bytes(model: &SequentialModel<f32>) -> Vec<u8> {
    let desc = descriptor(model);
    let params = model.parameters();
    let count: usize = params.iter().map(|p| p.len()).sum();
    let mut out = Vec::with_capacity(8 + 4 + 4 + desc.len() + 8 + 4 * count + 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(desc.len() as u32).to_le_bytes());
    out.extend_from_slice(desc.as_bytes());
    out.extend_from_slice(&(count as u64).to_le_bytes());
    for p in params {
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let checksum = XxHash64::oneshot(0, &out[MAGIC.len()..]);
    out.extend_from_slice(&checksum.to_le_bytes());
    out
}

/// Writes the model atomically: either the complete file appears at `path` or nothing changes.
pub fn save(model: &SequentialModel<f32>, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &to_bytes(model))
}

/// Reads a model; the result is in inference mode.
pub fn load(path: impl AsRef<Path>) -> Result<SequentialModel<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

fn need(bytes: &[u8], needed: usize) -> Result<(), ModelFileError> {
    if bytes.len() < needed {
        Err(ModelFileError::Truncated {
            needed,
            actual: bytes.len(),
        })
    } else {
        Ok(())
    }
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn u64_at(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

pub fn from_bytes(bytes: &[u8]) -> Result<SequentialModel<f32>> {
    need(bytes, MAGIC.len())?;
    if bytes[..MAGIC.len()] != MAGIC {
        return Err(ModelFileError::BadMagic.into());
    }
    need(bytes, 12)?;
    let version = u32_at(bytes, 8);
    if version != FORMAT_VERSION {
        return Err(ModelFileError::VersionMismatch {
            found: version,
            supported: FORMAT_VERSION,
        }
        .into());
    }
    need(bytes, 16)?;
    let desc_len = u32_at(bytes, 12) as usize;
    let desc_end = 16 + desc_len;
    need(bytes, desc_end + 8)?;
    let count = u64_at(bytes, desc_end);
    let weights_end = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(4))
        .and_then(|b| b.checked_add(desc_end + 8))
        .ok_or(ModelFileError::Descriptor(format!("implausible weight count {count}")))?;
    let total = weights_end + 8;
    need(bytes, total)?;
    if bytes.len() > total {
        return Err(ModelFileError::TrailingBytes(bytes.len() - total).into());
    }
    let stored = u64_at(bytes, weights_end);
    let computed = XxHash64::oneshot(0, &bytes[MAGIC.len()..weights_end]);
    if stored != computed {
        return Err(ModelFileError::Checksum { stored, computed }.into());
    }

    let desc = std::str::from_utf8(&bytes[16..desc_end])
        .map_err(|_| ModelFileError::Descriptor("descriptor is not UTF-8".into()))?;
    let weights: Vec<f32> = bytes[desc_end + 8..weights_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let model = parse(desc, &weights)?;
    Ok(model)
}

struct Line<'a> {
    kind: &'a str,
    fields: HashMap<&'a str, &'a str>,
}

impl<'a> Line<'a> {
    fn parse(line: &'a str) -> Result<Self, ModelFileError> {
        let mut tokens = line.split_whitespace();
        let kind = tokens.next().unwrap_or_default();
        let mut fields = HashMap::new();
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| ModelFileError::Descriptor(format!("bad field {tok:?} in {line:?}")))?;
            fields.insert(k, v);
        }
        Ok(Line { kind, fields })
    }

    fn get(&self, key: &str) -> Result<&'a str, ModelFileError> {
        self.fields
            .get(key)
            .copied()
            .ok_or_else(|| ModelFileError::Descriptor(format!("{} line lacks {key}", self.kind)))
    }

    fn usize(&self, key: &str) -> Result<usize, ModelFileError> {
        let v = self.get(key)?;
        v.parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| ModelFileError::Descriptor(format!("{key}={v} is not a positive integer")))
    }

    fn activation(&self) -> Result<Activation, ModelFileError> {
        let v = self.get("activation")?;
        Activation::from_name(v).ok_or_else(|| ModelFileError::Descriptor(format!("unknown activation {v}")))
    }
}

/// Hands out consecutive weight slices in declaration order.
struct Weights<'a> {
    rest: &'a [f32],
}

impl Weights<'_> {
    fn take(&mut self, dims: &[usize]) -> Result<Tensor<f32>> {
        let n: usize = dims.iter().product();
        if self.rest.len() < n {
            return Err(ModelFileError::Descriptor(
                "descriptor needs more weights than the file holds".into(),
            )
            .into());
        }
        let (head, tail) = self.rest.split_at(n);
        self.rest = tail;
        Tensor::from_vec(dims, head.to_vec())
    }
}

fn parse(desc: &str, weights: &[f32]) -> Result<SequentialModel<f32>> {
    let bad = |m: String| Error::from(ModelFileError::Descriptor(m));
    let mut lines = desc.lines().filter(|l| !l.trim().is_empty());
    let head = Line::parse(lines.next().ok_or_else(|| bad("empty descriptor".into()))?)?;
    if head.kind != "input" {
        return Err(bad(format!("first line must be input, got {}", head.kind)));
    }
    let input = [head.usize("height")?, head.usize("width")?, head.usize("channels")?];

    let mut w = Weights { rest: weights };
    let mut layers = Vec::new();
    for raw in lines {
        let line = Line::parse(raw)?;
        let layer = match line.kind {
            "conv2d" => {
                if line.usize("kernel")? != Conv2D::<f32>::KERNEL {
                    return Err(bad(format!("unsupported kernel in {raw:?}")));
                }
                let (cin, f) = (line.usize("in")?, line.usize("filters")?);
                let relu = match line.activation()? {
                    Activation::Relu => true,
                    Activation::None => false,
                    Activation::Softmax => return Err(bad("softmax conv is not supported".into())),
                };
                let kernel = w.take(&[3, 3, cin, f])?;
                Layer::Conv2D(Conv2D::new(kernel, w.take(&[f])?, relu)?)
            }
            "maxpool2d" => {
                if line.usize("window")? != MaxPool2D::WINDOW {
                    return Err(bad(format!("unsupported window in {raw:?}")));
                }
                Layer::MaxPool2D(MaxPool2D)
            }
            "flatten" => Layer::Flatten,
            "dense" => {
                let (fin, units) = (line.usize("in")?, line.usize("units")?);
                let kernel = w.take(&[fin, units])?;
                Layer::Dense(Dense::new(kernel, w.take(&[units])?, line.activation()?)?)
            }
            "dropout" => {
                let rate: f64 = line
                    .get("rate")?
                    .parse()
                    .map_err(|_| bad(format!("bad dropout rate in {raw:?}")))?;
                Layer::Dropout(Dropout::new(rate)?)
            }
            other => return Err(bad(format!("unknown layer kind {other:?}"))),
        };
        layers.push(layer);
    }
    if !w.rest.is_empty() {
        return Err(bad(format!("{} weights left over after the last layer", w.rest.len())));
    }
    SequentialModel::from_layers(layers, input)
}
