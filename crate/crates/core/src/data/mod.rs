//! Sign Language MNIST CSV ingestion and the in-memory dataset.
//!
//! CSV rows are `label,pixel1,...,pixel784` after a header line. Preparation
//! keeps labels `0..=23`, scales pixels by 1/255 and keeps them as 28×28×1
//! images in NHWC order.

mod pgm;

pub use pgm::{decode_gray_image, decode_pgm_prefix, encode_pgm, GrayImage};

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{INPUT_DIMS, NUM_CLASSES};
use crate::tensor::{Scalar, Tensor};

pub const PIXELS: usize = 28 * 28;

/// One CSV row as read from disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRecord {
    pub label: i64,
    /// Exactly [`PIXELS`] bytes, row-major.
    pub pixels: Vec<u8>,
}

/// Reads every data row of a Sign Language MNIST CSV. The first line must be a header.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Vec<RawRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path)
}

pub(crate) fn read_csv<R: std::io::Read>(input: R, path: &Path) -> Result<Vec<RawRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header_len = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.into(),
            reason: e.to_string(),
        })?
        .len();
    if header_len == 0 {
        return Err(Error::Csv {
            path: path.into(),
            reason: "missing header line".into(),
        });
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let malformed = |reason: String| Error::MalformedRow {
            path: path.into(),
            row: row_no,
            reason,
        };
        let row = row.map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Csv {
                path: path.into(),
                reason: e.to_string(),
            },
            _ => malformed(e.to_string()),
        })?;
        if row.len() != PIXELS + 1 {
            return Err(malformed(format!(
                "expected {} columns (label + {PIXELS} pixels), found {}",
                PIXELS + 1,
                row.len()
            )));
        }
        let label = row[0]
            .parse::<i64>()
            .map_err(|_| malformed(format!("label {:?} is not an integer", &row[0])))?;
        let pixels = row
            .iter()
            .skip(1)
            .enumerate()
            .map(|(k, cell)| {
                cell.parse::<u8>().map_err(|_| {
                    malformed(format!("pixel{} value {cell:?} is not an integer in 0..=255", k + 1))
                })
            })
            .collect::<Result<Vec<u8>>>()?;
        records.push(RawRecord { label, pixels });
    }
    Ok(records)
}

/// Normalized images with labels in `0..NUM_CLASSES`.
///
/// Pixels are stored flat, `PIXELS` values per image, each in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pixels: Vec<f32>,
    labels: Vec<usize>,
}

/// Output of [`prepare`]: the kept samples and how many rows the label filter dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub dataset: Dataset,
    pub dropped: usize,
}

/// Keeps rows labelled `0..=23`, scales pixels to `[0, 1]`, preserves order.
pub fn prepare(records: &[RawRecord]) -> Prepared {
    let mut pixels = Vec::with_capacity(records.len() * PIXELS);
    let mut labels = Vec::with_capacity(records.len());
    let mut dropped = 0;
    for rec in records {
        match usize::try_from(rec.label) {
            Ok(label) if label < NUM_CLASSES => {
                pixels.extend(rec.pixels.iter().map(|&p| p as f32 / 255.0));
                labels.push(label);
            }
            _ => dropped += 1,
        }
    }
    Prepared {
        dataset: Dataset { pixels, labels },
        dropped,
    }
}

impl Dataset {
    pub fn new(pixels: Vec<f32>, labels: Vec<usize>) -> Result<Self> {
        if pixels.len() != labels.len() * PIXELS {
            return Err(Error::LengthMismatch {
                what: "pixel values vs labels × 784",
                left: pixels.len(),
                right: labels.len() * PIXELS,
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= NUM_CLASSES) {
            return Err(Error::LabelOutOfRange {
                index,
                label,
                classes: NUM_CLASSES,
            });
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidConfig("pixel values must lie in [0, 1]".into()));
        }
        Ok(Dataset { pixels, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn image(&self, i: usize) -> &[f32] {
        &self.pixels[i * PIXELS..(i + 1) * PIXELS]
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut pixels = Vec::with_capacity(indices.len() * PIXELS);
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
        }
        Dataset {
            pixels,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// `[N, 28, 28, 1]` batch and labels for the given sample indices.
    pub fn batch<T: Scalar>(&self, indices: &[usize]) -> Result<(Tensor<T>, Vec<usize>)> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut data = Vec::with_capacity(indices.len() * PIXELS);
        for &i in indices {
            data.extend(self.image(i).iter().map(|&p| T::from_f64(p as f64)));
        }
        let [h, w, c] = INPUT_DIMS;
        let images = Tensor::from_vec(&[indices.len(), h, w, c], data)?;
        Ok((images, indices.iter().map(|&i| self.labels[i]).collect()))
    }

    /// All images as one `[N, 28, 28, 1]` tensor.
    pub fn images(&self) -> Result<Tensor<f32>> {
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let [h, w, c] = INPUT_DIMS;
        Tensor::from_vec(&[self.len(), h, w, c], self.pixels.clone())
    }

    /// Per-class sample counts, indexed by label.
    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Seeded class-stratified sample of about `n` rows.
    ///
    /// Every class contributes in proportion to its frequency (largest
    /// remainders get the leftover slots); the result is shuffled.
    pub fn stratified_subset(&self, n: usize, seed: u64) -> Dataset {
        let n = n.min(self.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &l) in self.labels.iter().enumerate() {
            by_class.entry(l).or_default().push(i);
        }
        let total = self.len() as f64;
        let mut quotas: Vec<(usize, usize, f64)> = by_class
            .iter()
            .map(|(&c, idx)| {
                let exact = idx.len() as f64 * n as f64 / total;
                (c, exact.floor() as usize, exact.fract())
            })
            .collect();
        let assigned: usize = quotas.iter().map(|q| q.1).sum();
        let mut order: Vec<usize> = (0..quotas.len()).collect();
        order.sort_by(|&a, &b| quotas[b].2.total_cmp(&quotas[a].2).then(a.cmp(&b)));
        for &k in order.iter().take(n - assigned) {
            quotas[k].1 += 1;
        }
        let mut picked = Vec::with_capacity(n);
        for (c, take, _) in quotas {
            let mut idx = by_class[&c].clone();
            idx.shuffle(&mut rng);
            picked.extend_from_slice(&idx[..take]);
        }
        picked.shuffle(&mut rng);
        self.subset(&picked)
    }
}
