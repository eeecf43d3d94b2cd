//! Inference on grayscale frames: resize, classify, map to a letter, and
//! optionally announce confident predictions.

mod frames;
mod resize;
mod speak;

pub use frames::{DirectoryFrames, Frame, StreamFrames};
pub use resize::resize;
pub use speak::{SpeakEvent, SpeakHook, SpeakMode, CONFIDENCE_THRESHOLD, LETTER_PLACEHOLDER};

use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};

use crate::data::GrayImage;
use crate::error::{Error, Result};
use crate::model::{SequentialModel, INPUT_DIMS, NUM_CLASSES};
use crate::tensor::Tensor;
use crate::train::argmax;

/// Letter for a class index: index `i` is the `(i + 1)`-th letter of the
/// alphabet, matching the dataset's label numbering. Index 9 (`J`) is mapped
/// but never trained, since the dataset has no samples for it.
pub fn letter_map(index: usize) -> Result<char> {
    if index < NUM_CLASSES {
        Ok((b'A' + index as u8) as char)
    } else {
        Err(Error::ClassOutOfRange {
            index,
            classes: NUM_CLASSES,
        })
    }
}

/// Resizes to 28×28 and scales to [0, 1]. Returns a `[1, 28, 28, 1]` batch.
pub fn preprocess(img: &GrayImage) -> Result<Tensor<f32>> {
    let [h, w, _] = INPUT_DIMS;
    let pixels: Vec<f32> = resize(img, w, h)
        .into_iter()
        .map(|v| v.clamp(0.0, 255.0) as f32 / 255.0)
        .collect();
    Tensor::from_vec(&[1, h, w, 1], pixels)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub class_index: usize,
    pub letter: char,
    pub confidence: f32,
}

/// Picks the most probable class of one probability row (lowest index on ties).
pub fn prediction_from_probabilities(probs: &[f32]) -> Result<Prediction> {
    if probs.is_empty() || !probs.iter().all(|p| p.is_finite()) {
        return Err(Error::NonFinite("class probabilities"));
    }
    let class_index = argmax(probs);
    Ok(Prediction {
        class_index,
        letter: letter_map(class_index)?,
        confidence: probs[class_index],
    })
}

pub fn predict(model: &SequentialModel<f32>, img: &GrayImage) -> Result<Prediction> {
    let probs = model.forward(&preprocess(img)?)?;
    prediction_from_probabilities(probs.data())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StreamSummary {
    pub frames: usize,
    pub classified: usize,
    pub failed: usize,
    pub spoken: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StreamOptions {
    /// Write `SPEAK` lines to the prediction output instead of the diagnostic one.
    pub inline_events: bool,
}

/// Classifies frames until the source ends or `stop` is raised.
///
/// Each decodable frame produces `id<TAB>letter<TAB>confidence` on `out`.
/// Undecodable frames are reported on `diag` and skipped.
pub fn classify_stream<I, O, D>(
    model: &SequentialModel<f32>,
    frames: I,
    hook: &mut SpeakHook,
    options: StreamOptions,
    out: &mut O,
    diag: &mut D,
    stop: &AtomicBool,
) -> Result<StreamSummary>
where
    I: IntoIterator<Item = Frame>,
    O: Write,
    D: Write,
{
    let io = |e| Error::io("<output>", e);
    let mut summary = StreamSummary::default();
    for frame in frames {
        if stop.load(Ordering::Relaxed) {
            break;
        }
        summary.frames += 1;
        let pred = match frame.image.and_then(|img| predict(model, &img)) {
            Ok(p) => p,
            Err(e) => {
                summary.failed += 1;
                writeln!(diag, "{}\terror\t{e}", frame.id).map_err(io)?;
                continue;
            }
        };
        summary.classified += 1;
        writeln!(out, "{}\t{}\t{:.5}", frame.id, pred.letter, pred.confidence).map_err(io)?;
        if let Some(event) = hook.gate_and_speak(&pred) {
            summary.spoken += 1;
            if *hook.mode() == SpeakMode::StdoutEvent {
                if options.inline_events {
                    writeln!(out, "{}", event.line()).map_err(io)?;
                } else {
                    writeln!(diag, "{}", event.line()).map_err(io)?;
                }
            }
        }
        out.flush().map_err(io)?;
    }
    hook.finish();
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::encode_pgm;
    use crate::model::build_model;
    use std::time::Instant;

    #[test]
    fn letter_table() {
        let all: String = (0..24).map(|i| letter_map(i).unwrap()).collect();
        assert_eq!(all, "ABCDEFGHIJKLMNOPQRSTUVWX");
        assert_eq!(letter_map(0).unwrap(), 'A');
        assert_eq!(letter_map(9).unwrap(), 'J');
        assert_eq!(letter_map(10).unwrap(), 'K');
        assert_eq!(letter_map(23).unwrap(), 'X');
        assert!(matches!(letter_map(24), Err(Error::ClassOutOfRange { .. })));
    }

    #[test]
    fn native_size_is_exact_byte_scaling() {
        let pixels: Vec<u8> = (0..784).map(|i| (i * 7 % 256) as u8).collect();
        let img = GrayImage::new(28, 28, pixels.clone()).unwrap();
        let t = preprocess(&img).unwrap();
        assert_eq!(t.dims(), &[1, 28, 28, 1]);
        for (v, p) in t.data().iter().zip(&pixels) {
            assert_eq!(*v, *p as f32 / 255.0);
        }
    }

    #[test]
    fn halving_matches_block_average() {
        let pixels: Vec<u8> = (0..56 * 56).map(|i| ((i * 37 + i / 56 * 11) % 256) as u8).collect();
        let img = GrayImage::new(56, 56, pixels.clone()).unwrap();
        let t = preprocess(&img).unwrap();
        for y in 0..28 {
            for x in 0..28 {
                let at = |yy: usize, xx: usize| pixels[yy * 56 + xx] as f64;
                let avg = (at(2 * y, 2 * x) + at(2 * y, 2 * x + 1) + at(2 * y + 1, 2 * x) + at(2 * y + 1, 2 * x + 1))
                    / 4.0
                    / 255.0;
                assert!((t.data()[y * 28 + x] as f64 - avg).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn checkerboard_halves_to_grey() {
        let pixels: Vec<u8> = (0..56 * 56).map(|i| if (i % 56 + i / 56) % 2 == 0 { 0 } else { 255 }).collect();
        let t = preprocess(&GrayImage::new(56, 56, pixels).unwrap()).unwrap();
        assert!(t.data().iter().all(|&v| (v - 0.5).abs() < 1e-6));
    }

    #[test]
    fn constant_images_stay_constant_at_any_size() {
        for (w, h) in [(1, 1), (5, 40), (100, 17), (28, 28), (640, 480)] {
            let img = GrayImage::new(w, h, vec![200; w * h]).unwrap();
            let t = preprocess(&img).unwrap();
            assert!(t.data().iter().all(|&v| (v - 200.0 / 255.0).abs() < 1e-6), "{w}x{h}");
        }
    }

    #[test]
    fn prediction_ties_pick_lowest_index() {
        let mut probs = vec![0.0f32; 24];
        probs[3] = 0.5;
        probs[7] = 0.5;
        let p = prediction_from_probabilities(&probs).unwrap();
        assert_eq!((p.class_index, p.letter), (3, 'D'));
    }

    #[test]
    fn predict_returns_valid_distribution_entry() {
        let model = build_model(0);
        let img = GrayImage::new(40, 30, (0..1200).map(|i| (i % 251) as u8).collect()).unwrap();
        let p = predict(&model, &img).unwrap();
        assert!(p.class_index < 24);
        assert!(p.confidence > 0.0 && p.confidence <= 1.0);
    }

    fn frames(n: usize, bad_at: Option<usize>) -> Vec<Frame> {
        (0..n)
            .map(|i| Frame {
                id: format!("f{i:03}"),
                image: if Some(i) == bad_at {
                    Err(crate::error::PgmError::BadMagic.into())
                } else {
                    Ok(GrayImage::new(28, 28, vec![(i * 9 % 256) as u8; 784]).unwrap())
                },
            })
            .collect()
    }

    #[test]
    fn stream_writes_one_line_per_decodable_frame() {
        let model = build_model(1);
        let mut hook = SpeakHook::new(SpeakMode::Silent, None);
        let (mut out, mut diag) = (Vec::new(), Vec::new());
        let stop = AtomicBool::new(false);
        let s = classify_stream(&model, frames(10, Some(4)), &mut hook, StreamOptions::default(), &mut out, &mut diag, &stop)
            .unwrap();
        assert_eq!((s.frames, s.classified, s.failed), (10, 9, 1));
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 9);
        for line in text.lines() {
            let cells: Vec<&str> = line.split('\t').collect();
            assert_eq!(cells.len(), 3);
            assert_eq!(cells[2].split('.').nth(1).unwrap().len(), 5);
        }
        assert!(String::from_utf8(diag).unwrap().starts_with("f004\terror\t"));
    }

    #[test]
    fn stop_flag_halts_stream() {
        let model = build_model(1);
        let mut hook = SpeakHook::new(SpeakMode::Silent, None);
        let stop = AtomicBool::new(true);
        let s = classify_stream(&model, frames(5, None), &mut hook, StreamOptions::default(), &mut Vec::new(), &mut Vec::new(), &stop)
            .unwrap();
        assert_eq!(s.frames, 0);
    }

    #[test]
    fn stream_from_concatenated_bytes() {
        let model = build_model(2);
        let mut bytes = Vec::new();
        for v in [10u8, 20, 30] {
            bytes.extend(encode_pgm(&GrayImage::new(32, 32, vec![v; 1024]).unwrap()));
        }
        let mut hook = SpeakHook::new(SpeakMode::Silent, None);
        let mut out = Vec::new();
        let s = classify_stream(
            &model,
            StreamFrames::new(&bytes[..]),
            &mut hook,
            StreamOptions::default(),
            &mut out,
            &mut Vec::new(),
            &AtomicBool::new(false),
        )
        .unwrap();
        assert_eq!(s.classified, 3);
        assert!(String::from_utf8(out).unwrap().starts_with("000001\t"));
    }

    #[test]
    fn throughput_at_least_thirty_frames_per_second() {
        let model = build_model(3);
        let mut hook = SpeakHook::new(SpeakMode::Silent, None);
        let n = 120;
        let start = Instant::now();
        classify_stream(&model, frames(n, None), &mut hook, StreamOptions::default(), &mut std::io::sink(), &mut std::io::sink(), &AtomicBool::new(false))
            .unwrap();
        let fps = n as f64 / start.elapsed().as_secs_f64();
        assert!(fps >= 30.0, "{fps:.1} frames/s");
    }
}
