//! Separable grayscale resampling.
//!
//! Each axis is resampled on its own: area averaging where it shrinks,
//! bilinear interpolation (pixel-center aligned) where it grows, and a plain
//! copy where the size is unchanged.

use crate::data::GrayImage;

/// For each output index, the contributing input indices and their weights.
fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    if src == dst {
        return (0..dst).map(|i| vec![(i, 1.0)]).collect();
    }
    let scale = src as f64 / dst as f64;
    if src > dst {
        (0..dst)
            .map(|i| {
                let (lo, hi) = (i as f64 * scale, (i + 1) as f64 * scale);
                let mut w = Vec::new();
                let mut j = lo.floor() as usize;
                while (j as f64) < hi && j < src {
                    let overlap = (hi.min((j + 1) as f64) - lo.max(j as f64)).max(0.0);
                    if overlap > 0.0 {
                        w.push((j, overlap / scale));
                    }
                    j += 1;
                }
                w
            })
            .collect()
    } else {
        (0..dst)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let j0 = s.floor() as usize;
                let frac = s - j0 as f64;
                let j1 = (j0 + 1).min(src - 1);
                if frac == 0.0 || j1 == j0 {
                    vec![(j0, 1.0)]
                } else {
                    vec![(j0, 1.0 - frac), (j1, frac)]
                }
            })
            .collect()
    }
}

/// Resamples to `width × height`, returning intensities on the 0..=255 scale.
pub fn resize(img: &GrayImage, width: usize, height: usize) -> Vec<f64> {
    let (sw, sh) = (img.width(), img.height());
    let wx = axis_weights(sw, width);
    let wy = axis_weights(sh, height);
    let mut rows = vec![0.0; sh * width];
    for y in 0..sh {
        let src = &img.pixels()[y * sw..(y + 1) * sw];
        for (x, taps) in wx.iter().enumerate() {
            rows[y * width + x] = taps.iter().map(|&(j, w)| src[j] as f64 * w).sum();
        }
    }
    let mut out = vec![0.0; height * width];
    for (y, taps) in wy.iter().enumerate() {
        for x in 0..width {
            out[y * width + x] = taps.iter().map(|&(j, w)| rows[j * width + x] * w).sum();
        }
    }
    out
}
