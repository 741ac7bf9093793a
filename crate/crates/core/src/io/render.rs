//! 8-bit binary PGM dumps of magnitude sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::DynamicImage;

/// Window used to map magnitudes to gray levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub min: f64,
    pub max: f64,
}

impl Window {
    /// Global min/max of `|d|` over every frame.
    pub fn of(d: &DynamicImage) -> Self {
        let mag = d.magnitude();
        let min = mag.iter().copied().fold(f64::INFINITY, f64::min);
        let max = mag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { min, max }
    }

    fn gray(&self, v: f64) -> u8 {
        let range = self.max - self.min;
        if !(range > 0.0) {
            return 0;
        }
        ((v - self.min) / range * 255.0).round().clamp(0.0, 255.0) as u8
    }
}

/// Binary PGM (`P5`) with `width × height` gray bytes, rows top to bottom.
pub fn pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// One `N × N` image per frame.
pub fn render_frames(d: &DynamicImage, window: Window) -> Vec<Vec<u8>> {
    (0..d.frames())
        .map(|t| {
            let px: Vec<u8> = d.frame(t).iter().map(|z| window.gray(z.norm())).collect();
            pgm(d.n(), d.n(), &px)
        })
        .collect()
}

/// Image column `x` unrolled over time: `N` rows (y) by `T` columns (t).
pub fn render_yt(d: &DynamicImage, column: usize, window: Window) -> Result<Vec<u8>> {
    if column >= d.n() {
        return Err(Error::invalid(format!(
            "y-t column {column} outside 0..{}",
            d.n()
        )));
    }
    let mut px = Vec::with_capacity(d.n() * d.frames());
    for y in 0..d.n() {
        for t in 0..d.frames() {
            px.push(window.gray(d.get(column, y, t).norm()));
        }
    }
    Ok(pgm(d.frames(), d.n(), &px))
}
