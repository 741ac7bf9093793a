use std::fmt;
use std::sync::Arc;

use rustfft::FftPlanner;

use super::{is_power_of_two, ComplexArray, C64};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Kernel `e^{-i 2π kn/N}`.
    Forward,
    /// Kernel `e^{+i 2π kn/N}`.
    Inverse,
}

/// Power-of-two FFT of a fixed length, backed by `rustfft`. Unnormalized.
#[derive(Clone)]
pub struct Fft {
    n: usize,
    forward: Arc<dyn rustfft::Fft<f64>>,
    inverse: Arc<dyn rustfft::Fft<f64>>,
}

impl fmt::Debug for Fft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft").field("n", &self.n).finish()
    }
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        if !is_power_of_two(n) {
            return Err(Error::NotPowerOfTwo(n));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn process(&self, buf: &mut [C64], direction: Direction) {
        assert_eq!(buf.len(), self.n, "fft buffer length");
        match direction {
            Direction::Forward => self.forward.process(buf),
            Direction::Inverse => self.inverse.process(buf),
        }
    }
}

/// Separable 2-d FFT on a `rows × cols` row-major grid. Unnormalized.
#[derive(Clone, Debug)]
pub struct Fft2 {
    row_fft: Fft,
    col_fft: Fft,
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        Ok(Self {
            row_fft: Fft::new(cols)?,
            col_fft: Fft::new(rows)?,
        })
    }

    pub fn rows(&self) -> usize {
        self.col_fft.len()
    }

    pub fn cols(&self) -> usize {
        self.row_fft.len()
    }

    pub fn process(&self, data: &mut [C64], direction: Direction) {
        let (rows, cols) = (self.rows(), self.cols());
        assert_eq!(data.len(), rows * cols, "fft2 buffer length");
        for row in data.chunks_exact_mut(cols) {
            self.row_fft.process(row, direction);
        }
        let mut column = vec![C64::new(0.0, 0.0); rows];
        for c in 0..cols {
            for r in 0..rows {
                column[r] = data[r * cols + c];
            }
            self.col_fft.process(&mut column, direction);
            for r in 0..rows {
                data[r * cols + c] = column[r];
            }
        }
    }
}

/// Unitary 2-d DFT (scaled by `1/√(rows·cols)`).
pub fn fft2(img: &ComplexArray, direction: Direction) -> Result<ComplexArray> {
    let [rows, cols] = img.dims2()?;
    let plan = Fft2::new(rows, cols)?;
    let mut out = img.clone();
    plan.process(out.data_mut(), direction);
    let scale = 1.0 / ((rows * cols) as f64).sqrt();
    out.data_mut().iter_mut().for_each(|z| *z *= scale);
    Ok(out)
}

/// Unitary 2-d DFT applied to every trailing `rows × cols` plane of an
/// array of rank ≥ 2.
pub fn fft2_frames(arr: &ComplexArray, direction: Direction) -> Result<ComplexArray> {
    let shape = arr.shape();
    if shape.len() < 2 {
        return Err(Error::invalid("fft2_frames needs rank >= 2"));
    }
    let (rows, cols) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    let plan = Fft2::new(rows, cols)?;
    let scale = 1.0 / ((rows * cols) as f64).sqrt();
    let mut out = arr.clone();
    for plane in out.data_mut().chunks_exact_mut(rows * cols) {
        plan.process(plane, direction);
        plane.iter_mut().for_each(|z| *z *= scale);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seeded_rng;

    fn random_array(rows: usize, cols: usize, seed: u64) -> ComplexArray {
        let mut rng = seeded_rng(seed);
        ComplexArray::from_fn(&[rows, cols], |_| C64::new(rng.normal(), rng.normal()))
    }

    /// O(N⁴) direct DFT with the same unitary scaling.
    fn direct_dft2(img: &ComplexArray, sign: f64) -> ComplexArray {
        let [rows, cols] = img.dims2().unwrap();
        let scale = 1.0 / ((rows * cols) as f64).sqrt();
        ComplexArray::from_fn(&[rows, cols], |k| {
            let (ku, kv) = (k / cols, k % cols);
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..rows {
                for c in 0..cols {
                    let phase = sign
                        * 2.0
                        * std::f64::consts::PI
                        * ((ku * r) as f64 / rows as f64 + (kv * c) as f64 / cols as f64);
                    acc += img.get(&[r, c]) * C64::from_polar(1.0, phase);
                }
            }
            acc * scale
        })
    }

    fn rel_err(a: &ComplexArray, b: &ComplexArray) -> f64 {
        let diff: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum();
        (diff / b.norm_sqr().max(f64::MIN_POSITIVE)).sqrt()
    }

    #[test]
    fn delta_transforms_to_ones() {
        let mut img = ComplexArray::zeros(&[4, 4]);
        img.set(&[0, 0], C64::new(1.0, 0.0));
        // unitary scaling puts 1/√16 on every bin; undo it to compare with the raw DFT
        let out = fft2(&img, Direction::Forward).unwrap();
        for z in out.data() {
            assert!((z * 4.0 - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let mut raw = img.clone();
        Fft2::new(4, 4).unwrap().process(raw.data_mut(), Direction::Forward);
        assert!(raw.data().iter().all(|z| *z == C64::new(1.0, 0.0)));
    }

    #[test]
    fn zeros_stay_zero() {
        let out = fft2(&ComplexArray::zeros(&[8, 8]), Direction::Forward).unwrap();
        assert!(out.data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn matches_direct_dft() {
        let img = random_array(8, 8, 11);
        let fwd = fft2(&img, Direction::Forward).unwrap();
        assert!(rel_err(&fwd, &direct_dft2(&img, -1.0)) < 1e-10);
        let inv = fft2(&img, Direction::Inverse).unwrap();
        assert!(rel_err(&inv, &direct_dft2(&img, 1.0)) < 1e-10);
        let rect = random_array(4, 16, 12);
        let fwd = fft2(&rect, Direction::Forward).unwrap();
        assert!(rel_err(&fwd, &direct_dft2(&rect, -1.0)) < 1e-10);
    }

    #[test]
    fn round_trip_and_parseval() {
        let img = random_array(32, 16, 5);
        let fwd = fft2(&img, Direction::Forward).unwrap();
        let back = fft2(&fwd, Direction::Inverse).unwrap();
        assert!(rel_err(&back, &img) < 1e-12);
        assert!((fwd.norm_sqr() - img.norm_sqr()).abs() / img.norm_sqr() < 1e-10);
    }

    #[test]
    fn rejects_non_power_of_two() {
        let img = ComplexArray::zeros(&[6, 8]);
        assert!(matches!(
            fft2(&img, Direction::Forward),
            Err(Error::NotPowerOfTwo(6))
        ));
        assert!(Fft::new(0).is_err());
    }

    #[test]
    fn length_one_is_identity() {
        let mut buf = vec![C64::new(2.0, -1.0)];
        Fft::new(1).unwrap().process(&mut buf, Direction::Forward);
        assert_eq!(buf[0], C64::new(2.0, -1.0));
    }
}
