use crate::error::{Error, Result};
use crate::numerics::{ComplexArray, C64};

/// Complex `N × N × T` image sequence.
///
/// Stored frame-major (`t`, then row `y`, then column `x`), so each frame is
/// contiguous and each column of the `(N·N) × T` Casorati matrix is one
/// frame.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicImage {
    n: usize,
    frames: usize,
    data: Vec<C64>,
}

impl DynamicImage {
    pub fn new(n: usize, frames: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != n * n * frames {
            return Err(Error::shape(
                "DynamicImage::new",
                &[frames, n, n],
                &[data.len()],
            ));
        }
        Ok(Self { n, frames, data })
    }

    pub fn zeros(n: usize, frames: usize) -> Self {
        Self {
            n,
            frames,
            data: vec![C64::new(0.0, 0.0); n * n * frames],
        }
    }

    pub fn from_frames(n: usize, frames: Vec<Vec<C64>>) -> Result<Self> {
        let t = frames.len();
        let mut data = Vec::with_capacity(n * n * t);
        for f in frames {
            if f.len() != n * n {
                return Err(Error::shape("DynamicImage::from_frames", &[n * n], &[f.len()]));
            }
            data.extend(f);
        }
        Self::new(n, t, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn pixels(&self) -> usize {
        self.n * self.n
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn frame(&self, t: usize) -> &[C64] {
        let p = self.pixels();
        &self.data[t * p..(t + 1) * p]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [C64] {
        let p = self.pixels();
        &mut self.data[t * p..(t + 1) * p]
    }

    pub fn get(&self, x: usize, y: usize, t: usize) -> C64 {
        self.data[(t * self.n + y) * self.n + x]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Casorati matrix `(N·N) × T`, row = pixel, column = frame.
    pub fn casorati(&self) -> ComplexArray {
        let (p, t) = (self.pixels(), self.frames);
        ComplexArray::from_fn(&[p, t], |k| self.data[(k % t) * p + k / t])
    }

    /// Inverse of [`DynamicImage::casorati`].
    pub fn from_casorati(n: usize, m: &ComplexArray) -> Result<Self> {
        let [p, t] = m.dims2()?;
        if p != n * n {
            return Err(Error::shape("DynamicImage::from_casorati", &[n * n, t], &[p, t]));
        }
        let mut data = vec![C64::new(0.0, 0.0); p * t];
        for (k, z) in m.data().iter().enumerate() {
            data[(k % t) * p + k / t] = *z;
        }
        Self::new(n, t, data)
    }

    /// Array view with shape `[T, N, N]`.
    pub fn to_array(&self) -> ComplexArray {
        ComplexArray::new(vec![self.frames, self.n, self.n], self.data.clone())
            .expect("consistent shape")
    }

    pub fn from_array(arr: ComplexArray) -> Result<Self> {
        match *arr.shape() {
            [t, n, m] if n == m => Self::new(n, t, arr.into_data()),
            [n, m] if n == m => Self::new(n, 1, arr.into_data()),
            _ => Err(Error::invalid(format!(
                "expected a [T, N, N] image array, got {:?}",
                arr.shape()
            ))),
        }
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }
}
