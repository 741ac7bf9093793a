//! Kaiser–Bessel gridding NUFFT and the multicoil forward model.
//!
//! The forward transform evaluates
//!
//! ```text
//! y(k) = (1/N) Σ_r x(r) · exp(−i k·r)
//! ```
//!
//! for integer pixel offsets `r = (ix − N/2, iy − N/2)` and `k` in
//! radians/pixel. The image is pre-divided by the analytic Fourier transform
//! of the kernel, zero-padded onto an oversampled power-of-two grid,
//! transformed, and interpolated onto the samples with a separable
//! Kaiser–Bessel kernel. The adjoint is the exact transpose of those steps.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::DynamicImage;
use crate::numerics::{ComplexArray, Direction, Fft2, C64};
use crate::trajectory::{DensityWeights, Trajectory};

/// Gridding parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NufftOptions {
    /// Grid oversampling factor α; the grid is `⌈α·N⌉` rounded up to a
    /// power of two.
    pub oversampling: f64,
    /// Kernel width in oversampled grid cells.
    pub kernel_width: usize,
}

impl Default for NufftOptions {
    fn default() -> Self {
        Self {
            oversampling: 2.0,
            kernel_width: 8,
        }
    }
}

/// Kaiser–Bessel shape parameter for width `w` at oversampling `alpha`
/// (Beatty et al.).
pub fn beatty_beta(width: usize, alpha: f64) -> f64 {
    let w = width as f64;
    PI * ((w / alpha).powi(2) * (alpha - 0.5).powi(2) - 0.8).max(0.0).sqrt()
}

/// Modified Bessel function of the first kind, order zero (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Kaiser–Bessel kernel, normalized to 1 at the origin and zero for
/// `|d| > width/2`.
#[derive(Clone, Copy, Debug)]
pub struct KaiserBessel {
    width: f64,
    beta: f64,
    norm: f64,
}

impl KaiserBessel {
    pub fn new(width: usize, beta: f64) -> Self {
        Self {
            width: width as f64,
            beta,
            norm: bessel_i0(beta),
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eval(&self, d: f64) -> f64 {
        let x = 2.0 * d / self.width;
        if x.abs() > 1.0 {
            return 0.0;
        }
        bessel_i0(self.beta * (1.0 - x * x).sqrt()) / self.norm
    }

    /// Continuous Fourier transform `∫ φ(x) e^{i2πxξ} dx`, with `ξ` in
    /// cycles per grid cell.
    pub fn fourier(&self, xi: f64) -> f64 {
        let z2 = self.beta * self.beta - (PI * self.width * xi).powi(2);
        let ratio = if z2 > 0.0 {
            let z = z2.sqrt();
            z.sinh() / z
        } else if z2 < 0.0 {
            let z = (-z2).sqrt();
            z.sin() / z
        } else {
            1.0
        };
        self.width * ratio / self.norm
    }
}

/// Precomputed gridding plan for one frame's sample locations.
#[derive(Clone, Debug)]
pub struct NufftPlan {
    n: usize,
    grid: usize,
    width: usize,
    kernel: KaiserBessel,
    deapod: Vec<f64>,
    fft: Fft2,
    num_samples: usize,
    x_index: Vec<usize>,
    y_index: Vec<usize>,
    x_weight: Vec<f64>,
    y_weight: Vec<f64>,
}

impl NufftPlan {
    pub fn new(n: usize, coords: &[[f64; 2]], options: NufftOptions) -> Result<Self> {
        if !crate::numerics::is_power_of_two(n) {
            return Err(Error::NotPowerOfTwo(n));
        }
        if options.oversampling < 1.0 || options.kernel_width == 0 {
            return Err(Error::invalid(
                "nufft needs oversampling >= 1 and kernel_width >= 1",
            ));
        }
        let grid = ((options.oversampling * n as f64).ceil() as usize).next_power_of_two();
        let width = options.kernel_width;
        if width > grid {
            return Err(Error::invalid("kernel wider than the oversampled grid"));
        }
        let alpha = grid as f64 / n as f64;
        let kernel = KaiserBessel::new(width, beatty_beta(width, alpha));
        let half = (n / 2) as f64;
        let deapod = (0..n)
            .map(|i| kernel.fourier((i as f64 - half) / grid as f64))
            .collect();

        let num_samples = coords.len();
        let mut x_index = Vec::with_capacity(num_samples * width);
        let mut y_index = Vec::with_capacity(num_samples * width);
        let mut x_weight = Vec::with_capacity(num_samples * width);
        let mut y_weight = Vec::with_capacity(num_samples * width);
        let to_grid = grid as f64 / (2.0 * PI);
        for &[kx, ky] in coords {
            if !(kx.is_finite() && ky.is_finite()) {
                return Err(Error::invalid("non-finite k-space coordinate"));
            }
            for (k, index, weight) in [
                (kx, &mut x_index, &mut x_weight),
                (ky, &mut y_index, &mut y_weight),
            ] {
                let u = k * to_grid;
                let start = (u - width as f64 / 2.0).ceil() as i64;
                for a in 0..width as i64 {
                    let m = start + a;
                    index.push(m.rem_euclid(grid as i64) as usize);
                    weight.push(kernel.eval(u - m as f64));
                }
            }
        }
        Ok(Self {
            n,
            grid,
            width,
            kernel,
            deapod,
            fft: Fft2::new(grid, grid)?,
            num_samples,
            x_index,
            y_index,
            x_weight,
            y_weight,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid_size(&self) -> usize {
        self.grid
    }

    pub fn kernel_width(&self) -> usize {
        self.width
    }

    pub fn kernel(&self) -> &KaiserBessel {
        &self.kernel
    }

    /// Per-axis deapodization factors; the 2-d map is their outer product.
    pub fn deapodization(&self) -> &[f64] {
        &self.deapod
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    fn grid_offset(&self, i: usize) -> usize {
        (i + self.grid - self.n / 2) % self.grid
    }

    /// `img` is `N × N` row-major; `out` receives one value per sample.
    pub fn forward_into(&self, img: &[C64], out: &mut [C64]) -> Result<()> {
        let (n, g, w) = (self.n, self.grid, self.width);
        if img.len() != n * n {
            return Err(Error::shape("nufft_forward image", &[n, n], &[img.len()]));
        }
        if out.len() != self.num_samples {
            return Err(Error::shape(
                "nufft_forward samples",
                &[self.num_samples],
                &[out.len()],
            ));
        }
        let mut buf = vec![C64::new(0.0, 0.0); g * g];
        for iy in 0..n {
            let gy = self.grid_offset(iy);
            for ix in 0..n {
                let gx = self.grid_offset(ix);
                buf[gy * g + gx] = img[iy * n + ix] / (self.deapod[ix] * self.deapod[iy]);
            }
        }
        self.fft.process(&mut buf, Direction::Forward);
        let scale = 1.0 / n as f64;
        for (s, o) in out.iter_mut().enumerate() {
            let xi = &self.x_index[s * w..(s + 1) * w];
            let xw = &self.x_weight[s * w..(s + 1) * w];
            let mut acc = C64::new(0.0, 0.0);
            for b in 0..w {
                let row = &buf[self.y_index[s * w + b] * g..][..g];
                let mut line = C64::new(0.0, 0.0);
                for a in 0..w {
                    line += row[xi[a]] * xw[a];
                }
                acc += line * self.y_weight[s * w + b];
            }
            *o = acc * scale;
        }
        Ok(())
    }

    /// Exact adjoint of [`NufftPlan::forward_into`].
    pub fn adjoint_into(&self, samples: &[C64], img: &mut [C64]) -> Result<()> {
        let (n, g, w) = (self.n, self.grid, self.width);
        if samples.len() != self.num_samples {
            return Err(Error::shape(
                "nufft_adjoint samples",
                &[self.num_samples],
                &[samples.len()],
            ));
        }
        if img.len() != n * n {
            return Err(Error::shape("nufft_adjoint image", &[n, n], &[img.len()]));
        }
        let mut buf = vec![C64::new(0.0, 0.0); g * g];
        let scale = 1.0 / n as f64;
        for (s, &y) in samples.iter().enumerate() {
            let value = y * scale;
            let xi = &self.x_index[s * w..(s + 1) * w];
            let xw = &self.x_weight[s * w..(s + 1) * w];
            for b in 0..w {
                let row_value = value * self.y_weight[s * w + b];
                let row = &mut buf[self.y_index[s * w + b] * g..][..g];
                for a in 0..w {
                    row[xi[a]] += row_value * xw[a];
                }
            }
        }
        self.fft.process(&mut buf, Direction::Inverse);
        for iy in 0..n {
            let gy = self.grid_offset(iy);
            for ix in 0..n {
                let gx = self.grid_offset(ix);
                img[iy * n + ix] = buf[gy * g + gx] / (self.deapod[ix] * self.deapod[iy]);
            }
        }
        Ok(())
    }
}

pub fn nufft_forward(img: &ComplexArray, plan: &NufftPlan) -> Result<ComplexArray> {
    if img.shape() != [plan.n, plan.n] {
        return Err(Error::shape("nufft_forward", &[plan.n, plan.n], img.shape()));
    }
    let mut out = ComplexArray::zeros(&[plan.num_samples]);
    plan.forward_into(img.data(), out.data_mut())?;
    Ok(out)
}

pub fn nufft_adjoint(samples: &ComplexArray, plan: &NufftPlan) -> Result<ComplexArray> {
    if samples.len() != plan.num_samples {
        return Err(Error::shape(
            "nufft_adjoint",
            &[plan.num_samples],
            samples.shape(),
        ));
    }
    let mut out = ComplexArray::zeros(&[plan.n, plan.n]);
    plan.adjoint_into(samples.data(), out.data_mut())?;
    Ok(out)
}

/// Receive-coil sensitivities, `C × N × N`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoilMaps {
    maps: ComplexArray,
}

/// Tolerance on `Σ_c |S_c|² ∈ {0, 1}` per pixel.
pub const COIL_NORMALIZATION_TOL: f64 = 1e-10;

impl CoilMaps {
    /// Validates the per-pixel normalization.
    pub fn new(maps: ComplexArray) -> Result<Self> {
        let &[c, n, m] = maps.shape() else {
            return Err(Error::invalid(format!(
                "coil maps must be [C, N, N], got {:?}",
                maps.shape()
            )));
        };
        if c == 0 || n != m {
            return Err(Error::invalid(format!(
                "coil maps must be [C, N, N] with C >= 1, got {:?}",
                maps.shape()
            )));
        }
        let p = n * n;
        for px in 0..p {
            let energy: f64 = (0..c).map(|ci| maps.data()[ci * p + px].norm_sqr()).sum();
            if (energy - 1.0).abs() > COIL_NORMALIZATION_TOL && energy > COIL_NORMALIZATION_TOL {
                return Err(Error::invalid(format!(
                    "coil energy at pixel {px} is {energy}, expected 1 (or 0 outside support)"
                )));
            }
        }
        Ok(Self { maps })
    }

    /// A single coil with unit sensitivity everywhere.
    pub fn unit(n: usize) -> Self {
        Self {
            maps: ComplexArray::from_fn(&[1, n, n], |_| C64::new(1.0, 0.0)),
        }
    }

    pub fn coils(&self) -> usize {
        self.maps.shape()[0]
    }

    pub fn n(&self) -> usize {
        self.maps.shape()[1]
    }

    pub fn map(&self, c: usize) -> &[C64] {
        let p = self.n() * self.n();
        &self.maps.data()[c * p..(c + 1) * p]
    }

    pub fn as_array(&self) -> &ComplexArray {
        &self.maps
    }
}

/// Multicoil non-Cartesian sampling operator `d ↦ (F_t S_c d_t)_{c,t}` with
/// one plan per frame. K-space data are laid out `C × T × M × S`.
#[derive(Clone, Debug)]
pub struct MulticoilOperator {
    plans: Vec<NufftPlan>,
    coils: CoilMaps,
    spokes_per_frame: usize,
    samples_per_spoke: usize,
}

impl MulticoilOperator {
    pub fn new(traj: &Trajectory, coils: CoilMaps, options: NufftOptions) -> Result<Self> {
        if coils.n() != traj.n() {
            return Err(Error::shape(
                "MulticoilOperator coil maps",
                &[traj.n(), traj.n()],
                &[coils.n(), coils.n()],
            ));
        }
        let plans = (0..traj.frames())
            .map(|t| NufftPlan::new(traj.n(), traj.frame_coords(t), options))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            plans,
            coils,
            spokes_per_frame: traj.spokes_per_frame(),
            samples_per_spoke: traj.samples_per_spoke(),
        })
    }

    pub fn plans(&self) -> &[NufftPlan] {
        &self.plans
    }

    pub fn coils(&self) -> &CoilMaps {
        &self.coils
    }

    pub fn n(&self) -> usize {
        self.coils.n()
    }

    pub fn frames(&self) -> usize {
        self.plans.len()
    }

    pub fn kspace_shape(&self) -> [usize; 4] {
        [
            self.coils.coils(),
            self.frames(),
            self.spokes_per_frame,
            self.samples_per_spoke,
        ]
    }

    pub fn forward(&self, d: &DynamicImage) -> Result<ComplexArray> {
        multicoil_forward(d, &self.coils, &self.plans, self.kspace_shape())
    }

    pub fn adjoint(
        &self,
        m: &ComplexArray,
        weights: Option<&DensityWeights>,
    ) -> Result<DynamicImage> {
        if m.shape() != self.kspace_shape() {
            return Err(Error::shape(
                "multicoil_adjoint k-space",
                &self.kspace_shape(),
                m.shape(),
            ));
        }
        multicoil_adjoint(m, &self.coils, &self.plans, weights)
    }
}

/// `output(c, t) = F_t (S_c ⊙ d_t)`; `shape` is `[C, T, M, S]`.
pub fn multicoil_forward(
    d: &DynamicImage,
    coils: &CoilMaps,
    plans: &[NufftPlan],
    shape: [usize; 4],
) -> Result<ComplexArray> {
    let [nc, nt, _, _] = shape;
    if d.n() != coils.n() || d.frames() != plans.len() || nc != coils.coils() || nt != plans.len()
    {
        return Err(Error::shape(
            "multicoil_forward",
            &[coils.coils(), plans.len(), coils.n(), coils.n()],
            &[nc, d.frames(), d.n(), d.n()],
        ));
    }
    let per = shape[2] * shape[3];
    if plans.iter().any(|p| p.num_samples() != per || p.n() != d.n()) {
        return Err(Error::invalid("plan sizes disagree with k-space shape"));
    }
    let frames: Vec<Vec<C64>> = (0..nt)
        .into_par_iter()
        .map(|t| -> Result<Vec<C64>> {
            let frame = d.frame(t);
            let mut out = vec![C64::new(0.0, 0.0); nc * per];
            let mut weighted = vec![C64::new(0.0, 0.0); frame.len()];
            for c in 0..nc {
                for ((w, x), s) in weighted.iter_mut().zip(frame).zip(coils.map(c)) {
                    *w = x * s;
                }
                plans[t].forward_into(&weighted, &mut out[c * per..(c + 1) * per])?;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut out = ComplexArray::zeros(&shape);
    let data = out.data_mut();
    for (t, block) in frames.iter().enumerate() {
        for c in 0..nc {
            data[(c * nt + t) * per..(c * nt + t + 1) * per]
                .copy_from_slice(&block[c * per..(c + 1) * per]);
        }
    }
    Ok(out)
}

/// `d_t = Σ_c conj(S_c) ⊙ F_tᴴ (w ⊙ m(c, t))`, coils summed in index order.
/// Without weights this is the exact adjoint of [`multicoil_forward`].
pub fn multicoil_adjoint(
    m: &ComplexArray,
    coils: &CoilMaps,
    plans: &[NufftPlan],
    weights: Option<&DensityWeights>,
) -> Result<DynamicImage> {
    let &[nc, nt, ns, nr] = m.shape() else {
        return Err(Error::invalid(format!(
            "k-space must be [C, T, M, S], got {:?}",
            m.shape()
        )));
    };
    if nc != coils.coils() || nt != plans.len() {
        return Err(Error::shape(
            "multicoil_adjoint",
            &[coils.coils(), plans.len(), ns, nr],
            m.shape(),
        ));
    }
    let per = ns * nr;
    if plans.iter().any(|p| p.num_samples() != per) {
        return Err(Error::invalid("plan sizes disagree with k-space shape"));
    }
    if let Some(w) = weights {
        if w.weights().len() != nt * per {
            return Err(Error::shape(
                "multicoil_adjoint weights",
                &[nt * per],
                &[w.weights().len()],
            ));
        }
    }
    let n = coils.n();
    let frames: Vec<Vec<C64>> = (0..nt)
        .into_par_iter()
        .map(|t| -> Result<Vec<C64>> {
            let mut acc = vec![C64::new(0.0, 0.0); n * n];
            let mut img = vec![C64::new(0.0, 0.0); n * n];
            let mut samples = vec![C64::new(0.0, 0.0); per];
            for c in 0..nc {
                let block = &m.data()[(c * nt + t) * per..(c * nt + t + 1) * per];
                match weights {
                    Some(w) => {
                        for ((s, y), wi) in samples.iter_mut().zip(block).zip(w.frame(t)) {
                            *s = y * wi;
                        }
                    }
                    None => samples.copy_from_slice(block),
                }
                plans[t].adjoint_into(&samples, &mut img)?;
                for ((a, x), s) in acc.iter_mut().zip(&img).zip(coils.map(c)) {
                    *a += s.conj() * x;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    DynamicImage::from_frames(n, frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seeded_rng;
    use crate::trajectory::golden_angle_trajectory;

    #[test]
    fn bessel_i0_known_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel_i0(10.0) - 2815.716_628_466_254).abs() < 1e-9);
    }

    #[test]
    fn kernel_is_symmetric_and_compact() {
        let kb = KaiserBessel::new(6, beatty_beta(6, 2.0));
        for i in 0..50 {
            let d = i as f64 * 0.07;
            assert_eq!(kb.eval(d), kb.eval(-d));
        }
        assert_eq!(kb.eval(3.0001), 0.0);
        assert_eq!(kb.eval(0.0), 1.0);
    }

    #[test]
    fn kernel_fourier_matches_quadrature() {
        let kb = KaiserBessel::new(4, beatty_beta(4, 2.0));
        for xi in [0.0, 0.05, 0.13, 0.25] {
            // composite Simpson over the support
            let steps = 4000;
            let h = 4.0 / steps as f64;
            let mut acc = 0.0;
            for i in 0..=steps {
                let x = -2.0 + i as f64 * h;
                let wgt = if i == 0 || i == steps {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += wgt * kb.eval(x) * (2.0 * PI * x * xi).cos();
            }
            let quad = acc * h / 3.0;
            assert!((quad - kb.fourier(xi)).abs() < 1e-9 * quad.abs(), "xi={xi}");
        }
    }

    #[test]
    fn plan_geometry() {
        let traj = golden_angle_trajectory(16, 1, 4, 32).unwrap();
        let plan = NufftPlan::new(16, traj.frame_coords(0), NufftOptions::default()).unwrap();
        assert_eq!(plan.grid_size(), 32);
        assert!(plan.deapodization().iter().all(|&a| a > 0.0));
        let odd = NufftPlan::new(
            16,
            traj.frame_coords(0),
            NufftOptions {
                oversampling: 1.5,
                kernel_width: 4,
            },
        )
        .unwrap();
        assert_eq!(odd.grid_size(), 32);
    }

    #[test]
    fn zero_in_zero_out() {
        let traj = golden_angle_trajectory(8, 1, 3, 16).unwrap();
        let plan = NufftPlan::new(8, traj.frame_coords(0), NufftOptions::default()).unwrap();
        let y = nufft_forward(&ComplexArray::zeros(&[8, 8]), &plan).unwrap();
        assert!(y.data().iter().all(|z| z.norm() == 0.0));
        let x = nufft_adjoint(&ComplexArray::zeros(&[48]), &plan).unwrap();
        assert!(x.data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn centered_delta_has_flat_spectrum() {
        let traj = golden_angle_trajectory(16, 1, 5, 32).unwrap();
        let plan = NufftPlan::new(16, traj.frame_coords(0), NufftOptions::default()).unwrap();
        let mut img = ComplexArray::zeros(&[16, 16]);
        img.set(&[8, 8], C64::new(1.0, 0.0));
        let y = nufft_forward(&img, &plan).unwrap();
        let expect = 1.0 / 16.0;
        for z in y.data() {
            assert!((z.norm() - expect).abs() < 1e-6 * expect);
        }
    }

    #[test]
    fn shape_errors() {
        let traj = golden_angle_trajectory(8, 1, 3, 16).unwrap();
        let plan = NufftPlan::new(8, traj.frame_coords(0), NufftOptions::default()).unwrap();
        assert!(nufft_forward(&ComplexArray::zeros(&[4, 4]), &plan).is_err());
        assert!(nufft_adjoint(&ComplexArray::zeros(&[47]), &plan).is_err());
    }

    #[test]
    fn coil_maps_validate_normalization() {
        let mut rng = seeded_rng(1);
        let bad = ComplexArray::from_fn(&[2, 4, 4], |_| C64::new(rng.uniform(), 0.0));
        assert!(CoilMaps::new(bad).is_err());
        let half = ComplexArray::from_fn(&[2, 4, 4], |_| C64::new(0.5f64.sqrt(), 0.0));
        assert!(CoilMaps::new(half).is_ok());
        let zero = ComplexArray::zeros(&[2, 4, 4]);
        assert!(CoilMaps::new(zero).is_ok());
    }
}
