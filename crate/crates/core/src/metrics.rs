//! Frame-wise PSNR/SSIM, coil-wise k-space NRMSE and ROI intensity curves.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::DynamicImage;
use crate::numerics::{fft2, ComplexArray, Direction, C64};
use crate::nufft::CoilMaps;

/// PSNR reported for identical frames.
pub const PSNR_CAP_DB: f64 = 99.0;
pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;

/// Magnitude sequence mapped to `[0, 1]` with the global min and max.
/// Frame-major like the source image.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedSequence {
    pub n: usize,
    pub frames: usize,
    pub data: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

impl NormalizedSequence {
    pub fn frame(&self, t: usize) -> &[f64] {
        let p = self.n * self.n;
        &self.data[t * p..(t + 1) * p]
    }
}

pub fn normalize_sequence(d: &DynamicImage) -> Result<NormalizedSequence> {
    normalize_magnitudes(d.n(), d.frames(), d.magnitude())
}

pub fn normalize_magnitudes(n: usize, frames: usize, mut mag: Vec<f64>) -> Result<NormalizedSequence> {
    if mag.len() != n * n * frames {
        return Err(Error::shape("normalize", &[frames, n, n], &[mag.len()]));
    }
    let min = mag.iter().copied().fold(f64::INFINITY, f64::min);
    let max = mag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(Error::invalid("cannot normalize a constant sequence"));
    }
    let range = max - min;
    mag.iter_mut().for_each(|v| *v = (*v - min) / range);
    Ok(NormalizedSequence {
        n,
        frames,
        data: mag,
        min,
        max,
    })
}

/// `10 log10(1 / MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(Error::shape("psnr", &[y.len()], &[y_hat.len()]));
    }
    let mse = y
        .iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64;
    Ok(psnr_from_mse(mse))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
}

/// Single-window SSIM from whole-frame means, variances and covariance.
pub fn ssim(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(Error::shape("ssim", &[y.len()], &[y_hat.len()]));
    }
    let n = y.len() as f64;
    let mu_a = y.iter().sum::<f64>() / n;
    let mu_b = y_hat.iter().sum::<f64>() / n;
    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(y_hat) {
        let (da, db) = (a - mu_a, b - mu_b);
        va += da * da;
        vb += db * db;
        cov += da * db;
    }
    let (va, vb, cov) = (va / n, vb / n, cov / n);
    let num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2);
    let den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (va + vb + SSIM_C2);
    Ok(num / den)
}

/// `‖Y − Ŷ‖ / ‖Y‖` per coil, over all frames. Inputs are `C × T × N × N`.
pub fn nrmse_kspace(pred: &ComplexArray, meas: &ComplexArray) -> Result<Vec<f64>> {
    if pred.shape() != meas.shape() || meas.ndim() < 2 {
        return Err(Error::shape("nrmse_kspace", meas.shape(), pred.shape()));
    }
    let coils = meas.shape()[0];
    let per = meas.len() / coils.max(1);
    (0..coils)
        .map(|c| {
            let (p, m) = (&pred.data()[c * per..(c + 1) * per], &meas.data()[c * per..(c + 1) * per]);
            let den: f64 = m.iter().map(C64::norm_sqr).sum();
            if den == 0.0 {
                return Err(Error::invalid(format!("reference coil {c} has zero norm")));
            }
            let num: f64 = p.iter().zip(m).map(|(a, b)| (b - a).norm_sqr()).sum();
            Ok((num / den).sqrt())
        })
        .collect()
}

/// Cartesian spectra `fft2(S_c d_t)` laid out `C × T × N × N`.
pub fn coil_spectra(d: &DynamicImage, coils: &CoilMaps) -> Result<ComplexArray> {
    if coils.n() != d.n() {
        return Err(Error::shape("coil_spectra", &[d.n()], &[coils.n()]));
    }
    let (n, frames, p) = (d.n(), d.frames(), d.pixels());
    let mut out = Vec::with_capacity(coils.coils() * frames * p);
    for c in 0..coils.coils() {
        let map = coils.map(c);
        for t in 0..frames {
            let img: Vec<C64> = d.frame(t).iter().zip(map).map(|(a, s)| a * s).collect();
            let spec = fft2(&ComplexArray::new(vec![n, n], img)?, Direction::Forward)?;
            out.extend_from_slice(spec.data());
        }
    }
    ComplexArray::new(vec![coils.coils(), frames, n, n], out)
}

/// Row-major `N × N` region of interest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiMask {
    pub n: usize,
    pub mask: Vec<bool>,
}

impl RoiMask {
    pub fn new(n: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != n * n {
            return Err(Error::shape("RoiMask", &[n, n], &[mask.len()]));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::invalid("ROI mask is empty"));
        }
        Ok(Self { n, mask })
    }

    /// Pixels whose centre lies inside the disc.
    pub fn disc(n: usize, center: [f64; 2], radius: f64) -> Result<Self> {
        let mask = (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as f64 + 0.5, (i / n) as f64 + 0.5);
                (x - center[0]).powi(2) + (y - center[1]).powi(2) <= radius * radius
            })
            .collect();
        Self::new(n, mask)
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiCurve {
    pub mask: RoiMask,
    pub values: Vec<f64>,
}

/// Mean magnitude inside `mask` for every frame.
pub fn roi_curve(d: &DynamicImage, mask: &RoiMask) -> Result<RoiCurve> {
    if mask.n != d.n() {
        return Err(Error::shape("roi_curve", &[d.n()], &[mask.n]));
    }
    let count = mask.count();
    if count == 0 {
        return Err(Error::invalid("ROI mask is empty"));
    }
    let values = (0..d.frames())
        .map(|t| {
            d.frame(t)
                .iter()
                .zip(&mask.mask)
                .filter(|(_, &m)| m)
                .map(|(z, _)| z.norm())
                .sum::<f64>()
                / count as f64
        })
        .collect();
    Ok(RoiCurve {
        mask: mask.clone(),
        values,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub psnr: Vec<f64>,
    pub ssim: Vec<f64>,
    pub nrmse: Vec<f64>,
}

impl MetricsReport {
    pub fn mean_psnr(&self) -> f64 {
        mean_std(&self.psnr).0
    }

    pub fn mean_ssim(&self) -> f64 {
        mean_std(&self.ssim).0
    }

    /// Rows `frame,<t>,psnr,ssim`, then `coil,<c>,nrmse,`, then one
    /// aggregate row per metric with mean and std across frames or coils.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "kind,index,a,b")?;
        for (t, (p, s)) in self.psnr.iter().zip(&self.ssim).enumerate() {
            writeln!(w, "frame,{t},{p:e},{s:e}")?;
        }
        for (c, e) in self.nrmse.iter().enumerate() {
            writeln!(w, "coil,{c},{e:e},")?;
        }
        for (name, vals) in [("psnr", &self.psnr), ("ssim", &self.ssim), ("nrmse", &self.nrmse)] {
            if !vals.is_empty() {
                let (m, s) = mean_std(vals);
                writeln!(w, "mean_std_{name},{},{m:e},{s:e}", vals.len())?;
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// PSNR/SSIM per frame after normalizing each sequence by its own global
/// range, plus per-coil NRMSE on Cartesian spectra when coils are given.
pub fn evaluate(recon: &DynamicImage, truth: &DynamicImage, coils: Option<&CoilMaps>) -> Result<MetricsReport> {
    if recon.n() != truth.n() || recon.frames() != truth.frames() {
        return Err(Error::shape(
            "evaluate",
            &[truth.frames(), truth.n(), truth.n()],
            &[recon.frames(), recon.n(), recon.n()],
        ));
    }
    let y = normalize_sequence(truth)?;
    let y_hat = normalize_sequence(recon)?;
    let mut report = MetricsReport::default();
    for t in 0..truth.frames() {
        report.psnr.push(psnr(y.frame(t), y_hat.frame(t))?);
        report.ssim.push(ssim(y.frame(t), y_hat.frame(t))?);
    }
    if let Some(coils) = coils {
        report.nrmse = nrmse_kspace(&coil_spectra(recon, coils)?, &coil_spectra(truth, coils)?)?;
    }
    Ok(report)
}
