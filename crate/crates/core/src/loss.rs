//! Training objective: relative-L2 data consistency in k-space, temporal
//! total variation and the nuclear norm of the Casorati matrix.
//!
//! The DC term sees k-space multiplied by a fixed gain taken from the
//! measurements (RMS brought to [`KSPACE_RMS`]). Scaling the data and the
//! image together then leaves the DC value unchanged.
//!
//! Every gradient returned here is the real gradient of a real-valued loss
//! packed as a complex number, `∂L/∂Re z + i·∂L/∂Im z`. For a loss of a
//! linear map `A x` this makes the chain rule `Aᴴ g`.

use crate::error::{Error, Result};
use crate::image::DynamicImage;
use crate::inr::{make_coordinates, model_backward, model_forward, CoordinateBatch, ModelConfig, ModelParams};
use crate::numerics::{svd_columns, ComplexArray, C64};
use crate::nufft::{MulticoilOperator, NufftOptions};
use crate::optim::{LossRecord, ReconConfig};
use crate::phantom::KSpaceDataset;

/// Moduli below this count as zero temporal differences.
pub const TV_ZERO: f64 = 1e-12;

/// RMS magnitude the measured k-space is rescaled to before the relative
/// L2 term is evaluated, so `eps_dc` does not depend on the data units.
pub const KSPACE_RMS: f64 = 1e-2;

/// Gain that brings the RMS sample magnitude of `meas` to [`KSPACE_RMS`];
/// one for all-zero data.
pub fn kspace_gain(meas: &[C64]) -> f64 {
    if meas.is_empty() {
        return 1.0;
    }
    let rms = (meas.iter().map(|z| z.norm_sqr()).sum::<f64>() / meas.len() as f64).sqrt();
    if rms > 0.0 && rms.is_finite() {
        KSPACE_RMS / rms
    } else {
        1.0
    }
}

/// `Σ |Ŷ − Y|² / (|Ŷ|² + ε)` and its gradient with respect to `Ŷ`.
pub fn dc_loss(pred: &[C64], meas: &[C64], eps: f64) -> Result<(f64, Vec<C64>)> {
    if pred.len() != meas.len() {
        return Err(Error::shape("dc_loss", &[meas.len()], &[pred.len()]));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid("dc epsilon must be > 0"));
    }
    let mut value = 0.0;
    let grad = pred
        .iter()
        .zip(meas)
        .map(|(&p, &y)| {
            let r = p - y;
            let denom = p.norm_sqr() + eps;
            let num = r.norm_sqr();
            value += num / denom;
            (r / denom - p * (num / (denom * denom))) * 2.0
        })
        .collect();
    Ok((value, grad))
}

/// `Σ_pixels Σ_t |d(t+1) − d(t)|` with subgradient `z/|z|` (zero at zero).
pub fn tv_loss(d: &DynamicImage) -> (f64, DynamicImage) {
    let (p, frames) = (d.pixels(), d.frames());
    let mut grad = DynamicImage::zeros(d.n(), frames);
    let mut value = 0.0;
    for t in 0..frames.saturating_sub(1) {
        let (a, b) = (d.frame(t), d.frame(t + 1));
        for px in 0..p {
            let diff = b[px] - a[px];
            let m = diff.norm();
            value += m;
            if m > TV_ZERO {
                let s = diff / m;
                grad.data_mut()[(t + 1) * p + px] += s;
                grad.data_mut()[t * p + px] -= s;
            }
        }
    }
    (value, grad)
}

/// Nuclear norm of the `(N·N) × T` Casorati matrix and the subgradient
/// `U Vᴴ`. Columns with numerically zero singular values are left out.
pub fn nuclear_loss(d: &DynamicImage) -> Result<(f64, DynamicImage)> {
    let p = d.pixels();
    let frames = d.frames();
    let columns: Vec<Vec<C64>> = (0..frames).map(|t| d.frame(t).to_vec()).collect();
    let (svd, transposed) = if p >= frames {
        (svd_columns(columns)?, false)
    } else {
        // wide Casorati: factor the conjugate transpose instead
        let rows: Vec<Vec<C64>> = (0..p)
            .map(|px| (0..frames).map(|t| d.frame(t)[px].conj()).collect())
            .collect();
        (svd_columns(rows)?, true)
    };
    let value: f64 = svd.s.iter().sum();
    let s_max = svd.s.first().copied().unwrap_or(0.0);
    let cutoff = s_max * f64::EPSILON * (p.max(frames) as f64);
    let mut grad = DynamicImage::zeros(d.n(), frames);
    for (k, &s) in svd.s.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        // Casorati entry (px, t) of U Vᴴ; for the transposed factorization
        // the roles of U and V swap and everything is conjugated.
        let (left, right) = (&svd.u[k], &svd.v[k]);
        for t in 0..frames {
            let out = grad.frame_mut(t);
            for (px, o) in out.iter_mut().enumerate() {
                *o += if transposed {
                    (left[t] * right[px].conj()).conj()
                } else {
                    left[px] * right[t].conj()
                };
            }
        }
    }
    Ok((value, grad))
}

/// Precomputed pieces of the objective for one dataset: the multicoil
/// operator, the measured samples (already multiplied by the k-space gain)
/// and the training coordinate grid.
pub struct ReconProblem {
    operator: MulticoilOperator,
    measured: ComplexArray,
    coords: CoordinateBatch,
    gain: f64,
}

/// One evaluation of the objective.
pub struct Evaluation {
    pub record: LossRecord,
    pub grads: ModelParams,
    pub image: DynamicImage,
}

impl ReconProblem {
    pub fn new(dataset: &KSpaceDataset, options: NufftOptions) -> Result<Self> {
        let operator = dataset.operator(options)?;
        let coords = make_coordinates(dataset.n(), dataset.frames(), 1)?;
        let gain = kspace_gain(dataset.samples.data());
        let mut measured = dataset.samples.clone();
        measured.data_mut().iter_mut().for_each(|z| *z *= gain);
        Ok(Self {
            operator,
            measured,
            coords,
            gain,
        })
    }

    /// Factor applied to both measured and predicted k-space in the DC term.
    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn operator(&self) -> &MulticoilOperator {
        &self.operator
    }

    pub fn coordinates(&self) -> &CoordinateBatch {
        &self.coords
    }

    /// Measured samples in rescaled units.
    pub fn measured(&self) -> &ComplexArray {
        &self.measured
    }

    /// Loss terms of an explicit image `d`, with the gradient with respect
    /// to `d`.
    pub fn image_loss(&self, d: &DynamicImage, config: &ReconConfig) -> Result<(LossRecord, DynamicImage)> {
        let mut pred = self.operator.forward(d)?;
        pred.data_mut().iter_mut().for_each(|z| *z *= self.gain);
        let (dc, mut dc_grad) = dc_loss(pred.data(), self.measured.data(), config.eps_dc)?;
        dc_grad.iter_mut().for_each(|g| *g *= self.gain);
        let (tv, tv_grad) = tv_loss(d);
        let (lr_term, nuc_grad) = nuclear_loss(d)?;
        let dc_grad = ComplexArray::new(pred.shape().to_vec(), dc_grad)?;
        let mut grad = self.operator.adjoint(&dc_grad, None)?;
        for ((g, t), n) in grad
            .data_mut()
            .iter_mut()
            .zip(tv_grad.data())
            .zip(nuc_grad.data())
        {
            *g += t * config.lambda_s + n * config.lambda_l;
        }
        let record = LossRecord {
            epoch: 0,
            dc,
            tv,
            lr_term,
            total: dc + config.lambda_s * tv + config.lambda_l * lr_term,
        };
        Ok((record, grad))
    }

    /// Full objective at `params` with gradients for every parameter.
    pub fn evaluate(
        &self,
        params: &ModelParams,
        model: &ModelConfig,
        config: &ReconConfig,
    ) -> Result<Evaluation> {
        let (values, cache) = model_forward(&self.coords, params, model)?;
        let image = DynamicImage::new(self.coords.n, self.coords.frames, values)?;
        let (record, grad) = self.image_loss(&image, config)?;
        let grads = model_backward(&cache, grad.data())?;
        Ok(Evaluation {
            record,
            grads,
            image,
        })
    }
}

/// Convenience wrapper that builds a [`ReconProblem`] and evaluates it once.
pub fn total_loss(
    params: &ModelParams,
    dataset: &KSpaceDataset,
    config: &ReconConfig,
    model: &ModelConfig,
    options: NufftOptions,
) -> Result<(f64, ModelParams, LossRecord)> {
    let problem = ReconProblem::new(dataset, options)?;
    let eval = problem.evaluate(params, model, config)?;
    Ok((eval.record.total, eval.grads, eval.record))
}
