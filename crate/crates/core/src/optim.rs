//! Adam and the full-batch training loop.

use std::io::Write;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::DynamicImage;
use crate::inr::{init_params, ModelConfig, ModelParams};
use crate::loss::ReconProblem;
use crate::nufft::NufftOptions;
use crate::phantom::KSpaceDataset;

/// Optimisation settings. `lambda_s` and `lambda_l` have no defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconConfig {
    pub lambda_s: f64,
    pub lambda_l: f64,
    #[serde(default = "default_eps_dc")]
    pub eps_dc: f64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps_adam")]
    pub eps_adam: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Set from the experiment seed, not read from config files.
    #[serde(skip_deserializing)]
    pub seed: u64,
    #[serde(skip_deserializing, default = "default_true")]
    pub deterministic: bool,
}

fn default_eps_dc() -> f64 {
    1e-4
}
fn default_lr() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps_adam() -> f64 {
    1e-8
}
fn default_epochs() -> usize {
    500
}
fn default_true() -> bool {
    true
}

impl ReconConfig {
    /// Defaults for everything except the two regularisation weights.
    pub fn new(lambda_s: f64, lambda_l: f64) -> Self {
        Self {
            lambda_s,
            lambda_l,
            eps_dc: default_eps_dc(),
            lr: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps_adam: default_eps_adam(),
            epochs: default_epochs(),
            seed: 0,
            deterministic: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.lambda_s >= 0.0 && self.lambda_s.is_finite(), "lambda_s must be >= 0"),
            (self.lambda_l >= 0.0 && self.lambda_l.is_finite(), "lambda_l must be >= 0"),
            (self.eps_dc > 0.0, "eps_dc must be > 0"),
            (self.lr > 0.0, "lr must be > 0"),
            ((0.0..1.0).contains(&self.beta1), "beta1 must be in [0, 1)"),
            ((0.0..1.0).contains(&self.beta2), "beta2 must be in [0, 1)"),
            (self.eps_adam > 0.0, "eps_adam must be > 0"),
            (self.epochs >= 1, "epochs must be >= 1"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::invalid(*msg)),
            None => Ok(()),
        }
    }
}

/// Adam moments, one entry per real parameter in checkpoint order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let n = params.num_params();
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update over every tensor of `params`.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    config: &ReconConfig,
) -> Result<()> {
    let shapes = params.tensor_lengths();
    if grads.tensor_lengths() != shapes {
        return Err(Error::shape("adam_step grads", &shapes, &grads.tensor_lengths()));
    }
    let total: usize = shapes.iter().sum();
    if state.m.len() != total || state.v.len() != total {
        return Err(Error::shape("adam_step state", &[total], &[state.m.len()]));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let mut offset = 0;
    for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
        let m = &mut state.m[offset..offset + p.len()];
        let v = &mut state.v[offset..offset + p.len()];
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let mhat = m[i] / c1;
            let vhat = v[i] / c2;
            p[i] -= config.lr * mhat / (vhat.sqrt() + config.eps_adam);
        }
        offset += p.len();
    }
    Ok(())
}

/// Loss terms at the start of one epoch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub dc: f64,
    pub tv: f64,
    pub lr_term: f64,
    pub total: f64,
}

impl LossRecord {
    fn is_finite(&self) -> bool {
        [self.dc, self.tv, self.lr_term, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub lambda_s: f64,
    pub lambda_l: f64,
    pub records: Vec<LossRecord>,
}

impl LossReport {
    pub fn first(&self) -> Option<&LossRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&LossRecord> {
        self.records.last()
    }

    /// CSV with header `epoch,dc,tv,lr_term,total`; floats use the shortest
    /// round-trip representation.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,dc,tv,lr_term,total")?;
        for r in &self.records {
            writeln!(w, "{},{:e},{:e},{:e},{:e}", r.epoch, r.dc, r.tv, r.lr_term, r.total)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct Trained {
    pub params: ModelParams,
    pub report: LossReport,
    /// Network output on the training grid after the last update.
    pub image: DynamicImage,
}

/// Full-batch training from `init_params(config.seed)`.
pub fn train(
    dataset: &KSpaceDataset,
    config: &ReconConfig,
    model: &ModelConfig,
    options: NufftOptions,
) -> Result<Trained> {
    config.validate()?;
    model.validate()?;
    let problem = ReconProblem::new(dataset, options)?;
    let params = init_params(model, config.seed)?;
    train_from(&problem, params, config, model)
}

/// Runs `config.epochs` Adam steps on `problem` starting from `params`.
/// Each epoch records the loss at the current parameters, then updates.
pub fn train_from(
    problem: &ReconProblem,
    mut params: ModelParams,
    config: &ReconConfig,
    model: &ModelConfig,
) -> Result<Trained> {
    config.validate()?;
    params.check_shapes(model)?;
    let mut state = AdamState::new(&params);
    let mut report = LossReport {
        lambda_s: config.lambda_s,
        lambda_l: config.lambda_l,
        records: Vec::with_capacity(config.epochs),
    };
    for epoch in 1..=config.epochs {
        let eval = problem.evaluate(&params, model, config)?;
        let record = LossRecord { epoch, ..eval.record };
        if !record.is_finite() || !eval.grads.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                last_finite: report.last().copied(),
            });
        }
        if epoch == 1 || epoch % 50 == 0 || epoch == config.epochs {
            info!(
                "epoch {epoch}: total {:.6e} dc {:.6e} tv {:.6e} lr {:.6e}",
                record.total, record.dc, record.tv, record.lr_term
            );
        } else {
            debug!("epoch {epoch}: total {:.6e}", record.total);
        }
        report.records.push(record);
        adam_step(&mut params, &eval.grads, &mut state, config)?;
    }
    if !params.is_finite() {
        return Err(Error::NonFinite {
            epoch: config.epochs,
            last_finite: report.last().copied(),
        });
    }
    let values = crate::inr::model_values(problem.coordinates(), &params, model)?;
    let coords = problem.coordinates();
    let image = DynamicImage::new(coords.n, coords.frames, values)?;
    Ok(Trained {
        params,
        report,
        image,
    })
}
