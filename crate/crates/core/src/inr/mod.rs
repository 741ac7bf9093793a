//! Coordinate network `f_θ(x, y, t) = MLP(φ(x, y, t))` with a multiresolution
//! hash encoding `φ` and hand-written reverse-mode gradients.

mod encoding;
mod mlp;
mod model;

pub use encoding::{
    encode, hash_index, level_corners, make_coordinates, CoordinateBatch, LevelCorners,
    HASH_PRIMES,
};
pub use mlp::Layer;
pub use model::{model_backward, model_forward, model_values, ForwardCache, CHUNK_SIZE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::seeded_rng;

/// Hash-grid hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HashEncoderConfig {
    pub levels: usize,
    pub log2_table_size: u32,
    pub features_per_level: usize,
    pub base_resolution: usize,
    pub growth_factor: f64,
}

/// Four levels, resolutions 4 to 12. Levels finer than the frame count have
/// temporal lattice vertices that no frame ever touches, which spoils queries
/// between frames.
impl Default for HashEncoderConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            log2_table_size: 17,
            features_per_level: 2,
            base_resolution: 4,
            growth_factor: 1.45,
        }
    }
}

impl HashEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.features_per_level == 0 {
            return Err(Error::invalid("encoder needs levels >= 1 and features_per_level >= 1"));
        }
        if self.base_resolution < 2 {
            return Err(Error::invalid("encoder base_resolution must be >= 2"));
        }
        if !(self.growth_factor > 1.0) {
            return Err(Error::invalid("encoder growth_factor must be > 1"));
        }
        if self.log2_table_size == 0 || self.log2_table_size > 30 {
            return Err(Error::invalid("encoder log2_table_size must be in 1..=30"));
        }
        Ok(())
    }

    pub fn table_size(&self) -> usize {
        1 << self.log2_table_size
    }

    /// Lattice resolution `⌊N_min · b^ℓ⌋` of level `ℓ`.
    pub fn resolution(&self, level: usize) -> usize {
        (self.base_resolution as f64 * self.growth_factor.powi(level as i32)).floor() as usize
    }

    /// True when all `(r+1)³` vertices of the level fit the table.
    pub fn is_dense(&self, level: usize) -> bool {
        let v = (self.resolution(level) + 1) as u128;
        v * v * v <= self.table_size() as u128
    }

    pub fn output_dim(&self) -> usize {
        self.levels * self.features_per_level
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden_layers: usize,
    pub hidden_width: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 5,
            hidden_width: 64,
        }
    }
}

/// Real and imaginary output channels.
pub const OUTPUT_CHANNELS: usize = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub encoder: HashEncoderConfig,
    #[serde(default)]
    pub mlp: MlpConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.mlp.hidden_width == 0 {
            return Err(Error::invalid("mlp hidden_width must be >= 1"));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every dense layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.mlp.hidden_layers + 1);
        let mut fan_in = self.encoder.output_dim();
        for _ in 0..self.mlp.hidden_layers {
            shapes.push((fan_in, self.mlp.hidden_width));
            fan_in = self.mlp.hidden_width;
        }
        shapes.push((fan_in, OUTPUT_CHANNELS));
        shapes
    }
}

/// Learnable parameters θ: one feature table per level plus the MLP.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// `levels` tables of `table_size × F` values, row = table index.
    pub grids: Vec<Vec<f64>>,
    pub layers: Vec<Layer>,
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        let rows = config.encoder.table_size() * config.encoder.features_per_level;
        Self {
            grids: vec![vec![0.0; rows]; config.encoder.levels],
            layers: config
                .layer_shapes()
                .into_iter()
                .map(|(i, o)| Layer::zeros(i, o))
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            grids: self.grids.iter().map(|g| vec![0.0; g.len()]).collect(),
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    /// Tensors in checkpoint order: grids level-ascending, then per layer
    /// weights before biases.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self.grids.iter().map(Vec::as_slice).collect();
        for l in &self.layers {
            out.push(&l.weights);
            out.push(&l.biases);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self.grids.iter_mut().map(Vec::as_mut_slice).collect();
        for l in &mut self.layers {
            out.push(&mut l.weights);
            out.push(&mut l.biases);
        }
        out
    }

    pub fn tensor_lengths(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }

    pub fn num_params(&self) -> usize {
        self.tensor_lengths().iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Checks that the parameter shapes agree with `config`.
    pub fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        let expected = ModelParams::zeros_shapes(config);
        let actual = self.tensor_lengths();
        if expected != actual {
            return Err(Error::shape("ModelParams", &expected, &actual));
        }
        Ok(())
    }

    fn zeros_shapes(config: &ModelConfig) -> Vec<usize> {
        let rows = config.encoder.table_size() * config.encoder.features_per_level;
        let mut out = vec![rows; config.encoder.levels];
        for (i, o) in config.layer_shapes() {
            out.push(i * o);
            out.push(o);
        }
        out
    }
}

/// Grid features uniform in `±1e-4`, weights uniform in `±√(6/fan_in)`,
/// zero biases.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    let mut rng = seeded_rng(seed);
    let mut params = ModelParams::zeros(config);
    for grid in &mut params.grids {
        grid.iter_mut()
            .for_each(|v| *v = rng.uniform_in(-GRID_INIT_SCALE, GRID_INIT_SCALE));
    }
    for layer in &mut params.layers {
        let bound = (6.0 / layer.inputs as f64).sqrt();
        layer
            .weights
            .iter_mut()
            .for_each(|w| *w = rng.uniform_in(-bound, bound));
    }
    Ok(params)
}

pub const GRID_INIT_SCALE: f64 = 1e-4;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_resolutions_are_geometric() {
        let c = HashEncoderConfig::default();
        let res: Vec<usize> = (0..c.levels).map(|l| c.resolution(l)).collect();
        assert_eq!(res[0], 4);
        assert!(res.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(res, [4, 5, 8, 12]);
        assert!((0..c.levels).all(|l| c.is_dense(l)));
    }

    #[test]
    fn layer_shapes_follow_config() {
        let shapes = ModelConfig::default().layer_shapes();
        assert_eq!(shapes.len(), 6);
        assert_eq!(shapes[0], (8, 64));
        assert_eq!(shapes[5], (64, 2));
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let config = ModelConfig {
            encoder: HashEncoderConfig {
                log2_table_size: 10,
                ..Default::default()
            },
            mlp: MlpConfig::default(),
        };
        let a = init_params(&config, 5).unwrap();
        let b = init_params(&config, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.grids.iter().flatten().all(|v| v.abs() <= 1e-4));
        for l in &a.layers {
            let bound = (6.0 / l.inputs as f64).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= bound));
            assert!(l.biases.iter().all(|&b| b == 0.0));
        }
        let hidden = &a.layers[1];
        assert_eq!(hidden.inputs, 64);
        assert!(hidden.weights.iter().all(|w| w.abs() <= 0.3062));
        assert_ne!(a, init_params(&config, 6).unwrap());
    }

    #[test]
    fn rejects_bad_encoder() {
        let bad = HashEncoderConfig {
            growth_factor: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = HashEncoderConfig {
            base_resolution: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
