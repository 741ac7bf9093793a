use rayon::prelude::*;

use super::encoding::{check_coordinate, check_grids, encode_one, level_corners};
use super::mlp::{backward_rows, relu_backward, relu_in_place, Layer};
use super::{CoordinateBatch, HashEncoderConfig, ModelConfig, ModelParams, OUTPUT_CHANNELS};
use crate::error::{Error, Result};
use crate::numerics::C64;

/// Rows per work unit. Fixed, so reductions happen in the same order for any
/// thread count.
pub const CHUNK_SIZE: usize = 1024;

struct ChunkCache {
    features: Vec<f64>,
    /// Pre-activations of each hidden layer, `rows × width`.
    pre_activations: Vec<Vec<f64>>,
}

/// Activations retained by [`model_forward`] for [`model_backward`].
pub struct ForwardCache {
    coords: Vec<[f64; 3]>,
    encoder: HashEncoderConfig,
    table_rows: usize,
    layers: Vec<Layer>,
    chunks: Vec<ChunkCache>,
}

impl ForwardCache {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

fn check_model(params: &ModelParams, config: &ModelConfig) -> Result<()> {
    config.validate()?;
    check_grids(&config.encoder, &params.grids)?;
    params.check_shapes(config)
}

fn forward_chunk(
    coords: &[[f64; 3]],
    params: &ModelParams,
    config: &ModelConfig,
    out: &mut [C64],
    keep: bool,
) -> Option<ChunkCache> {
    let rows = coords.len();
    let dim = config.encoder.output_dim();
    let mut features = vec![0.0; rows * dim];
    for (coord, row) in coords.iter().zip(features.chunks_exact_mut(dim)) {
        encode_one(&config.encoder, &params.grids, coord, row);
    }
    let hidden = params.layers.len() - 1;
    let mut pre_activations = Vec::with_capacity(if keep { hidden } else { 0 });
    let mut act = features.clone();
    for layer in &params.layers[..hidden] {
        let mut z = vec![0.0; rows * layer.outputs];
        layer.forward_rows(&act, &mut z);
        act.resize(rows * layer.outputs, 0.0);
        relu_in_place(&z, &mut act);
        if keep {
            pre_activations.push(z);
        }
    }
    let last = &params.layers[hidden];
    let mut y = vec![0.0; rows * OUTPUT_CHANNELS];
    last.forward_rows(&act, &mut y);
    for (o, pair) in out.iter_mut().zip(y.chunks_exact(OUTPUT_CHANNELS)) {
        *o = C64::new(pair[0], pair[1]);
    }
    keep.then_some(ChunkCache {
        features,
        pre_activations,
    })
}

/// Evaluates `f_θ` at every coordinate; `value = out₀ + i·out₁`.
pub fn model_forward(
    batch: &CoordinateBatch,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<(Vec<C64>, ForwardCache)> {
    let (values, chunks) = run_forward(batch, params, config, true)?;
    Ok((
        values,
        ForwardCache {
            coords: batch.coords.clone(),
            encoder: config.encoder,
            table_rows: config.encoder.table_size() * config.encoder.features_per_level,
            layers: params.layers.clone(),
            chunks,
        },
    ))
}

/// Forward pass without keeping activations.
pub fn model_values(
    batch: &CoordinateBatch,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<Vec<C64>> {
    Ok(run_forward(batch, params, config, false)?.0)
}

fn run_forward(
    batch: &CoordinateBatch,
    params: &ModelParams,
    config: &ModelConfig,
    keep: bool,
) -> Result<(Vec<C64>, Vec<ChunkCache>)> {
    check_model(params, config)?;
    batch.coords.iter().try_for_each(check_coordinate)?;
    let mut values = vec![C64::new(0.0, 0.0); batch.len()];
    let chunks: Vec<Option<ChunkCache>> = batch
        .coords
        .par_chunks(CHUNK_SIZE)
        .zip(values.par_chunks_mut(CHUNK_SIZE))
        .map(|(coords, out)| forward_chunk(coords, params, config, out, keep))
        .collect();
    Ok((values, chunks.into_iter().flatten().collect()))
}

/// Reverse-mode gradients of a real loss with respect to every parameter.
///
/// `upstream[i]` is `∂L/∂Re(v_i) + i·∂L/∂Im(v_i)` for output `v_i`.
pub fn model_backward(cache: &ForwardCache, upstream: &[C64]) -> Result<ModelParams> {
    if upstream.len() != cache.len() {
        return Err(Error::StaleCache(format!(
            "{} upstream gradients for {} cached coordinates",
            upstream.len(),
            cache.len()
        )));
    }
    let expected_chunks = cache.len().div_ceil(CHUNK_SIZE);
    if cache.chunks.len() != expected_chunks {
        return Err(Error::StaleCache("cache holds no activations".into()));
    }
    let transposed: Vec<Vec<f64>> = cache.layers.iter().map(Layer::transposed).collect();
    let dim = cache.encoder.output_dim();

    struct ChunkGrad {
        layers: Vec<Layer>,
        dfeatures: Vec<f64>,
    }

    let partials: Vec<ChunkGrad> = cache
        .chunks
        .par_iter()
        .zip(upstream.par_chunks(CHUNK_SIZE))
        .map(|(chunk, up)| {
            let rows = up.len();
            let mut layers: Vec<Layer> = cache
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect();
            let hidden = cache.layers.len() - 1;
            let mut dz: Vec<f64> = up.iter().flat_map(|g| [g.re, g.im]).collect();
            for l in (0..=hidden).rev() {
                let layer = &cache.layers[l];
                let input: Vec<f64> = if l == 0 {
                    chunk.features.clone()
                } else {
                    let mut a = vec![0.0; rows * layer.inputs];
                    relu_in_place(&chunk.pre_activations[l - 1], &mut a);
                    a
                };
                let mut da = vec![0.0; rows * layer.inputs];
                backward_rows(
                    &transposed[l],
                    layer.inputs,
                    layer.outputs,
                    &input,
                    &dz,
                    &mut layers[l],
                    Some(&mut da),
                );
                if l > 0 {
                    relu_backward(&chunk.pre_activations[l - 1], &mut da);
                }
                dz = da;
            }
            ChunkGrad {
                layers,
                dfeatures: dz,
            }
        })
        .collect();

    let mut grads_layers: Vec<Layer> = cache
        .layers
        .iter()
        .map(|l| Layer::zeros(l.inputs, l.outputs))
        .collect();
    for part in &partials {
        for (acc, p) in grads_layers.iter_mut().zip(&part.layers) {
            acc.weights.iter_mut().zip(&p.weights).for_each(|(a, b)| *a += b);
            acc.biases.iter_mut().zip(&p.biases).for_each(|(a, b)| *a += b);
        }
    }

    // Each level owns its table, so levels scatter independently; within a
    // level coordinates are visited in batch order.
    let f = cache.encoder.features_per_level;
    let grids: Vec<Vec<f64>> = (0..cache.encoder.levels)
        .into_par_iter()
        .map(|level| {
            let mut table = vec![0.0; cache.table_rows];
            for (chunk_idx, part) in partials.iter().enumerate() {
                let coords = &cache.coords[chunk_idx * CHUNK_SIZE..];
                for (coord, dfeat) in coords.iter().zip(part.dfeatures.chunks_exact(dim)) {
                    let g = &dfeat[level * f..(level + 1) * f];
                    if g.iter().all(|&v| v == 0.0) {
                        continue;
                    }
                    let corners = level_corners(&cache.encoder, level, coord);
                    for c in 0..8 {
                        let w = corners.weight[c];
                        let row = &mut table[corners.index[c] * f..(corners.index[c] + 1) * f];
                        for (t, gv) in row.iter_mut().zip(g) {
                            *t += w * gv;
                        }
                    }
                }
            }
            table
        })
        .collect();

    Ok(ModelParams {
        grids,
        layers: grads_layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inr::{init_params, make_coordinates, MlpConfig};
    use crate::numerics::seeded_rng;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            encoder: HashEncoderConfig {
                levels: 3,
                log2_table_size: 8,
                features_per_level: 2,
                base_resolution: 2,
                growth_factor: 2.5,
            },
            mlp: MlpConfig {
                hidden_layers: 2,
                hidden_width: 8,
            },
        }
    }

    /// Straight-line re-implementation: per coordinate, trilinear blend then
    /// dense layers, no chunking or cache.
    fn reference_value(params: &ModelParams, config: &ModelConfig, coord: [f64; 3]) -> C64 {
        let enc = &config.encoder;
        let mut act = Vec::new();
        for level in 0..enc.levels {
            let res = enc.resolution(level) as f64;
            let p: Vec<f64> = coord.iter().map(|c| c * res).collect();
            let base: Vec<f64> = p.iter().map(|v| v.floor().min(res - 1.0)).collect();
            for feat in 0..enc.features_per_level {
                let mut acc = 0.0;
                for dz in 0..2u32 {
                    for dy in 0..2u32 {
                        for dx in 0..2u32 {
                            let v = [
                                base[0] as u32 + dx,
                                base[1] as u32 + dy,
                                base[2] as u32 + dz,
                            ];
                            let mut w = 1.0;
                            for (a, d) in [dx, dy, dz].iter().enumerate() {
                                let fr = p[a] - base[a];
                                w *= if *d == 1 { fr } else { 1.0 - fr };
                            }
                            let idx = crate::inr::hash_index(enc, level, v);
                            acc += w * params.grids[level][idx * enc.features_per_level + feat];
                        }
                    }
                }
                act.push(acc);
            }
        }
        let last = params.layers.len() - 1;
        for (l, layer) in params.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.outputs);
            for j in 0..layer.outputs {
                let mut z = layer.biases[j];
                for (i, a) in act.iter().enumerate() {
                    z += a * layer.weight(i, j);
                }
                next.push(if l < last { z.max(0.0) } else { z });
            }
            act = next;
        }
        C64::new(act[0], act[1])
    }

    #[test]
    fn zero_network_outputs_zero() {
        let config = tiny_config();
        let params = ModelParams::zeros(&config);
        let batch = make_coordinates(4, 3, 1).unwrap();
        let (values, _) = model_forward(&batch, &params, &config).unwrap();
        assert!(values.iter().all(|v| *v == C64::new(0.0, 0.0)));
    }

    #[test]
    fn matches_straight_line_reference() {
        let config = tiny_config();
        let mut params = init_params(&config, 3).unwrap();
        let mut rng = seeded_rng(9);
        for g in &mut params.grids {
            g.iter_mut().for_each(|v| *v = rng.uniform_in(-1.0, 1.0));
        }
        for l in &mut params.layers {
            l.biases.iter_mut().for_each(|b| *b = rng.uniform_in(-0.5, 0.5));
        }
        let coords: Vec<[f64; 3]> = (0..64)
            .map(|_| [rng.uniform(), rng.uniform(), rng.uniform()])
            .collect();
        let batch = CoordinateBatch {
            coords: coords.clone(),
            n: 8,
            frames: 1,
            upsample: 1,
        };
        let (values, _) = model_forward(&batch, &params, &config).unwrap();
        for (v, c) in values.iter().zip(&coords) {
            let r = reference_value(&params, &config, *c);
            assert!((v - r).norm() <= 1e-12 * r.norm().max(1.0));
        }
    }

    #[test]
    fn single_linear_layer_is_affine_in_features() {
        let config = ModelConfig {
            encoder: HashEncoderConfig {
                levels: 1,
                log2_table_size: 8,
                features_per_level: 2,
                base_resolution: 2,
                growth_factor: 2.0,
            },
            mlp: MlpConfig {
                hidden_layers: 0,
                hidden_width: 1,
            },
        };
        let mut params = ModelParams::zeros(&config);
        params.grids[0].iter_mut().enumerate().for_each(|(i, v)| *v = i as f64 * 0.01);
        params.layers[0].weights = vec![2.0, 0.0, 0.0, -1.0];
        params.layers[0].biases = vec![0.5, 0.25];
        // vertex (1, 0, 0) of the resolution-2 lattice
        let batch = CoordinateBatch {
            coords: vec![[0.5, 0.0, 0.0]],
            n: 1,
            frames: 1,
            upsample: 1,
        };
        let (values, _) = model_forward(&batch, &params, &config).unwrap();
        let f0 = params.grids[0][2];
        let f1 = params.grids[0][3];
        assert_eq!(values[0], C64::new(2.0 * f0 + 0.5, -f1 + 0.25));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let config = tiny_config();
        let params = init_params(&config, 1).unwrap();
        let batch = make_coordinates(4, 2, 1).unwrap();
        let (_, cache) = model_forward(&batch, &params, &config).unwrap();
        let grads = model_backward(&cache, &vec![C64::new(0.0, 0.0); batch.len()]).unwrap();
        assert!(grads.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn vertex_query_touches_one_grid_row() {
        let config = ModelConfig {
            encoder: HashEncoderConfig {
                levels: 1,
                log2_table_size: 8,
                features_per_level: 2,
                base_resolution: 4,
                growth_factor: 2.0,
            },
            mlp: MlpConfig {
                hidden_layers: 0,
                hidden_width: 1,
            },
        };
        let mut params = ModelParams::zeros(&config);
        // pass-through: out0 = feature0, out1 = feature1
        params.layers[0].weights = vec![1.0, 0.0, 0.0, 1.0];
        let batch = CoordinateBatch {
            coords: vec![[0.25, 0.5, 0.75]],
            n: 1,
            frames: 1,
            upsample: 1,
        };
        let (_, cache) = model_forward(&batch, &params, &config).unwrap();
        let grads = model_backward(&cache, &[C64::new(1.0, -2.0)]).unwrap();
        let row = crate::inr::hash_index(&config.encoder, 0, [1, 2, 3]);
        for (i, v) in grads.grids[0].iter().enumerate() {
            match i {
                _ if i == 2 * row => assert_eq!(*v, 1.0),
                _ if i == 2 * row + 1 => assert_eq!(*v, -2.0),
                _ => assert_eq!(*v, 0.0),
            }
        }
    }

    #[test]
    fn rejects_mismatched_upstream() {
        let config = tiny_config();
        let params = init_params(&config, 1).unwrap();
        let batch = make_coordinates(2, 2, 1).unwrap();
        let (_, cache) = model_forward(&batch, &params, &config).unwrap();
        assert!(matches!(
            model_backward(&cache, &[C64::new(1.0, 0.0)]),
            Err(Error::StaleCache(_))
        ));
    }

    #[test]
    fn chunking_does_not_change_values() {
        let config = tiny_config();
        let params = init_params(&config, 2).unwrap();
        let batch = make_coordinates(48, 1, 1).unwrap();
        assert!(batch.len() > CHUNK_SIZE);
        let (all, _) = model_forward(&batch, &params, &config).unwrap();
        let tail = CoordinateBatch {
            coords: batch.coords[1000..1100].to_vec(),
            ..batch.clone()
        };
        let part = model_values(&tail, &params, &config).unwrap();
        for (a, b) in all[1000..1100].iter().zip(&part) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }
}
