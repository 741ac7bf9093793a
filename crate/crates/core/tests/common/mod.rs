#![allow(dead_code)]

use stinr::inr::{HashEncoderConfig, MlpConfig, ModelConfig, ModelParams};
use stinr::nufft::NufftOptions;
use stinr::numerics::seeded_rng;
use stinr::phantom::{generate_dynamic_image, retrospective_undersample, simulate_coil_maps, KSpaceDataset, PhantomSpec};
use stinr::trajectory::golden_angle_trajectory;
use stinr::{DynamicImage, C64};

/// `(1/N) Σ x(r) e^{−i k·r}` evaluated by brute force.
pub fn direct_nudft(img: &[C64], n: usize, coords: &[[f64; 2]]) -> Vec<C64> {
    let half = (n / 2) as f64;
    coords
        .iter()
        .map(|k| {
            let mut acc = C64::new(0.0, 0.0);
            for iy in 0..n {
                for ix in 0..n {
                    let phase = -(k[0] * (ix as f64 - half) + k[1] * (iy as f64 - half));
                    acc += img[iy * n + ix] * C64::from_polar(1.0, phase);
                }
            }
            acc / n as f64
        })
        .collect()
}

pub fn random_complex(len: usize, seed: u64) -> Vec<C64> {
    let mut rng = seeded_rng(seed);
    (0..len).map(|_| C64::new(rng.normal(), rng.normal())).collect()
}

pub fn random_image(n: usize, frames: usize, seed: u64) -> DynamicImage {
    DynamicImage::new(n, frames, random_complex(n * n * frames, seed)).unwrap()
}

pub fn rel_l2(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

/// N = 8, T = 3, C = 2, M = 4, S = 16 acquisition of the cardiac phantom.
pub fn tiny_dataset() -> (KSpaceDataset, DynamicImage) {
    let phantom = PhantomSpec::cardiac(8, 3);
    let truth = generate_dynamic_image(&phantom).unwrap();
    let coils = simulate_coil_maps(8, 2, 3).unwrap();
    let traj = golden_angle_trajectory(8, 3, 4, 16).unwrap();
    let ds = retrospective_undersample(&truth, &coils, &traj, 0.0, 0, NufftOptions::default()).unwrap();
    (ds, truth)
}

/// One dense hash level and a 2 × 8 MLP.
pub fn tiny_model() -> ModelConfig {
    ModelConfig {
        encoder: HashEncoderConfig {
            levels: 1,
            log2_table_size: 7,
            features_per_level: 2,
            base_resolution: 4,
            growth_factor: 1.45,
        },
        mlp: MlpConfig {
            hidden_layers: 2,
            hidden_width: 8,
        },
    }
}

/// Parameters with O(1) grid features so that the network output, and
/// hence the k-space prediction, is far from zero.
pub fn lively_params(model: &ModelConfig, seed: u64) -> ModelParams {
    let mut p = stinr::inr::init_params(model, seed).unwrap();
    let mut rng = seeded_rng(seed ^ 0x5eed);
    for g in &mut p.grids {
        g.iter_mut().for_each(|v| *v = rng.uniform_in(-1.0, 1.0));
    }
    for l in &mut p.layers {
        l.biases.iter_mut().for_each(|b| *b = rng.uniform_in(-0.1, 0.1));
    }
    p
}

/// Flat (tensor, index) addresses of every parameter.
pub fn addresses(p: &ModelParams) -> Vec<(usize, usize)> {
    p.tensor_lengths()
        .iter()
        .enumerate()
        .flat_map(|(t, &len)| (0..len).map(move |i| (t, i)))
        .collect()
}

pub fn get(p: &ModelParams, (t, i): (usize, usize)) -> f64 {
    p.tensors()[t][i]
}

pub fn set(p: &mut ModelParams, (t, i): (usize, usize), v: f64) {
    p.tensors_mut()[t][i] = v;
}

/// `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
