use super::HashEncoderConfig;
use crate::error::{Error, Result};

/// Spatial-hash multipliers for the x, y and t lattice axes.
pub const HASH_PRIMES: [u32; 3] = [1, 2_654_435_761, 805_459_861];

/// Normalized `(x, y, t)` query points in `[0, 1]³`, ordered frame-major
/// (`t`, then `y`, then `x`) to match [`crate::image::DynamicImage`].
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateBatch {
    pub coords: Vec<[f64; 3]>,
    pub n: usize,
    /// Frame count of the training grid.
    pub frames: usize,
    /// Temporal upsampling factor `R`.
    pub upsample: usize,
}

impl CoordinateBatch {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// `T + (T − 1)(R − 1)` output frames.
    pub fn output_frames(&self) -> usize {
        self.frames + (self.frames - 1) * (self.upsample - 1)
    }

    /// Frame-index time (in training frame units) of each output frame.
    pub fn frame_times(&self) -> Vec<f64> {
        (0..self.output_frames())
            .map(|k| k as f64 / self.upsample as f64)
            .collect()
    }
}

/// Pixel `i` of `n` maps to `(i + ½)/n`.
pub fn spatial_coordinate(i: usize, n: usize) -> f64 {
    (i as f64 + 0.5) / n as f64
}

/// Frame time `τ` (possibly fractional) of `frames` maps to `(τ + ½)/T`.
pub fn temporal_coordinate(tau: f64, frames: usize) -> f64 {
    (tau + 0.5) / frames as f64
}

/// Full coordinate grid for an `n × n × frames` sequence, with `upsample − 1`
/// equally spaced times inserted between consecutive frames.
pub fn make_coordinates(n: usize, frames: usize, upsample: usize) -> Result<CoordinateBatch> {
    if n == 0 || frames == 0 || upsample == 0 {
        return Err(Error::invalid("make_coordinates needs n, frames, upsample >= 1"));
    }
    let mut batch = CoordinateBatch {
        coords: Vec::new(),
        n,
        frames,
        upsample,
    };
    let times = batch.frame_times();
    let mut coords = Vec::with_capacity(times.len() * n * n);
    for &tau in &times {
        let t = temporal_coordinate(tau, frames);
        for iy in 0..n {
            let y = spatial_coordinate(iy, n);
            for ix in 0..n {
                coords.push([spatial_coordinate(ix, n), y, t]);
            }
        }
    }
    batch.coords = coords;
    Ok(batch)
}

/// Table row of lattice vertex `lattice` on `level`: direct row-major
/// indexing (x fastest) when the level fits the table, spatial hash
/// otherwise.
pub fn hash_index(config: &HashEncoderConfig, level: usize, lattice: [u32; 3]) -> usize {
    if config.is_dense(level) {
        let side = config.resolution(level) + 1;
        lattice[0] as usize + side * (lattice[1] as usize + side * lattice[2] as usize)
    } else {
        let h = lattice[0].wrapping_mul(HASH_PRIMES[0])
            ^ lattice[1].wrapping_mul(HASH_PRIMES[1])
            ^ lattice[2].wrapping_mul(HASH_PRIMES[2]);
        (h as usize) & (config.table_size() - 1)
    }
}

/// The eight cell corners around a point and their trilinear weights.
/// Corner `c` offsets axis `a` by bit `a` of `c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelCorners {
    pub index: [usize; 8],
    pub weight: [f64; 8],
}

pub fn level_corners(config: &HashEncoderConfig, level: usize, coord: &[f64; 3]) -> LevelCorners {
    let res = config.resolution(level);
    let mut cell = [0u32; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let p = coord[a] * res as f64;
        let i = (p.floor() as usize).min(res - 1);
        cell[a] = i as u32;
        frac[a] = p - i as f64;
    }
    let mut out = LevelCorners {
        index: [0; 8],
        weight: [0.0; 8],
    };
    for c in 0..8 {
        let mut vertex = cell;
        let mut w = 1.0;
        for a in 0..3 {
            if c >> a & 1 == 1 {
                vertex[a] += 1;
                w *= frac[a];
            } else {
                w *= 1.0 - frac[a];
            }
        }
        out.index[c] = hash_index(config, level, vertex);
        out.weight[c] = w;
    }
    out
}

pub(crate) fn check_coordinate(coord: &[f64; 3]) -> Result<()> {
    if coord.iter().all(|c| (0.0..=1.0).contains(c)) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "coordinate {coord:?} outside [0, 1]^3"
        )))
    }
}

/// Writes the `L·F` encoded features of one coordinate into `out`.
pub(crate) fn encode_one(
    config: &HashEncoderConfig,
    grids: &[Vec<f64>],
    coord: &[f64; 3],
    out: &mut [f64],
) {
    let f = config.features_per_level;
    for (level, grid) in grids.iter().enumerate() {
        let corners = level_corners(config, level, coord);
        let dst = &mut out[level * f..(level + 1) * f];
        dst.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..8 {
            let row = &grid[corners.index[c] * f..(corners.index[c] + 1) * f];
            let w = corners.weight[c];
            for (d, r) in dst.iter_mut().zip(row) {
                *d += w * r;
            }
        }
    }
}

/// Encoded features, `batch × (L·F)` row-major, levels concatenated in order.
pub fn encode(
    batch: &CoordinateBatch,
    config: &HashEncoderConfig,
    grids: &[Vec<f64>],
) -> Result<Vec<f64>> {
    check_grids(config, grids)?;
    let dim = config.output_dim();
    let mut out = vec![0.0; batch.len() * dim];
    for (coord, row) in batch.coords.iter().zip(out.chunks_exact_mut(dim)) {
        check_coordinate(coord)?;
        encode_one(config, grids, coord, row);
    }
    Ok(out)
}

pub(crate) fn check_grids(config: &HashEncoderConfig, grids: &[Vec<f64>]) -> Result<()> {
    let rows = config.table_size() * config.features_per_level;
    if grids.len() != config.levels || grids.iter().any(|g| g.len() != rows) {
        return Err(Error::shape(
            "hash grids",
            &[config.levels, rows],
            &[grids.len(), grids.first().map_or(0, Vec::len)],
        ));
    }
    Ok(())
}
