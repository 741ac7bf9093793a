//! Golden-angle radial sampling geometry and ramp density compensation.

use std::f64::consts::PI;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::is_power_of_two;

/// Angular increment between consecutive spokes, in degrees.
pub const GOLDEN_ANGLE_DEG: f64 = 111.25;

/// Spoke counts per frame used for the cine experiments.
pub const FIBONACCI_SPOKES: [usize; 5] = [5, 8, 13, 21, 34];

/// Sizes of a radial acquisition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryShape {
    pub n: usize,
    pub frames: usize,
    pub spokes_per_frame: usize,
    pub samples_per_spoke: usize,
}

impl TrajectoryShape {
    pub fn samples_per_frame(&self) -> usize {
        self.spokes_per_frame * self.samples_per_spoke
    }

    pub fn total_spokes(&self) -> usize {
        self.frames * self.spokes_per_frame
    }

    pub fn total_samples(&self) -> usize {
        self.frames * self.samples_per_frame()
    }
}

/// Golden-angle radial trajectory. `coords` holds `(k_x, k_y)` in
/// radians/pixel for every sample, ordered frame, spoke, readout.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    shape: TrajectoryShape,
    angles: Vec<f64>,
    coords: Vec<[f64; 2]>,
}

/// Angle of global spoke `index` in radians.
pub fn spoke_angle(index: usize) -> f64 {
    (index as f64 * GOLDEN_ANGLE_DEG).rem_euclid(360.0).to_radians()
}

/// Signed radius of readout sample `j` on a spoke of `samples` points.
pub fn readout_radius(j: usize, samples: usize) -> f64 {
    (j as f64 - (samples / 2) as f64) / samples as f64 * 2.0 * PI
}

pub fn golden_angle_trajectory(
    n: usize,
    frames: usize,
    spokes_per_frame: usize,
    samples_per_spoke: usize,
) -> Result<Trajectory> {
    if !is_power_of_two(n) {
        return Err(Error::NotPowerOfTwo(n));
    }
    if frames == 0 || spokes_per_frame == 0 || samples_per_spoke == 0 {
        return Err(Error::invalid(
            "frames, spokes_per_frame and samples_per_spoke must be >= 1",
        ));
    }
    if samples_per_spoke % 2 != 0 {
        return Err(Error::invalid(format!(
            "samples_per_spoke must be even so the center sample exists, got {samples_per_spoke}"
        )));
    }
    let shape = TrajectoryShape {
        n,
        frames,
        spokes_per_frame,
        samples_per_spoke,
    };
    let angles: Vec<f64> = (0..shape.total_spokes()).map(spoke_angle).collect();
    let mut coords = Vec::with_capacity(shape.total_samples());
    for &phi in &angles {
        let (sin, cos) = phi.sin_cos();
        for j in 0..samples_per_spoke {
            let rho = readout_radius(j, samples_per_spoke);
            coords.push([wrap_nyquist(rho * cos), wrap_nyquist(rho * sin)]);
        }
    }
    Ok(Trajectory {
        shape,
        angles,
        coords,
    })
}

/// `+π` and `−π` are the same frequency on an integer pixel grid; keep the
/// half-open range.
fn wrap_nyquist(k: f64) -> f64 {
    if k >= PI {
        k - 2.0 * PI
    } else {
        k
    }
}

impl Trajectory {
    /// Rebuilds a trajectory from stored parts, e.g. after loading from disk.
    pub fn from_parts(shape: TrajectoryShape, coords: Vec<[f64; 2]>) -> Result<Self> {
        if coords.len() != shape.total_samples() {
            return Err(Error::shape(
                "Trajectory::from_parts",
                &[shape.total_samples()],
                &[coords.len()],
            ));
        }
        let angles = (0..shape.total_spokes()).map(spoke_angle).collect();
        Ok(Self {
            shape,
            angles,
            coords,
        })
    }

    pub fn shape(&self) -> TrajectoryShape {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.shape.n
    }

    pub fn frames(&self) -> usize {
        self.shape.frames
    }

    pub fn spokes_per_frame(&self) -> usize {
        self.shape.spokes_per_frame
    }

    pub fn samples_per_spoke(&self) -> usize {
        self.shape.samples_per_spoke
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// Global spoke indices acquired in frame `t`.
    pub fn frame_spokes(&self, t: usize) -> Range<usize> {
        let m = self.shape.spokes_per_frame;
        t * m..(t + 1) * m
    }

    pub fn frame_coords(&self, t: usize) -> &[[f64; 2]] {
        let per = self.shape.samples_per_frame();
        &self.coords[t * per..(t + 1) * per]
    }

    /// Full Cartesian lines over acquired spokes per frame.
    pub fn acceleration_factor(&self) -> f64 {
        self.shape.n as f64 / self.shape.spokes_per_frame as f64
    }
}

/// Per-sample ramp weights, same ordering as the trajectory samples.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityWeights {
    shape: TrajectoryShape,
    weights: Vec<f64>,
}

impl DensityWeights {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let per = self.shape.samples_per_frame();
        &self.weights[t * per..(t + 1) * per]
    }

    pub fn shape(&self) -> TrajectoryShape {
        self.shape
    }
}

/// `|k| / 2π` per sample; the center sample gets half of the first radial
/// step instead of zero.
pub fn ramp_density_weights(traj: &Trajectory) -> DensityWeights {
    let s = traj.samples_per_spoke();
    let spoke: Vec<f64> = (0..s)
        .map(|j| {
            if j == s / 2 {
                0.5 / s as f64
            } else {
                readout_radius(j, s).abs() / (2.0 * PI)
            }
        })
        .collect();
    let weights = spoke
        .iter()
        .copied()
        .cycle()
        .take(traj.shape().total_samples())
        .collect();
    DensityWeights {
        shape: traj.shape(),
        weights,
    }
}
