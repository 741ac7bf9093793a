//! Analytic dynamic phantom, synthetic coil maps and retrospective
//! undersampling.
//!
//! The phantom is a sum of ellipse indicators whose radii and centers move
//! sinusoidally and whose intensities ramp linearly, so ground truth exists
//! at any real `t`, not just at frame indices.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::DynamicImage;
use crate::numerics::{seeded_rng, ComplexArray, C64};
use crate::nufft::{CoilMaps, MulticoilOperator, NufftOptions};
use crate::trajectory::Trajectory;

/// Sub-samples per pixel along each axis.
pub const SUPERSAMPLING: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ellipse {
    /// Center `(x, y)` in pixel units; pixel `i` spans `[i, i+1)`.
    pub center: [f64; 2],
    /// Semi-axes `(a, b)` in pixels.
    pub semi_axes: [f64; 2],
    /// Complex intensity at `t = 0`.
    pub intensity: [f64; 2],
    /// Relative radius amplitude: `r(t) = r₀ (1 + pulsation · sin(2π f t / T))`.
    #[serde(default)]
    pub pulsation: f64,
    /// Center displacement amplitude in pixels.
    #[serde(default)]
    pub translation: [f64; 2],
    /// Cycles per `T` frames.
    #[serde(default)]
    pub frequency: f64,
    /// Linear intensity ramp: `I(t) = I₀ (1 + ramp · t)`.
    #[serde(default)]
    pub ramp: f64,
}

impl Ellipse {
    pub fn disc(center: [f64; 2], radius: f64, intensity: f64) -> Self {
        Self {
            center,
            semi_axes: [radius, radius],
            intensity: [intensity, 0.0],
            pulsation: 0.0,
            translation: [0.0, 0.0],
            frequency: 0.0,
            ramp: 0.0,
        }
    }

    fn phase(&self, t: f64, frames: usize) -> f64 {
        // reduce before the sine so whole periods land exactly on 0
        let cycles = (self.frequency * t / frames as f64).rem_euclid(1.0);
        (2.0 * PI * cycles).sin()
    }

    /// Geometry and intensity at time `t`.
    pub fn at(&self, t: f64, frames: usize) -> (f64, f64, f64, f64, C64) {
        let s = self.phase(t, frames);
        let scale = 1.0 + self.pulsation * s;
        let cx = self.center[0] + self.translation[0] * s;
        let cy = self.center[1] + self.translation[1] * s;
        let base = C64::new(self.intensity[0], self.intensity[1]);
        (
            cx,
            cy,
            self.semi_axes[0] * scale,
            self.semi_axes[1] * scale,
            base * (1.0 + self.ramp * t),
        )
    }

    fn max_extent(&self) -> [f64; 2] {
        let grow = 1.0 + self.pulsation.abs();
        [
            self.semi_axes[0] * grow + self.translation[0].abs(),
            self.semi_axes[1] * grow + self.translation[1].abs(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub n: usize,
    pub frames: usize,
    pub ellipses: Vec<Ellipse>,
    #[serde(default)]
    pub background: [f64; 2],
    #[serde(default)]
    pub noise_std: f64,
}

impl PhantomSpec {
    /// Cardiac-like default: static torso, pulsating ventricle, translating
    /// disc and a contrast-ramp disc.
    pub fn cardiac(n: usize, frames: usize) -> Self {
        let nf = n as f64;
        let ramp = 5.0 / (frames.max(2) - 1) as f64;
        let mut ventricle = Ellipse::disc([0.42 * nf, 0.42 * nf], 0.12 * nf, 0.0);
        ventricle.intensity = [0.5 * 0.4f64.cos(), 0.5 * 0.4f64.sin()];
        ventricle.pulsation = 0.25;
        ventricle.frequency = 1.0;
        let mut mover = Ellipse::disc([0.68 * nf, 0.45 * nf], 0.05 * nf, 0.4);
        mover.translation = [0.0, 0.06 * nf];
        mover.frequency = 1.0;
        let mut contrast = Ellipse::disc([0.5 * nf, 0.72 * nf], 0.07 * nf, 0.1);
        contrast.ramp = ramp;
        Self {
            n,
            frames,
            ellipses: vec![
                Ellipse {
                    semi_axes: [0.42 * nf, 0.34 * nf],
                    ..Ellipse::disc([0.5 * nf, 0.5 * nf], 0.0, 0.3)
                },
                ventricle,
                mover,
                contrast,
            ],
            background: [0.0, 0.0],
            noise_std: 0.0,
        }
    }

    /// Index of the contrast-ramp disc in [`PhantomSpec::cardiac`].
    pub const CARDIAC_RAMP_DISC: usize = 3;

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.frames == 0 {
            return Err(Error::invalid("phantom n and frames must be >= 1"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::invalid("noise_std must be >= 0"));
        }
        let fov = self.n as f64;
        for (i, e) in self.ellipses.iter().enumerate() {
            let [ex, ey] = e.max_extent();
            let inside = e.center[0] - ex >= 0.0
                && e.center[0] + ex <= fov
                && e.center[1] - ey >= 0.0
                && e.center[1] + ey <= fov;
            if !inside {
                return Err(Error::invalid(format!(
                    "ellipse {i} leaves the field of view"
                )));
            }
            if e.semi_axes.iter().any(|&a| !(a > 0.0)) || e.pulsation.abs() >= 1.0 {
                return Err(Error::invalid(format!(
                    "ellipse {i} needs positive semi-axes and |pulsation| < 1"
                )));
            }
        }
        Ok(())
    }
}

/// Renders the phantom at continuous time `t` (frame units) as an `N × N`
/// row-major frame, anti-aliased by 4×4 supersampling.
pub fn render_phantom(spec: &PhantomSpec, t: f64) -> Vec<C64> {
    let n = spec.n;
    let states: Vec<_> = spec.ellipses.iter().map(|e| e.at(t, spec.frames)).collect();
    let background = C64::new(spec.background[0], spec.background[1]);
    let inv = 1.0 / SUPERSAMPLING as f64;
    let sub_weight = inv * inv;
    let mut out = vec![background; n * n];
    for (iy, row) in out.chunks_exact_mut(n).enumerate() {
        for (ix, px) in row.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &(cx, cy, a, b, value) in &states {
                // skip ellipses whose bounding box misses this pixel
                if (ix as f64) > cx + a
                    || (ix as f64 + 1.0) < cx - a
                    || (iy as f64) > cy + b
                    || (iy as f64 + 1.0) < cy - b
                {
                    continue;
                }
                let mut hits = 0usize;
                for sy in 0..SUPERSAMPLING {
                    let y = iy as f64 + (sy as f64 + 0.5) * inv;
                    let dy = (y - cy) / b;
                    for sx in 0..SUPERSAMPLING {
                        let x = ix as f64 + (sx as f64 + 0.5) * inv;
                        let dx = (x - cx) / a;
                        if dx * dx + dy * dy <= 1.0 {
                            hits += 1;
                        }
                    }
                }
                acc += value * (hits as f64 * sub_weight);
            }
            *px += acc;
        }
    }
    out
}

pub fn generate_dynamic_image(spec: &PhantomSpec) -> Result<DynamicImage> {
    spec.validate()?;
    let frames = (0..spec.frames)
        .map(|t| render_phantom(spec, t as f64))
        .collect();
    let img = DynamicImage::from_frames(spec.n, frames)?;
    let peak = img.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak > 1.0 + 1e-12 {
        return Err(Error::invalid(format!(
            "phantom intensity reaches {peak}, must stay <= 1"
        )));
    }
    Ok(img)
}

/// Smooth Gaussian-lobe coil profiles placed around the field of view, each
/// with a seeded linear phase, normalized so `Σ_c |S_c|² = 1` per pixel.
pub fn simulate_coil_maps(n: usize, coils: usize, seed: u64) -> Result<CoilMaps> {
    if coils == 0 || n == 0 {
        return Err(Error::invalid("coil count and grid size must be >= 1"));
    }
    let mut rng = seeded_rng(seed);
    let nf = n as f64;
    let sigma = 0.45 * nf;
    let radius = 0.55 * nf;
    let params: Vec<_> = (0..coils)
        .map(|c| {
            let angle = 2.0 * PI * c as f64 / coils as f64;
            let offset = rng.uniform_in(-PI, PI);
            let ramp = [
                rng.uniform_in(-1.0, 1.0) * 2.0 * PI / nf,
                rng.uniform_in(-1.0, 1.0) * 2.0 * PI / nf,
            ];
            let center = [
                0.5 * nf + radius * angle.cos(),
                0.5 * nf + radius * angle.sin(),
            ];
            (center, offset, ramp)
        })
        .collect();
    let p = n * n;
    let mut maps = vec![C64::new(0.0, 0.0); coils * p];
    for iy in 0..n {
        for ix in 0..n {
            let (x, y) = (ix as f64 + 0.5, iy as f64 + 0.5);
            let px = iy * n + ix;
            for (c, (center, offset, ramp)) in params.iter().enumerate() {
                let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                let mag = (-r2 / (2.0 * sigma * sigma)).exp();
                let phase = offset + ramp[0] * (x - 0.5 * nf) + ramp[1] * (y - 0.5 * nf);
                maps[c * p + px] = C64::from_polar(mag, phase);
            }
            let energy: f64 = (0..coils).map(|c| maps[c * p + px].norm_sqr()).sum();
            let inv = 1.0 / energy.sqrt();
            for c in 0..coils {
                maps[c * p + px] *= inv;
            }
        }
    }
    CoilMaps::new(ComplexArray::new(vec![coils, n, n], maps)?)
}

/// Acquisition descriptors stored with a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionMeta {
    pub spokes_per_frame: usize,
    pub seed: u64,
    pub noise_std: f64,
}

/// Multicoil radial k-space (`C × T × M × S`) with its geometry.
#[derive(Clone, Debug)]
pub struct KSpaceDataset {
    pub samples: ComplexArray,
    pub trajectory: Trajectory,
    pub coils: CoilMaps,
    pub meta: AcquisitionMeta,
}

impl KSpaceDataset {
    pub fn new(
        samples: ComplexArray,
        trajectory: Trajectory,
        coils: CoilMaps,
        meta: AcquisitionMeta,
    ) -> Result<Self> {
        let expected = [
            coils.coils(),
            trajectory.frames(),
            trajectory.spokes_per_frame(),
            trajectory.samples_per_spoke(),
        ];
        if samples.shape() != expected {
            return Err(Error::shape("KSpaceDataset", &expected, samples.shape()));
        }
        if coils.n() != trajectory.n() {
            return Err(Error::shape(
                "KSpaceDataset coil maps",
                &[trajectory.n()],
                &[coils.n()],
            ));
        }
        Ok(Self {
            samples,
            trajectory,
            coils,
            meta,
        })
    }

    pub fn n(&self) -> usize {
        self.trajectory.n()
    }

    pub fn frames(&self) -> usize {
        self.trajectory.frames()
    }

    pub fn operator(&self, options: NufftOptions) -> Result<MulticoilOperator> {
        MulticoilOperator::new(&self.trajectory, self.coils.clone(), options)
    }
}

/// Samples `img` along `traj` through the multicoil model and adds
/// i.i.d. complex Gaussian noise with `noise_std` per real/imag component.
pub fn retrospective_undersample(
    img: &DynamicImage,
    coils: &CoilMaps,
    traj: &Trajectory,
    noise_std: f64,
    seed: u64,
    options: NufftOptions,
) -> Result<KSpaceDataset> {
    if img.n() != traj.n() || img.frames() != traj.frames() {
        return Err(Error::shape(
            "retrospective_undersample",
            &[traj.frames(), traj.n(), traj.n()],
            &[img.frames(), img.n(), img.n()],
        ));
    }
    if !(noise_std >= 0.0) {
        return Err(Error::invalid("noise_std must be >= 0"));
    }
    let op = MulticoilOperator::new(traj, coils.clone(), options)?;
    let mut samples = op.forward(img)?;
    if noise_std > 0.0 {
        let mut rng = seeded_rng(seed);
        for z in samples.data_mut() {
            let re = rng.normal();
            let im = rng.normal();
            *z += C64::new(re, im) * noise_std;
        }
    }
    KSpaceDataset::new(
        samples,
        traj.clone(),
        coils.clone(),
        AcquisitionMeta {
            spokes_per_frame: traj.spokes_per_frame(),
            seed,
            noise_std,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_disc(n: usize, radius: f64) -> PhantomSpec {
        PhantomSpec {
            n,
            frames: 4,
            ellipses: vec![Ellipse::disc([n as f64 / 2.0, n as f64 / 2.0], radius, 1.0)],
            background: [0.0, 0.0],
            noise_std: 0.0,
        }
    }

    #[test]
    fn static_phantom_is_time_invariant() {
        let mut spec = PhantomSpec::cardiac(32, 8);
        for e in &mut spec.ellipses {
            e.pulsation = 0.0;
            e.translation = [0.0, 0.0];
            e.ramp = 0.0;
        }
        assert_eq!(render_phantom(&spec, 0.0), render_phantom(&spec, 7.3));
    }

    #[test]
    fn disc_geometry() {
        let n = 32;
        let r = 5.0;
        let img = render_phantom(&single_disc(n, r), 0.0);
        assert_eq!(img[16 * n + 16], C64::new(1.0, 0.0));
        // 2r away from center along x
        assert_eq!(img[16 * n + 16 + 10], C64::new(0.0, 0.0));
    }

    #[test]
    fn disc_area_matches_pi_r_squared() {
        for r in [8.0, 11.3, 14.0] {
            let img = render_phantom(&single_disc(64, r), 0.0);
            let area: f64 = img.iter().map(|z| z.re).sum();
            let exact = PI * r * r;
            assert!((area - exact).abs() < 0.01 * exact, "r={r} area={area}");
        }
    }

    #[test]
    fn single_frame_sequence() {
        let mut spec = PhantomSpec::cardiac(32, 1);
        spec.frames = 1;
        let img = generate_dynamic_image(&spec).unwrap();
        assert_eq!(img.frames(), 1);
        assert_eq!(img.frame(0), &render_phantom(&spec, 0.0)[..]);
    }

    #[test]
    fn periodic_motion_wraps_exactly() {
        let mut spec = PhantomSpec::cardiac(32, 8);
        spec.ellipses[PhantomSpec::CARDIAC_RAMP_DISC].ramp = 0.0;
        let img = generate_dynamic_image(&spec).unwrap();
        assert_eq!(img.frame(0), &render_phantom(&spec, 8.0)[..]);
    }

    #[test]
    fn render_is_continuous_in_time() {
        let spec = PhantomSpec::cardiac(64, 16);
        for t in [0.0, 3.7, 11.2] {
            let a = render_phantom(&spec, t);
            let b = render_phantom(&spec, t + 1e-3);
            // supersampled edges move in 1/16-pixel steps, so compare means
            let diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).sum::<f64>() / a.len() as f64;
            assert!(diff < 1e-3, "t={t} diff={diff}");
        }
    }

    #[test]
    fn cardiac_default_is_valid_and_bounded() {
        let spec = PhantomSpec::cardiac(64, 16);
        spec.validate().unwrap();
        let img = generate_dynamic_image(&spec).unwrap();
        let peak = img.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(peak <= 1.0 && peak > 0.5);
    }

    #[test]
    fn rejects_ellipse_leaving_fov() {
        let mut spec = single_disc(32, 5.0);
        spec.ellipses[0].translation = [12.0, 0.0];
        assert!(spec.validate().is_err());
        assert!(generate_dynamic_image(&spec).is_err());
    }

    #[test]
    fn coil_maps_are_normalized_and_deterministic() {
        let one = simulate_coil_maps(16, 1, 3).unwrap();
        assert!(one.map(0).iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        for c in [2, 5, 8] {
            let maps = simulate_coil_maps(16, c, 9).unwrap();
            for px in 0..256 {
                let e: f64 = (0..c).map(|ci| maps.map(ci)[px].norm_sqr()).sum();
                assert!((e - 1.0).abs() < 1e-10);
            }
        }
        let a = simulate_coil_maps(32, 8, 77).unwrap();
        let b = simulate_coil_maps(32, 8, 77).unwrap();
        let bits = |m: &CoilMaps| -> Vec<u64> {
            m.as_array()
                .data()
                .iter()
                .flat_map(|z| [z.re.to_bits(), z.im.to_bits()])
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }
}
