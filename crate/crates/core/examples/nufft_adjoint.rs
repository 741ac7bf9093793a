//! Forward and adjoint NUFFT on a point source: agreement with the direct
//! sum, the dot-product test and the point-spread function.
//!
//!     cargo run --release --example nufft_adjoint

use stinr::nufft::{nufft_adjoint, nufft_forward, NufftOptions, NufftPlan};
use stinr::numerics::{inner, ComplexArray};
use stinr::trajectory::golden_angle_trajectory;
use stinr::C64;

fn main() -> stinr::Result<()> {
    let n = 32;
    let traj = golden_angle_trajectory(n, 1, 34, 2 * n)?;
    let coords = traj.frame_coords(0);
    let plan = NufftPlan::new(n, coords, NufftOptions::default())?;

    let (px, py) = (20usize, 9usize);
    let mut img = ComplexArray::zeros(&[n, n]);
    img.set(&[py, px], C64::new(1.0, 0.0));
    let y = nufft_forward(&img, &plan)?;

    // a delta at r has the closed-form spectrum e^{-i k.r} / N
    let r = [px as f64 - (n / 2) as f64, py as f64 - (n / 2) as f64];
    let err = coords
        .iter()
        .zip(y.data())
        .map(|(k, v)| (v - C64::from_polar(1.0 / n as f64, -(k[0] * r[0] + k[1] * r[1]))).norm())
        .fold(0.0, f64::max);
    println!("max |nufft - exact| on a delta: {err:.2e}");

    let psf = nufft_adjoint(&y, &plan)?;
    let (peak, value) = psf
        .data()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .unwrap();
    println!("PSF peak at ({}, {}), |value| = {:.4}", peak % n, peak / n, value.norm());

    let lhs = inner(y.data(), y.data());
    let rhs = inner(img.data(), psf.data());
    println!("<Ax, Ax> = {:.12}, <x, A^H A x> = {:.12}", lhs.re, rhs.re);
    Ok(())
}
