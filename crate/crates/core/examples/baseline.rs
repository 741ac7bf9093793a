//! Density-compensated adjoint baseline at several acceleration factors.
//!
//!     cargo run --release --example baseline

use stinr::pipeline::{acceleration_factor, run_baseline, ExperimentSpec};

fn main() -> stinr::Result<()> {
    for spokes in [34, 21, 13, 5] {
        let mut spec = ExperimentSpec::new(0.0, 0.0);
        spec.trajectory.spokes_per_frame = spokes;
        let (_, metrics) = run_baseline(&spec)?;
        let m = metrics.expect("simulated data has ground truth");
        println!(
            "M = {spokes:2} (AF {:>4}): PSNR {:.2} dB, SSIM {:.3}",
            acceleration_factor(spec.phantom.n, spokes),
            m.mean_psnr(),
            m.mean_ssim()
        );
    }
    Ok(())
}
