//! Simulates the default cardiac phantom acquisition and writes the k-space,
//! coil maps, trajectory and ground truth to a directory.
//!
//!     cargo run --release --example simulate -- [out_dir]

use std::path::PathBuf;

use stinr::pipeline::{run_simulation, ExperimentSpec};

fn main() -> stinr::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/simulate".into()));
    let mut spec = ExperimentSpec::new(0.0, 0.0);
    spec.phantom.noise_std = 1e-3;
    let sim = run_simulation(&spec, &dir)?;
    let ds = &sim.dataset;
    println!(
        "N = {}, T = {}, C = {}, M = {}, k-space {:?}",
        ds.n(),
        ds.frames(),
        ds.coils.coils(),
        ds.trajectory.spokes_per_frame(),
        ds.samples.shape()
    );
    println!("wrote {}", dir.display());
    Ok(())
}
