//! Small grid over the TV and low-rank weights on a reduced problem, best
//! cell first.
//!
//!     cargo run --release --example sweep

use stinr::pipeline::{sweep_csv, sweep_hyperparameters, ExperimentSpec};

fn main() -> stinr::Result<()> {
    let mut spec = ExperimentSpec::new(0.0, 0.0);
    spec.phantom.n = 32;
    spec.phantom.frames = 8;
    spec.recon.epochs = 100;
    let mut grid = Vec::new();
    for ls in [0.0, 1e-3, 1e-2] {
        for ll in [0.0, 1e-3, 1e-2] {
            grid.push((ls, ll));
        }
    }
    let cells = sweep_hyperparameters(&spec, &grid)?;
    print!("{}", sweep_csv(&cells));
    Ok(())
}
