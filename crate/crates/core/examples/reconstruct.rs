//! Trains the hash-encoded INR on a simulated acquisition and compares it
//! with the adjoint baseline. Defaults to a 32 × 32 problem so it finishes
//! in about a minute; pass a config path to run anything else.
//!
//!     cargo run --release --example reconstruct -- [config.toml] [out_dir]

use std::path::{Path, PathBuf};

use stinr::io::load_config;
use stinr::pipeline::{run_reconstruction, ExperimentSpec};

fn main() -> stinr::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let spec = match args.next() {
        Some(path) => load_config(Path::new(&path))?,
        None => {
            let mut s = ExperimentSpec::new(0.0, 0.0);
            s.phantom.n = 32;
            s.recon.epochs = 150;
            s
        }
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/reconstruct".into()));
    let rec = run_reconstruction(&spec, Some(&out))?;
    let first = rec.loss.first().unwrap();
    let last = rec.loss.last().unwrap();
    println!("AF {}: dc {:.3e} -> {:.3e}", rec.acceleration_factor, first.dc, last.dc);
    if let (Some(m), Some(b)) = (&rec.metrics, &rec.baseline_metrics) {
        println!("INR      PSNR {:.2} dB  SSIM {:.3}", m.mean_psnr(), m.mean_ssim());
        println!("baseline PSNR {:.2} dB  SSIM {:.3}", b.mean_psnr(), b.mean_ssim());
    }
    println!("artifacts in {}", out.display());
    Ok(())
}
