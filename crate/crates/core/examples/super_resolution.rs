//! Temporal super-resolution: trains on T frames, then queries the network
//! at R-times denser time points and compares the inserted frames with the
//! analytic phantom and with linear interpolation of the trained frames.
//!
//!     cargo run --release --example super_resolution -- [config.toml] [R]

use std::path::Path;

use stinr::io::load_config;
use stinr::phantom::render_phantom;
use stinr::pipeline::{run_reconstruction, run_superres, ExperimentSpec};
use stinr::C64;

fn mse(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / a.len() as f64
}

fn main() -> stinr::Result<()> {
    let mut args = std::env::args().skip(1);
    let spec = match args.next() {
        Some(path) => load_config(Path::new(&path))?,
        None => {
            let mut s = ExperimentSpec::new(0.0, 0.0);
            s.phantom.n = 32;
            s.phantom.frames = 8;
            s.recon.epochs = 200;
            s
        }
    };
    let r = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    let rec = run_reconstruction(&spec, None)?;
    let phantom = rec.phantom.as_ref().unwrap();
    let dense = run_superres(&rec.checkpoint, r)?;
    if let (Some(m), Some(b)) = (&rec.metrics, &rec.baseline_metrics) {
        println!("PSNR INR {:.2} dB, baseline {:.2} dB", m.mean_psnr(), b.mean_psnr());
    }
    println!("{} trained frames -> {} frames", rec.image.frames(), dense.frames());

    let (mut inr_sum, mut lin_sum, mut count) = (0.0, 0.0, 0);
    for j in (0..dense.frames()).filter(|j| j % r != 0) {
        let (lo, f) = (j / r, (j % r) as f64 / r as f64);
        let truth = render_phantom(phantom, lo as f64 + f);
        let lin: Vec<C64> = rec
            .image
            .frame(lo)
            .iter()
            .zip(rec.image.frame(lo + 1))
            .map(|(a, b)| a * (1.0 - f) + b * f)
            .collect();
        let (a, b) = (mse(dense.frame(j), &truth), mse(&lin, &truth));
        println!("t = {:5.2}: mse INR {a:.3e}, linear {b:.3e}", lo as f64 + f);
        inr_sum += a;
        lin_sum += b;
        count += 1;
    }
    println!(
        "mean over {count} inserted frames: INR {:.3e}, linear {:.3e}, ratio {:.3}",
        inr_sum / count as f64,
        lin_sum / count as f64,
        inr_sum / lin_sum
    );
    Ok(())
}
