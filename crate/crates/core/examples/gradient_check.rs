//! Central finite differences against the hand-written backward pass of the
//! full objective on an 8 × 8 × 3 problem.
//!
//!     cargo run --release --example gradient_check

use stinr::inr::{init_params, HashEncoderConfig, MlpConfig, ModelConfig};
use stinr::loss::total_loss;
use stinr::nufft::NufftOptions;
use stinr::optim::ReconConfig;
use stinr::phantom::{generate_dynamic_image, retrospective_undersample, simulate_coil_maps, PhantomSpec};
use stinr::trajectory::golden_angle_trajectory;

fn main() -> stinr::Result<()> {
    let truth = generate_dynamic_image(&PhantomSpec::cardiac(8, 3))?;
    let coils = simulate_coil_maps(8, 2, 1)?;
    let traj = golden_angle_trajectory(8, 3, 4, 16)?;
    let options = NufftOptions::default();
    let ds = retrospective_undersample(&truth, &coils, &traj, 0.0, 0, options)?;
    let model = ModelConfig {
        encoder: HashEncoderConfig {
            levels: 2,
            log2_table_size: 7,
            ..HashEncoderConfig::default()
        },
        mlp: MlpConfig {
            hidden_layers: 2,
            hidden_width: 8,
        },
    };
    let config = ReconConfig::new(0.01, 0.01);
    let mut params = init_params(&model, 5)?;
    let (loss, grads, _) = total_loss(&params, &ds, &config, &model, options)?;
    println!("loss {loss:.6e}");

    // near zero output every sample sits in the eps-dominated part of the
    // relative loss, so the curvature is large and coarse steps are off
    let steps = [1e-4, 1e-6, 1e-8];
    println!("{:>28}  {:>16}  {}", "", "analytic", steps.map(|h| format!("fd h={h:<8e}")).join("  "));
    let names = ["grid", "weights", "biases"];
    for t in 0..params.tensor_lengths().len() {
        let len = params.tensor_lengths()[t];
        let i = (len * 7 / 11).min(len - 1);
        let p0 = params.tensors()[t][i];
        let mut fds = Vec::new();
        for h in steps {
            params.tensors_mut()[t][i] = p0 + h;
            let up = total_loss(&params, &ds, &config, &model, options)?.0;
            params.tensors_mut()[t][i] = p0 - h;
            let down = total_loss(&params, &ds, &config, &model, options)?.0;
            params.tensors_mut()[t][i] = p0;
            fds.push(format!("{:+.9e}", (up - down) / (2.0 * h)));
        }
        let kind = if t < model.encoder.levels { names[0] } else { names[1 + (t - model.encoder.levels) % 2] };
        println!("tensor {t} ({kind:7}) [{i:4}]:  {:+.9e}  {}", grads.tensors()[t][i], fds.join("  "));
    }
    Ok(())
}
