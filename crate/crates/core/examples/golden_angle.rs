//! Golden-angle radial sampling: spoke angles, per-frame coverage and the
//! acceleration factor for a few spoke counts.
//!
//!     cargo run --release --example golden_angle

use stinr::pipeline::acceleration_factor;
use stinr::trajectory::{golden_angle_trajectory, spoke_angle};

fn main() -> stinr::Result<()> {
    let n = 64;
    for i in 0..6 {
        println!("spoke {i}: {:7.2} deg", spoke_angle(i).to_degrees());
    }

    for spokes in [21, 13, 5] {
        let traj = golden_angle_trajectory(n, 4, spokes, 2 * n)?;
        // largest angular gap between neighbouring spokes in frame 0 (lines, mod 180)
        let mut a: Vec<f64> = traj.frame_spokes(0).map(|s| traj.angles()[s].to_degrees() % 180.0).collect();
        a.sort_by(f64::total_cmp);
        let gap = a
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(a[0] + 180.0 - a[a.len() - 1], f64::max);
        println!(
            "M = {spokes:2}: AF = {} ({} samples/frame), widest gap {gap:.1} deg vs uniform {:.1}",
            acceleration_factor(n, spokes),
            traj.frame_coords(0).len(),
            180.0 / spokes as f64
        );
    }
    Ok(())
}
