//! Rotation error quartiles as image noise grows, for both motions.

use relpose::synth::{frobenius_to_degrees, run_trials, summarize, BenchConfig, Motion, SceneConfig, SolverKind};

fn main() -> relpose::Result<()> {
    for motion in [Motion::Forward, Motion::Sideways] {
        println!("{motion:?}");
        for noise_px in [0.0, 0.25, 0.5, 1.0] {
            let cfg = BenchConfig {
                scene: SceneConfig { motion, seed: 1, ..Default::default() },
                solver: SolverKind::Regular,
                noise_px,
                angle_noise_sigma: 0.0,
                trials: 300,
            };
            let s = summarize(&run_trials(&cfg)?).expect("trials ran");
            println!(
                "  {noise_px:4.2} px: rotation q1 {:.3e} deg, median {:.3e} deg; translation median {:.3} deg",
                frobenius_to_degrees(s.rotation.lower),
                frobenius_to_degrees(s.rotation.median),
                s.translation_deg.median
            );
        }
    }
    Ok(())
}
