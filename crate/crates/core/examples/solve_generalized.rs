//! Five-point solver for a multi-center rig. Unlike the central case the
//! translation comes out with metric scale.

use relpose::generalized::{ray_point_error, solve_gen5pt_angle};
use relpose::synth::{generate_scene, Correspondences, SceneConfig, SolverKind};

fn main() -> relpose::Result<()> {
    let cfg = SceneConfig {
        seed: 11,
        multi_center_radius: 0.2,
        ..Default::default()
    };
    let scene = generate_scene(&cfg, SolverKind::Generalized, 5)?;
    let Correspondences::Generalized(pairs) = &scene.correspondences else {
        unreachable!()
    };

    let poses = solve_gen5pt_angle(pairs, scene.theta)?;
    let best = poses
        .iter()
        .min_by(|a, b| {
            let ea = (a.rotation - scene.pose.rotation).norm();
            let eb = (b.rotation - scene.pose.rotation).norm();
            ea.total_cmp(&eb)
        })
        .expect("solver returns at least one pose");

    println!("{} candidates", poses.len());
    println!("true t      {:?}", scene.pose.translation.as_slice());
    println!("estimated t {:?}", best.translation.as_slice());
    println!("rotation error {:.3e}", (best.rotation - scene.pose.rotation).norm());
    println!("|t| true {:.9}  estimated {:.9}", scene.pose.translation.norm(), best.translation.norm());
    let worst = pairs
        .iter()
        .map(|p| ray_point_error(best, p).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    println!("max point-to-ray error on the sample {worst:.3e}");
    Ok(())
}
