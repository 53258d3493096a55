//! Four-point solver on a synthetic scene: all candidates, and how close
//! the best one is to the ground truth.

use relpose::geom::rotation_angle;
use relpose::regular::solve_4pt_angle;
use relpose::synth::{generate_scene, Correspondences, SceneConfig, SolverKind};

fn main() -> relpose::Result<()> {
    let cfg = SceneConfig { seed: 7, ..Default::default() };
    let scene = generate_scene(&cfg, SolverKind::Regular, 4)?;
    let Correspondences::Regular(pairs) = &scene.correspondences else {
        unreachable!()
    };
    println!("true angle {:.6} rad", scene.theta);

    let poses = solve_4pt_angle(pairs, scene.theta)?;
    for (k, p) in poses.iter().enumerate() {
        println!(
            "candidate {k}: angle {:.12}  t = [{:+.6} {:+.6} {:+.6}]  cheiral {:?}",
            rotation_angle(&p.rotation),
            p.translation.x,
            p.translation.y,
            p.translation.z,
            p.diagnostics.cheiral_count.unwrap_or(0)
        );
    }
    let best = poses
        .iter()
        .map(|p| (p.rotation - scene.pose.rotation).norm())
        .fold(f64::INFINITY, f64::min);
    println!("{} candidates, best rotation error {best:.3e}", poses.len());
    Ok(())
}
