//! Writes a correspondence document, solves it the way `relpose solve`
//! does, and reads the candidate poses back.

use relpose::cli::{cmd_solve, parse_solve_result, write_correspondences, CorrespondenceDoc};
use relpose::synth::{generate_scene, SceneConfig, SolverKind};

fn main() -> relpose::Result<()> {
    let scene = generate_scene(&SceneConfig { seed: 21, ..Default::default() }, SolverKind::Generalized, 5)?;
    let doc = CorrespondenceDoc {
        theta: scene.theta,
        correspondences: scene.correspondences.clone(),
    };
    let text = write_correspondences(&doc);
    println!("{}", text.lines().take(8).collect::<Vec<_>>().join("\n"));
    println!("...");

    let result = cmd_solve(&text)?;
    println!("{}", result.lines().take(6).collect::<Vec<_>>().join("\n"));
    let poses = parse_solve_result(&result)?;
    let best = poses
        .iter()
        .map(|(r, t)| ((r - scene.pose.rotation).norm(), (t - scene.pose.translation).norm()))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one pose");
    println!("{} poses parsed back; best rotation error {:.3e}, translation error {:.3e}", poses.len(), best.0, best.1);
    Ok(())
}
