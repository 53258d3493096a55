//! RANSAC over the four-point solver with 30% gross outliers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relpose::geom::rotation_angle;
use relpose::robust::{contaminate, ransac_correspondences, RansacConfig};
use relpose::synth::{add_image_noise, generate_scene, Motion, SceneConfig, SolverKind};

fn main() -> relpose::Result<()> {
    let cfg = SceneConfig {
        motion: Motion::Sideways,
        seed: 5,
        ..Default::default()
    };
    let scene = generate_scene(&cfg, SolverKind::Regular, 100)?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut data = add_image_noise(&scene.correspondences, 0.5, &cfg, &mut rng);
    let is_outlier = contaminate(&mut data, 30, &cfg, &mut rng);

    let ransac = RansacConfig::regular_default(cfg.focal_length());
    let res = ransac_correspondences(&data, scene.theta, &ransac)?;

    let kept_outliers = (0..data.len()).filter(|&k| is_outlier[k] && res.inlier_mask[k]).count();
    println!("{} iterations, {} inliers", res.iterations, res.inlier_count);
    println!("outliers accepted as inliers: {kept_outliers} of 30");
    println!("rotation error {:.3e}", (res.pose.rotation - scene.pose.rotation).norm());
    println!("angle check {:.12} vs {:.12}", rotation_angle(&res.pose.rotation), scene.theta);
    let cos = res.pose.translation.dot(&scene.pose.translation.normalize()).clamp(-1.0, 1.0);
    println!("translation direction error {:.4} deg", cos.acos().to_degrees());
    Ok(())
}
