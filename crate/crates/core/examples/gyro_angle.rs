//! The rotation angle the solvers need, taken from a gyroscope instead of
//! ground truth: integrate a synthetic 200 Hz log and feed the result to
//! the four-point solver.

use nalgebra::Vector3;
use relpose::geom::{rotation_angle, so3_exp};
use relpose::imu::{angle_between_frames, integrate_gyro, GyroSample};
use relpose::regular::solve_4pt_angle;
use relpose::geom::BearingPair;

fn main() -> relpose::Result<()> {
    let rate = |t: f64| Vector3::new(0.4 * (3.0 * t).sin(), 0.25, -0.3 * (2.0 * t).cos());
    let step_ns = 5_000_000;
    let log: Vec<GyroSample> = (0..=200)
        .map(|k| GyroSample::new(k * step_ns, rate(k as f64 * step_ns as f64 * 1e-9)))
        .collect();

    let (t0, t1) = (100_000_000, 900_000_000);
    let r = integrate_gyro(&log, t0, t1)?;
    let theta = angle_between_frames(&log, t0, t1)?;
    println!("integrated angle {theta:.9} rad ({:.4} deg)", theta.to_degrees());

    // fine-step reference for the same rate profile
    let fine = 1000;
    let dt = (t1 - t0) as f64 * 1e-9 / fine as f64;
    let mut r_ref = nalgebra::Matrix3::identity();
    for k in 0..fine {
        let t = t0 as f64 * 1e-9 + (k as f64 + 0.5) * dt;
        r_ref = so3_exp(&(rate(t) * dt)) * r_ref;
    }
    println!("reference angle  {:.9} rad", rotation_angle(&r_ref));

    // a camera rotating with the body, observing four points
    let t = Vector3::new(0.1, 0.0, 0.02);
    let pts = [
        Vector3::new(0.3, -0.2, 2.0),
        Vector3::new(-0.4, 0.1, 2.5),
        Vector3::new(0.1, 0.4, 1.8),
        Vector3::new(-0.2, -0.3, 2.2),
    ];
    let pairs: Vec<_> = pts.iter().map(|x| BearingPair::new(*x, r_ref * x + t)).collect();
    let poses = solve_4pt_angle(&pairs, theta)?;
    let best = poses
        .iter()
        .map(|p| (p.rotation - r_ref).norm())
        .fold(f64::INFINITY, f64::min);
    println!("solver with the gyro angle: best rotation error {best:.3e}");
    println!("gyro-only rotation error    {:.3e}", (r - r_ref).norm());
    Ok(())
}
