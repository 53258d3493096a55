//! Five-point relative pose with a known rotation angle for generalized
//! cameras, with metric translation.

use nalgebra::{Matrix3, Matrix4x3, RowVector3, Vector3};

use crate::error::{Error, Result};
use crate::gbsolver::{
    generalized_row_spec, solve_system, SystemDiagnostics, GENERALIZED_DEGREE,
    GENERALIZED_QUOTIENT_SIZE,
};
use crate::geom::{
    midpoint, quat_to_rotation, rectify_quaternion, PluckerPair, RelativePose,
    RotationConstraint, UnitQuaternion,
};
use crate::poly::build_g_polynomials_anchored;
use crate::regular::{check_count, SolveReport, DEFAULT_ANCHOR};

/// Third component of the `(λ, μ, 1)` null vector below which the metric
/// scale is unrecoverable.
pub const SCALE_EPS: f64 = 1e-10;

/// RMS ray distance (relative to the scene extent) under which a rig is
/// treated as a single central camera.
pub const CENTRAL_EPS: f64 = 1e-9;

/// All relative poses of the second rig w.r.t. the first (`x2 = R x1 + t`,
/// metric `t`) consistent with five ray correspondences and the rotation
/// angle `theta`.
pub fn solve_gen5pt_angle(pairs: &[PluckerPair], theta: f64) -> Result<Vec<RelativePose>> {
    solve_gen5pt_angle_with_report(pairs, theta, DEFAULT_ANCHOR).map(|r| r.poses)
}

pub fn solve_gen5pt_angle_with_report(
    pairs: &[PluckerPair],
    theta: f64,
    anchor: usize,
) -> Result<SolveReport> {
    check_count(pairs, 5)?;
    let c = RotationConstraint::from_angle(theta)?;
    let pairs: &[PluckerPair; 5] = pairs.try_into().expect("length checked");
    if anchor >= 5 {
        return Err(Error::Validation(format!("anchor {anchor} out of range")));
    }
    if is_central(pairs.iter().map(|p| (p.q1, p.foot1())))
        && is_central(pairs.iter().map(|p| (p.q2, p.foot2())))
    {
        return Err(Error::ScaleUnobservable);
    }
    let (quats, system) = rotation_candidates(pairs, &c, anchor)?;
    let rotation_candidates = quats.len();
    let mut poses = Vec::new();
    for q in quats {
        if let Some(p) = pose_for_rotation(q, pairs, anchor) {
            poses.push(p);
        }
    }
    if poses.is_empty() {
        return Err(if rotation_candidates > 0 {
            Error::ScaleUnobservable
        } else {
            Error::EmptyCandidates
        });
    }
    Ok(SolveReport {
        poses,
        system,
        rotation_candidates,
    })
}

/// Rotation candidates from the sextic system, rectified onto the
/// constraint sphere.
pub fn rotation_candidates(
    pairs: &[PluckerPair; 5],
    c: &RotationConstraint,
    anchor: usize,
) -> Result<(Vec<UnitQuaternion>, Option<SystemDiagnostics>)> {
    if c.tau == 0.0 {
        return Ok((vec![UnitQuaternion::identity()], None));
    }
    let g = build_g_polynomials_anchored(pairs, c, anchor).map_err(Error::into_degenerate)?;
    let sol = solve_system(
        &g,
        &generalized_row_spec(),
        GENERALIZED_DEGREE,
        GENERALIZED_QUOTIENT_SIZE,
        c,
    )
    .map_err(Error::into_degenerate)?;
    let quats = sol
        .roots
        .iter()
        .filter_map(|u| rectify_quaternion(u, c).ok())
        .collect();
    Ok((quats, Some(sol.diagnostics)))
}

/// Least-squares common point of a bundle of rays `(direction, point)`;
/// true when every ray passes through it to within `CENTRAL_EPS`.
fn is_central(rays: impl Iterator<Item = (Vector3<f64>, Vector3<f64>)> + Clone) -> bool {
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    let mut extent: f64 = 1.0;
    for (q, p) in rays.clone() {
        let proj = Matrix3::identity() - q * q.transpose();
        a += proj;
        b += proj * p;
        extent = extent.max(p.norm());
    }
    let Some(center) = a.try_inverse().map(|inv| inv * b) else {
        // all rays parallel: no finite center
        return false;
    };
    rays.into_iter().all(|(q, p)| {
        let d = center - p;
        (d - q * q.dot(&d)).norm() <= CENTRAL_EPS * extent
    })
}

/// Row of the linear system in `(λ, μ, 1)` contributed by correspondence
/// `j` once the origin sits on the point seen by `anchor`.
fn g_row_numeric(r: &Matrix3<f64>, pairs: &[PluckerPair; 5], anchor: usize, j: usize) -> RowVector3<f64> {
    let (pi, pj) = (&pairs[anchor], &pairs[j]);
    let bil = |a: &Vector3<f64>, b: &Vector3<f64>| b.dot(&(r * a));
    let p1 = pi.q1.cross(&pj.q1);
    let p2 = pi.q2.cross(&pj.q2);
    let c1 = pi.foot1();
    let c2 = pi.foot2();
    RowVector3::new(
        bil(&p1, &pj.q2),
        bil(&pj.q1, &p2),
        bil(&(c1.cross(&pj.q1) + pj.m1), &pj.q2) + bil(&pj.q1, &(c2.cross(&pj.q2) + pj.m2)),
    )
}

/// `(λ, μ)` from the right singular vector of the four stacked rows,
/// or `None` when its last component vanishes.
pub fn anchor_depths(r: &Matrix3<f64>, pairs: &[PluckerPair; 5], anchor: usize) -> Option<(f64, f64)> {
    let mut rows = (0..5).filter(|&j| j != anchor);
    let a = Matrix4x3::from_rows(&[
        g_row_numeric(r, pairs, anchor, rows.next()?),
        g_row_numeric(r, pairs, anchor, rows.next()?),
        g_row_numeric(r, pairs, anchor, rows.next()?),
        g_row_numeric(r, pairs, anchor, rows.next()?),
    ]);
    let svd = a.svd(false, true);
    let v_t = svd.v_t?;
    let k = svd.singular_values.imin();
    let v = v_t.row(k);
    if v[2].abs() < SCALE_EPS {
        return None;
    }
    Some((v[0] / v[2], v[1] / v[2]))
}

fn pose_for_rotation(q: UnitQuaternion, pairs: &[PluckerPair; 5], anchor: usize) -> Option<RelativePose> {
    let r = quat_to_rotation(&q);
    let (lambda, mu) = anchor_depths(&r, pairs, anchor)?;
    let a = &pairs[anchor];
    let t1 = a.foot1() + lambda * a.q1;
    let t2 = a.foot2() + mu * a.q2;
    let mut pose = RelativePose::from_quat(q, t2 - r * t1);
    pose.depths = Some((lambda, mu));
    Some(pose)
}

/// RMS distance from the two rays to their least-squares intersection,
/// with the second ray mapped into the first rig frame by `pose`.
pub fn ray_point_error(pose: &RelativePose, pair: &PluckerPair) -> Result<f64> {
    let rt = pose.rotation.transpose();
    let p1 = pair.foot1();
    let p2 = rt * (pair.foot2() - pose.translation);
    let d2 = rt * pair.q2;
    // rejects near-parallel rays
    midpoint(&pair.q1, &(p2 - p1), &d2)?;
    let n = pair.q1.cross(&d2);
    let gap = (p2 - p1).dot(&n).abs() / n.norm();
    // both distances equal half the gap
    Ok(0.5 * gap)
}
