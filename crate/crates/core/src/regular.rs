//! Four-point relative pose with a known rotation angle for calibrated
//! central cameras.

use nalgebra::{Matrix3, Matrix4x3, Vector3};

use crate::error::{Error, Result};
use crate::gbsolver::{
    regular_row_spec, solve_system, SystemDiagnostics, REGULAR_DEGREE, REGULAR_QUOTIENT_SIZE,
};
use crate::geom::{
    quat_to_rotation, rectify_quaternion, skew, triangulate_and_count_cheiral, BearingPair,
    PoseDiagnostics, RelativePose, RotationConstraint, UnitQuaternion,
};
use crate::poly::build_f_polynomials_anchored;

/// Correspondence that anchors the translation parametrization.
pub const DEFAULT_ANCHOR: usize = 0;

/// `s_min / s_mid` above this flags the translation as poorly determined.
pub const LOW_PARALLAX_RATIO: f64 = 0.5;

/// Poses plus what the elimination stage saw.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub poses: Vec<RelativePose>,
    /// `None` on the `θ = 0` shortcut, which skips the elimination.
    pub system: Option<SystemDiagnostics>,
    /// Real roots that survived rectification.
    pub rotation_candidates: usize,
}

pub(crate) fn check_count<T>(items: &[T], needed: usize) -> Result<()> {
    match items.len() {
        n if n < needed => Err(Error::TooFewObservations { needed, got: n }),
        n if n > needed => Err(Error::Validation(format!(
            "minimal solver takes exactly {needed} correspondences, got {n}"
        ))),
        _ => Ok(()),
    }
}

/// All relative poses `[R | t]` (first camera `[I | 0]`, `‖t‖ = 1`)
/// consistent with four correspondences and the rotation angle `theta`.
pub fn solve_4pt_angle(pairs: &[BearingPair], theta: f64) -> Result<Vec<RelativePose>> {
    solve_4pt_angle_with_report(pairs, theta, DEFAULT_ANCHOR).map(|r| r.poses)
}

pub fn solve_4pt_angle_with_report(
    pairs: &[BearingPair],
    theta: f64,
    anchor: usize,
) -> Result<SolveReport> {
    check_count(pairs, 4)?;
    let c = RotationConstraint::from_angle(theta)?;
    let pairs: &[BearingPair; 4] = pairs.try_into().expect("length checked");
    let (quats, system) = rotation_candidates(pairs, &c, anchor)?;
    let rotation_candidates = quats.len();

    let mut poses = Vec::new();
    for q in quats {
        poses.extend(poses_for_rotation(q, pairs));
    }
    if poses.is_empty() {
        return Err(Error::NoCheiralSolution);
    }
    Ok(SolveReport {
        poses,
        system,
        rotation_candidates,
    })
}

/// Rotation candidates from the quartic system, rectified onto the
/// constraint sphere.
pub fn rotation_candidates(
    pairs: &[BearingPair; 4],
    c: &RotationConstraint,
    anchor: usize,
) -> Result<(Vec<UnitQuaternion>, Option<SystemDiagnostics>)> {
    if anchor >= 4 {
        return Err(Error::Validation(format!("anchor {anchor} out of range")));
    }
    if c.tau == 0.0 {
        return Ok((vec![UnitQuaternion::identity()], None));
    }
    let f = build_f_polynomials_anchored(pairs, c, anchor).map_err(Error::into_degenerate)?;
    let sol = solve_system(&f, &regular_row_spec(), REGULAR_DEGREE, REGULAR_QUOTIENT_SIZE, c)
        .map_err(Error::into_degenerate)?;
    let quats = sol
        .roots
        .iter()
        .filter_map(|u| rectify_quaternion(u, c).ok())
        .collect();
    Ok((quats, Some(sol.diagnostics)))
}

/// Unit translation for a fixed rotation: the right singular vector of
/// least singular value of the stacked epipolar rows `(R q1 × q2)ᵀ`.
/// The flag reports `s_min / s_mid > LOW_PARALLAX_RATIO`.
pub fn translation_for_rotation(r: &Matrix3<f64>, pairs: &[BearingPair; 4]) -> (Vector3<f64>, bool) {
    let a = Matrix4x3::from_fn(|i, j| (r * pairs[i].q1).cross(&pairs[i].q2)[j]);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let s = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&x, &y| s[x].total_cmp(&s[y]));
    let t = v_t.row(order[0]).transpose().normalize();
    let low = s[order[0]] > LOW_PARALLAX_RATIO * s[order[1]];
    (t, low)
}

/// Chooses the sign of `t` by cheirality. Both signs are returned, flagged,
/// when they tie; nothing is returned when no point is cheiral.
fn poses_for_rotation(q: UnitQuaternion, pairs: &[BearingPair; 4]) -> Vec<RelativePose> {
    let r = quat_to_rotation(&q);
    let (t, low_parallax) = translation_for_rotation(&r, pairs);
    let (n_pos, _) = triangulate_and_count_cheiral(&r, &t, pairs);
    let (n_neg, _) = triangulate_and_count_cheiral(&r, &(-t), pairs);
    let make = |t: Vector3<f64>, count: usize, tie: bool| {
        let mut p = RelativePose::from_quat(q, t);
        p.diagnostics = PoseDiagnostics {
            cheiral_count: Some(count),
            cheirality_tie: tie,
            low_parallax,
        };
        p
    };
    match n_pos.cmp(&n_neg) {
        _ if n_pos.max(n_neg) == 0 => Vec::new(),
        std::cmp::Ordering::Greater => vec![make(t, n_pos, false)],
        std::cmp::Ordering::Less => vec![make(-t, n_neg, false)],
        std::cmp::Ordering::Equal => vec![make(t, n_pos, true), make(-t, n_neg, true)],
    }
}

/// Sampson approximation of the geometric epipolar error for `E = [t]× R`.
/// Returns `+∞` when both epipolar lines are degenerate.
pub fn sampson_error(r: &Matrix3<f64>, t: &Vector3<f64>, pair: &BearingPair) -> f64 {
    let e = skew(t) * r;
    let ex = e * pair.q1;
    let ety = e.transpose() * pair.q2;
    let num = pair.q2.dot(&ex);
    let den = ex.x * ex.x + ex.y * ex.y + ety.x * ety.x + ety.y * ety.y;
    if den <= f64::MIN_POSITIVE {
        return f64::INFINITY;
    }
    num * num / den
}
