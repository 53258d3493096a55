//! Rotations, quaternions, rays and two-view residuals.
//!
//! Conventions used throughout the crate:
//!
//! * The first camera is `[I | 0]`; a pose `(R, t)` maps a point expressed in
//!   the first camera (or rig) frame to the second one: `x2 = R x1 + t`.
//! * Quaternions are scalar-first `(sigma, u)` with `sigma >= 0`.
//! * A Plücker ray is `(q, m)` with unit direction `q` and moment
//!   `m = q × c` for any point `c` on the ray, so that `m × q` is the point
//!   of the ray closest to the origin.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Norm below which a raw quaternion vector part is treated as zero.
pub const RECTIFY_EPS: f64 = 1e-10;

/// `1 - (q1 . r2)^2` below this value means the two rays are parallel.
const PARALLEL_EPS: f64 = 1e-12;

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation matrix of the rotation vector `w` (axis times angle), in
/// closed form.
pub fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let k = skew(w);
    if theta2 < 1e-16 {
        // second-order Taylor expansion; exact to rounding at this size
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    let theta = theta2.sqrt();
    let a = theta.sin() / theta;
    let b = (1.0 - theta.cos()) / theta2;
    Matrix3::identity() + a * k + b * k * k
}

/// Unit quaternion `(sigma, u)` with `sigma >= 0` and `sigma² + |u|² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    pub sigma: f64,
    pub u: Vector3<f64>,
}

impl UnitQuaternion {
    /// Builds a quaternion from its parts, flipping the overall sign when
    /// `sigma < 0` and renormalizing.
    pub fn new(sigma: f64, u: Vector3<f64>) -> Self {
        let n = (sigma * sigma + u.norm_squared()).sqrt();
        let s = if sigma < 0.0 { -1.0 / n } else { 1.0 / n };
        Self {
            sigma: sigma * s,
            u: u * s,
        }
    }

    pub fn identity() -> Self {
        Self {
            sigma: 1.0,
            u: Vector3::zeros(),
        }
    }

    /// Quaternion of the right-handed rotation by `angle` about `axis`
    /// (normalized here). In this parametrization the vector part points
    /// along `-axis`.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let a = axis.normalize();
        Self::new((0.5 * angle).cos(), -a * (0.5 * angle).sin())
    }

    /// Extracts the quaternion of a rotation matrix (Shepperd's method).
    pub fn from_rotation(r: &Matrix3<f64>) -> Self {
        let tr = r.trace();
        let (w, x, y, z);
        if tr > r[(0, 0)] && tr > r[(1, 1)] && tr > r[(2, 2)] {
            let s = 2.0 * (1.0 + tr).sqrt();
            w = 0.25 * s;
            x = (r[(2, 1)] - r[(1, 2)]) / s;
            y = (r[(0, 2)] - r[(2, 0)]) / s;
            z = (r[(1, 0)] - r[(0, 1)]) / s;
        } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
            let s = 2.0 * (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt();
            w = (r[(2, 1)] - r[(1, 2)]) / s;
            x = 0.25 * s;
            y = (r[(0, 1)] + r[(1, 0)]) / s;
            z = (r[(0, 2)] + r[(2, 0)]) / s;
        } else if r[(1, 1)] > r[(2, 2)] {
            let s = 2.0 * (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt();
            w = (r[(0, 2)] - r[(2, 0)]) / s;
            x = (r[(0, 1)] + r[(1, 0)]) / s;
            y = 0.25 * s;
            z = (r[(1, 2)] + r[(2, 1)]) / s;
        } else {
            let s = 2.0 * (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt();
            w = (r[(1, 0)] - r[(0, 1)]) / s;
            x = (r[(0, 2)] + r[(2, 0)]) / s;
            y = (r[(1, 2)] + r[(2, 1)]) / s;
            z = 0.25 * s;
        }
        // The matrix form below uses R = (2s²-1)I + 2(uuᵀ - s[u]×), i.e. the
        // vector part enters with the opposite sign of the usual Hamilton
        // convention.
        Self::new(w, -Vector3::new(x, y, z))
    }

    pub fn to_rotation(&self) -> Matrix3<f64> {
        quat_to_rotation(self)
    }
}

/// `R = (2σ² − 1)I + 2(uuᵀ − σ[u]×)`.
pub fn quat_to_rotation(q: &UnitQuaternion) -> Matrix3<f64> {
    let s = q.sigma;
    Matrix3::identity() * (2.0 * s * s - 1.0) + 2.0 * (q.u * q.u.transpose() - s * skew(&q.u))
}

/// Angle of a rotation matrix, from its trace, in `[0, π]`.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// A known relative rotation angle together with the quaternion scalar part
/// it fixes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationConstraint {
    pub theta: f64,
    pub sigma: f64,
    /// `σ² − 1`, which equals `−|u|²` for every admissible `u`.
    pub tau: f64,
}

impl RotationConstraint {
    pub fn from_angle(theta: f64) -> Result<Self> {
        if !(0.0..std::f64::consts::PI).contains(&theta) {
            return Err(Error::InvalidAngle(theta));
        }
        let sigma2 = (theta.cos() + 1.0) / 2.0;
        Ok(Self {
            theta,
            sigma: sigma2.sqrt(),
            tau: sigma2 - 1.0,
        })
    }

    /// Squared norm every admissible vector part must have.
    pub fn u_norm_squared(&self) -> f64 {
        -self.tau
    }
}

pub fn sigma_from_angle(theta: f64) -> Result<RotationConstraint> {
    RotationConstraint::from_angle(theta)
}

/// Corresponding bearing vectors in two calibrated central views.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingPair {
    pub q1: Vector3<f64>,
    pub q2: Vector3<f64>,
}

impl BearingPair {
    /// Normalizes both directions.
    pub fn new(q1: Vector3<f64>, q2: Vector3<f64>) -> Self {
        Self {
            q1: q1.normalize(),
            q2: q2.normalize(),
        }
    }
}

/// Corresponding rays of two generalized cameras in Plücker coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluckerPair {
    pub q1: Vector3<f64>,
    pub m1: Vector3<f64>,
    pub q2: Vector3<f64>,
    pub m2: Vector3<f64>,
}

impl PluckerPair {
    /// Builds a pair from ray directions and one point on each ray (for
    /// instance the optical center that observed it).
    pub fn from_rays(
        dir1: Vector3<f64>,
        center1: Vector3<f64>,
        dir2: Vector3<f64>,
        center2: Vector3<f64>,
    ) -> Self {
        let q1 = dir1.normalize();
        let q2 = dir2.normalize();
        Self {
            q1,
            m1: q1.cross(&center1),
            q2,
            m2: q2.cross(&center2),
        }
    }

    /// Point of the first ray closest to the origin of its frame.
    pub fn foot1(&self) -> Vector3<f64> {
        self.m1.cross(&self.q1)
    }

    pub fn foot2(&self) -> Vector3<f64> {
        self.m2.cross(&self.q2)
    }

    pub fn directions(&self) -> BearingPair {
        BearingPair {
            q1: self.q1,
            q2: self.q2,
        }
    }
}

/// Per-candidate bookkeeping attached by the solvers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PoseDiagnostics {
    /// Number of input correspondences triangulated in front of both views.
    pub cheiral_count: Option<usize>,
    /// Both translation signs gave the same cheiral count; the solver
    /// returned both.
    pub cheirality_tie: bool,
    /// The translation null vector was not well separated
    /// (`s_min / s_mid > 0.5`).
    pub low_parallax: bool,
}

/// Relative pose of the second camera w.r.t. the first: `x2 = R x1 + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativePose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub quat: UnitQuaternion,
    /// `(λ, μ)` for the anchor correspondence (generalized solver only).
    pub depths: Option<(f64, f64)>,
    pub diagnostics: PoseDiagnostics,
}

impl RelativePose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            quat: UnitQuaternion::from_rotation(&rotation),
            rotation,
            translation,
            depths: None,
            diagnostics: PoseDiagnostics::default(),
        }
    }

    pub fn from_quat(quat: UnitQuaternion, translation: Vector3<f64>) -> Self {
        Self {
            rotation: quat_to_rotation(&quat),
            translation,
            quat,
            depths: None,
            diagnostics: PoseDiagnostics::default(),
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    /// Center of the second camera in the first camera frame.
    pub fn second_center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }
}

/// `q2ᵀ(−[t]×R)q1`: the epipolar constraint with the first camera at the
/// origin.
pub fn epipolar_residual(pose: &RelativePose, pair: &BearingPair) -> f64 {
    -pair
        .q2
        .dot(&pose.translation.cross(&(pose.rotation * pair.q1)))
}

/// Generalized epipolar constraint for camera poses `[R1 | t1]`,
/// `[R2 | t2]` with relative rotation `r = R2 R1ᵀ`:
///
/// `q2ᵀ(R[t1]× − [t2]×R)q1 + q2ᵀ R m1 + m2ᵀ R q1`.
pub fn generalized_epipolar_form(
    r: &Matrix3<f64>,
    t1: &Vector3<f64>,
    t2: &Vector3<f64>,
    pair: &PluckerPair,
) -> f64 {
    let rq1 = r * pair.q1;
    pair.q2.dot(&(r * t1.cross(&pair.q1)))
        - pair.q2.dot(&t2.cross(&rq1))
        + pair.q2.dot(&(r * pair.m1))
        + pair.m2.dot(&rq1)
}

/// Generalized epipolar residual of a relative pose (first rig at the
/// origin).
pub fn generalized_epipolar_residual(pose: &RelativePose, pair: &PluckerPair) -> f64 {
    generalized_epipolar_form(
        &pose.rotation,
        &Vector3::zeros(),
        &pose.translation,
        pair,
    )
}

/// Scales `u_raw` onto the sphere `|u|² = 1 − σ²`.
pub fn rectify_quaternion(u_raw: &Vector3<f64>, c: &RotationConstraint) -> Result<UnitQuaternion> {
    let target = c.u_norm_squared().max(0.0).sqrt();
    if target == 0.0 {
        return Ok(UnitQuaternion {
            sigma: c.sigma,
            u: Vector3::zeros(),
        });
    }
    let n = u_raw.norm();
    if n <= RECTIFY_EPS {
        return Err(Error::NearZeroVector(n));
    }
    Ok(UnitQuaternion {
        sigma: c.sigma,
        u: u_raw * (target / n),
    })
}

/// Midpoint triangulation of the rays `d1 q1` (first camera) and
/// `c2 + d2 r2` with both expressed in the first camera frame.
///
/// Returns `(d1, d2, point)`; the depths are the ray coefficients.
pub fn midpoint(
    q1: &Vector3<f64>,
    c2: &Vector3<f64>,
    r2: &Vector3<f64>,
) -> Result<(f64, f64, Vector3<f64>)> {
    let a = q1.norm_squared();
    let b = q1.dot(r2);
    let c = r2.norm_squared();
    let det = a * c - b * b;
    if det <= PARALLEL_EPS * a * c {
        return Err(Error::SkewDegenerate);
    }
    let e = q1.dot(c2);
    let f = r2.dot(c2);
    // minimize |d1 q1 - c2 - d2 r2|²
    let d1 = (c * e - b * f) / det;
    let d2 = (b * e - a * f) / det;
    let x = 0.5 * (d1 * q1 + c2 + d2 * r2);
    Ok((d1, d2, x))
}

/// Depths of one correspondence under cameras `[I | 0]` and `[R | t]`.
pub fn triangulate_depths(
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
    pair: &BearingPair,
) -> Result<(f64, f64)> {
    let rt = r.transpose();
    let c2 = -(rt * t);
    let r2 = rt * pair.q2;
    midpoint(&pair.q1, &c2, &r2).map(|(d1, d2, _)| (d1, d2))
}

/// Counts correspondences whose midpoint triangulation lies in front of
/// both cameras. Parallel-ray pairs are skipped (reported as `None`).
pub fn triangulate_and_count_cheiral(
    r: &Matrix3<f64>,
    t: &Vector3<f64>,
    pairs: &[BearingPair],
) -> (usize, Vec<Option<(f64, f64)>>) {
    let depths: Vec<_> = pairs
        .iter()
        .map(|p| triangulate_depths(r, t, p).ok())
        .collect();
    let count = depths
        .iter()
        .flatten()
        .filter(|(d1, d2)| *d1 > 0.0 && *d2 > 0.0)
        .count();
    (count, depths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn orthogonality_error(r: &Matrix3<f64>) -> f64 {
        (r.transpose() * r - Matrix3::identity()).norm()
    }

    #[test]
    fn identity_and_half_turn() {
        assert_eq!(quat_to_rotation(&UnitQuaternion::identity()), Matrix3::identity());
        let q = UnitQuaternion {
            sigma: 0.0,
            u: Vector3::x(),
        };
        let r = quat_to_rotation(&q);
        assert_abs_diff_eq!(r, Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)), epsilon = 1e-15);
        assert_abs_diff_eq!(rotation_angle(&r), PI, epsilon = 1e-12);
        assert_eq!(rotation_angle(&Matrix3::identity()), 0.0);
    }

    #[test]
    fn sigma_examples() {
        let c = sigma_from_angle(0.0).unwrap();
        assert_eq!((c.sigma, c.tau), (1.0, 0.0));
        let c = sigma_from_angle(PI / 2.0).unwrap();
        assert_abs_diff_eq!(c.sigma, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(c.tau, -0.5, epsilon = 1e-15);
        let c = sigma_from_angle(2.0 * PI / 3.0).unwrap();
        assert_abs_diff_eq!(c.sigma, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.tau, -0.75, epsilon = 1e-15);
        assert!(matches!(sigma_from_angle(PI), Err(Error::InvalidAngle(_))));
        assert!(matches!(sigma_from_angle(-0.1), Err(Error::InvalidAngle(_))));
        assert!(sigma_from_angle(f64::NAN).is_err());
    }

    #[test]
    fn epipolar_one_liner() {
        let pose = RelativePose::new(Matrix3::identity(), Vector3::x());
        let pair = BearingPair::new(Vector3::z(), Vector3::new(0.0, 1.0, 1.0));
        assert_abs_diff_eq!(epipolar_residual(&pose, &pair), FRAC_1_SQRT_2, epsilon = 1e-15);
        // bilinear in q2
        let scaled = BearingPair {
            q1: pair.q1,
            q2: pair.q2 * 2.0,
        };
        assert_abs_diff_eq!(epipolar_residual(&pose, &scaled), 2.0 * FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn rectify_examples() {
        let c = sigma_from_angle(PI / 2.0).unwrap();
        let q = rectify_quaternion(&Vector3::new(0.3, 0.0, 0.0), &c).unwrap();
        assert_abs_diff_eq!(q.u, Vector3::new(FRAC_1_SQRT_2, 0.0, 0.0), epsilon = 1e-15);

        let exact = Vector3::new(0.5, -0.5, 0.0);
        let q = rectify_quaternion(&exact, &c).unwrap();
        assert_abs_diff_eq!(q.u, exact, epsilon = 1e-15);

        let c0 = sigma_from_angle(0.0).unwrap();
        let q = rectify_quaternion(&Vector3::new(0.2, 0.1, -3.0), &c0).unwrap();
        assert_eq!(q.u, Vector3::zeros());

        assert!(matches!(
            rectify_quaternion(&Vector3::new(1e-11, 0.0, 0.0), &c),
            Err(Error::NearZeroVector(_))
        ));
    }

    #[test]
    fn rotation_quaternion_round_trip() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::new(1.0, 2.0, -0.5), 1.1);
        let r = quat_to_rotation(&q);
        let back = UnitQuaternion::from_rotation(&r);
        assert_abs_diff_eq!(back.sigma, q.sigma, epsilon = 1e-14);
        assert_abs_diff_eq!(back.u, q.u, epsilon = 1e-14);
        assert_abs_diff_eq!(rotation_angle(&r), 1.1, epsilon = 1e-12);
    }

    #[test]
    fn so3_exp_matches_quaternion() {
        let axis = Vector3::new(0.3, -0.2, 0.9).normalize();
        let r = so3_exp(&(axis * 0.7));
        assert!(orthogonality_error(&r) < 1e-14);
        assert_abs_diff_eq!(rotation_angle(&r), 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(r * axis, axis, epsilon = 1e-15);
        assert_eq!(so3_exp(&Vector3::zeros()), Matrix3::identity());
    }

    #[test]
    fn generalized_reduces_to_central() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::new(0.1, 1.0, 0.2), 0.4);
        let pose = RelativePose::from_quat(q, Vector3::new(0.3, -0.1, 0.05));
        let pair = PluckerPair {
            q1: Vector3::new(0.1, 0.2, 1.0).normalize(),
            m1: Vector3::zeros(),
            q2: Vector3::new(-0.2, 0.1, 1.0).normalize(),
            m2: Vector3::zeros(),
        };
        let a = generalized_epipolar_residual(&pose, &pair);
        let b = epipolar_residual(&pose, &pair.directions());
        assert_abs_diff_eq!(a, b, epsilon = 1e-16);
    }

    #[test]
    fn cheirality_counts() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::y(), 0.2);
        let r = quat_to_rotation(&q);
        let t = Vector3::new(-1.0, 0.1, 0.05).normalize();
        let pts = [
            Vector3::new(0.1, 0.2, 3.0),
            Vector3::new(-0.4, 0.1, 2.5),
            Vector3::new(0.3, -0.3, 4.0),
            Vector3::new(0.0, 0.0, 3.5),
        ];
        let pairs: Vec<_> = pts.iter().map(|x| BearingPair::new(*x, r * x + t)).collect();
        assert_eq!(triangulate_and_count_cheiral(&r, &t, &pairs).0, 4);
        assert_eq!(triangulate_and_count_cheiral(&r, &(-t), &pairs).0, 0);
    }

    #[test]
    fn parallel_rays_are_skipped() {
        let r = Matrix3::identity();
        let t = Vector3::x();
        let pair = BearingPair::new(Vector3::z(), Vector3::z());
        assert!(matches!(triangulate_depths(&r, &t, &pair), Err(Error::SkewDegenerate)));
        let (count, depths) = triangulate_and_count_cheiral(&r, &t, &[pair]);
        assert_eq!(count, 0);
        assert_eq!(depths, vec![None]);
    }
}
