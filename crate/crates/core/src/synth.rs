//! Synthetic two-view scenes, noise models, error metrics and the Monte
//! Carlo trial runner.
//!
//! Camera 1 sits at the origin looking down `+z`. Camera 2 is displaced by
//! `baseline` along `+z` (forward motion) or `+x` (sideways motion) and
//! rotated by a random axis and an angle drawn uniformly from `theta_range`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitBall, UnitSphere};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generalized::solve_gen5pt_angle_with_report;
use crate::geom::{so3_exp, BearingPair, PluckerPair, RelativePose};
use crate::regular::{solve_4pt_angle_with_report, SolveReport};

/// Rejection-sampling budget per scene point.
pub const MAX_POINT_ATTEMPTS: usize = 1000;

/// Upper clamp for noisy angles, keeping them inside `[0, π)`.
pub const ANGLE_CLAMP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motion {
    Forward,
    Sideways,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Four bearing pairs, central cameras.
    Regular,
    /// Five Plücker pairs, multi-center rigs.
    Generalized,
}

impl SolverKind {
    pub fn minimal_size(self) -> usize {
        match self {
            SolverKind::Regular => 4,
            SolverKind::Generalized => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub distance_to_scene: f64,
    pub scene_depth: f64,
    pub baseline: f64,
    pub image_width: f64,
    pub image_height: f64,
    pub fov_deg: f64,
    pub motion: Motion,
    /// Radius of the balls holding the per-ray optical centers of a
    /// generalized rig.
    pub multi_center_radius: f64,
    /// Ground-truth rotation angles are uniform in this range (radians).
    pub theta_range: (f64, f64),
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            distance_to_scene: 1.0,
            scene_depth: 0.5,
            baseline: 0.1,
            image_width: 752.0,
            image_height: 480.0,
            fov_deg: 60.0,
            motion: Motion::Forward,
            multi_center_radius: 0.05,
            theta_range: (5f64.to_radians(), 60f64.to_radians()),
            seed: 0,
        }
    }
}

impl SceneConfig {
    /// Focal length in pixels from the horizontal field of view.
    pub fn focal_length(&self) -> f64 {
        self.image_width / (2.0 * (self.fov_deg.to_radians() / 2.0).tan())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("distance_to_scene", self.distance_to_scene),
            ("scene_depth", self.scene_depth),
            ("baseline", self.baseline),
            ("image_width", self.image_width),
            ("image_height", self.image_height),
            ("fov_deg", self.fov_deg),
            ("multi_center_radius", self.multi_center_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        if self.fov_deg >= 180.0 {
            return Err(Error::Validation("fov_deg must be below 180".into()));
        }
        if self.scene_depth >= 2.0 * self.distance_to_scene {
            return Err(Error::Validation("scene slab reaches behind the camera".into()));
        }
        let (lo, hi) = self.theta_range;
        if !(0.0 <= lo && lo <= hi && hi < PI) {
            return Err(Error::Validation(format!("theta_range ({lo}, {hi}) is not inside [0, pi)")));
        }
        Ok(())
    }

    fn second_center(&self) -> Vector3<f64> {
        match self.motion {
            Motion::Forward => Vector3::new(0.0, 0.0, self.baseline),
            Motion::Sideways => Vector3::new(self.baseline, 0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Correspondences {
    Regular(Vec<BearingPair>),
    Generalized(Vec<PluckerPair>),
}

impl Correspondences {
    pub fn len(&self) -> usize {
        match self {
            Correspondences::Regular(v) => v.len(),
            Correspondences::Generalized(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> SolverKind {
        match self {
            Correspondences::Regular(_) => SolverKind::Regular,
            Correspondences::Generalized(_) => SolverKind::Generalized,
        }
    }
}

/// A generated scene with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// `x2 = R x1 + t`; for the regular kind `t` is metric here, solvers
    /// return it normalized.
    pub pose: RelativePose,
    pub theta: f64,
    pub points: Vec<Vector3<f64>>,
    pub correspondences: Correspondences,
}

/// Scene drawn from a generator seeded with `cfg.seed`.
pub fn generate_scene(cfg: &SceneConfig, kind: SolverKind, n_points: usize) -> Result<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    generate_scene_with_rng(cfg, kind, n_points, &mut rng)
}

pub fn generate_scene_with_rng<R: Rng + ?Sized>(
    cfg: &SceneConfig,
    kind: SolverKind,
    n_points: usize,
    rng: &mut R,
) -> Result<Scene> {
    cfg.validate()?;
    if n_points < kind.minimal_size() {
        return Err(Error::TooFewObservations {
            needed: kind.minimal_size(),
            got: n_points,
        });
    }
    let (lo, hi) = cfg.theta_range;
    let theta = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let axis = Vector3::from(UnitSphere.sample(rng));
    let r = so3_exp(&(axis * theta));
    let c2 = cfg.second_center();
    let pose = RelativePose::new(r, -(r * c2));

    let f = cfg.focal_length();
    let half_w = 0.5 * cfg.image_width / f;
    let half_h = 0.5 * cfg.image_height / f;
    let near = cfg.distance_to_scene - 0.5 * cfg.scene_depth;
    let far = cfg.distance_to_scene + 0.5 * cfg.scene_depth;
    let radius = cfg.multi_center_radius;

    let mut points = Vec::with_capacity(n_points);
    let mut regular = Vec::new();
    let mut generalized = Vec::new();
    for _ in 0..n_points {
        let mut accepted = false;
        for _ in 0..MAX_POINT_ATTEMPTS {
            let z = rng.random_range(near..=far);
            let x = Vector3::new(
                rng.random_range(-half_w..=half_w) * z,
                rng.random_range(-half_h..=half_h) * z,
                z,
            );
            match kind {
                SolverKind::Regular => {
                    let x2 = r * x + pose.translation;
                    if x2.z <= 0.0 {
                        continue;
                    }
                    regular.push(BearingPair::new(x, x2));
                }
                SolverKind::Generalized => {
                    let o1 = Vector3::from(UnitBall.sample(rng)) * radius;
                    let o2 = c2 + Vector3::from(UnitBall.sample(rng)) * radius;
                    let d1 = x - o1;
                    let d2 = r * (x - o2);
                    if d1.z <= 0.0 || d2.z <= 0.0 {
                        continue;
                    }
                    generalized.push(PluckerPair::from_rays(d1, o1, d2, r * (o2 - c2)));
                }
            }
            points.push(x);
            accepted = true;
            break;
        }
        if !accepted {
            return Err(Error::RetryExhausted(MAX_POINT_ATTEMPTS));
        }
    }
    let correspondences = match kind {
        SolverKind::Regular => Correspondences::Regular(regular),
        SolverKind::Generalized => Correspondences::Generalized(generalized),
    };
    Ok(Scene {
        pose,
        theta,
        points,
        correspondences,
    })
}

fn perturb_bearing<R: Rng + ?Sized>(q: &Vector3<f64>, sigma_px: f64, f: f64, rng: &mut R) -> Vector3<f64> {
    let nx: f64 = StandardNormal.sample(rng);
    let ny: f64 = StandardNormal.sample(rng);
    if q.z <= 0.0 || sigma_px == 0.0 {
        return *q;
    }
    let x = f * q.x / q.z + sigma_px * nx;
    let y = f * q.y / q.z + sigma_px * ny;
    Vector3::new(x / f, y / f, 1.0).normalize()
}

/// Gaussian pixel noise on every bearing, applied on the image plane of
/// focal length `cfg.focal_length()`. Generalized rays keep their optical
/// center; the moment is recomputed from the noisy direction.
///
/// Two normal draws are consumed per bearing regardless of `sigma_px`, so
/// runs that differ only in the noise level see proportional perturbations.
pub fn add_image_noise<R: Rng + ?Sized>(
    corr: &Correspondences,
    sigma_px: f64,
    cfg: &SceneConfig,
    rng: &mut R,
) -> Correspondences {
    let f = cfg.focal_length();
    match corr {
        Correspondences::Regular(v) => Correspondences::Regular(
            v.iter()
                .map(|p| BearingPair {
                    q1: perturb_bearing(&p.q1, sigma_px, f, rng),
                    q2: perturb_bearing(&p.q2, sigma_px, f, rng),
                })
                .collect(),
        ),
        Correspondences::Generalized(v) => Correspondences::Generalized(
            v.iter()
                .map(|p| {
                    let q1 = perturb_bearing(&p.q1, sigma_px, f, rng);
                    let q2 = perturb_bearing(&p.q2, sigma_px, f, rng);
                    if sigma_px == 0.0 {
                        return *p;
                    }
                    PluckerPair {
                        q1,
                        m1: q1.cross(&p.foot1()),
                        q2,
                        m2: q2.cross(&p.foot2()),
                    }
                })
                .collect(),
        ),
    }
}

/// `θ (1 + s)` with `s ~ N(0, sigma²)`, clamped to `[0, π − ANGLE_CLAMP_EPS]`.
pub fn add_angle_noise<R: Rng + ?Sized>(theta: f64, sigma: f64, rng: &mut R) -> f64 {
    let s: f64 = StandardNormal.sample(rng);
    (theta * (1.0 + sigma * s)).clamp(0.0, PI - ANGLE_CLAMP_EPS)
}

/// Smallest Frobenius distance from a candidate rotation to `r_true`.
pub fn rotation_error(candidates: &[RelativePose], r_true: &Matrix3<f64>) -> Result<f64> {
    candidates
        .iter()
        .map(|p| (p.rotation - r_true).norm())
        .min_by(f64::total_cmp)
        .ok_or(Error::EmptyCandidates)
}

/// Rotation angle, in degrees, of a rotation at Frobenius distance `e`
/// from the reference.
pub fn frobenius_to_degrees(e: f64) -> f64 {
    (2.0 * (e / (2.0 * std::f64::consts::SQRT_2)).clamp(-1.0, 1.0).asin()).to_degrees()
}

fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// `(angular error in degrees, relative scale error)`, each minimized over
/// the candidates independently.
pub fn translation_errors(candidates: &[RelativePose], t_true: &Vector3<f64>) -> Result<(f64, f64)> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let n = t_true.norm();
    let mut ang = f64::INFINITY;
    let mut scale = f64::INFINITY;
    for p in candidates {
        ang = ang.min(angle_between(&p.translation, t_true).to_degrees());
        scale = scale.min((p.translation.norm() - n).abs() / n);
    }
    Ok((ang, scale))
}

/// Parameters of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub scene: SceneConfig,
    pub solver: SolverKind,
    pub noise_px: f64,
    pub angle_noise_sigma: f64,
    pub trials: usize,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        if !(self.noise_px >= 0.0 && self.noise_px.is_finite()) {
            return Err(Error::Validation(format!("noise_px must be >= 0, got {}", self.noise_px)));
        }
        if !(self.angle_noise_sigma >= 0.0 && self.angle_noise_sigma.is_finite()) {
            return Err(Error::Validation(format!(
                "angle_noise_sigma must be >= 0, got {}",
                self.angle_noise_sigma
            )));
        }
        Ok(())
    }
}

/// Per-trial random streams: one for the scene, one for the noise, so that
/// changing a noise level leaves the scenes untouched.
pub fn trial_rngs(seed: u64, trial: usize) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut scene = ChaCha8Rng::seed_from_u64(seed);
    scene.set_stream(trial as u64);
    let mut noise = ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973_6521_2121);
    noise.set_stream(trial as u64);
    (scene, noise)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub theta: f64,
    pub theta_input: f64,
    /// `+∞` when the solver failed.
    pub rotation_error: f64,
    pub translation_error_deg: f64,
    /// Generalized runs only.
    pub scale_error: Option<f64>,
    pub n_solutions: usize,
    pub quotient_size: Option<usize>,
    pub real_eigenpairs: Option<usize>,
    pub dropped_roots: Option<usize>,
    pub template_shape: Option<(usize, usize)>,
    pub failure: Option<String>,
}

/// Solves a minimal problem of either kind.
pub fn solve_minimal(corr: &Correspondences, theta: f64) -> Result<SolveReport> {
    match corr {
        Correspondences::Regular(v) => solve_4pt_angle_with_report(v, theta, crate::regular::DEFAULT_ANCHOR),
        Correspondences::Generalized(v) => {
            solve_gen5pt_angle_with_report(v, theta, crate::regular::DEFAULT_ANCHOR)
        }
    }
}

pub fn run_trial(cfg: &BenchConfig, trial: usize) -> TrialRecord {
    let (mut srng, mut nrng) = trial_rngs(cfg.scene.seed, trial);
    let mut rec = TrialRecord {
        trial,
        theta: f64::NAN,
        theta_input: f64::NAN,
        rotation_error: f64::INFINITY,
        translation_error_deg: f64::INFINITY,
        scale_error: (cfg.solver == SolverKind::Generalized).then_some(f64::INFINITY),
        n_solutions: 0,
        quotient_size: None,
        real_eigenpairs: None,
        dropped_roots: None,
        template_shape: None,
        failure: None,
    };
    let scene = match generate_scene_with_rng(&cfg.scene, cfg.solver, cfg.solver.minimal_size(), &mut srng) {
        Ok(s) => s,
        Err(e) => {
            rec.failure = Some(e.to_string());
            return rec;
        }
    };
    rec.theta = scene.theta;
    let corr = add_image_noise(&scene.correspondences, cfg.noise_px, &cfg.scene, &mut nrng);
    let theta = add_angle_noise(scene.theta, cfg.angle_noise_sigma, &mut nrng);
    rec.theta_input = theta;
    match solve_minimal(&corr, theta) {
        Ok(report) => {
            rec.n_solutions = report.poses.len();
            if let Some(d) = &report.system {
                rec.quotient_size = Some(d.quotient_size);
                rec.real_eigenpairs = Some(d.real_eigenpairs);
                rec.dropped_roots = Some(d.dropped_roots);
                rec.template_shape = Some(d.template_shape);
            }
            rec.rotation_error = rotation_error(&report.poses, &scene.pose.rotation).expect("non-empty");
            let (ang, scale) = translation_errors(&report.poses, &scene.pose.translation).expect("non-empty");
            rec.translation_error_deg = ang;
            if cfg.solver == SolverKind::Generalized {
                rec.scale_error = Some(scale);
            }
        }
        Err(e) => rec.failure = Some(e.to_string()),
    }
    rec
}

/// Runs every trial, in parallel; the output order and values do not
/// depend on scheduling.
pub fn run_trials(cfg: &BenchConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    Ok((0..cfg.trials).into_par_iter().map(|k| run_trial(cfg, k)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

/// Quartiles with linear interpolation between order statistics. NaNs are
/// ignored; infinities sort last.
pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let at = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        if lo == hi || v[lo] == v[hi] {
            v[lo]
        } else {
            v[lo] + frac * (v[hi] - v[lo])
        }
    };
    Some(Quartiles {
        lower: at(0.25),
        median: at(0.5),
        upper: at(0.75),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub trials: usize,
    pub failures: usize,
    pub rotation: Quartiles,
    pub translation_deg: Quartiles,
    pub scale: Option<Quartiles>,
}

pub fn summarize(records: &[TrialRecord]) -> Option<BenchSummary> {
    let rot: Vec<_> = records.iter().map(|r| r.rotation_error).collect();
    let tr: Vec<_> = records.iter().map(|r| r.translation_error_deg).collect();
    let sc: Vec<_> = records.iter().filter_map(|r| r.scale_error).collect();
    Some(BenchSummary {
        trials: records.len(),
        failures: records.iter().filter(|r| r.failure.is_some()).count(),
        rotation: quartiles(&rot)?,
        translation_deg: quartiles(&tr)?,
        scale: quartiles(&sc),
    })
}
