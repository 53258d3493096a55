//! RANSAC over the minimal solvers, and the contaminated-scene experiment.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generalized::{ray_point_error, solve_gen5pt_angle};
use crate::geom::{BearingPair, PluckerPair, RelativePose};
use crate::regular::{sampson_error, solve_4pt_angle};
use crate::synth::{
    add_angle_noise, add_image_noise, generate_scene_with_rng, rotation_error, translation_errors,
    trial_rngs, Correspondences, SceneConfig, SolverKind,
};

/// Default Sampson threshold in squared pixels.
pub const DEFAULT_SAMPSON_PX2: f64 = 1.5;

/// Default point-to-ray threshold in scene units.
pub const DEFAULT_RAY_THRESHOLD: f64 = 0.01;

/// A minimal solver plus the per-observation error used to score it.
pub trait MinimalSolver {
    type Obs: Copy;
    const SAMPLE_SIZE: usize;

    fn solve(&self, sample: &[Self::Obs], theta: f64) -> Result<Vec<RelativePose>>;

    /// Error of one observation under `pose`; `+∞` when undefined.
    fn score(&self, pose: &RelativePose, obs: &Self::Obs) -> f64;
}

/// Four-point solver scored by the Sampson error.
#[derive(Debug, Clone, Copy, Default)]
pub struct RegularSolver;

impl MinimalSolver for RegularSolver {
    type Obs = BearingPair;
    const SAMPLE_SIZE: usize = 4;

    fn solve(&self, sample: &[BearingPair], theta: f64) -> Result<Vec<RelativePose>> {
        solve_4pt_angle(sample, theta)
    }

    fn score(&self, pose: &RelativePose, obs: &BearingPair) -> f64 {
        sampson_error(&pose.rotation, &pose.translation, obs)
    }
}

/// Generalized five-point solver scored by the point-to-ray distance.
#[derive(Debug, Clone, Copy, Default)]
pub struct GeneralizedSolver;

impl MinimalSolver for GeneralizedSolver {
    type Obs = PluckerPair;
    const SAMPLE_SIZE: usize = 5;

    fn solve(&self, sample: &[PluckerPair], theta: f64) -> Result<Vec<RelativePose>> {
        solve_gen5pt_angle(sample, theta)
    }

    fn score(&self, pose: &RelativePose, obs: &PluckerPair) -> f64 {
        ray_point_error(pose, obs).unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacConfig {
    pub max_iterations: usize,
    /// Sampson units (normalized image plane, squared) for the regular
    /// solver, scene units for the generalized one.
    pub inlier_threshold: f64,
    pub confidence: f64,
    pub seed: u64,
}

impl RansacConfig {
    /// Default for bearing correspondences: `1.5 px²` through the focal
    /// length `focal_px`.
    pub fn regular_default(focal_px: f64) -> Self {
        Self {
            max_iterations: 1000,
            inlier_threshold: DEFAULT_SAMPSON_PX2 / (focal_px * focal_px),
            confidence: 0.99,
            seed: 0,
        }
    }

    pub fn generalized_default() -> Self {
        Self {
            max_iterations: 1000,
            inlier_threshold: DEFAULT_RAY_THRESHOLD,
            confidence: 0.99,
            seed: 0,
        }
    }

    pub fn for_kind(kind: SolverKind, focal_px: f64) -> Self {
        match kind {
            SolverKind::Regular => Self::regular_default(focal_px),
            SolverKind::Generalized => Self::generalized_default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_threshold > 0.0 && self.inlier_threshold.is_finite()) {
            return Err(Error::Validation(format!(
                "inlier threshold must be positive, got {}",
                self.inlier_threshold
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Validation(format!(
                "confidence must be in (0, 1), got {}",
                self.confidence
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Validation("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub pose: RelativePose,
    pub inlier_mask: Vec<bool>,
    pub inlier_count: usize,
    /// Sum of the scores of the inliers of `pose`.
    pub total_score: f64,
    pub iterations: usize,
    /// Samples the solver rejected.
    pub failed_samples: usize,
    /// Best inlier count after each iteration.
    pub trace: Vec<usize>,
}

/// Iterations needed to draw one all-inlier sample with probability
/// `confidence` when a fraction `inlier_ratio` of observations are inliers.
pub fn required_iterations(inlier_ratio: f64, sample_size: usize, confidence: f64) -> usize {
    let p_good = inlier_ratio.powi(sample_size as i32);
    if p_good >= 1.0 {
        return 1;
    }
    if p_good <= 0.0 {
        return usize::MAX;
    }
    let n = (1.0 - confidence).ln() / (1.0 - p_good).ln();
    if n.is_finite() {
        n.ceil().max(1.0) as usize
    } else {
        usize::MAX
    }
}

/// Hypothesize-and-test with uniform minimal samples. The winner has the
/// most inliers; ties go to the lower total inlier score.
pub fn ransac_estimate<S: MinimalSolver>(
    solver: &S,
    observations: &[S::Obs],
    theta: f64,
    cfg: &RansacConfig,
) -> Result<RansacResult> {
    cfg.validate()?;
    let n = observations.len();
    if n < S::SAMPLE_SIZE {
        return Err(Error::TooFewObservations {
            needed: S::SAMPLE_SIZE,
            got: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(RelativePose, Vec<bool>, usize, f64)> = None;
    let mut trace = Vec::new();
    let mut failed = 0;
    let mut budget = cfg.max_iterations;
    let mut iter = 0;
    let mut subset = Vec::with_capacity(S::SAMPLE_SIZE);
    while iter < budget {
        iter += 1;
        subset.clear();
        subset.extend(sample(&mut rng, n, S::SAMPLE_SIZE).iter().map(|k| observations[k]));
        match solver.solve(&subset, theta) {
            Ok(poses) => {
                for pose in poses {
                    let mut mask = vec![false; n];
                    let mut count = 0;
                    let mut total = 0.0;
                    for (k, obs) in observations.iter().enumerate() {
                        let s = solver.score(&pose, obs);
                        if s <= cfg.inlier_threshold {
                            mask[k] = true;
                            count += 1;
                            total += s;
                        }
                    }
                    let better = match &best {
                        None => true,
                        Some((_, _, c, t)) => count > *c || (count == *c && total < *t),
                    };
                    if better {
                        best = Some((pose, mask, count, total));
                    }
                }
                if let Some((_, _, c, _)) = &best {
                    let need = required_iterations(*c as f64 / n as f64, S::SAMPLE_SIZE, cfg.confidence);
                    budget = budget.min(need.max(iter));
                }
            }
            Err(_) => failed += 1,
        }
        trace.push(best.as_ref().map_or(0, |b| b.2));
    }
    let (pose, inlier_mask, inlier_count, total_score) = best.ok_or(Error::NoHypothesis)?;
    Ok(RansacResult {
        pose,
        inlier_mask,
        inlier_count,
        total_score,
        iterations: iter,
        failed_samples: failed,
        trace,
    })
}

/// RANSAC on either kind of correspondence with the matching solver.
pub fn ransac_correspondences(
    corr: &Correspondences,
    theta: f64,
    cfg: &RansacConfig,
) -> Result<RansacResult> {
    match corr {
        Correspondences::Regular(v) => ransac_estimate(&RegularSolver, v, theta, cfg),
        Correspondences::Generalized(v) => ransac_estimate(&GeneralizedSolver, v, theta, cfg),
    }
}

/// Parameters of the contaminated-scene experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RansacBenchConfig {
    pub scene: SceneConfig,
    pub solver: SolverKind,
    pub noise_px: f64,
    pub angle_noise_sigma: f64,
    pub n_obs: usize,
    pub outlier_frac: f64,
    /// `seed` is replaced per trial.
    pub ransac: RansacConfig,
    pub trials: usize,
}

impl RansacBenchConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.ransac.validate()?;
        if !(0.0..1.0).contains(&self.outlier_frac) {
            return Err(Error::Validation(format!(
                "outlier fraction must be in [0, 1), got {}",
                self.outlier_frac
            )));
        }
        if self.n_obs < self.solver.minimal_size() {
            return Err(Error::TooFewObservations {
                needed: self.solver.minimal_size(),
                got: self.n_obs,
            });
        }
        if !(self.noise_px >= 0.0 && self.angle_noise_sigma >= 0.0) {
            return Err(Error::Validation("noise levels must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacTrialRecord {
    pub trial: usize,
    pub n_outliers: usize,
    /// `+∞` on failure.
    pub rotation_error: f64,
    pub translation_error_deg: f64,
    /// Fraction of true inliers that RANSAC labelled as inliers.
    pub inlier_recall: f64,
    pub inlier_count: usize,
    pub iterations: usize,
    /// Translation error of the solver run once on a uniformly drawn
    /// sample of the contaminated data (best candidate).
    pub single_sample_translation_deg: f64,
    pub failure: Option<String>,
}

fn random_bearing<R: Rng + ?Sized>(cfg: &SceneConfig, rng: &mut R) -> nalgebra::Vector3<f64> {
    let f = cfg.focal_length();
    let x = rng.random_range(0.0..cfg.image_width) - 0.5 * cfg.image_width;
    let y = rng.random_range(0.0..cfg.image_height) - 0.5 * cfg.image_height;
    nalgebra::Vector3::new(x / f, y / f, 1.0).normalize()
}

/// Replaces the second-view observation of `count` randomly chosen
/// correspondences with a random bearing inside the image; returns the
/// outlier mask.
pub fn contaminate<R: Rng + ?Sized>(
    corr: &mut Correspondences,
    count: usize,
    cfg: &SceneConfig,
    rng: &mut R,
) -> Vec<bool> {
    let n = corr.len();
    let mut mask = vec![false; n];
    for k in sample(rng, n, count.min(n)).iter() {
        mask[k] = true;
        let q = random_bearing(cfg, rng);
        match corr {
            Correspondences::Regular(v) => v[k].q2 = q,
            Correspondences::Generalized(v) => {
                let foot = v[k].foot2();
                v[k].q2 = q;
                v[k].m2 = q.cross(&foot);
            }
        }
    }
    mask
}

fn solve_any(corr: &Correspondences, idx: &[usize], theta: f64) -> Result<Vec<RelativePose>> {
    match corr {
        Correspondences::Regular(v) => {
            let s: Vec<_> = idx.iter().map(|&k| v[k]).collect();
            solve_4pt_angle(&s, theta)
        }
        Correspondences::Generalized(v) => {
            let s: Vec<_> = idx.iter().map(|&k| v[k]).collect();
            solve_gen5pt_angle(&s, theta)
        }
    }
}

pub fn run_ransac_trial(cfg: &RansacBenchConfig, trial: usize) -> RansacTrialRecord {
    let (mut srng, mut nrng) = trial_rngs(cfg.scene.seed, trial);
    let n_outliers = (cfg.outlier_frac * cfg.n_obs as f64).round() as usize;
    let mut rec = RansacTrialRecord {
        trial,
        n_outliers,
        rotation_error: f64::INFINITY,
        translation_error_deg: f64::INFINITY,
        inlier_recall: 0.0,
        inlier_count: 0,
        iterations: 0,
        single_sample_translation_deg: f64::INFINITY,
        failure: None,
    };
    let scene = match generate_scene_with_rng(&cfg.scene, cfg.solver, cfg.n_obs, &mut srng) {
        Ok(s) => s,
        Err(e) => {
            rec.failure = Some(e.to_string());
            return rec;
        }
    };
    let mut corr = add_image_noise(&scene.correspondences, cfg.noise_px, &cfg.scene, &mut nrng);
    let theta = add_angle_noise(scene.theta, cfg.angle_noise_sigma, &mut nrng);
    let outliers = contaminate(&mut corr, n_outliers, &cfg.scene, &mut srng);

    let idx: Vec<usize> = sample(&mut srng, cfg.n_obs, cfg.solver.minimal_size()).into_vec();
    if let Ok(poses) = solve_any(&corr, &idx, theta) {
        rec.single_sample_translation_deg = translation_errors(&poses, &scene.pose.translation)
            .map(|(a, _)| a)
            .unwrap_or(f64::INFINITY);
    }

    let rcfg = RansacConfig {
        seed: cfg.ransac.seed ^ (trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
        ..cfg.ransac.clone()
    };
    match ransac_correspondences(&corr, theta, &rcfg) {
        Ok(res) => {
            let candidates = std::slice::from_ref(&res.pose);
            rec.rotation_error = rotation_error(candidates, &scene.pose.rotation).expect("one pose");
            rec.translation_error_deg = translation_errors(candidates, &scene.pose.translation)
                .expect("one pose")
                .0;
            let true_inliers = outliers.iter().filter(|o| !**o).count();
            let hits = res
                .inlier_mask
                .iter()
                .zip(&outliers)
                .filter(|(m, o)| **m && !**o)
                .count();
            rec.inlier_recall = hits as f64 / true_inliers.max(1) as f64;
            rec.inlier_count = res.inlier_count;
            rec.iterations = res.iterations;
        }
        Err(e) => rec.failure = Some(e.to_string()),
    }
    rec
}

pub fn run_ransac_trials(cfg: &RansacBenchConfig) -> Result<Vec<RansacTrialRecord>> {
    cfg.validate()?;
    Ok((0..cfg.trials)
        .into_par_iter()
        .map(|k| run_ransac_trial(cfg, k))
        .collect())
}

/// Means over the trials; failures contribute to `failure_rate` only.
#[derive(Debug, Clone, PartialEq)]
pub struct RansacSummary {
    pub trials: usize,
    pub failure_rate: f64,
    pub mean_rotation_error: f64,
    pub mean_translation_error_deg: f64,
    pub mean_inlier_recall: f64,
    pub mean_single_sample_translation_deg: f64,
}

pub fn summarize_ransac(records: &[RansacTrialRecord]) -> RansacSummary {
    let ok: Vec<_> = records.iter().filter(|r| r.failure.is_none()).collect();
    let mean = |f: &dyn Fn(&RansacTrialRecord) -> f64, rs: &[&RansacTrialRecord]| {
        if rs.is_empty() {
            f64::NAN
        } else {
            rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64
        }
    };
    let all: Vec<_> = records.iter().collect();
    let finite_single: Vec<_> = records
        .iter()
        .filter(|r| r.single_sample_translation_deg.is_finite())
        .collect();
    RansacSummary {
        trials: records.len(),
        failure_rate: (records.len() - ok.len()) as f64 / records.len().max(1) as f64,
        mean_rotation_error: mean(&|r| r.rotation_error, &ok),
        mean_translation_error_deg: mean(&|r| r.translation_error_deg, &ok),
        mean_inlier_recall: mean(&|r| r.inlier_recall, &all),
        mean_single_sample_translation_deg: mean(&|r| r.single_sample_translation_deg, &finite_single),
    }
}
