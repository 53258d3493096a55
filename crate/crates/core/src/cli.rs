//! Text formats and command bodies behind the `relpose` binary.
//!
//! Correspondence and result documents use a small key-value grammar:
//! `key = values` lines, `[section]` headers, `#` comments. Floats are
//! written with 17 significant digits so every document re-parses to the
//! same bits.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geom::{BearingPair, PluckerPair, RelativePose};
use crate::imu::{angle_between_frames, estimate_bias, integrate_gyro, subtract_bias, GyroSample};
use crate::regular::SolveReport;
use crate::robust::{run_ransac_trials, summarize_ransac, RansacBenchConfig};
use crate::synth::{
    frobenius_to_degrees, run_trials, solve_minimal, summarize, BenchConfig, Correspondences,
    Motion, Quartiles, SolverKind,
};

/// Inputs whose norm is this close to one are taken verbatim.
const UNIT_TOL: f64 = 1e-12;

/// Relative tolerance on `q · m` for Plücker input.
const INCIDENCE_TOL: f64 = 1e-9;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_vec(v: impl IntoIterator<Item = f64>) -> String {
    v.into_iter().map(fmt_f64).collect::<Vec<_>>().join(" ")
}

pub fn solver_name(kind: SolverKind) -> &'static str {
    match kind {
        SolverKind::Regular => "reg4",
        SolverKind::Generalized => "gen5",
    }
}

pub fn parse_solver(s: &str) -> Result<SolverKind> {
    match s {
        "reg4" | "regular" => Ok(SolverKind::Regular),
        "gen5" | "generalized" => Ok(SolverKind::Generalized),
        _ => Err(Error::Validation(format!("unknown solver `{s}` (expected reg4 or gen5)"))),
    }
}

pub fn parse_motion(s: &str) -> Result<Motion> {
    match s {
        "forward" => Ok(Motion::Forward),
        "sideways" => Ok(Motion::Sideways),
        _ => Err(Error::Validation(format!("unknown motion `{s}` (expected forward or sideways)"))),
    }
}

// ---------------------------------------------------------------------------
// key-value documents

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub line: usize,
    pub name: String,
    pub entries: Vec<Entry>,
}

/// A parsed key-value document: header entries, then named sections.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KvDocument {
    pub header: Vec<Entry>,
    pub sections: Vec<Section>,
}

impl KvDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = KvDocument::default();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(line, content, "unterminated section header"))?
                    .trim();
                doc.sections.push(Section {
                    line,
                    name: name.to_string(),
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::parse(line, content, "expected `key = value`"))?;
            let entry = Entry {
                line,
                key: key.trim().to_string(),
                value: value.trim().to_string(),
            };
            match doc.sections.last_mut() {
                Some(s) => s.entries.push(entry),
                None => doc.header.push(entry),
            }
        }
        Ok(doc)
    }
}

fn find<'a>(entries: &'a [Entry], key: &str) -> Option<&'a Entry> {
    entries.iter().find(|e| e.key == key)
}

fn require<'a>(entries: &'a [Entry], key: &str, line: usize) -> Result<&'a Entry> {
    find(entries, key).ok_or_else(|| Error::parse(line, key, "missing field"))
}

fn parse_scalar(e: &Entry) -> Result<f64> {
    e.value
        .parse::<f64>()
        .map_err(|err| Error::parse(e.line, &e.key, format!("`{}`: {err}", e.value)))
}

fn parse_floats(e: &Entry, n: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = e
        .value
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .collect();
    if parts.len() != n {
        return Err(Error::parse(
            e.line,
            &e.key,
            format!("expected {n} numbers, found {}", parts.len()),
        ));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .map_err(|err| Error::parse(e.line, &e.key, format!("`{p}`: {err}")))
        })
        .collect()
}

fn parse_vec3(e: &Entry) -> Result<Vector3<f64>> {
    let v = parse_floats(e, 3)?;
    Ok(Vector3::new(v[0], v[1], v[2]))
}

fn check_unknown(entries: &[Entry], allowed: &[&str]) -> Result<()> {
    match entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
        Some(e) => Err(Error::parse(e.line, &e.key, "unknown field")),
        None => Ok(()),
    }
}

/// Scales `q` to unit length (and `m` with it), leaving inputs that are
/// already unit untouched.
fn unit_direction(q: Vector3<f64>, e: &Entry) -> Result<(Vector3<f64>, f64)> {
    let n = q.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::parse(e.line, &e.key, "direction must be a finite nonzero vector"));
    }
    if (n - 1.0).abs() <= UNIT_TOL {
        Ok((q, 1.0))
    } else {
        Ok((q / n, n))
    }
}

/// A correspondence document: the known angle and the minimal sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceDoc {
    pub theta: f64,
    pub correspondences: Correspondences,
}

pub fn parse_correspondences(text: &str) -> Result<CorrespondenceDoc> {
    let doc = KvDocument::parse(text)?;
    check_unknown(&doc.header, &["type", "theta_rad"])?;
    let kind = match require(&doc.header, "type", 1)?.value.as_str() {
        "regular" => SolverKind::Regular,
        "generalized" => SolverKind::Generalized,
        other => {
            let e = find(&doc.header, "type").expect("present");
            return Err(Error::parse(
                e.line,
                "type",
                format!("`{other}` is neither regular nor generalized"),
            ));
        }
    };
    let theta = parse_scalar(require(&doc.header, "theta_rad", 1)?)?;
    let mut regular = Vec::new();
    let mut generalized = Vec::new();
    for s in &doc.sections {
        if s.name != "pair" {
            return Err(Error::parse(s.line, &s.name, "unknown section"));
        }
        let q1e = require(&s.entries, "q1", s.line)?;
        let q2e = require(&s.entries, "q2", s.line)?;
        let (q1, n1) = unit_direction(parse_vec3(q1e)?, q1e)?;
        let (q2, n2) = unit_direction(parse_vec3(q2e)?, q2e)?;
        match kind {
            SolverKind::Regular => {
                check_unknown(&s.entries, &["q1", "q2"])?;
                regular.push(BearingPair { q1, q2 });
            }
            SolverKind::Generalized => {
                check_unknown(&s.entries, &["q1", "q2", "m1", "m2"])?;
                let m1e = require(&s.entries, "m1", s.line)?;
                let m2e = require(&s.entries, "m2", s.line)?;
                let m1 = parse_vec3(m1e)? / n1;
                let m2 = parse_vec3(m2e)? / n2;
                for (q, m, e) in [(q1, m1, m1e), (q2, m2, m2e)] {
                    if q.dot(&m).abs() > INCIDENCE_TOL * m.norm().max(1.0) {
                        return Err(Error::parse(e.line, &e.key, "moment is not orthogonal to the direction"));
                    }
                }
                generalized.push(PluckerPair { q1, m1, q2, m2 });
            }
        }
    }
    let correspondences = match kind {
        SolverKind::Regular => Correspondences::Regular(regular),
        SolverKind::Generalized => Correspondences::Generalized(generalized),
    };
    Ok(CorrespondenceDoc { theta, correspondences })
}

pub fn write_correspondences(doc: &CorrespondenceDoc) -> String {
    let mut out = String::new();
    let kind = match doc.correspondences.kind() {
        SolverKind::Regular => "regular",
        SolverKind::Generalized => "generalized",
    };
    let _ = writeln!(out, "type = {kind}");
    let _ = writeln!(out, "theta_rad = {}", fmt_f64(doc.theta));
    match &doc.correspondences {
        Correspondences::Regular(v) => {
            for p in v {
                let _ = writeln!(out, "\n[pair]\nq1 = {}\nq2 = {}", fmt_vec(p.q1.iter().copied()), fmt_vec(p.q2.iter().copied()));
            }
        }
        Correspondences::Generalized(v) => {
            for p in v {
                let _ = writeln!(
                    out,
                    "\n[pair]\nq1 = {}\nm1 = {}\nq2 = {}\nm2 = {}",
                    fmt_vec(p.q1.iter().copied()),
                    fmt_vec(p.m1.iter().copied()),
                    fmt_vec(p.q2.iter().copied()),
                    fmt_vec(p.m2.iter().copied())
                );
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// solve results

/// Result document: solver diagnostics in the header, one `[pose]` section
/// per candidate with `R` row-major, `t`, and the quaternion `(σ, u)`.
pub fn write_solve_result(kind: SolverKind, theta: f64, report: &SolveReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "solver = {}", solver_name(kind));
    let _ = writeln!(out, "theta_rad = {}", fmt_f64(theta));
    let _ = writeln!(out, "n_poses = {}", report.poses.len());
    let _ = writeln!(out, "rotation_candidates = {}", report.rotation_candidates);
    if let Some(d) = &report.system {
        let _ = writeln!(out, "template_shape = {} {}", d.template_shape.0, d.template_shape.1);
        let _ = writeln!(out, "quotient_size = {}", d.quotient_size);
        let _ = writeln!(out, "real_eigenpairs = {}", d.real_eigenpairs);
        let _ = writeln!(out, "dropped_roots = {}", d.dropped_roots);
    }
    for p in &report.poses {
        write_pose(&mut out, p);
    }
    out
}

fn write_pose(out: &mut String, p: &RelativePose) {
    let r = p.rotation.transpose(); // column-major storage; transpose to emit rows
    let _ = writeln!(out, "\n[pose]");
    let _ = writeln!(out, "rotation = {}", fmt_vec(r.iter().copied()));
    let _ = writeln!(out, "translation = {}", fmt_vec(p.translation.iter().copied()));
    let _ = writeln!(
        out,
        "quaternion = {}",
        fmt_vec([p.quat.sigma, p.quat.u.x, p.quat.u.y, p.quat.u.z])
    );
    if let Some((l, m)) = p.depths {
        let _ = writeln!(out, "anchor_depths = {}", fmt_vec([l, m]));
    }
    let d = &p.diagnostics;
    if let Some(c) = d.cheiral_count {
        let _ = writeln!(out, "cheiral_count = {c}");
    }
    let _ = writeln!(out, "cheirality_tie = {}", d.cheirality_tie);
    let _ = writeln!(out, "low_parallax = {}", d.low_parallax);
}

/// Rotations and translations read back from a result document.
pub fn parse_solve_result(text: &str) -> Result<Vec<(Matrix3<f64>, Vector3<f64>)>> {
    let doc = KvDocument::parse(text)?;
    doc.sections
        .iter()
        .filter(|s| s.name == "pose")
        .map(|s| {
            let r = parse_floats(require(&s.entries, "rotation", s.line)?, 9)?;
            let t = parse_vec3(require(&s.entries, "translation", s.line)?)?;
            Ok((Matrix3::from_row_slice(&r), t))
        })
        .collect()
}

pub fn cmd_solve(text: &str) -> Result<String> {
    let doc = parse_correspondences(text)?;
    let report = solve_minimal(&doc.correspondences, doc.theta)?;
    Ok(write_solve_result(doc.correspondences.kind(), doc.theta, &report))
}

// ---------------------------------------------------------------------------
// benchmarks

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_text(s: &str) -> String {
    s.replace([',', '\n'], ";")
}

fn quartile_row(out: &mut String, name: &str, q: &Quartiles) {
    let _ = writeln!(out, "{name},{},{},{}", fmt_f64(q.lower), fmt_f64(q.median), fmt_f64(q.upper));
}

pub const TRIAL_CSV_HEADER: &str = "trial,theta,theta_input,rotation_error,translation_error_deg,scale_error,n_solutions,quotient_size,real_eigenpairs,dropped_roots,template_rows,template_cols,failure";

/// Per-trial CSV, then a quartile table, then run metadata. The bytes
/// depend only on the configuration.
pub fn cmd_synth_bench(cfg: &BenchConfig) -> Result<String> {
    let records = run_trials(cfg)?;
    let mut out = String::new();
    let _ = writeln!(out, "{TRIAL_CSV_HEADER}");
    for r in &records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.trial,
            fmt_f64(r.theta),
            fmt_f64(r.theta_input),
            fmt_f64(r.rotation_error),
            fmt_f64(r.translation_error_deg),
            opt(r.scale_error.map(fmt_f64)),
            r.n_solutions,
            opt(r.quotient_size),
            opt(r.real_eigenpairs),
            opt(r.dropped_roots),
            opt(r.template_shape.map(|s| s.0)),
            opt(r.template_shape.map(|s| s.1)),
            csv_text(r.failure.as_deref().unwrap_or("")),
        );
    }
    if let Some(s) = summarize(&records) {
        let _ = writeln!(out, "\nsummary,lower_quartile,median,upper_quartile");
        quartile_row(&mut out, "rotation_error", &s.rotation);
        let deg = Quartiles {
            lower: frobenius_to_degrees(s.rotation.lower),
            median: frobenius_to_degrees(s.rotation.median),
            upper: frobenius_to_degrees(s.rotation.upper),
        };
        quartile_row(&mut out, "rotation_error_deg", &deg);
        quartile_row(&mut out, "translation_error_deg", &s.translation_deg);
        if let Some(q) = &s.scale {
            quartile_row(&mut out, "scale_error", q);
        }
        let _ = writeln!(out, "\nmeta,value");
        let _ = writeln!(out, "solver,{}", solver_name(cfg.solver));
        let _ = writeln!(out, "trials,{}", s.trials);
        let _ = writeln!(out, "failures,{}", s.failures);
        let _ = writeln!(out, "noise_px,{}", fmt_f64(cfg.noise_px));
        let _ = writeln!(out, "angle_noise_sigma,{}", fmt_f64(cfg.angle_noise_sigma));
        let _ = writeln!(out, "motion,{}", motion_name(cfg.scene.motion));
        let _ = writeln!(out, "seed,{}", cfg.scene.seed);
    }
    Ok(out)
}

fn motion_name(m: Motion) -> &'static str {
    match m {
        Motion::Forward => "forward",
        Motion::Sideways => "sideways",
    }
}

pub const RANSAC_CSV_HEADER: &str = "trial,n_outliers,rotation_error,translation_error_deg,inlier_recall,inlier_count,iterations,single_sample_translation_deg,failure";

/// Per-trial RANSAC CSV plus means. `threshold_is_default` marks the
/// threshold as a built-in default in the metadata.
pub fn cmd_ransac_bench(cfg: &RansacBenchConfig, threshold_is_default: bool) -> Result<String> {
    let records = run_ransac_trials(cfg)?;
    let mut out = String::new();
    let _ = writeln!(out, "{RANSAC_CSV_HEADER}");
    for r in &records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.trial,
            r.n_outliers,
            fmt_f64(r.rotation_error),
            fmt_f64(r.translation_error_deg),
            fmt_f64(r.inlier_recall),
            r.inlier_count,
            r.iterations,
            fmt_f64(r.single_sample_translation_deg),
            csv_text(r.failure.as_deref().unwrap_or("")),
        );
    }
    let s = summarize_ransac(&records);
    let no_hyp = Error::NoHypothesis.to_string();
    let no_hyp_rate = records
        .iter()
        .filter(|r| r.failure.as_deref() == Some(no_hyp.as_str()))
        .count() as f64
        / records.len().max(1) as f64;
    let _ = writeln!(out, "\nsummary,value");
    let _ = writeln!(out, "trials,{}", s.trials);
    let _ = writeln!(out, "failure_rate,{}", fmt_f64(s.failure_rate));
    let _ = writeln!(out, "no_hypothesis_rate,{}", fmt_f64(no_hyp_rate));
    let _ = writeln!(out, "mean_rotation_error,{}", fmt_f64(s.mean_rotation_error));
    let _ = writeln!(out, "mean_translation_error_deg,{}", fmt_f64(s.mean_translation_error_deg));
    let _ = writeln!(out, "mean_inlier_recall,{}", fmt_f64(s.mean_inlier_recall));
    let _ = writeln!(
        out,
        "mean_single_sample_translation_deg,{}",
        fmt_f64(s.mean_single_sample_translation_deg)
    );
    let _ = writeln!(out, "\nmeta,value");
    let _ = writeln!(out, "solver,{}", solver_name(cfg.solver));
    let _ = writeln!(out, "n_obs,{}", cfg.n_obs);
    let _ = writeln!(out, "outlier_frac,{}", fmt_f64(cfg.outlier_frac));
    let _ = writeln!(out, "noise_px,{}", fmt_f64(cfg.noise_px));
    let _ = writeln!(out, "motion,{}", motion_name(cfg.scene.motion));
    let _ = writeln!(out, "inlier_threshold,{}", fmt_f64(cfg.ransac.inlier_threshold));
    let source = if threshold_is_default { "default" } else { "user" };
    let _ = writeln!(out, "inlier_threshold_source,{source}");
    let _ = writeln!(out, "max_iterations,{}", cfg.ransac.max_iterations);
    let _ = writeln!(out, "confidence,{}", fmt_f64(cfg.ransac.confidence));
    let _ = writeln!(out, "seed,{}", cfg.scene.seed);
    Ok(out)
}

// ---------------------------------------------------------------------------
// gyro logs

pub const GYRO_CSV_HEADER: &str = "timestamp_ns,wx,wy,wz";

pub fn parse_gyro_csv(text: &str) -> Result<Vec<GyroSample>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(Error::parse(1, "header", "empty file"));
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["timestamp_ns", "wx", "wy", "wz"] {
        return Err(Error::parse(1, "header", format!("expected `{GYRO_CSV_HEADER}`")));
    }
    let mut samples: Vec<GyroSample> = Vec::new();
    for (k, l) in lines {
        let line = k + 1;
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(Error::parse(line, "row", format!("expected 4 fields, found {}", f.len())));
        }
        let ts = f[0]
            .parse::<i64>()
            .map_err(|e| Error::parse(line, "timestamp_ns", format!("`{}`: {e}", f[0])))?;
        let mut w = Vector3::zeros();
        for (i, name) in ["wx", "wy", "wz"].iter().enumerate() {
            w[i] = f[i + 1]
                .parse::<f64>()
                .map_err(|e| Error::parse(line, *name, format!("`{}`: {e}", f[i + 1])))?;
        }
        if let Some(prev) = samples.last() {
            if ts <= prev.timestamp_ns {
                return Err(Error::parse(line, "timestamp_ns", "timestamps must strictly increase"));
            }
        }
        samples.push(GyroSample::new(ts, w));
    }
    Ok(samples)
}

pub fn write_gyro_csv(samples: &[GyroSample]) -> String {
    let mut out = format!("{GYRO_CSV_HEADER}\n");
    for s in samples {
        let _ = writeln!(out, "{},{},{},{}", s.timestamp_ns, fmt_f64(s.w.x), fmt_f64(s.w.y), fmt_f64(s.w.z));
    }
    out
}

/// Integrated rotation and angle over `[from, to]`; with `bias_window_ns`
/// the mean rate of that leading window is subtracted first.
pub fn cmd_imu_angle(csv: &str, from: i64, to: i64, bias_window_ns: Option<i64>) -> Result<String> {
    let mut samples = parse_gyro_csv(csv)?;
    let mut out = String::new();
    if let Some(win) = bias_window_ns {
        let b = estimate_bias(&samples, win)?;
        samples = subtract_bias(&samples, &b);
        let _ = writeln!(out, "bias = {}", fmt_vec(b.iter().copied()));
    }
    let r = integrate_gyro(&samples, from, to)?;
    let a = angle_between_frames(&samples, from, to)?;
    let _ = writeln!(out, "from_ns = {from}");
    let _ = writeln!(out, "to_ns = {to}");
    let _ = writeln!(out, "rotation = {}", fmt_vec(r.transpose().iter().copied()));
    let _ = writeln!(out, "angle_rad = {}", fmt_f64(a));
    let _ = writeln!(out, "angle_deg = {}", fmt_f64(a.to_degrees()));
    Ok(out)
}
