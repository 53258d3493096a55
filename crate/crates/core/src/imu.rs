//! Relative rotation angle from triple-axis gyroscope logs.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geom::{rotation_angle, so3_exp};

const NS_PER_S: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GyroSample {
    pub timestamp_ns: i64,
    /// Angular rate in rad/s.
    pub w: Vector3<f64>,
}

impl GyroSample {
    pub fn new(timestamp_ns: i64, w: Vector3<f64>) -> Self {
        Self { timestamp_ns, w }
    }
}

fn check_log(samples: &[GyroSample]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Validation("empty gyro log".into()));
    }
    for (k, pair) in samples.windows(2).enumerate() {
        if pair[1].timestamp_ns <= pair[0].timestamp_ns {
            return Err(Error::Validation(format!(
                "gyro timestamps not strictly increasing at sample {}",
                k + 1
            )));
        }
    }
    Ok(())
}

/// Integrates `R_i = exp([w_i]× Δξ_i) R_{i-1}` over `[t_start, t_end]`,
/// holding each sample's rate over the interval that ends at it. Intervals
/// straddling the bounds contribute only their overlapping part.
pub fn integrate_gyro(samples: &[GyroSample], t_start: i64, t_end: i64) -> Result<Matrix3<f64>> {
    check_log(samples)?;
    if t_end < t_start {
        return Err(Error::Validation(format!(
            "interval end {t_end} precedes start {t_start}"
        )));
    }
    let log_start = samples[0].timestamp_ns;
    let log_end = samples[samples.len() - 1].timestamp_ns;
    if t_start < log_start || t_end > log_end {
        return Err(Error::CoverageGap {
            log_start,
            log_end,
            from: t_start,
            to: t_end,
        });
    }
    let mut r = Matrix3::identity();
    for pair in samples.windows(2) {
        let lo = pair[0].timestamp_ns.max(t_start);
        let hi = pair[1].timestamp_ns.min(t_end);
        if hi <= lo {
            continue;
        }
        let dt = (hi - lo) as f64 / NS_PER_S;
        r = so3_exp(&(pair[1].w * dt)) * r;
    }
    Ok(r)
}

/// Rotation angle of the integrated rotation, in `[0, π)`.
pub fn angle_between_frames(samples: &[GyroSample], t_start: i64, t_end: i64) -> Result<f64> {
    let r = integrate_gyro(samples, t_start, t_end)?;
    Ok(rotation_angle(&r).min(std::f64::consts::PI.next_down()))
}

/// Mean rate over the samples in the first `window_ns` of the log, taken
/// as a constant bias (the log is assumed static there).
pub fn estimate_bias(samples: &[GyroSample], window_ns: i64) -> Result<Vector3<f64>> {
    check_log(samples)?;
    let end = samples[0].timestamp_ns.saturating_add(window_ns);
    let window: Vec<_> = samples.iter().take_while(|s| s.timestamp_ns <= end).collect();
    let n = window.len() as f64;
    Ok(window.iter().fold(Vector3::zeros(), |acc, s| acc + s.w) / n)
}

pub fn subtract_bias(samples: &[GyroSample], bias: &Vector3<f64>) -> Vec<GyroSample> {
    samples.iter().map(|s| GyroSample::new(s.timestamp_ns, s.w - bias)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn log(n: usize, step_ns: i64, rate: impl Fn(f64) -> Vector3<f64>) -> Vec<GyroSample> {
        (0..=n)
            .map(|k| {
                let t = k as i64 * step_ns;
                GyroSample::new(t, rate(t as f64 / NS_PER_S))
            })
            .collect()
    }

    #[test]
    fn zero_rates_give_identity() {
        let s = log(50, 10_000_000, |_| Vector3::zeros());
        assert_eq!(integrate_gyro(&s, 0, 500_000_000).unwrap(), Matrix3::identity());
        assert_eq!(angle_between_frames(&s, 0, 500_000_000).unwrap(), 0.0);
    }

    #[test]
    fn constant_rate_is_exact() {
        let w = 0.7;
        let s = log(200, 5_000_000, |_| Vector3::new(0.0, 0.0, w));
        let r = integrate_gyro(&s, 0, 1_000_000_000).unwrap();
        let expect = so3_exp(&Vector3::new(0.0, 0.0, w));
        assert!((r - expect).amax() < 1e-12);
        assert_relative_eq!(angle_between_frames(&s, 0, 1_000_000_000).unwrap(), w, epsilon = 1e-12);
    }

    #[test]
    fn boundary_intervals_are_clipped() {
        let s = log(10, 100_000_000, |_| Vector3::new(0.0, 2.0, 0.0));
        let a = angle_between_frames(&s, 150_000_000, 420_000_000).unwrap();
        assert_relative_eq!(a, 2.0 * 0.27, epsilon = 1e-12);
        assert_eq!(angle_between_frames(&s, 300_000_000, 300_000_000).unwrap(), 0.0);
    }

    #[test]
    fn splitting_the_interval_composes() {
        let s = log(300, 3_000_000, |t| Vector3::new(t.sin(), 0.3 * t, (2.0 * t).cos()));
        let ab = integrate_gyro(&s, 10_000_000, 400_000_000).unwrap();
        let bc = integrate_gyro(&s, 400_000_000, 850_000_000).unwrap();
        let ac = integrate_gyro(&s, 10_000_000, 850_000_000).unwrap();
        assert!((bc * ab - ac).amax() < 1e-10);
    }

    #[test]
    fn coverage_and_ordering_are_checked() {
        let s = log(10, 1000, |_| Vector3::x());
        assert!(matches!(integrate_gyro(&s, -1, 500), Err(Error::CoverageGap { .. })));
        assert!(matches!(integrate_gyro(&s, 0, 10_001), Err(Error::CoverageGap { .. })));
        let mut bad = s.clone();
        bad[3].timestamp_ns = bad[2].timestamp_ns;
        assert!(matches!(integrate_gyro(&bad, 0, 100), Err(Error::Validation(_))));
    }

    #[test]
    fn bias_window_mean() {
        let b = Vector3::new(0.01, -0.02, 0.005);
        let s = log(100, 10_000_000, |t| if t <= 0.2 { b } else { b + Vector3::z() });
        assert_relative_eq!(estimate_bias(&s, 200_000_000).unwrap(), b, epsilon = 1e-15);
        let fixed = subtract_bias(&s, &b);
        assert_relative_eq!(angle_between_frames(&fixed, 0, 1_000_000_000).unwrap(), 0.8, epsilon = 1e-12);
    }
}
