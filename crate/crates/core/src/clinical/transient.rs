//! Underdamped second-order step response of a player's readiness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const RISE_TOL_S: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransientParams {
    pub damping_ratio: f64,
    /// Radians per second.
    pub natural_frequency: f64,
    /// Beats per minute.
    pub resting_heart_rate: f64,
}

impl TransientParams {
    /// `omega_n = 2 pi b / 60`.
    pub fn from_heart_rate(resting_heart_rate: f64, damping_ratio: f64) -> Result<Self> {
        if !(resting_heart_rate.is_finite() && resting_heart_rate > 0.0) {
            return Err(Error::Parameter(format!(
                "resting heart rate {resting_heart_rate} must be positive"
            )));
        }
        check_damping(damping_ratio)?;
        Ok(Self {
            damping_ratio,
            natural_frequency: 2.0 * std::f64::consts::PI * resting_heart_rate / 60.0,
            resting_heart_rate,
        })
    }

    pub fn from_natural_frequency(natural_frequency: f64, damping_ratio: f64) -> Result<Self> {
        if !(natural_frequency.is_finite() && natural_frequency > 0.0) {
            return Err(Error::Parameter(format!(
                "natural frequency {natural_frequency} must be positive"
            )));
        }
        check_damping(damping_ratio)?;
        Ok(Self {
            damping_ratio,
            natural_frequency,
            resting_heart_rate: natural_frequency * 60.0 / (2.0 * std::f64::consts::PI),
        })
    }

    fn damped_frequency(&self) -> f64 {
        self.natural_frequency * (1.0 - self.damping_ratio * self.damping_ratio).sqrt()
    }

    /// Time of the first overshoot peak, `pi / omega_d`.
    pub fn peak_time(&self) -> f64 {
        std::f64::consts::PI / self.damped_frequency()
    }
}

fn check_damping(z: f64) -> Result<()> {
    if z > 0.0 && z < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "damping ratio {z} outside (0, 1)"
        )))
    }
}

/// Unit step response; zero before the step is applied.
pub fn step_response(t: f64, p: &TransientParams) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let z = p.damping_ratio;
    let root = (1.0 - z * z).sqrt();
    let phi = (z / root).atan();
    1.0 - (-z * p.natural_frequency * t).exp() / root * (p.natural_frequency * root * t - phi).cos()
}

/// Same as [`step_response`], rejecting parameters outside the underdamped range.
pub fn checked_step_response(t: f64, p: &TransientParams) -> Result<f64> {
    check_damping(p.damping_ratio)?;
    Ok(step_response(t, p))
}

fn first_crossing(level: f64, p: &TransientParams) -> f64 {
    // sigma rises monotonically on [0, t_peak] from 0 to 1 + overshoot.
    let (mut lo, mut hi) = (0.0, p.peak_time());
    while hi - lo > RISE_TOL_S {
        let mid = 0.5 * (lo + hi);
        if step_response(mid, p) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// 10% to 90% rise time.
pub fn rise_time(p: &TransientParams) -> f64 {
    first_crossing(0.9, p) - first_crossing(0.1, p)
}

/// `(sigma(t) - sigma(t - dt)) / omega_n`.
pub fn alacrity(t: f64, dt: f64, p: &TransientParams) -> f64 {
    (step_response(t, p) - step_response(t - dt, p)) / p.natural_frequency
}

/// Envelope settling time `-ln(eps sqrt(1 - zeta^2)) / (zeta omega_n)`.
pub fn settling_time(p: &TransientParams, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!(
            "settling band {eps} outside (0, 1)"
        )));
    }
    let z = p.damping_ratio;
    Ok(-(eps * (1.0 - z * z).sqrt()).ln() / (z * p.natural_frequency))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn p07() -> TransientParams {
        TransientParams::from_natural_frequency(2.0 * PI, 0.7).unwrap()
    }

    #[test]
    fn natural_frequency_from_heart_rate() {
        let p = TransientParams::from_heart_rate(60.0, 0.5).unwrap();
        assert_relative_eq!(p.natural_frequency, 2.0 * PI);
        assert!(TransientParams::from_heart_rate(60.0, 1.0).is_err());
        assert!(TransientParams::from_heart_rate(60.0, 0.0).is_err());
        assert!(TransientParams::from_heart_rate(-1.0, 0.5).is_err());
    }

    #[test]
    fn response_endpoints() {
        let p = p07();
        assert!(step_response(0.0, &p).abs() < 1e-12);
        assert!((step_response(50.0, &p) - 1.0).abs() < 1e-12);
        assert_eq!(step_response(-1.0, &p), 0.0);
    }

    #[test]
    fn response_matches_second_order_ode() {
        // sigma'' + 2 zeta w sigma' + w^2 sigma = w^2, sigma(0) = sigma'(0) = 0,
        // integrated with classical RK4 as an independent reference.
        let p = p07();
        let (z, w) = (p.damping_ratio, p.natural_frequency);
        let f = |s: [f64; 2]| [s[1], w * w * (1.0 - s[0]) - 2.0 * z * w * s[1]];
        let dt = 1e-4;
        let mut s = [0.0, 0.0];
        for _ in 0..5000 {
            let k1 = f(s);
            let k2 = f([s[0] + 0.5 * dt * k1[0], s[1] + 0.5 * dt * k1[1]]);
            let k3 = f([s[0] + 0.5 * dt * k2[0], s[1] + 0.5 * dt * k2[1]]);
            let k4 = f([s[0] + dt * k3[0], s[1] + dt * k3[1]]);
            for c in 0..2 {
                s[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        assert!((step_response(0.5, &p) - s[0]).abs() < 1e-10);
    }

    #[test]
    fn rise_time_against_grid_scan() {
        let p = p07();
        let tr = rise_time(&p);
        let dt = 1e-5;
        let mut t10 = None;
        let mut t90 = None;
        let mut k = 0u32;
        while t90.is_none() {
            let t = k as f64 * dt;
            let s = step_response(t, &p);
            if t10.is_none() && s >= 0.1 {
                t10 = Some(t);
            }
            if s >= 0.9 {
                t90 = Some(t);
            }
            k += 1;
        }
        assert!((tr - (t90.unwrap() - t10.unwrap())).abs() < 2e-5);
        assert!((step_response(first_crossing(0.1, &p), &p) - 0.1).abs() < 1e-8);
        assert!((step_response(first_crossing(0.9, &p), &p) - 0.9).abs() < 1e-8);
    }

    #[test]
    fn rise_time_scales_with_frequency() {
        let a = p07();
        let b = TransientParams::from_natural_frequency(4.0 * PI, 0.7).unwrap();
        assert_relative_eq!(rise_time(&b), rise_time(&a) / 2.0, epsilon = 1e-8);
    }

    #[test]
    fn alacrity_examples() {
        let p = p07();
        let want = (step_response(0.1, &p) - step_response(0.09, &p)) / (2.0 * PI);
        assert_relative_eq!(alacrity(0.1, 0.01, &p), want, max_relative = 1e-12);
        assert!(alacrity(60.0, 0.05, &p).abs() < 1e-15);
        assert_eq!(alacrity(0.0, 0.05, &p), 0.0);
    }

    #[test]
    fn settling_time_example() {
        let p = p07();
        assert_relative_eq!(settling_time(&p, 0.02).unwrap(), 0.9660, epsilon = 1e-4);
        let fast = TransientParams::from_natural_frequency(4.0 * PI, 0.7).unwrap();
        assert_relative_eq!(
            settling_time(&fast, 0.02).unwrap(),
            settling_time(&p, 0.02).unwrap() / 2.0,
            epsilon = 1e-12
        );
        assert!(settling_time(&p, 1.0).is_err());
    }

    #[test]
    fn overshoot_for_underdamped() {
        for z in [0.3, 0.5, 0.7] {
            let p = TransientParams::from_natural_frequency(2.0 * PI, z).unwrap();
            let peak = (0..20_000)
                .map(|k| step_response(k as f64 * 1e-4, &p))
                .fold(f64::MIN, f64::max);
            assert!(peak > 1.0);
        }
    }
}
