//! Team-level behavioral metrics: fairness, engagement, communication
//! efficiency and response time.

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};

/// Jain index `(sum w)^2 / (n sum w^2)`. An all-zero vector counts as a
/// perfectly equal allocation and yields 1.
pub fn jain_fairness(w: &[f64]) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::Parameter("jain index of an empty vector".into()));
    }
    let sum: f64 = w.iter().sum();
    let sum_sq: f64 = w.iter().map(|v| v * v).sum();
    if sum_sq == 0.0 {
        return Ok(1.0);
    }
    Ok(sum * sum / (w.len() as f64 * sum_sq))
}

/// Directed visit counts `nu_ij(k)`: how often peer `j` visited player `i`
/// during step `k`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VisitLog {
    n: usize,
    /// One row-major `n x n` block per step.
    steps: Vec<Vec<u32>>,
}

impl VisitLog {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            steps: Vec::new(),
        }
    }

    pub fn team_size(&self) -> usize {
        self.n
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Appends an empty step and returns its index.
    pub fn push_step(&mut self) -> usize {
        self.steps.push(vec![0; self.n * self.n]);
        self.steps.len() - 1
    }

    /// Records `count` visits of `visitor` to `host` at step `k`.
    pub fn record(&mut self, k: usize, host: usize, visitor: usize, count: u32) -> Result<()> {
        check_index(k, self.steps.len())?;
        check_index(host, self.n)?;
        check_index(visitor, self.n)?;
        if host == visitor {
            return Err(Error::Parameter("self-visits are not recorded".into()));
        }
        self.steps[k][host * self.n + visitor] += count;
        Ok(())
    }

    pub fn count(&self, k: usize, host: usize, visitor: usize) -> u32 {
        self.steps[k][host * self.n + visitor]
    }
}

/// Mean visits per step and per peer received by player `i`; 0 for an empty log.
pub fn engagement(i: usize, log: &VisitLog) -> Result<f64> {
    check_index(i, log.n)?;
    if log.steps.is_empty() || log.n < 2 {
        return Ok(0.0);
    }
    let total: u64 = log
        .steps
        .iter()
        .map(|s| {
            s[i * log.n..(i + 1) * log.n]
                .iter()
                .map(|&c| c as u64)
                .sum::<u64>()
        })
        .sum();
    Ok(total as f64 / (log.steps.len() * (log.n - 1)) as f64)
}

/// `alpha * clip((t_s + t_bar) / t_max, 0, 1) + (1 - alpha) * e`.
pub fn comm_efficiency(
    settling_time: f64,
    response_time: f64,
    engagement: f64,
    alpha: f64,
    horizon: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!(
            "mixing weight {alpha} outside (0, 1)"
        )));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Parameter(format!(
            "horizon {horizon} must be positive"
        )));
    }
    let time_term = ((settling_time + response_time) / horizon).clamp(0.0, 1.0);
    Ok(alpha * time_term + (1.0 - alpha) * engagement)
}

/// `k * mean(dt_ij)` over the peers' inter-call times; 0 with no peers.
pub fn response_time(gain: f64, inter_call_times: &[f64]) -> Result<f64> {
    if inter_call_times.iter().any(|dt| !(*dt >= 0.0)) {
        return Err(Error::Parameter(
            "inter-call times must be nonnegative".into(),
        ));
    }
    if inter_call_times.is_empty() {
        return Ok(0.0);
    }
    Ok(gain * inter_call_times.iter().sum::<f64>() / inter_call_times.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn jain_examples() {
        assert_eq!(jain_fairness(&[1.0; 4]).unwrap(), 1.0);
        assert_relative_eq!(jain_fairness(&[1.0, 0.0, 0.0]).unwrap(), 1.0 / 3.0);
        assert_relative_eq!(jain_fairness(&[1.0, 2.0, 3.0]).unwrap(), 36.0 / 42.0);
        assert_eq!(jain_fairness(&[0.0; 5]).unwrap(), 1.0);
        assert!(jain_fairness(&[]).is_err());
    }

    #[test]
    fn engagement_examples() {
        let mut log = VisitLog::new(3);
        assert_eq!(engagement(0, &log).unwrap(), 0.0);
        for _ in 0..4 {
            log.push_step();
        }
        assert_eq!(engagement(0, &log).unwrap(), 0.0);
        // six visits to player 0 spread over four steps
        for (k, j) in [(0, 1), (0, 2), (1, 1), (2, 2), (3, 1), (3, 2)] {
            log.record(k, 0, j, 1).unwrap();
        }
        assert_relative_eq!(engagement(0, &log).unwrap(), 0.75);

        let mut full = VisitLog::new(4);
        for _ in 0..5 {
            let k = full.push_step();
            for j in 1..4 {
                full.record(k, 0, j, 1).unwrap();
            }
        }
        assert_eq!(engagement(0, &full).unwrap(), 1.0);
        assert!(full.record(0, 1, 1, 1).is_err());
        assert!(engagement(4, &full).is_err());
    }

    #[test]
    fn comm_efficiency_examples() {
        // normalized time term 0.4
        let v = comm_efficiency(30.0, 18.0, 0.8, 0.5, 120.0).unwrap();
        assert_relative_eq!(v, 0.6, epsilon = 1e-12);
        let near_e = comm_efficiency(30.0, 18.0, 0.8, 1e-9, 120.0).unwrap();
        assert!((near_e - 0.8).abs() < 1e-8);
        let near_t = comm_efficiency(30.0, 18.0, 0.8, 1.0 - 1e-9, 120.0).unwrap();
        assert!((near_t - 0.4).abs() < 1e-8);
        assert!(comm_efficiency(1.0, 1.0, 0.5, 0.0, 120.0).is_err());
        assert!(comm_efficiency(1.0, 1.0, 0.5, 1.0, 120.0).is_err());
        assert_eq!(comm_efficiency(500.0, 0.0, 1.0, 0.5, 120.0).unwrap(), 1.0);
    }

    #[test]
    fn response_time_examples() {
        assert_eq!(response_time(1.0, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(response_time(1.0, &[2.0; 6]).unwrap(), 2.0);
        assert_eq!(response_time(0.5, &[2.0, 4.0]).unwrap(), 1.5);
        assert_eq!(response_time(0.5, &[]).unwrap(), 0.0);
        assert!(response_time(1.0, &[-1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn jain_bounds_and_scale_invariance(
            w in proptest::collection::vec(0.0..10.0f64, 1..20),
            c in 0.01..100.0f64,
            e in -20i32..20,
        ) {
            prop_assume!(w.iter().any(|v| *v > 0.0));
            let n = w.len() as f64;
            let j = jain_fairness(&w).unwrap();
            prop_assert!(j >= 1.0 / n - 1e-12 && j <= 1.0 + 1e-12);
            let scaled: Vec<f64> = w.iter().map(|v| c * v).collect();
            let js = jain_fairness(&scaled).unwrap();
            prop_assert!((js - j).abs() <= 1e-14);
            // power-of-two scaling is exact in floating point
            let pow2: Vec<f64> = w.iter().map(|v| v * 2f64.powi(e)).collect();
            prop_assert_eq!(jain_fairness(&pow2).unwrap(), j);
        }
    }
}
