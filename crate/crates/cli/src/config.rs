//! Flat `key = value` scenario configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional and
//! falls back to the default 7-player scenario. Unknown or repeated keys
//! are rejected so that a typo never silently runs the default.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use resus_gne::clinical::episode::DEFAULT_DURATION_S;
use resus_gne::game::{DECISION_DIM, DEFAULT_THRESHOLD};
use resus_gne::network::DEFAULT_RADIUS_FT;
use resus_gne::scenario::{ARENA_REFERENCE_N, DEFAULT_ARENA_FT};
use resus_gne::solver::gains::{DEFAULT_ALPHA, DEFAULT_CONSENSUS_ROUNDS, DEFAULT_STEP};
use resus_gne::solver::{
    DEFAULT_DRIFT_DECAY, DEFAULT_DRIFT_STEP_FT, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use resus_gne::{ScenarioParams, SignumMode};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SWEEP: [usize; 6] = [5, 10, 20, 30, 40, 50];

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub n: usize,
    pub duration_s: f64,
    pub radius_ft: f64,
    pub arena_ft: f64,
    pub drift_step_ft: f64,
    pub drift_decay: f64,
    pub thresholds: [f64; DECISION_DIM],
    pub alpha: f64,
    /// `None` means `gamma = n`.
    pub gamma: Option<f64>,
    /// `None` derives the consensus gain from the initial graph.
    pub kappa: Option<f64>,
    pub rho: Option<f64>,
    pub h: f64,
    pub consensus_rounds: usize,
    pub signum: SignumMode,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub record_wall_time: bool,
    pub parallel: bool,
    /// Stopping tolerance of the distributed run inside `verify`.
    pub verify_tol: f64,
    pub chatter_n: usize,
    /// Iterations recorded past the smoothed run's convergence point.
    pub chatter_tail: usize,
    pub sweep_n: Vec<usize>,
    /// Timing repetitions per sweep size; the fastest is kept.
    pub sweep_repeats: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n: 7,
            duration_s: DEFAULT_DURATION_S,
            radius_ft: DEFAULT_RADIUS_FT,
            arena_ft: DEFAULT_ARENA_FT,
            drift_step_ft: DEFAULT_DRIFT_STEP_FT,
            drift_decay: DEFAULT_DRIFT_DECAY,
            thresholds: [DEFAULT_THRESHOLD; DECISION_DIM],
            alpha: DEFAULT_ALPHA,
            gamma: None,
            kappa: None,
            rho: None,
            h: DEFAULT_STEP,
            consensus_rounds: DEFAULT_CONSENSUS_ROUNDS,
            signum: SignumMode::default(),
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            seed: 1,
            out: PathBuf::from("out"),
            record_wall_time: false,
            parallel: false,
            verify_tol: 1e-6,
            chatter_n: 5,
            chatter_tail: 200,
            sweep_n: DEFAULT_SWEEP.to_vec(),
            sweep_repeats: 15,
        }
    }
}

fn bad(line: usize, key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("line {line}: {key}: {msg}"))
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> CliResult<T> {
    v.parse()
        .map_err(|_| bad(line, key, format!("cannot parse {v:?}")))
}

fn flag(line: usize, key: &str, v: &str) -> CliResult<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(line, key, format!("expected a boolean, got {v:?}"))),
    }
}

fn optional(line: usize, key: &str, v: &str) -> CliResult<Option<f64>> {
    if v == "auto" {
        Ok(None)
    } else {
        num(line, key, v).map(Some)
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {line}: expected `key = value`")))?;
            let (key, v) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(bad(line, key, "repeated key"));
            }
            match key {
                "n" => cfg.n = num(line, key, v)?,
                "duration_s" => cfg.duration_s = num(line, key, v)?,
                "radius_ft" => cfg.radius_ft = num(line, key, v)?,
                "arena_ft" => cfg.arena_ft = num(line, key, v)?,
                "drift_step_ft" => cfg.drift_step_ft = num(line, key, v)?,
                "drift_decay" => cfg.drift_decay = num(line, key, v)?,
                "thresholds" => {
                    let vals: Vec<f64> = v
                        .split(',')
                        .map(|s| num(line, key, s.trim()))
                        .collect::<CliResult<_>>()?;
                    cfg.thresholds = match vals.as_slice() {
                        [t] => [*t; DECISION_DIM],
                        [a, f, u] => [*a, *f, *u],
                        _ => return Err(bad(line, key, "expected one or three values")),
                    };
                }
                "alpha" => cfg.alpha = num(line, key, v)?,
                "gamma" => cfg.gamma = optional(line, key, v)?,
                "kappa" => cfg.kappa = optional(line, key, v)?,
                "rho" => cfg.rho = optional(line, key, v)?,
                "h" => cfg.h = num(line, key, v)?,
                "consensus_rounds" => cfg.consensus_rounds = num(line, key, v)?,
                "signum" => cfg.signum = v.parse().map_err(|e| bad(line, key, e))?,
                "tol" => cfg.tol = num(line, key, v)?,
                "max_iter" => cfg.max_iter = num(line, key, v)?,
                "seed" => cfg.seed = num(line, key, v)?,
                "out" => cfg.out = PathBuf::from(v),
                "record_wall_time" => cfg.record_wall_time = flag(line, key, v)?,
                "parallel" => cfg.parallel = flag(line, key, v)?,
                "verify_tol" => cfg.verify_tol = num(line, key, v)?,
                "chatter_n" => cfg.chatter_n = num(line, key, v)?,
                "chatter_tail" => cfg.chatter_tail = num(line, key, v)?,
                "sweep_n" => {
                    cfg.sweep_n = v
                        .split(',')
                        .map(|s| num(line, key, s.trim()))
                        .collect::<CliResult<_>>()?
                }
                "sweep_repeats" => cfg.sweep_repeats = num(line, key, v)?,
                _ => return Err(bad(line, key, "unknown key")),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let positive = [
            ("duration_s", self.duration_s),
            ("radius_ft", self.radius_ft),
            ("arena_ft", self.arena_ft),
            ("alpha", self.alpha),
            ("h", self.h),
            ("verify_tol", self.verify_tol),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Config(format!("{key} = {v} must be positive")));
            }
        }
        for (key, v) in [
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("rho", self.rho),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(CliError::Config(format!("{key} = {v} must be positive")));
                }
            }
        }
        if self.n < 2 {
            return Err(CliError::Config(format!(
                "n = {} must be at least 2",
                self.n
            )));
        }
        if self
            .thresholds
            .iter()
            .any(|t| !(t.is_finite() && *t >= 0.0 && *t < 1.0))
        {
            return Err(CliError::Config("thresholds must lie in [0, 1)".into()));
        }
        if !(self.drift_step_ft.is_finite() && self.drift_step_ft >= 0.0) {
            return Err(CliError::Config("drift_step_ft must be nonnegative".into()));
        }
        if !(self.drift_decay > 0.0 && self.drift_decay <= 1.0) {
            return Err(CliError::Config("drift_decay must lie in (0, 1]".into()));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(CliError::Config("tol must be nonnegative".into()));
        }
        if self.max_iter == 0 || self.consensus_rounds == 0 || self.sweep_repeats == 0 {
            return Err(CliError::Config(
                "max_iter, consensus_rounds and sweep_repeats must be positive".into(),
            ));
        }
        if self.chatter_n < 2 {
            return Err(CliError::Config("chatter_n must be at least 2".into()));
        }
        if self.sweep_n.is_empty() || self.sweep_n.iter().any(|&n| n < 2) {
            return Err(CliError::Config("sweep_n needs sizes of at least 2".into()));
        }
        self.signum
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn scenario_params(&self, n: usize) -> ScenarioParams {
        ScenarioParams {
            n,
            seed: self.seed,
            radius_ft: self.radius_ft,
            arena_ft: self.arena_ft,
            arena_reference_n: ARENA_REFERENCE_N,
            thresholds: self.thresholds,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = ScenarioConfig::parse("# nothing here\n\n").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn parses_every_kind_of_value() {
        let text = "n = 3\nthresholds = 0.1, 0.2, 0.3  # per component\nkappa = 2.5\n\
                    gamma = auto\nsignum = smooth_abs:0.01\nparallel = true\nsweep_n = 5,10\n\
                    out = results/a\n";
        let cfg = ScenarioConfig::parse(text).unwrap();
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.thresholds, [0.1, 0.2, 0.3]);
        assert_eq!(cfg.kappa, Some(2.5));
        assert_eq!(cfg.gamma, None);
        assert_eq!(cfg.signum, SignumMode::SmoothAbsDerivative { alpha: 0.01 });
        assert!(cfg.parallel);
        assert_eq!(cfg.sweep_n, vec![5, 10]);
        assert_eq!(cfg.out, PathBuf::from("results/a"));
        assert_eq!(
            ScenarioConfig::parse("thresholds = 0.3")
                .unwrap()
                .thresholds,
            [0.3; 3]
        );
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "n 7",
            "bogus = 1",
            "n = 3\nn = 4",
            "n = -1",
            "parallel = maybe",
            "thresholds = 0.1, 0.2",
            "signum = cubic",
        ] {
            assert!(ScenarioConfig::parse(text).is_err(), "{text}");
        }
        for text in [
            "n = 1",
            "h = 0",
            "drift_decay = 1.5",
            "kappa = -1",
            "sweep_n = 1,5",
            "thresholds = 1.0",
        ] {
            let cfg = ScenarioConfig::parse(text).unwrap();
            assert!(cfg.validate().is_err(), "{text}");
        }
    }
}
