use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BETA: f64 = 50.0;
pub const DEFAULT_SMOOTH_ALPHA: f64 = 0.01;

/// Sign function used by the consensus terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SignumMode {
    Discontinuous,
    Tanh {
        beta: f64,
    },
    /// `v / sqrt(v^2 + alpha^2)`, the derivative of the smooth absolute value.
    SmoothAbsDerivative {
        alpha: f64,
    },
}

impl Default for SignumMode {
    fn default() -> Self {
        SignumMode::Tanh { beta: DEFAULT_BETA }
    }
}

impl SignumMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SignumMode::Discontinuous => Ok(()),
            SignumMode::Tanh { beta } if beta > 0.0 && beta.is_finite() => Ok(()),
            SignumMode::SmoothAbsDerivative { alpha } if alpha > 0.0 && alpha.is_finite() => Ok(()),
            other => Err(Error::Parameter(format!(
                "invalid signum parameter in {other:?}"
            ))),
        }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        match *self {
            SignumMode::Discontinuous => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            SignumMode::Tanh { beta } => (beta * v).tanh(),
            SignumMode::SmoothAbsDerivative { alpha } => v / (v * v + alpha * alpha).sqrt(),
        }
    }

    /// Slope at the origin; the discontinuous mode borrows the default tanh
    /// slope so that all modes share one gain rule.
    pub fn gain_slope(&self) -> f64 {
        match *self {
            SignumMode::Discontinuous => DEFAULT_BETA,
            SignumMode::Tanh { beta } => beta,
            SignumMode::SmoothAbsDerivative { alpha } => 1.0 / alpha,
        }
    }
}

pub fn signum(v: &[f64], mode: SignumMode) -> Vec<f64> {
    v.iter().map(|&x| mode.apply(x)).collect()
}

impl fmt::Display for SignumMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignumMode::Discontinuous => write!(f, "sign"),
            SignumMode::Tanh { beta } => write!(f, "tanh:{beta}"),
            SignumMode::SmoothAbsDerivative { alpha } => write!(f, "smooth_abs:{alpha}"),
        }
    }
}

/// Accepts `sign`, `tanh`, `tanh:<beta>`, `smooth_abs`, `smooth_abs:<alpha>`.
impl FromStr for SignumMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.split_once(':') {
            Some((a, b)) => (a.trim(), Some(b.trim())),
            None => (s.trim(), None),
        };
        let value = |default: f64| -> Result<f64> {
            param.map_or(Ok(default), |p| {
                p.parse()
                    .map_err(|_| Error::Parse(format!("bad signum parameter {p:?}")))
            })
        };
        let mode = match name {
            "sign" | "discontinuous" if param.is_none() => SignumMode::Discontinuous,
            "tanh" => SignumMode::Tanh {
                beta: value(DEFAULT_BETA)?,
            },
            "smooth_abs" => SignumMode::SmoothAbsDerivative {
                alpha: value(DEFAULT_SMOOTH_ALPHA)?,
            },
            _ => return Err(Error::Parse(format!("unknown signum mode {s:?}"))),
        };
        mode.validate()?;
        Ok(mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MODES: [SignumMode; 3] = [
        SignumMode::Discontinuous,
        SignumMode::Tanh { beta: DEFAULT_BETA },
        SignumMode::SmoothAbsDerivative {
            alpha: DEFAULT_SMOOTH_ALPHA,
        },
    ];

    #[test]
    fn examples() {
        for m in MODES {
            assert_eq!(m.apply(0.0), 0.0);
        }
        assert!((MODES[1].apply(0.1) - 5f64.tanh()).abs() < 1e-15);
        assert!((MODES[1].apply(0.1) - 0.99991).abs() < 1e-5);
        assert!((MODES[2].apply(0.01) - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(signum(&[-2.0, 0.0, 3.0], MODES[0]), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn parse_round_trip() {
        for m in MODES {
            assert_eq!(m.to_string().parse::<SignumMode>().unwrap(), m);
        }
        assert_eq!("tanh".parse::<SignumMode>().unwrap(), SignumMode::default());
        assert!("tanh:-1".parse::<SignumMode>().is_err());
        assert!("sgn".parse::<SignumMode>().is_err());
    }

    proptest! {
        #[test]
        fn odd_and_bounded(v in -10.0..10.0f64) {
            for m in MODES {
                prop_assert_eq!(m.apply(-v), -m.apply(v));
                prop_assert!(m.apply(v).abs() <= 1.0);
            }
        }
    }
}
