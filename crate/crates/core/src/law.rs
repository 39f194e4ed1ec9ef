//! Parametric lifetime laws with closed-form survival, quantile and residual moments.
//!
//! These are the ground truth for the simulation study: the Weibull residual
//! moments reduce to regularized upper incomplete gamma functions, the others
//! are elementary.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("t = {t} lies outside the support of {law}")]
    OutsideSupport { t: f64, law: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Law {
    Exponential { rate: f64 },
    Weibull { shape: f64, scale: f64 },
    Uniform { upper: f64 },
}

impl std::fmt::Display for Law {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Law::Exponential { rate } => write!(f, "Exponential(rate={rate})"),
            Law::Weibull { shape, scale } => write!(f, "Weibull(shape={shape}, scale={scale})"),
            Law::Uniform { upper } => write!(f, "Uniform(0, {upper})"),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), LawError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(LawError::InvalidParameter(format!("{name} must be finite and positive, got {v}")))
    }
}

impl Law {
    pub fn validate(&self) -> Result<(), LawError> {
        match *self {
            Law::Exponential { rate } => positive("rate", rate),
            Law::Weibull { shape, scale } => positive("shape", shape).and(positive("scale", scale)),
            Law::Uniform { upper } => positive("upper", upper),
        }
    }

    /// Right end of the support (`∞` for unbounded laws).
    pub fn upper_support(&self) -> f64 {
        match *self {
            Law::Uniform { upper } => upper,
            _ => f64::INFINITY,
        }
    }

    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match *self {
            Law::Exponential { rate } => (-rate * t).exp(),
            Law::Weibull { shape, scale } => (-(t / scale).powf(shape)).exp(),
            Law::Uniform { upper } => (1.0 - t / upper).max(0.0),
        }
    }

    /// Inverse of the distribution function, `p ∈ [0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Law::Exponential { rate } => -(-p).ln_1p() / rate,
            Law::Weibull { shape, scale } => scale * (-(-p).ln_1p()).powf(1.0 / shape),
            Law::Uniform { upper } => upper * p,
        }
    }

    fn check_support(&self, t: f64) -> Result<(), LawError> {
        if t.is_finite() && t >= 0.0 && t < self.upper_support() {
            Ok(())
        } else {
            Err(LawError::OutsideSupport { t, law: self.to_string() })
        }
    }

    /// `E[(X − t)^j | X > t]` for `j ∈ {1, 2}`.
    fn residual_moment(&self, t: f64, j: u32) -> f64 {
        match *self {
            Law::Exponential { rate } => match j {
                1 => 1.0 / rate,
                _ => 2.0 / (rate * rate),
            },
            Law::Uniform { upper } => {
                let w = upper - t;
                match j {
                    1 => w / 2.0,
                    _ => w * w / 3.0,
                }
            }
            Law::Weibull { shape, scale } => {
                // ∫_t^∞ u^{j-1} S(u) du = scale^j / shape · Γ(j/shape) Q(j/shape, (t/scale)^shape).
                let x = (t / scale).powf(shape);
                let s = (-x).exp();
                let upper = |a: f64| if x > 0.0 { gamma(a) * gamma_ur(a, x) } else { gamma(a) };
                let i0 = scale / shape * upper(1.0 / shape);
                match j {
                    1 => i0 / s,
                    _ => {
                        let i1 = scale * scale / shape * upper(2.0 / shape);
                        2.0 * (i1 - t * i0) / s
                    }
                }
            }
        }
    }

    /// `m(t) = E[X − t | X > t]`.
    pub fn mean_residual_life(&self, t: f64) -> Result<f64, LawError> {
        self.validate()?;
        self.check_support(t)?;
        Ok(self.residual_moment(t, 1))
    }

    /// `Var(X − t | X > t) / S(t)`, the complete-data asymptotic variance of the MRL estimator.
    pub fn complete_data_variance(&self, t: f64) -> Result<f64, LawError> {
        self.validate()?;
        self.check_support(t)?;
        let m = self.residual_moment(t, 1);
        let second = self.residual_moment(t, 2);
        Ok((second - m * m).max(0.0) / self.survival(t))
    }
}
