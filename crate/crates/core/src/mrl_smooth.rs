//! Poisson-smoothed mean residual life.
//!
//! With `S_n` the Efron-modified product-limit curve and `S̃_n(t) = Σ_k S_n(k/λ) p_k(λt)`,
//! the estimator is `m̃_n(t) = ∫_t^∞ S̃_n / S̃_n(t)`. Integrating term by term with
//! `∫_t^∞ p_k(λy) dy = P_k(λt)/λ` turns the numerator into the finite sum
//! `(1/λ) Σ_{k≤N} S_n(k/λ) P_k(λt)`, `N = ⌊λ Z_{n:n}⌋`, where `P_k` is the Poisson CDF.
//! Both sums are formed from Poisson probabilities, never from raw powers `(λt)^k/k!`.
//!
//! Beyond the Poisson window `P_k = 1` to within the tail budget, so that stretch of
//! the numerator is a precomputed suffix sum of the grid table. Cost per point is
//! the window width, independent of `N`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::km::StepSurvival;
use crate::sample::TieRule;
use crate::smoother::{PoissonSmoother, SmootherError};

/// Below this smoothed survival the ratio is reported as undefined.
pub const DENOM_FLOOR: f64 = 1e-10;

pub const DEFAULT_GRID_POINTS: usize = 200;
pub const DEFAULT_T_MAX_FRAC: f64 = 0.95;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MrlError {
    #[error("operation requires an Efron-modified curve")]
    NotEfronModified,
    #[error("t = {0} is at or beyond the last failure time")]
    DomainExceeded(f64),
    #[error("smoothed survival at t = {0} is below the denominator floor")]
    DegenerateDenominator(f64),
    #[error("evaluation grid must be finite, nonnegative and strictly increasing")]
    InvalidGrid,
    #[error("no smoothing parameters supplied")]
    EmptyLambdaList,
    #[error(transparent)]
    Smoother(#[from] SmootherError),
}

/// Why a curve point has no value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Undefined {
    DomainExceeded,
    DegenerateDenominator,
}

/// Precomputed `S_n(k/λ)` table shared by every evaluation point.
#[derive(Debug, Clone)]
pub struct SmoothMrl<'a> {
    step: &'a StepSurvival,
    smoother: PoissonSmoother,
    table: Vec<f64>,
    suffix: Vec<f64>,
    last_event: f64,
}

impl<'a> SmoothMrl<'a> {
    pub fn new(step: &'a StepSurvival, smoother: PoissonSmoother) -> Result<Self, MrlError> {
        if !step.efron_modified() {
            return Err(MrlError::NotEfronModified);
        }
        let lambda = smoother.lambda();
        // One index past ⌊λ Z_{n:n}⌋ so the last nonzero grid value is never missed
        // to rounding; S_n vanishes from Z_{n:n} on.
        let n_max = (lambda * step.last_obs()).floor() + 1.0;
        if n_max >= smoother.max_terms() as f64 {
            return Err(SmootherError::TooManyTerms {
                needed: n_max as usize,
                cap: smoother.max_terms(),
            }
            .into());
        }
        let len = n_max as usize + 1;
        let table: Vec<f64> = (0..len).map(|k| step.value(k as f64 / lambda)).collect();
        let mut suffix = vec![0.0; len + 1];
        for k in (0..len).rev() {
            suffix[k] = suffix[k + 1] + table[k];
        }
        Ok(Self {
            step,
            smoother,
            table,
            suffix,
            last_event: step.last_event().unwrap_or(0.0),
        })
    }

    pub fn smoother(&self) -> &PoissonSmoother {
        &self.smoother
    }

    pub fn step(&self) -> &StepSurvival {
        self.step
    }

    /// `S_n(k/λ)` for `k = 0..=⌊λ Z_{n:n}⌋ + 1`.
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// `S̃_n(t)`.
    pub fn survival(&self, t: f64) -> Result<f64, MrlError> {
        let w = self.smoother.window(self.smoother.lambda() * t)?;
        Ok(w.iter()
            .take_while(|&(k, _)| k < self.table.len())
            .map(|(k, p)| self.table[k] * p)
            .sum())
    }

    /// Numerator and denominator of the ratio at `t`.
    pub fn parts(&self, t: f64) -> Result<(f64, f64), MrlError> {
        let w = self.smoother.window(self.smoother.lambda() * t)?;
        let mut cdf = 0.0;
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, p) in w.iter() {
            if k >= self.table.len() {
                break;
            }
            cdf += p;
            num += self.table[k] * cdf;
            den += self.table[k] * p;
        }
        let after = (w.end() + 1).min(self.table.len());
        num += self.suffix[after];
        Ok((num / self.smoother.lambda(), den))
    }

    /// `∫_t^∞ S̃_n(y) dy`.
    pub fn tail_integral(&self, t: f64) -> Result<f64, MrlError> {
        Ok(self.parts(t)?.0)
    }

    /// `m̃_n(t)`.
    pub fn mrl(&self, t: f64) -> Result<f64, MrlError> {
        self.checked_parts(t).map(|(num, den)| num / den)
    }

    fn checked_parts(&self, t: f64) -> Result<(f64, f64), MrlError> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(SmootherError::InvalidPoint(t).into());
        }
        if t >= self.last_event {
            return Err(MrlError::DomainExceeded(t));
        }
        let (num, den) = self.parts(t)?;
        if den < DENOM_FLOOR {
            return Err(MrlError::DegenerateDenominator(t));
        }
        Ok((num, den))
    }

    /// Evaluates every grid point, flagging rather than failing on undefined points.
    pub fn curve(&self, grid: &[f64]) -> Result<MrlEstimate, MrlError> {
        validate_grid(grid)?;
        let points = grid
            .par_iter()
            .map(|&t| self.point(t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MrlEstimate {
            points,
            lambda_used: self.smoother.lambda(),
            meta: EstimateMeta::from_step(self.step, self.smoother.lambda()),
        })
    }

    fn point(&self, t: f64) -> Result<MrlPoint, MrlError> {
        let (mrl, survival, undefined) = match self.checked_parts(t) {
            Ok((num, den)) => (Some(num / den), Some(den), None),
            Err(MrlError::DomainExceeded(_)) => (None, None, Some(Undefined::DomainExceeded)),
            Err(MrlError::DegenerateDenominator(_)) => {
                (None, None, Some(Undefined::DegenerateDenominator))
            }
            Err(e) => return Err(e),
        };
        Ok(MrlPoint {
            t,
            mrl,
            survival,
            stderr: None,
            ci_lower: None,
            ci_upper: None,
            undefined,
        })
    }
}

fn validate_grid(grid: &[f64]) -> Result<(), MrlError> {
    if grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MrlError::InvalidGrid);
    }
    Ok(())
}

/// Run metadata echoed into every output artifact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateMeta {
    pub n: usize,
    pub lambda: f64,
    pub censoring_rate: f64,
    pub tie_rule: TieRule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Largest observation censored: influence terms beyond it are cut off.
    pub tail_truncated: bool,
}

impl EstimateMeta {
    fn from_step(step: &StepSurvival, lambda: f64) -> Self {
        let censored = step.events().iter().filter(|e| !**e).count();
        Self {
            n: step.n(),
            lambda,
            censoring_rate: censored as f64 / step.n() as f64,
            tie_rule: TieRule::DeathsFirst,
            alpha: None,
            seed: None,
            tail_truncated: step.events().last() == Some(&false),
        }
    }
}

/// One evaluation point of a curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MrlPoint {
    pub t: f64,
    pub mrl: Option<f64>,
    /// `S̃_n(t)`, kept for the variance plug-in.
    pub survival: Option<f64>,
    pub stderr: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub undefined: Option<Undefined>,
}

impl MrlPoint {
    pub fn is_defined(&self) -> bool {
        self.mrl.is_some()
    }
}

/// Smoothed MRL curve over an evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MrlEstimate {
    pub points: Vec<MrlPoint>,
    pub lambda_used: f64,
    pub meta: EstimateMeta,
}

impl MrlEstimate {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.mrl).collect()
    }
}

/// `m̃_n(t)` for a single point.
pub fn smooth_mrl(step: &StepSurvival, smoother: PoissonSmoother, t: f64) -> Result<f64, MrlError> {
    SmoothMrl::new(step, smoother)?.mrl(t)
}

pub fn smooth_mrl_curve(
    step: &StepSurvival,
    smoother: PoissonSmoother,
    grid: &[f64],
) -> Result<MrlEstimate, MrlError> {
    SmoothMrl::new(step, smoother)?.curve(grid)
}

/// One curve per smoothing parameter, in the order given.
pub fn lambda_sweep(
    step: &StepSurvival,
    grid: &[f64],
    lambdas: &[f64],
) -> Result<Vec<MrlEstimate>, MrlError> {
    if lambdas.is_empty() {
        return Err(MrlError::EmptyLambdaList);
    }
    lambdas
        .iter()
        .map(|&l| smooth_mrl_curve(step, PoissonSmoother::new(l)?, grid))
        .collect()
}

/// `points` equispaced values on `[0, frac × last failure time]`.
pub fn default_grid(step: &StepSurvival, points: usize, frac: f64) -> Vec<f64> {
    let upper = frac * step.last_event().unwrap_or(0.0);
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|i| upper * i as f64 / (points - 1) as f64)
            .collect(),
    }
}
