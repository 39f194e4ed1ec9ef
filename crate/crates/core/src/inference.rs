//! Plug-in asymptotic variance for the MRL estimators.
//!
//! The smooth and step estimators share the i.i.d. expansion
//!
//! ```text
//! √n (m_n(t) − m(t)) ≈ n^{-1/2} Σ_i ψ_i,
//! ψ_i = [ δ_i φ_A(Z_i)/(1−G(Z_i)) + (1−δ_i) γ_A(Z_i) − Γ_A(Z_i)
//!         − m(t) ( δ_i φ_B(Z_i)/(1−G(Z_i)) + (1−δ_i) γ_B(Z_i) − Γ_B(Z_i) ) ] / S(t)
//! ```
//!
//! with `φ_A(x) = (x − t) I(x > t)`, `φ_B(x) = I(x > t)`, and `γ_φ`, `Γ_φ` the
//! censoring corrections of the censored-data CLT. Every population quantity is
//! replaced by its empirical counterpart:
//!
//! * `1 − G(Z_i)` by the left limit of the censoring product-limit curve;
//! * `γ_0(x) = exp{ ∫_0^x H_0(dz) / (1 − H(z−)) }` by a sum over censored points;
//! * `γ_φ(x) = (1−H(x))^{-1} ∫ I(x < w) φ(w) γ_0(w) H_1(dw)` by a ratio of strict
//!   upper-tail sums;
//! * `Γ_φ(x) = ∫∫ I(v < x, v < w) φ(w) γ_0(w) (1 − H(v))^{-2} H_0(dv) H_1(dw)`
//!   by `Σ_{censored Z_j < x} γ_φ(Z_j) / #{Z > Z_j}`.
//!
//! With these choices the `γ` and `Γ` columns have identical sample means, so the
//! correction terms are centred exactly. Where no observation lies strictly above
//! a censored point the correction is cut to zero.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::km::{censoring_km, KmError};
use crate::law::{Law, LawError};
use crate::mrl_smooth::MrlEstimate;
use crate::sample::CensoredSample;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("t = {0} is at or beyond the last failure time")]
    DomainExceeded(f64),
    #[error("censoring correction diverges at x = {0}")]
    TailDivergence(f64),
    #[error("survival estimate must be positive, got {0}")]
    NonPositiveSurvival(f64),
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error(transparent)]
    Km(#[from] KmError),
    #[error(transparent)]
    Law(#[from] LawError),
}

/// Per-observation columns of the influence expansion at one `t`, in sample order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceDecomposition {
    pub t: f64,
    pub m_hat: f64,
    pub s_hat: f64,
    /// `δ_i φ_A(Z_i) / (1 − Ĝ(Z_i−))`
    pub phi_a: Vec<f64>,
    /// `δ_i φ_B(Z_i) / (1 − Ĝ(Z_i−))`
    pub phi_b: Vec<f64>,
    /// `(1 − δ_i) γ̂_A(Z_i)`
    pub gamma1_a: Vec<f64>,
    /// `(1 − δ_i) γ̂_B(Z_i)`
    pub gamma1_b: Vec<f64>,
    /// `Γ̂_A(Z_i)`
    pub gamma2_a: Vec<f64>,
    /// `Γ̂_B(Z_i)`
    pub gamma2_b: Vec<f64>,
}

impl InfluenceDecomposition {
    pub fn psi(&self) -> Vec<f64> {
        (0..self.phi_a.len())
            .map(|i| {
                let a = self.phi_a[i] + self.gamma1_a[i] - self.gamma2_a[i];
                let b = self.phi_b[i] + self.gamma1_b[i] - self.gamma2_b[i];
                (a - self.m_hat * b) / self.s_hat
            })
            .collect()
    }

    /// Sample variance of `ψ` with divisor `n`.
    pub fn variance(&self) -> f64 {
        let psi = self.psi();
        let n = psi.len() as f64;
        let mean = psi.iter().sum::<f64>() / n;
        psi.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n
    }
}

/// Sample-level pieces of the plug-in that do not depend on `t`.
#[derive(Debug, Clone)]
pub struct InfluencePlugin {
    times: Vec<f64>,
    events: Vec<bool>,
    /// `γ̂_0(Z_i)`.
    gamma0: Vec<f64>,
    /// `1 − Ĝ(Z_i−)`.
    censor_surv_left: Vec<f64>,
    /// `#{j : Z_j > Z_i}`.
    above: Vec<usize>,
    /// Index of the first observation tied with `Z_i`.
    group_start: Vec<usize>,
    /// One past the last observation tied with `Z_i`.
    group_end: Vec<usize>,
    last_event: f64,
}

impl InfluencePlugin {
    pub fn new(sample: &CensoredSample) -> Result<Self, InferenceError> {
        let obs = sample.observations();
        let n = obs.len();
        let times: Vec<f64> = obs.iter().map(|o| o.time).collect();
        let events: Vec<bool> = obs.iter().map(|o| o.event).collect();
        let last_event = sample.last_event_time().ok_or(KmError::AllCensored)?;

        let mut group_start = vec![0; n];
        let mut group_end = vec![0; n];
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j < n && times[j] == times[i] {
                j += 1;
            }
            for k in i..j {
                group_start[k] = i;
                group_end[k] = j;
            }
            i = j;
        }
        let above: Vec<usize> = group_end.iter().map(|&e| n - e).collect();

        // Cumulative hazard-type exponent, evaluated through the end of each tie group.
        let mut gamma0 = vec![0.0; n];
        let mut exponent = 0.0;
        let mut i = 0;
        while i < n {
            let end = group_end[i];
            let at_risk = n - group_start[i];
            let censored = (i..end).filter(|&k| !events[k]).count();
            if censored > 0 {
                if at_risk == 0 {
                    return Err(InferenceError::TailDivergence(times[i]));
                }
                exponent += censored as f64 / at_risk as f64;
            }
            for g in gamma0.iter_mut().take(end).skip(i) {
                *g = exponent.exp();
            }
            i = end;
        }

        let g = censoring_km(sample);
        let censor_surv_left = times.iter().map(|&z| g.value_before(z)).collect();

        Ok(Self {
            times,
            events,
            gamma0,
            censor_surv_left,
            above,
            group_start,
            group_end,
            last_event,
        })
    }

    pub fn gamma0(&self) -> &[f64] {
        &self.gamma0
    }

    /// `(1−δ_i) γ̂_φ(Z_i)` and `Γ̂_φ(Z_i)` for a test function `φ`.
    fn corrections<F: Fn(f64) -> f64>(&self, phi: F) -> (Vec<f64>, Vec<f64>) {
        let n = self.times.len();
        // Σ_{events j, Z_j > Z_i} φ(Z_j) γ̂_0(Z_j), via a suffix sum over tie groups.
        let mut weighted = vec![0.0; n + 1];
        for i in (0..n).rev() {
            let v = if self.events[i] { phi(self.times[i]) * self.gamma0[i] } else { 0.0 };
            weighted[i] = weighted[i + 1] + v;
        }
        let gamma_at = |i: usize| -> f64 {
            if self.above[i] == 0 {
                0.0
            } else {
                weighted[self.group_end[i]] / self.above[i] as f64
            }
        };
        let gamma1: Vec<f64> = (0..n)
            .map(|i| if self.events[i] { 0.0 } else { gamma_at(i) })
            .collect();

        // Γ̂(Z_i) = Σ_{censored j, Z_j < Z_i} γ̂(Z_j) / #{Z > Z_j}.
        let mut prefix = vec![0.0; n + 1];
        for j in 0..n {
            let v = if !self.events[j] && self.above[j] > 0 {
                gamma1[j] / self.above[j] as f64
            } else {
                0.0
            };
            prefix[j + 1] = prefix[j] + v;
        }
        let gamma2 = (0..n).map(|i| prefix[self.group_start[i]]).collect();
        (gamma1, gamma2)
    }

    pub fn decompose(&self, t: f64, m_hat: f64, s_hat: f64) -> Result<InfluenceDecomposition, InferenceError> {
        if !(t < self.last_event) {
            return Err(InferenceError::DomainExceeded(t));
        }
        if !(s_hat > 0.0) {
            return Err(InferenceError::NonPositiveSurvival(s_hat));
        }
        let phi_a_fn = |x: f64| if x > t { x - t } else { 0.0 };
        let phi_b_fn = |x: f64| if x > t { 1.0 } else { 0.0 };
        let ipcw = |phi: &dyn Fn(f64) -> f64| -> Result<Vec<f64>, InferenceError> {
            (0..self.times.len())
                .map(|i| {
                    if !self.events[i] {
                        return Ok(0.0);
                    }
                    let v = phi(self.times[i]);
                    if v == 0.0 {
                        return Ok(0.0);
                    }
                    let g = self.censor_surv_left[i];
                    if g <= 0.0 {
                        return Err(InferenceError::TailDivergence(self.times[i]));
                    }
                    Ok(v / g)
                })
                .collect()
        };
        let phi_a = ipcw(&phi_a_fn)?;
        let phi_b = ipcw(&phi_b_fn)?;
        let (gamma1_a, gamma2_a) = self.corrections(phi_a_fn);
        let (gamma1_b, gamma2_b) = self.corrections(phi_b_fn);
        Ok(InfluenceDecomposition {
            t,
            m_hat,
            s_hat,
            phi_a,
            phi_b,
            gamma1_a,
            gamma1_b,
            gamma2_a,
            gamma2_b,
        })
    }
}

/// `γ̂_0(x) = exp{ Σ_{censored Z_j ≤ x} 1 / (n (1 − Ĥ(Z_j−))) }`.
pub fn gamma0_hat(sample: &CensoredSample, x: f64) -> Result<f64, InferenceError> {
    let obs = sample.observations();
    let n = obs.len();
    let mut exponent = 0.0;
    for (j, o) in obs.iter().enumerate() {
        if o.time > x {
            break;
        }
        if !o.event {
            // n (1 − Ĥ(Z_j−)) = #{i : Z_i ≥ Z_j}
            let first = obs[..=j].partition_point(|p| p.time < o.time);
            let at_risk = n - first;
            if at_risk == 0 {
                return Err(InferenceError::TailDivergence(o.time));
            }
            exponent += 1.0 / at_risk as f64;
        }
    }
    Ok(exponent.exp())
}

pub fn influence_values(
    sample: &CensoredSample,
    t: f64,
    m_hat: f64,
    s_hat: f64,
) -> Result<InfluenceDecomposition, InferenceError> {
    InfluencePlugin::new(sample)?.decompose(t, m_hat, s_hat)
}

/// Plug-in `σ̂²(t)`: the divisor-`n` sample variance of `ψ`.
pub fn variance_hat(sample: &CensoredSample, t: f64, m_hat: f64, s_hat: f64) -> Result<f64, InferenceError> {
    Ok(influence_values(sample, t, m_hat, s_hat)?.variance())
}

/// Known-law asymptotic variance `Var(X − t | X > t) / S(t)` for uncensored data.
pub fn complete_data_variance(law: &Law, t: f64) -> Result<f64, InferenceError> {
    Ok(law.complete_data_variance(t)?)
}

/// `z_{1−α/2}`.
pub fn normal_quantile(alpha: f64) -> Result<f64, InferenceError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(InferenceError::InvalidAlpha(alpha));
    }
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(std.inverse_cdf(1.0 - alpha / 2.0))
}

/// `(lower, upper)` of the normal interval `estimate ± z σ̂/√n`.
pub fn confidence_interval(estimate: f64, variance: f64, n: usize, alpha: f64) -> Result<(f64, f64), InferenceError> {
    let half = normal_quantile(alpha)? * (variance / n as f64).sqrt();
    Ok((estimate - half, estimate + half))
}

/// Fills standard errors and interval bounds for every defined point of a curve.
pub fn attach_inference(
    estimate: &mut MrlEstimate,
    sample: &CensoredSample,
    alpha: f64,
) -> Result<(), InferenceError> {
    let z = normal_quantile(alpha)?;
    let plugin = InfluencePlugin::new(sample)?;
    let n = sample.len() as f64;
    for p in estimate.points.iter_mut() {
        let (Some(m), Some(s)) = (p.mrl, p.survival) else {
            continue;
        };
        let se = (plugin.decompose(p.t, m, s)?.variance() / n).sqrt();
        p.stderr = Some(se);
        p.ci_lower = Some(m - z * se);
        p.ci_upper = Some(m + z * se);
    }
    estimate.meta.alpha = Some(alpha);
    Ok(())
}
