//! Poisson weights and the Hille smoothing operator.
//!
//! For a function `u` known on the grid `{k/λ}`, the smoothed value at `t` is
//! `Σ_k u(k/λ) p_k(λt)` with `p_k(μ) = e^{−μ} μ^k / k!`. As `λ → ∞` this
//! converges to `u(t)` uniformly on compacts.
//!
//! Weights are evaluated from the mode outward. The anchor term uses Loader's
//! saddle-point form `p_k(μ) = exp(−stirlerr(k) − bd0(k, μ)) / √(2πk)`, which
//! keeps full relative precision at `μ ~ 1e7` where a plain
//! `exp(k ln μ − μ − ln k!)` would lose ten digits to cancellation. Neighbouring
//! terms follow from `p_{k+1} = p_k μ/(k+1)`. The window stops once a geometric
//! bound on the excluded mass on each side falls below a quarter of the tail budget.

use thiserror::Error;

use crate::sample::CensoredSample;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub const DEFAULT_TAIL_EPSILON: f64 = 1e-12;
pub const DEFAULT_MAX_TERMS: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmootherError {
    #[error("smoothing parameter must be finite and positive, got {0}")]
    InvalidLambda(f64),
    #[error("tail epsilon must lie in (0, 1e-9], got {0}")]
    InvalidTailEpsilon(f64),
    #[error("max_terms must be at least 1")]
    InvalidMaxTerms,
    #[error("grid covers k = 0..={available} but index {needed} is required")]
    GridTooShort { needed: usize, available: usize },
    #[error("{needed} terms exceed the cap of {cap}")]
    TooManyTerms { needed: usize, cap: usize },
    #[error("evaluation point must be finite and nonnegative, got {0}")]
    InvalidPoint(f64),
}

/// `ln(k!) − ln(√(2πk) (k/e)^k)`.
fn stirlerr(k: u64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let n = k as f64;
    if k <= 15 {
        let ln_fact = (1..=k).map(|j| j as f64).product::<f64>().ln();
        return ln_fact - (n + 0.5) * n.ln() + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    if k > 500 {
        (S0 - S1 / nn) / n
    } else if k > 80 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if k > 35 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/μ) + μ − x`, evaluated without cancellation near `x = μ`.
fn bd0(x: f64, mu: f64) -> f64 {
    if (x - mu).abs() < 0.1 * (x + mu) {
        let v = (x - mu) / (x + mu);
        let v2 = v * v;
        let mut s = (x - mu) * v;
        let mut ej = 2.0 * x * v;
        let mut j = 1.0;
        loop {
            ej *= v2;
            let next = s + ej / (2.0 * j + 1.0);
            if next == s {
                return s;
            }
            s = next;
            j += 1.0;
        }
    }
    x * (x / mu).ln() + mu - x
}

/// Single Poisson probability `p_k(μ)`.
pub fn poisson_pmf(k: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k == 0 {
        return (-mu).exp();
    }
    let x = k as f64;
    (-stirlerr(k) - bd0(x, mu)).exp() / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// `p_0(μ), …, p_{k_max}(μ)`.
///
/// The anchor is the mode (or `k_max` if smaller) and the rest follows by
/// recurrence, so nothing overflows for large `μ`; far-tail terms underflow to 0.
pub fn poisson_weights(mu: f64, k_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; k_max + 1];
    if mu == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let anchor = (mu.floor() as usize).min(k_max);
    out[anchor] = poisson_pmf(anchor as u64, mu);
    for k in (0..anchor).rev() {
        out[k] = out[k + 1] * (k + 1) as f64 / mu;
        if out[k] == 0.0 {
            break;
        }
    }
    for k in anchor..k_max {
        out[k + 1] = out[k] * mu / (k + 1) as f64;
        if out[k + 1] == 0.0 {
            break;
        }
    }
    out
}

/// Contiguous block of Poisson weights `p_start, …, p_end` whose complement has
/// mass below the smoother's tail budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonWindow {
    pub start: usize,
    pub weights: Vec<f64>,
}

impl PoissonWindow {
    pub fn end(&self) -> usize {
        self.start + self.weights.len() - 1
    }

    /// `(k, p_k)` pairs in increasing `k`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().enumerate().map(move |(i, &p)| (self.start + i, p))
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Smoothing parameter `λ` plus the truncation policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonSmoother {
    lambda: f64,
    tail_epsilon: f64,
    max_terms: usize,
}

impl PoissonSmoother {
    pub fn new(lambda: f64) -> Result<Self, SmootherError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(SmootherError::InvalidLambda(lambda));
        }
        Ok(Self {
            lambda,
            tail_epsilon: DEFAULT_TAIL_EPSILON,
            max_terms: DEFAULT_MAX_TERMS,
        })
    }

    /// Data-adaptive choice `λ_n = n / Z_{n:n}`.
    pub fn plug_in(sample: &CensoredSample) -> Result<Self, SmootherError> {
        Self::new(sample.len() as f64 / sample.last_time())
    }

    pub fn with_tail_epsilon(mut self, eps: f64) -> Result<Self, SmootherError> {
        if !(eps > 0.0 && eps <= 1e-9) {
            return Err(SmootherError::InvalidTailEpsilon(eps));
        }
        self.tail_epsilon = eps;
        Ok(self)
    }

    pub fn with_max_terms(mut self, max_terms: usize) -> Result<Self, SmootherError> {
        if max_terms == 0 {
            return Err(SmootherError::InvalidMaxTerms);
        }
        self.max_terms = max_terms;
        Ok(self)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tail_epsilon(&self) -> f64 {
        self.tail_epsilon
    }

    pub fn max_terms(&self) -> usize {
        self.max_terms
    }

    /// Truncated weights for `N ~ Poisson(μ)`: each excluded side carries at most
    /// `tail_epsilon / 4`.
    pub fn window(&self, mu: f64) -> Result<PoissonWindow, SmootherError> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(SmootherError::InvalidPoint(mu));
        }
        if mu == 0.0 {
            return Ok(PoissonWindow { start: 0, weights: vec![1.0] });
        }
        let budget = self.tail_epsilon / 4.0;
        let mode = mu.floor() as usize;
        let p_mode = poisson_pmf(mode as u64, mu);

        let mut below = Vec::new();
        let mut p = p_mode;
        let mut k = mode;
        while k > 0 {
            let r = k as f64 / mu;
            if r < 1.0 && p * r / (1.0 - r) < budget {
                break;
            }
            p *= r;
            k -= 1;
            below.push(p);
            if below.len() > self.max_terms {
                return Err(SmootherError::TooManyTerms { needed: below.len(), cap: self.max_terms });
            }
        }
        let start = k;

        let mut weights: Vec<f64> = below.into_iter().rev().collect();
        weights.push(p_mode);
        let mut p = p_mode;
        let mut k = mode;
        loop {
            let r = mu / (k + 1) as f64;
            if r < 1.0 && p * r / (1.0 - r) < budget {
                break;
            }
            p *= r;
            k += 1;
            weights.push(p);
            if weights.len() > self.max_terms {
                return Err(SmootherError::TooManyTerms { needed: weights.len(), cap: self.max_terms });
            }
        }
        Ok(PoissonWindow { start, weights })
    }

    /// `Σ_k u[k] p_k(λt)` for a grid function `u[k] = u(k/λ)`, `k = 0..u.len()`.
    pub fn smooth(&self, u: &[f64], t: f64) -> Result<f64, SmootherError> {
        let w = self.window(self.lambda * t)?;
        if u.is_empty() || w.end() >= u.len() {
            return Err(SmootherError::GridTooShort {
                needed: w.end(),
                available: u.len().saturating_sub(1),
            });
        }
        Ok(w.iter().map(|(k, p)| u[k] * p).sum())
    }

    /// Smooths a function evaluated on demand at the grid points `k/λ`.
    pub fn smooth_fn<F: Fn(f64) -> f64>(&self, u: F, t: f64) -> Result<f64, SmootherError> {
        let w = self.window(self.lambda * t)?;
        Ok(w.iter().map(|(k, p)| u(k as f64 / self.lambda) * p).sum())
    }

    /// `∫_t^∞ p_k(λy) dy = (1/λ) Σ_{r≤k} p_r(λt)`.
    pub fn tail_integral_weights(&self, k: usize, t: f64) -> f64 {
        let total: f64 = poisson_weights(self.lambda * t, k).iter().sum();
        total / self.lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::ln_gamma;

    // e^{−μ} Π μ/j; relative error grows like k·ε, fine for small k.
    fn naive_pmf(k: u64, mu: f64) -> f64 {
        (1..=k).fold((-mu).exp(), |p, j| p * mu / j as f64)
    }

    #[test]
    fn point_mass_at_zero() {
        assert_eq!(poisson_weights(0.0, 4), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let sm = PoissonSmoother::new(3.0).unwrap();
        let w = sm.window(0.0).unwrap();
        assert_eq!((w.start, w.weights.clone()), (0, vec![1.0]));
    }

    #[test]
    fn direct_formula_small_mean() {
        let p = poisson_weights(2.0, 1);
        assert!((p[1] - 2.0 * (-2.0f64).exp()).abs() < 1e-16);
        assert!((p[1] - 0.270_670_566_473_225_4).abs() < 1e-15);
        for k in 0..40 {
            let a = poisson_pmf(k, 7.3);
            let b = naive_pmf(k, 7.3);
            assert!((a - b).abs() <= 1e-13 * b, "k = {k}: {a} vs {b}");
        }
    }

    #[test]
    fn stirlerr_matches_series_at_switch() {
        // Direct evaluation at 15 and the asymptotic series at 16 should agree to O(n^-9).
        for k in [16u64, 20, 40, 100, 600] {
            let direct = ln_gamma(k as f64 + 1.0) - (k as f64 + 0.5) * (k as f64).ln() + k as f64 - LN_SQRT_2PI;
            assert!((stirlerr(k) - direct).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn summation_covers_the_tail_bound() {
        for mu in [0.1, 0.5, 1.0, 3.0, 10.0, 50.0] {
            let k_max = (mu + 12.0 * (mu + 1.0f64).sqrt()).ceil() as usize;
            let s: f64 = poisson_weights(mu, k_max).iter().sum();
            assert!((s - 1.0).abs() <= 1e-12, "mu = {mu}: {s}");
        }
    }

    #[test]
    fn window_normalization() {
        let sm = PoissonSmoother::new(1.0).unwrap();
        for mu in [0.1, 1.0, 10.0, 1e3, 1e6, 1e7] {
            let w = sm.window(mu).unwrap();
            assert!((w.mass() - 1.0).abs() <= sm.tail_epsilon(), "mu = {mu}: {}", w.mass() - 1.0);
        }
    }

    #[test]
    fn weights_do_not_overflow_for_huge_mean() {
        let w = poisson_weights(1e7, 10_010_000);
        assert!(w.iter().all(|p| p.is_finite() && *p >= 0.0));
        let mode = poisson_pmf(10_000_000, 1e7);
        assert!((mode - 1.0 / (2.0 * std::f64::consts::PI * 1e7).sqrt()).abs() < 1e-9 * mode + 1e-12);
    }

    #[test]
    fn constant_and_origin() {
        let sm = PoissonSmoother::new(50.0).unwrap();
        let u = vec![0.7; 2000];
        for t in [0.0, 0.3, 5.0, 20.0] {
            assert!((sm.smooth(&u, t).unwrap() - 0.7).abs() <= 0.7 * sm.tail_epsilon());
        }
        let u: Vec<f64> = (0..100).map(|k| (k as f64).sin()).collect();
        assert_eq!(sm.smooth(&u, 0.0).unwrap(), u[0]);
    }

    #[test]
    fn grid_too_short() {
        let sm = PoissonSmoother::new(10.0).unwrap();
        // Pois(5) needs k up to about 30 for a 1e-12 budget.
        let u = vec![1.0; 40];
        assert!(sm.smooth(&u, 0.5).is_ok());
        assert!(matches!(sm.smooth(&u[..20], 0.5), Err(SmootherError::GridTooShort { .. })));
        assert!(matches!(sm.smooth(&u, 2.0), Err(SmootherError::GridTooShort { .. })));
    }

    #[test]
    fn exponential_closed_form() {
        // Σ e^{−k/λ} p_k(λt) = exp(−λt(1 − e^{−1/λ})).
        let exact = |lambda: f64, t: f64| (-lambda * t * (1.0 - (-1.0 / lambda).exp())).exp();
        let sm = PoissonSmoother::new(100.0).unwrap();
        let got = sm.smooth_fn(|x| (-x).exp(), 1.0).unwrap();
        assert!((got - exact(100.0, 1.0)).abs() < 1e-12);
        assert!((got - (-1.0f64).exp()).abs() < 0.01);
        let finer = PoissonSmoother::new(1e4).unwrap().smooth_fn(|x| (-x).exp(), 1.0).unwrap();
        assert!((finer - (-1.0f64).exp()).abs() < (got - (-1.0f64).exp()).abs());
    }

    #[test]
    fn tail_integral_at_origin() {
        for lambda in [0.5, 2.0, 40.0] {
            let sm = PoissonSmoother::new(lambda).unwrap();
            for k in [0, 1, 5, 30] {
                assert!((sm.tail_integral_weights(k, 0.0) - 1.0 / lambda).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn monotone_and_range_preserving() {
        let sm = PoissonSmoother::new(8.0).unwrap();
        let u: Vec<f64> = (0..400).map(|k| if k < 10 { 1.0 } else if k < 30 { 0.6 } else if k < 31 { 0.2 } else { 0.0 }).collect();
        let mut prev = f64::INFINITY;
        for i in 0..=500 {
            let t = i as f64 * 0.01;
            let v = sm.smooth(&u, t).unwrap();
            assert!(v <= prev + sm.tail_epsilon(), "t = {t}: {v} > {prev}");
            assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PoissonSmoother::new(0.0).is_err());
        assert!(PoissonSmoother::new(f64::NAN).is_err());
        let sm = PoissonSmoother::new(1.0).unwrap();
        assert!(sm.with_tail_epsilon(1e-6).is_err());
        assert!(sm.with_tail_epsilon(0.0).is_err());
        assert!(sm.with_max_terms(0).is_err());
        let capped = sm.with_max_terms(100).unwrap();
        assert!(matches!(capped.window(1e6), Err(SmootherError::TooManyTerms { .. })));
    }
}
