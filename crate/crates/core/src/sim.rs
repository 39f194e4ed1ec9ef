//! Monte Carlo study of the smoothed MRL estimator against laws with known MRL.
//!
//! Every replicate owns a ChaCha stream selected by `(seed, rep_index)`; draw `2i`
//! gives the lifetime and `2i + 1` the censoring time of observation `i`. Replicates
//! run in parallel and are collected in index order, so a report depends only on
//! the scenario, not on the worker count.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::io::Write;
use thiserror::Error;

use crate::inference::{normal_quantile, InfluencePlugin};
use crate::km::product_limit;
use crate::law::{Law, LawError};
use crate::mrl_smooth::SmoothMrl;
use crate::sample::{CensoredSample, Observation};
use crate::smoother::PoissonSmoother;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CensoringLaw {
    None,
    Exponential { rate: f64 },
    Uniform { upper: f64 },
}

impl CensoringLaw {
    fn as_law(&self) -> Option<Law> {
        match *self {
            CensoringLaw::None => None,
            CensoringLaw::Exponential { rate } => Some(Law::Exponential { rate }),
            CensoringLaw::Uniform { upper } => Some(Law::Uniform { upper }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaRule {
    /// `λ_n = n / Z_{n:n}`
    PlugIn,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub lifetime_law: Law,
    pub censoring_law: CensoringLaw,
    pub n: usize,
    pub replications: usize,
    pub t_grid: Vec<f64>,
    pub lambda_rule: LambdaRule,
    pub seed: u64,
    pub alpha: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        self.lifetime_law.validate()?;
        if let Some(c) = self.censoring_law.as_law() {
            c.validate()?;
        }
        let bad = |m: &str| Err(SimError::InvalidScenario(m.to_string()));
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        if self.t_grid.is_empty() {
            return bad("t_grid is empty");
        }
        let upper = self.lifetime_law.upper_support();
        if self.t_grid.iter().any(|&t| !(t.is_finite() && t >= 0.0 && t < upper)) {
            return bad("t_grid must lie inside the lifetime support");
        }
        if let LambdaRule::Fixed(l) = self.lambda_rule {
            if !(l.is_finite() && l > 0.0) {
                return bad("fixed lambda must be finite and positive");
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        Ok(())
    }

    /// `points` equispaced times on `[0, q_0.8]` of the lifetime law.
    pub fn default_t_grid(law: &Law, points: usize) -> Vec<f64> {
        let upper = law.quantile(0.8);
        match points {
            0 => Vec::new(),
            1 => vec![0.0],
            _ => (0..points).map(|i| upper * i as f64 / (points - 1) as f64).collect(),
        }
    }
}

/// `m(t)` of a known law.
pub fn true_mrl(law: &Law, t: f64) -> Result<f64, LawError> {
    law.mean_residual_life(t)
}

fn unit_open(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn stream(seed: u64, rep_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep_index);
    rng.set_word_pos(0);
    rng
}

/// Raw `(T_i, C_i)` pairs, before ordering or validation.
fn draw_observations(sc: &Scenario, rep_index: u64) -> Vec<Observation> {
    let mut rng = stream(sc.seed, rep_index);
    let censor = sc.censoring_law.as_law();
    (0..sc.n)
        .map(|_| {
            let lifetime = sc.lifetime_law.quantile(unit_open(&mut rng));
            let u_c = unit_open(&mut rng);
            match censor {
                Some(c) => {
                    let ct = c.quantile(u_c);
                    Observation::new(lifetime.min(ct), lifetime <= ct)
                }
                None => Observation::new(lifetime, true),
            }
        })
        .collect()
}

/// One replicate's sample. Returns the all-censored case through the diagnostic
/// constructor so callers can account for it.
pub fn draw_sample(sc: &Scenario, rep_index: u64) -> CensoredSample {
    CensoredSample::diagnostic(draw_observations(sc, rep_index)).expect("simulated times are finite and nonnegative")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub t: f64,
    pub estimate: f64,
    pub truth: f64,
    pub error: f64,
    pub variance_hat: f64,
    /// `√n (m̃ − m) / σ̂`
    pub standardized_error: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateResult {
    pub rep: usize,
    pub lambda: Option<f64>,
    pub censoring_rate: f64,
    pub sup_error: Option<f64>,
    pub points: Vec<PointResult>,
    /// Set when the estimator failed on this replicate; such replicates are
    /// excluded from every aggregate.
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub t: f64,
    pub truth: f64,
    pub coverage: Option<f64>,
    pub mean_error: Option<f64>,
    /// Sample variance of `√n (m̃ − m)` across used replicates.
    pub scaled_error_variance: Option<f64>,
    pub mean_variance_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub used_replicates: usize,
    pub excluded_replicates: usize,
    pub median_sup_error: Option<f64>,
    pub mean_sup_error: Option<f64>,
    pub per_t: Vec<PointSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub scenario: Scenario,
    pub summary: Summary,
    pub replicates: Vec<ReplicateResult>,
}

impl SimulationReport {
    /// Standardized errors at grid index `j` across used replicates, in replicate order.
    pub fn standardized_errors(&self, j: usize) -> Vec<f64> {
        self.replicates
            .iter()
            .filter(|r| r.excluded.is_none())
            .map(|r| r.points[j].standardized_error)
            .collect()
    }

    /// Flat table `rep,t,error,std_error,covered` of used replicates.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "rep,t,error,std_error,covered")?;
        for r in self.replicates.iter().filter(|r| r.excluded.is_none()) {
            for p in &r.points {
                writeln!(out, "{},{},{},{},{}", r.rep, p.t, p.error, p.standardized_error, u8::from(p.covered))?;
            }
        }
        Ok(())
    }
}

fn replicate(sc: &Scenario, rep: usize, truths: &[f64], z: f64) -> ReplicateResult {
    let sample = draw_sample(sc, rep as u64);
    let mut result = ReplicateResult {
        rep,
        lambda: None,
        censoring_rate: sample.censoring_rate(),
        sup_error: None,
        points: Vec::new(),
        excluded: None,
    };
    match evaluate(sc, &sample, truths, z) {
        Ok((lambda, points)) => {
            result.lambda = Some(lambda);
            result.sup_error = Some(points.iter().map(|p| p.error.abs()).fold(0.0, f64::max));
            result.points = points;
        }
        Err(reason) => {
            result.excluded = Some(reason);
        }
    }
    result
}

fn evaluate(sc: &Scenario, sample: &CensoredSample, truths: &[f64], z: f64) -> Result<(f64, Vec<PointResult>), String> {
    let step = product_limit(sample, true).map_err(|e| e.to_string())?;
    let smoother = match sc.lambda_rule {
        LambdaRule::PlugIn => PoissonSmoother::plug_in(sample),
        LambdaRule::Fixed(l) => PoissonSmoother::new(l),
    }
    .map_err(|e| e.to_string())?;
    let est = SmoothMrl::new(&step, smoother).map_err(|e| e.to_string())?;
    let plugin = InfluencePlugin::new(sample).map_err(|e| e.to_string())?;
    let root_n = (sc.n as f64).sqrt();
    let points = sc
        .t_grid
        .iter()
        .zip(truths)
        .map(|(&t, &truth)| {
            let m = est.mrl(t).map_err(|e| e.to_string())?;
            let s = est.survival(t).map_err(|e| e.to_string())?;
            let var = plugin.decompose(t, m, s).map_err(|e| e.to_string())?.variance();
            if !(var > 0.0) {
                return Err(format!("plug-in variance is zero at t = {t}"));
            }
            let sd = var.sqrt();
            let error = m - truth;
            Ok(PointResult {
                t,
                estimate: m,
                truth,
                error,
                variance_hat: var,
                standardized_error: root_n * error / sd,
                covered: error.abs() <= z * sd / root_n,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok((smoother.lambda(), points))
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

fn summarize(sc: &Scenario, truths: &[f64], replicates: &[ReplicateResult]) -> Summary {
    let used: Vec<&ReplicateResult> = replicates.iter().filter(|r| r.excluded.is_none()).collect();
    let k = used.len();
    let sups: Vec<f64> = used.iter().filter_map(|r| r.sup_error).collect();
    let root_n = (sc.n as f64).sqrt();
    let per_t = sc
        .t_grid
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let errs: Vec<f64> = used.iter().map(|r| r.points[j].error).collect();
            let kf = k as f64;
            let mean = |v: &dyn Fn(&ReplicateResult) -> f64| (k > 0).then(|| used.iter().map(|r| v(r)).sum::<f64>() / kf);
            let mean_error = mean(&|r| r.points[j].error);
            let scaled_error_variance = mean_error.filter(|_| k > 1).map(|me| {
                errs.iter().map(|e| (root_n * (e - me)).powi(2)).sum::<f64>() / (kf - 1.0)
            });
            PointSummary {
                t,
                truth: truths[j],
                coverage: mean(&|r| f64::from(u8::from(r.points[j].covered))),
                mean_error,
                scaled_error_variance,
                mean_variance_hat: mean(&|r| r.points[j].variance_hat),
            }
        })
        .collect();
    Summary {
        used_replicates: k,
        excluded_replicates: replicates.len() - k,
        median_sup_error: median(sups.clone()),
        mean_sup_error: if sups.is_empty() { None } else { Some(sups.iter().sum::<f64>() / sups.len() as f64) },
        per_t,
    }
}

/// Runs every replicate on the global rayon pool.
pub fn run(sc: &Scenario) -> Result<SimulationReport, SimError> {
    sc.validate()?;
    let truths = sc
        .t_grid
        .iter()
        .map(|&t| true_mrl(&sc.lifetime_law, t))
        .collect::<Result<Vec<_>, _>>()?;
    let z = normal_quantile(sc.alpha).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
    let replicates: Vec<ReplicateResult> = (0..sc.replications)
        .into_par_iter()
        .map(|rep| replicate(sc, rep, &truths, z))
        .collect();
    let summary = summarize(sc, &truths, &replicates);
    Ok(SimulationReport {
        scenario: sc.clone(),
        summary,
        replicates,
    })
}

/// [`run`] on a dedicated pool of `threads` workers.
pub fn run_with_threads(sc: &Scenario, threads: usize) -> Result<SimulationReport, SimError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SimError::ThreadPool(e.to_string()))?;
    pool.install(|| run(sc))
}

/// One-sample Kolmogorov–Smirnov test against `N(0, 1)`: `(D_n, p-value)`.
///
/// The p-value uses the asymptotic Kolmogorov distribution with Stephens'
/// small-sample correction `(√n + 0.12 + 0.11/√n) D_n`.
pub fn ks_test_standard_normal(values: &[f64]) -> (f64, f64) {
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = std.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let root_n = n.sqrt();
    (d, kolmogorov_survival((root_n + 0.12 + 0.11 / root_n) * d))
}

/// `P(K > x)` for the Kolmogorov distribution.
fn kolmogorov_survival(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
