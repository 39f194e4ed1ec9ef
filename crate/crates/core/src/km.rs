//! Product-limit estimation and exact step-function functionals.
//!
//! [`product_limit`] builds the Kaplan–Meier curve
//! `Ŝ_n(t) = Π_i (1 − δ_[i:n]/(n−i+1))^{I(Z_{i:n} ≤ t)}` together with the
//! Stute masses `W_in`. With the Efron modification the curve keeps its last
//! plateau up to `Z_{n:n}` and is zero from there on, so that it has compact
//! support and every tail integral is finite.
//!
//! Steps are right-continuous: the value at a jump time already includes the
//! jump, which is what `Σ_i W_in I(Z_{i:n} > t)` gives.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::sample::CensoredSample;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KmError {
    #[error("no uncensored observation present")]
    AllCensored,
    #[error("operation requires an Efron-modified curve")]
    NotEfronModified,
    #[error("csv: {0}")]
    Csv(String),
}

/// Right-continuous survival step function with its order-statistic masses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSurvival {
    knots: Vec<f64>,
    values: Vec<f64>,
    times: Vec<f64>,
    events: Vec<bool>,
    stute_weights: Vec<f64>,
    tail_mass: f64,
    efron_modified: bool,
    last_obs: f64,
    last_event: Option<f64>,
}

/// Kaplan–Meier estimate of the lifetime survival function.
pub fn product_limit(sample: &CensoredSample, efron: bool) -> Result<StepSurvival, KmError> {
    if sample.event_count() == 0 {
        return Err(KmError::AllCensored);
    }
    let times: Vec<f64> = sample.observations().iter().map(|o| o.time).collect();
    let events: Vec<bool> = sample.observations().iter().map(|o| o.event).collect();
    Ok(build(times, events, efron))
}

/// Kaplan–Meier estimate of the censoring survival `1 − G`.
///
/// Event flags are flipped while the deaths-first ordering is kept, so at a tied
/// time the censoring "event" sees a risk set without the tied failures. A sample
/// with no censoring yields the constant 1.
pub fn censoring_km(sample: &CensoredSample) -> StepSurvival {
    let times: Vec<f64> = sample.observations().iter().map(|o| o.time).collect();
    let events: Vec<bool> = sample.observations().iter().map(|o| !o.event).collect();
    build(times, events, false)
}

fn build(times: Vec<f64>, events: Vec<bool>, efron: bool) -> StepSurvival {
    let n = times.len();
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut weights = Vec::with_capacity(n);
    // Running product Π_{j<i} [(n−j)/(n−j+1)]^{δ_j}; equals Ŝ_n just before Z_{i:n}.
    // Until the first censoring it telescopes to a count, taken exactly.
    let mut running = 1.0_f64;
    let mut censored_seen = false;
    for i in 0..n {
        let at_risk = (n - i) as f64;
        if events[i] {
            if censored_seen {
                weights.push(running / at_risk);
                running *= (at_risk - 1.0) / at_risk;
            } else {
                weights.push(1.0 / n as f64);
                running = (n - i - 1) as f64 / n as f64;
            }
            match knots.last() {
                Some(&k) if k == times[i] => *values.last_mut().unwrap() = running,
                _ => {
                    knots.push(times[i]);
                    values.push(running);
                }
            }
        } else {
            weights.push(0.0);
            censored_seen = true;
        }
    }
    let last_obs = times.last().copied().unwrap_or(0.0);
    let last_event = times.iter().zip(&events).rev().find(|(_, &e)| e).map(|(&t, _)| t);
    let tail_mass = running;
    if efron && tail_mass > 0.0 {
        match knots.last() {
            Some(&k) if k == last_obs => *values.last_mut().unwrap() = 0.0,
            _ => {
                knots.push(last_obs);
                values.push(0.0);
            }
        }
    }
    StepSurvival {
        knots,
        values,
        times,
        events,
        stute_weights: weights,
        tail_mass,
        efron_modified: efron,
        last_obs,
        last_event,
    }
}

impl StepSurvival {
    /// Value at `t` (right-continuous).
    pub fn value(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k <= t);
        if idx == 0 {
            1.0
        } else {
            self.values[idx - 1]
        }
    }

    /// Left limit `S(t−)`.
    pub fn value_before(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k < t);
        if idx == 0 {
            1.0
        } else {
            self.values[idx - 1]
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Values on `[knot_j, knot_{j+1})`; the value before the first knot is 1.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Ordered observation times the curve was built from.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    /// `W_in = δ_[i:n]/(n−i+1) Π_{j<i} [(n−j)/(n−j+1)]^{δ_[j:n]}`, aligned with
    /// [`times`](Self::times).
    pub fn stute_weights(&self) -> &[f64] {
        &self.stute_weights
    }

    /// Mass the product-limit estimator leaves unassigned, `Ŝ_n(Z_{n:n})`
    /// before any Efron modification. Zero when the largest observation is a failure.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Masses of `1 − S` at the order statistics. For an Efron-modified curve the
    /// unassigned tail mass sits on `Z_{n:n}`; otherwise these are the Stute weights.
    pub fn masses(&self) -> Vec<f64> {
        let mut m = self.stute_weights.clone();
        if self.efron_modified {
            if let Some(last) = m.last_mut() {
                *last += self.tail_mass;
            }
        }
        m
    }

    pub fn efron_modified(&self) -> bool {
        self.efron_modified
    }

    /// Largest observation `Z_{n:n}`.
    pub fn last_obs(&self) -> f64 {
        self.last_obs
    }

    /// Largest failure time `Z_{M_n:n}`; `None` for a censoring curve with no censoring.
    pub fn last_event(&self) -> Option<f64> {
        self.last_event
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    /// Exact `∫_t^∞ S(x) dx` of an Efron-modified curve.
    pub fn integrate_tail(&self, t: f64) -> Result<f64, KmError> {
        if !self.efron_modified {
            return Err(KmError::NotEfronModified);
        }
        if t >= self.last_obs {
            return Ok(0.0);
        }
        let t = t.max(0.0);
        let start = self.knots.partition_point(|&k| k <= t);
        let mut total = 0.0;
        let mut left = t;
        let mut level = if start == 0 { 1.0 } else { self.values[start - 1] };
        for j in start..self.knots.len() {
            total += level * (self.knots[j] - left);
            left = self.knots[j];
            level = self.values[j];
        }
        // Efron curves end at zero, so `level` is 0 here.
        Ok(total)
    }

    /// Step mean residual life `∫_t^∞ S / S(t)`; `None` at or beyond the last failure.
    pub fn step_mrl(&self, t: f64) -> Result<Option<f64>, KmError> {
        if !self.efron_modified {
            return Err(KmError::NotEfronModified);
        }
        match self.last_event {
            Some(last) if t < last => {
                let s = self.value(t);
                if s > 0.0 {
                    Ok(Some(self.integrate_tail(t)? / s))
                } else {
                    Ok(None)
                }
            }
            _ => Ok(None),
        }
    }

    /// Writes `t_start,t_end,survival`; the final interval ends at `inf`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), KmError> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| KmError::Csv(e.to_string());
        w.write_record(["t_start", "t_end", "survival"]).map_err(csv_err)?;
        let mut start = 0.0_f64;
        let mut level = 1.0_f64;
        for (&k, &v) in self.knots.iter().zip(&self.values) {
            if k > start {
                w.write_record([start.to_string(), k.to_string(), level.to_string()])
                    .map_err(csv_err)?;
            }
            start = k;
            level = v;
        }
        w.write_record([start.to_string(), "inf".to_string(), level.to_string()])
            .map_err(csv_err)?;
        w.flush().map_err(|e| KmError::Csv(e.to_string()))
    }

    /// Writes `index,time,event,weight` with 1-based order-statistic indices.
    pub fn write_weights_csv<W: Write>(&self, out: W) -> Result<(), KmError> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| KmError::Csv(e.to_string());
        w.write_record(["index", "time", "event", "weight"]).map_err(csv_err)?;
        for (i, ((&t, &e), &wt)) in self
            .times
            .iter()
            .zip(&self.events)
            .zip(&self.stute_weights)
            .enumerate()
        {
            w.write_record([
                (i + 1).to_string(),
                t.to_string(),
                u8::from(e).to_string(),
                wt.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| KmError::Csv(e.to_string()))
    }
}
