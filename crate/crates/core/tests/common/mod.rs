//! Reference implementations used as test oracles. Nothing here calls into the
//! estimator's numerics: survival curves are rebuilt from risk-set counts, Poisson
//! probabilities come from log-gamma, and integrals from adaptive Gauss–Kronrod.

#![allow(dead_code)]

use mrl_core::CensoredSample;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::function::gamma::ln_gamma;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate, its difference from the embedded 7-point Gauss rule,
/// and the Kronrod sum of `|f|` (for a roundoff floor).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for j in 0..7 {
        let dx = h * XGK[j];
        let (lo, hi) = (f(c - dx), f(c + dx));
        k += WGK[j] * (lo + hi);
        abs += WGK[j] * (lo.abs() + hi.abs());
        if j % 2 == 1 {
            g += WG[j / 2] * (lo + hi);
        }
    }
    (k * h, ((k - g) * h).abs(), abs * h.abs())
}

/// Adaptive Gauss–Kronrod on `[a, b]`, starting from `panels` equal pieces and
/// bisecting until each piece meets its share of `rel_tol` times the coarse
/// estimate, or its error estimate is down at roundoff level.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, panels: usize) -> f64 {
    assert!(a.is_finite() && b.is_finite() && a <= b, "bad interval [{a}, {b}]");
    let width = b - a;
    let mut stack: Vec<(f64, f64, u32)> = (0..panels)
        .map(|i| {
            let lo = a + width * i as f64 / panels as f64;
            let hi = a + width * (i + 1) as f64 / panels as f64;
            (lo, hi, 0)
        })
        .collect();
    let coarse: f64 = stack.iter().map(|&(lo, hi, _)| gk15(&f, lo, hi).0).sum();
    let tol = rel_tol * coarse.abs();
    let mut total = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, err, abs) = gk15(&f, lo, hi);
        let share = tol * (hi - lo) / width;
        if err <= share || err <= 50.0 * f64::EPSILON * abs || depth >= 30 {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

/// `e^{−μ} μ^k / k!` from log-gamma.
pub fn pmf(k: usize, mu: f64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * mu.ln() - mu - ln_gamma(k as f64 + 1.0)).exp()
}

/// Efron-modified Kaplan–Meier by direct product over distinct failure times.
pub struct OracleKm {
    times: Vec<f64>,
    events: Vec<bool>,
    z_max: f64,
}

impl OracleKm {
    pub fn new(sample: &CensoredSample) -> Self {
        let times: Vec<f64> = sample.observations().iter().map(|o| o.time).collect();
        let events: Vec<bool> = sample.observations().iter().map(|o| o.event).collect();
        let z_max = times.iter().cloned().fold(0.0, f64::max);
        Self { times, events, z_max }
    }

    pub fn value(&self, t: f64) -> f64 {
        if t >= self.z_max {
            return 0.0;
        }
        let mut distinct: Vec<f64> = self
            .times
            .iter()
            .zip(&self.events)
            .filter(|&(&z, &e)| e && z <= t)
            .map(|(&z, _)| z)
            .collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        distinct
            .iter()
            .map(|&s| {
                let at_risk = self.times.iter().filter(|&&z| z >= s).count() as f64;
                let deaths = self.times.iter().zip(&self.events).filter(|&(&z, &e)| e && z == s).count() as f64;
                1.0 - deaths / at_risk
            })
            .product()
    }

    pub fn z_max(&self) -> f64 {
        self.z_max
    }
}

/// `S̃_n(x) = Σ_k S_n(k/λ) p_k(λx)` summed over every grid point below `Z_{n:n}`.
pub struct OracleSmooth {
    grid: Vec<f64>,
    ln_fact: Vec<f64>,
    lambda: f64,
}

impl OracleSmooth {
    pub fn new(km: &OracleKm, lambda: f64) -> Self {
        let k_max = (lambda * km.z_max()).ceil() as usize + 1;
        let grid: Vec<f64> = (0..=k_max).map(|k| km.value(k as f64 / lambda)).collect();
        let ln_fact = (0..=k_max).map(|k| ln_gamma(k as f64 + 1.0)).collect();
        Self { grid, ln_fact, lambda }
    }

    pub fn value(&self, x: f64) -> f64 {
        let mu = self.lambda * x;
        if mu == 0.0 {
            return self.grid[0];
        }
        let lm = mu.ln();
        self.grid
            .iter()
            .enumerate()
            .map(|(k, s)| s * (k as f64 * lm - mu - self.ln_fact[k]).exp())
            .sum()
    }

    /// Point past which `S̃_n` is below `e^{−60}` of its scale.
    pub fn upper(&self) -> f64 {
        (2.0 * self.grid.len() as f64 + 60.0) / self.lambda
    }

    /// `∫_t^∞ S̃_n / S̃_n(t)` by quadrature.
    pub fn mrl(&self, t: f64) -> f64 {
        let upper = self.upper();
        let panels = ((upper - t) * self.lambda).ceil().max(16.0) as usize;
        integrate(|x| self.value(x), t, upper, 1e-12, panels) / self.value(t)
    }
}

/// Uniform on `(0, 1)`.
pub fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random right-censored sample with `2 ≤ n ≤ n_max` and at least one failure.
/// About a third of the draws are rounded to two decimals to force ties.
pub fn random_sample(rng: &mut ChaCha8Rng, n_max: usize) -> CensoredSample {
    loop {
        let n = 2 + (rng.next_u64() % (n_max as u64 - 1)) as usize;
        let shape = 0.5 + 2.5 * uniform(rng);
        let censor_rate = 0.1 + 1.5 * uniform(rng);
        let round = rng.next_u64().is_multiple_of(3);
        let records: Vec<(f64, bool)> = (0..n)
            .map(|_| {
                let t = (-uniform(rng).ln()).powf(1.0 / shape);
                let c = -uniform(rng).ln() / censor_rate;
                let (mut z, d) = (t.min(c), t <= c);
                if round {
                    z = (z * 100.0).round() / 100.0;
                }
                (z, d)
            })
            .collect();
        if let Ok(s) = CensoredSample::from_records(&records) {
            return s;
        }
    }
}
