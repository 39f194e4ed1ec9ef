mod common;

use common::{integrate, pmf, random_sample, rng, OracleKm, OracleSmooth};
use mrl_core::km::product_limit;
use mrl_core::mrl_smooth::{smooth_mrl, SmoothMrl};
use mrl_core::sim::true_mrl;
use mrl_core::{CensoredSample, Law, PoissonSmoother};

fn fixture() -> CensoredSample {
    CensoredSample::from_records(&[(1.0, true), (2.0, false), (3.0, true), (4.0, true)]).unwrap()
}

#[test]
fn fixture_smooth_mrl_matches_quadrature_at_moderate_lambda() {
    let s = fixture();
    let step = product_limit(&s, true).unwrap();
    let oracle = OracleSmooth::new(&OracleKm::new(&s), 200.0);
    for t in [0.0, 0.5, 2.0] {
        let got = smooth_mrl(&step, PoissonSmoother::new(200.0).unwrap(), t).unwrap();
        let want = oracle.mrl(t);
        assert!(((got - want) / want).abs() < 1e-9, "t = {t}: {got} vs {want}");
    }
}

#[test]
fn smoothed_survival_matches_direct_sum() {
    let mut r = rng(11);
    for _ in 0..30 {
        let s = random_sample(&mut r, 60);
        let step = product_limit(&s, true).unwrap();
        let sm = PoissonSmoother::plug_in(&s).unwrap();
        let est = SmoothMrl::new(&step, sm).unwrap();
        let oracle = OracleSmooth::new(&OracleKm::new(&s), sm.lambda());
        for j in 0..=12 {
            let t = step.last_obs() * j as f64 / 10.0;
            assert!((est.survival(t).unwrap() - oracle.value(t)).abs() < 1e-11, "t = {t}");
        }
    }
}

#[test]
fn tail_integral_of_smoothed_survival_matches_quadrature() {
    let mut r = rng(12);
    for _ in 0..20 {
        let s = random_sample(&mut r, 40);
        let step = product_limit(&s, true).unwrap();
        let sm = PoissonSmoother::plug_in(&s).unwrap();
        let est = SmoothMrl::new(&step, sm).unwrap();
        let oracle = OracleSmooth::new(&OracleKm::new(&s), sm.lambda());
        let upper = oracle.upper();
        for t in [0.0, 0.3 * step.last_obs(), 0.9 * step.last_obs()] {
            let panels = ((upper - t) * sm.lambda()).ceil().max(16.0) as usize;
            let want = integrate(|x| oracle.value(x), t, upper, 1e-12, panels);
            let got = est.tail_integral(t).unwrap();
            assert!((got - want).abs() <= 1e-10 * want.max(1e-3), "t = {t}: {got} vs {want}");
        }
    }
}

#[test]
fn single_weight_tail_integral_matches_quadrature() {
    for (k, lambda, t) in [(0, 1.0, 0.0), (3, 2.5, 1.2), (12, 40.0, 0.2), (40, 300.0, 0.15)] {
        let got = PoissonSmoother::new(lambda).unwrap().tail_integral_weights(k, t);
        let upper = (3.0 * k as f64 + 80.0) / lambda;
        let panels = ((upper - t) * lambda).ceil() as usize;
        let want = integrate(|y| pmf(k, lambda * y), t, upper, 1e-13, panels);
        assert!(((got - want) / want).abs() < 1e-10, "k = {k}: {got} vs {want}");
    }
}

#[test]
fn weibull_mrl_matches_quadrature() {
    for (shape, scale) in [(0.7, 1.0), (1.5, 2.0), (3.0, 0.5)] {
        let law = Law::Weibull { shape, scale };
        for p in [0.0, 0.2, 0.5, 0.8] {
            let t = law.quantile(p);
            // S < e^{-80} past this point.
            let upper = scale * 80f64.powf(1.0 / shape);
            let num = integrate(|x| law.survival(x), t, upper, 1e-13, 2000);
            let want = num / law.survival(t);
            let got = true_mrl(&law, t).unwrap();
            assert!(((got - want) / want).abs() < 1e-9, "shape {shape} t {t}: {got} vs {want}");
        }
    }
}

#[test]
fn smooth_values_approach_step_values_along_a_lambda_ladder() {
    let s = fixture();
    let step = product_limit(&s, true).unwrap();
    for t in [1.5, 2.5, 2.98] {
        let target = step.step_mrl(t).unwrap().unwrap();
        let gaps: Vec<f64> = [1e2, 1e3, 1e4, 1e5]
            .iter()
            .map(|&l| (smooth_mrl(&step, PoissonSmoother::new(l).unwrap(), t).unwrap() - target).abs())
            .collect();
        // Once a gap is at the tail budget it can only wobble.
        for w in gaps.windows(2) {
            assert!(w[1] < w[0] || w[0] < 1e-10, "t = {t}: {gaps:?}");
        }
        assert!(gaps[3] < 1e-3, "t = {t}: {gaps:?}");
    }
}
