//! Frozen oracles for the copula model: error transforms, predictive laws,
//! residuals and simulation.

mod common;

use betats::arma_gauss::{theoretical_acf, ArmaCoefficients, KalmanPrediction};
use betats::copula_model::{from_errors, simulate, to_errors, BoundedSeries, CopulaModel, PredictiveDistribution};
use betats::dist::{beta_cdf, norm_cdf, BetaMP};
use betats::inference::sample_acf;
use betats::regressors::{Columns, ModelSpec, ParameterVector};
use betats::simstudy::SimConfig;

fn section5() -> (ModelSpec, ParameterVector<f64>) {
    let cfg = SimConfig::default();
    (cfg.spec.with_trend_center(cfg.trend_center()), cfg.truth)
}

/// Kolmogorov–Smirnov distance of `u` from the uniform law.
fn ks_uniform(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value with the small-sample correction.
fn ks_critical_1pct(n: usize) -> f64 {
    let r = (n as f64).sqrt();
    1.6276 / (r + 0.12 + 0.11 / r)
}

fn marginal_only(marginal: BetaMP<f64>) -> PredictiveDistribution<f64> {
    PredictiveDistribution { marginal, gauss: KalmanPrediction::unconditional() }
}

#[test]
fn error_transform_examples() {
    let d = BetaMP::new(0.3f64, 12.0).unwrap();
    let median = d.quantile(0.5).unwrap();
    let eps = to_errors(&[median], &[(0.3f64, 12.0)]).unwrap();
    assert!(eps[0].abs() < 1e-12, "{}", eps[0]);
    let eps = to_errors(&[0.975f64], &[(0.5, 2.0)]).unwrap();
    assert!((eps[0] - 1.959964).abs() < 5e-7, "{}", eps[0]);
    let back = from_errors(&[0.0f64], &[(0.3, 12.0)]).unwrap();
    assert!((back.values()[0] - median).abs() < 1e-15);
}

#[test]
fn errors_round_trip_on_simulated_series() {
    let (spec, pv) = section5();
    let none = Columns::new();
    let series = simulate(&spec, &pv, 364, &none, 11).unwrap();
    let model = CopulaModel::new(&spec, &series, &none).unwrap();
    let mk = model.mu_kappa(&pv).unwrap();
    let eps = to_errors(series.values(), &mk).unwrap();
    let again = from_errors(&eps, &mk).unwrap();
    for (a, b) in again.values().iter().zip(series.values()) {
        assert!((a - b).abs() <= 1e-9);
    }
    let eps2 = to_errors(again.values(), &mk).unwrap();
    for (a, b) in eps.iter().zip(&eps2) {
        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
}

#[test]
fn pooled_pit_is_uniform() {
    // Thinning by 26 weeks makes the pooled values effectively independent.
    let (spec, pv) = section5();
    let none = Columns::new();
    let mut pit = Vec::with_capacity(100_000);
    let mut seed = 0u64;
    while pit.len() < 100_000 {
        let series = simulate(&spec, &pv, 364, &none, 1000 + seed).unwrap();
        let model = CopulaModel::new(&spec, &series, &none).unwrap();
        let marginals = model.marginals(&pv).unwrap();
        for t in (0..364).step_by(26) {
            pit.push(beta_cdf(&marginals[t], series.values()[t]).unwrap());
        }
        seed += 1;
    }
    pit.truncate(100_000);
    let d = ks_uniform(pit);
    assert!(d < ks_critical_1pct(100_000), "KS distance {d}");
}

#[test]
fn white_noise_errors_give_independent_observations() {
    let spec = common::intercept_spec(0, 0);
    let pv = ParameterVector::independent(vec![0.4], vec![2.0]);
    let none = Columns::new();
    let n = 20_000;
    let series = simulate(&spec, &pv, n, &none, 5).unwrap();
    let d = BetaMP::new(betats::regressors::logistic(0.4), 2.0f64.exp()).unwrap();
    let pit: Vec<f64> = series.values().iter().map(|&y| beta_cdf(&d, y).unwrap()).collect();
    let r1 = sample_acf(&pit, 1)[0];
    assert!(r1.abs() < 4.0 / (n as f64).sqrt(), "lag-1 correlation {r1}");
}

#[test]
fn constant_uniform_marginal_simulates_uniform_sample() {
    let spec = common::intercept_spec(0, 0);
    let pv = ParameterVector::independent(vec![0.0], vec![2.0f64.ln()]);
    let series = simulate(&spec, &pv, 100_000, &Columns::new(), 99).unwrap();
    let d = ks_uniform(series.values().to_vec());
    assert!(d < ks_critical_1pct(100_000), "KS distance {d}");
}

#[test]
fn simulation_is_byte_identical_for_a_seed() {
    let (spec, pv) = section5();
    let none = Columns::new();
    let a = simulate(&spec, &pv, 200, &none, 42).unwrap();
    let b = simulate(&spec, &pv, 200, &none, 42).unwrap();
    let bits = |s: &BoundedSeries<f64>| s.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    let c = simulate(&spec, &pv, 200, &none, 43).unwrap();
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn simulated_error_acf_matches_theory() {
    let arma = ArmaCoefficients::new(vec![1.5, -0.6], vec![-0.3]).unwrap();
    let theory = theoretical_acf(&arma, 4).unwrap();
    let spec = common::intercept_spec(2, 1);
    let pv = ParameterVector { beta_x: vec![-1.0], beta_z: vec![4.0], psi: vec![1.5, -0.6], lambda: vec![-0.3] };
    let none = Columns::new();
    let reps = 50;
    let mut acfs = vec![Vec::new(); 4];
    for r in 0..reps {
        let series = simulate(&spec, &pv, 4000, &none, 300 + r).unwrap();
        let eps = CopulaModel::new(&spec, &series, &none).unwrap().errors(&pv).unwrap();
        for (lag, v) in sample_acf(&eps, 4).into_iter().enumerate() {
            acfs[lag].push(v);
        }
    }
    for (lag, vals) in acfs.iter().enumerate() {
        let m = vals.iter().sum::<f64>() / reps as f64;
        let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let se = sd / (reps as f64).sqrt();
        assert!((m - theory[lag]).abs() <= 4.0 * se, "lag {}: {m} vs {} (se {se})", lag + 1, theory[lag]);
    }
}

#[test]
fn binned_means_track_the_mean_curve() {
    let (spec, pv) = section5();
    let none = Columns::new();
    let reps = 400;
    let n = 104;
    let mut sums = vec![Vec::with_capacity(reps); n];
    for r in 0..reps {
        let series = simulate(&spec, &pv, n, &none, 7000 + r as u64).unwrap();
        for (t, &y) in series.values().iter().enumerate() {
            sums[t].push(y);
        }
    }
    let model = CopulaModel::new(&spec, &simulate(&spec, &pv, n, &none, 0).unwrap(), &none).unwrap();
    let mk = model.mu_kappa(&pv).unwrap();
    for t in (0..n).step_by(13) {
        let ys = &sums[t];
        let m = ys.iter().sum::<f64>() / reps as f64;
        let sd = (ys.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
        let se = sd / (reps as f64).sqrt();
        assert!((m - mk[t].0).abs() <= 4.0 * se, "t={}: {m} vs {}", t + 1, mk[t].0);
    }
}

fn section5_model() -> (CopulaModel<f64>, ParameterVector<f64>) {
    let (spec, pv) = section5();
    let none = Columns::new();
    let series = simulate(&spec, &pv, 364, &none, 2013).unwrap();
    (CopulaModel::new(&spec, &series, &none).unwrap(), pv)
}

#[test]
fn predictive_density_integrates_to_one() {
    let (model, pv) = section5_model();
    for k in [1, 2, 4, 20] {
        let pred = model.predict(&pv, &Columns::new(), k).unwrap();
        let (m0, _, _) = pred.moments();
        assert!((m0 - 1.0).abs() < 1e-6, "k={k}: {m0}");
    }
}

#[test]
fn predictive_cdf_at_quantile_returns_level() {
    let (model, pv) = section5_model();
    for k in [1, 3] {
        let pred = model.predict(&pv, &Columns::new(), k).unwrap();
        for alpha in [0.01, 0.05, 0.5, 0.95, 0.99] {
            let y = pred.quantile(alpha).unwrap();
            let back = pred.cdf(y).unwrap();
            assert!((back - alpha).abs() < 1e-9, "k={k} α={alpha}: {back}");
        }
    }
}

#[test]
fn white_noise_predictive_quantile_is_marginal_quantile() {
    let spec = common::intercept_spec(0, 0);
    let pv = ParameterVector::independent(vec![-0.7], vec![3.0]);
    let none = Columns::new();
    let series = simulate(&spec, &pv, 50, &none, 3).unwrap();
    let model = CopulaModel::new(&spec, &series, &none).unwrap();
    let pred = model.predict(&pv, &none, 2).unwrap();
    for alpha in [0.01f64, 0.1, 0.5, 0.9, 0.99] {
        let a = pred.quantile(alpha).unwrap();
        let b = pred.marginal.quantile(alpha).unwrap();
        assert!((a - b).abs() < 1e-12, "α={alpha}: {a} vs {b}");
    }
}

#[test]
fn predictive_density_approaches_marginal_far_ahead() {
    let (model, pv) = section5_model();
    let pred = model.predict(&pv, &Columns::new(), 200).unwrap();
    let marginal = marginal_only(pred.marginal);
    let gap = (1..1000)
        .map(|i| {
            let y = i as f64 / 1000.0;
            (pred.pdf(y).unwrap() - marginal.pdf(y).unwrap()).abs()
        })
        .fold(0.0, f64::max);
    assert!(gap < 1e-4, "sup-norm gap {gap}");
}

#[test]
fn one_step_predictive_is_more_peaked() {
    let (model, pv) = section5_model();
    let pred = model.predict(&pv, &Columns::new(), 1).unwrap();
    let (_, v_pred) = pred.mean_variance();
    let (_, v_marg) = marginal_only(pred.marginal).mean_variance();
    assert!(v_pred < v_marg, "{v_pred} vs {v_marg}");
    let peak = |d: &PredictiveDistribution<f64>| (1..2000).map(|i| d.pdf(i as f64 / 2000.0).unwrap()).fold(0.0, f64::max);
    assert!(peak(&pred) > peak(&marginal_only(pred.marginal)));
}

#[test]
fn residual_formulas_agree() {
    let (model, pv) = section5_model();
    let a = model.quantile_residuals(&pv).unwrap();
    let b = model.quantile_residuals_via_cdf(&pv).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-10, "{x} vs {y}");
    }
}

#[test]
fn white_noise_residuals_are_errors() {
    let spec = common::intercept_spec(0, 0);
    let pv = ParameterVector::independent(vec![0.2], vec![2.5]);
    let none = Columns::new();
    let series = simulate(&spec, &pv, 80, &none, 8).unwrap();
    let model = CopulaModel::new(&spec, &series, &none).unwrap();
    assert_eq!(model.quantile_residuals(&pv).unwrap(), model.errors(&pv).unwrap());
}

#[test]
fn residuals_at_true_parameters_are_white_normal() {
    let (spec, pv) = section5();
    let none = Columns::new();
    let reps = 500;
    let n = 364;
    let crit = ks_critical_1pct(n);
    let mut accepted = 0;
    let mut lag1 = 0.0;
    for r in 0..reps {
        let series = simulate(&spec, &pv, n, &none, 50_000 + r as u64).unwrap();
        let res = CopulaModel::new(&spec, &series, &none).unwrap().quantile_residuals(&pv).unwrap();
        if ks_uniform(res.iter().map(|&x| norm_cdf(x)).collect()) < crit {
            accepted += 1;
        }
        lag1 += sample_acf(&res, 1)[0];
    }
    assert!(accepted as f64 >= 0.97 * reps as f64, "{accepted} of {reps} accepted");
    let mean_lag1 = lag1 / reps as f64;
    assert!(mean_lag1.abs() < 4.0 / (n as f64).sqrt(), "mean lag-1 autocorrelation {mean_lag1}");
}
