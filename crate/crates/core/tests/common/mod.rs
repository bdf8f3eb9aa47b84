//! Shared generators and invariant checks for the property and acceptance suites.
#![allow(dead_code)]

use betats::arma_gauss::ArmaCoefficients;
use betats::copula_model::{predict, simulate, BoundedSeries};
use betats::inference::{aic, fit};
use betats::regressors::{Columns, CovariateTerm, ModelSpec, ParameterVector};
use betats::surveillance::{cusum, CusumMode};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub const CASES: u32 = 1000;

pub fn runner() -> TestRunner {
    TestRunner::new(Config { cases: CASES, failure_persistence: None, ..Config::default() })
}

pub fn intercept_spec(p: usize, q: usize) -> ModelSpec {
    ModelSpec::new(vec![CovariateTerm::Intercept], vec![CovariateTerm::Intercept], p, q, 52).unwrap()
}

pub fn seasonal_spec(p: usize, q: usize) -> ModelSpec {
    ModelSpec::seasonal(p, q, 52)
}

/// Admissible ARMA coefficients from PACF values in `(−0.9, 0.9)`.
pub fn arma_from_pacf(ar: &[f64], ma: &[f64]) -> ArmaCoefficients<f64> {
    let atanh = |x: f64| 0.5 * ((1.0 + x) / (1.0 - x)).ln();
    let u: Vec<f64> = ar.iter().chain(ma).map(|&x| atanh(x)).collect();
    ArmaCoefficients::from_unconstrained(ar.len(), ma.len(), &u).unwrap()
}

fn pacf_vec(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.9f64..0.9, 0..=max)
}

fn ensure(cond: bool, msg: String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg))
    }
}

/// With pure AR(p) errors the k-step predictive law ignores everything
/// before the last `p` observations.
pub fn markov_property(runner: &mut TestRunner) -> Result<(), String> {
    let strat = (
        prop::collection::vec(-0.9f64..0.9, 1..=3),
        20usize..60,
        1usize..6,
        any::<u64>(),
        0.01f64..0.99,
    );
    runner
        .run(&strat, |(pacf, n, k, seed, replacement)| {
            let arma = arma_from_pacf(&pacf, &[]);
            let p = arma.p();
            let spec = intercept_spec(p, 0);
            let pv = ParameterVector { beta_x: vec![-0.5], beta_z: vec![3.0], psi: arma.psi().to_vec(), lambda: vec![] };
            let none = Columns::new();
            let series = simulate(&spec, &pv, n, &none, seed).unwrap();
            let mut values = series.values().to_vec();
            let idx = (seed as usize) % (n - p);
            values[idx] = replacement;
            let perturbed = BoundedSeries::new(values).unwrap();
            let a = predict(&spec, &pv, &series, &none, &none, k).unwrap();
            let b = predict(&spec, &pv, &perturbed, &none, &none, k).unwrap();
            ensure(
                (a.gauss.m - b.gauss.m).abs() <= 1e-12 && (a.gauss.s - b.gauss.s).abs() <= 1e-12,
                format!("AR({p}) k={k}: {:?} vs {:?}", a.gauss, b.gauss),
            )
        })
        .map_err(|e| e.to_string())
}

/// With pure MA(q) errors the predictive law beyond lag `q` is the marginal.
pub fn m_dependence(runner: &mut TestRunner) -> Result<(), String> {
    let strat = (prop::collection::vec(-0.9f64..0.9, 1..=3), 5usize..50, 1usize..5, any::<u64>());
    runner
        .run(&strat, |(pacf, n, extra, seed)| {
            let arma = arma_from_pacf(&[], &pacf);
            let q = arma.q();
            let spec = intercept_spec(0, q);
            let pv = ParameterVector { beta_x: vec![0.3], beta_z: vec![2.5], psi: vec![], lambda: arma.lambda().to_vec() };
            let none = Columns::new();
            let series = simulate(&spec, &pv, n, &none, seed).unwrap();
            let pred = predict(&spec, &pv, &series, &none, &none, q + extra).unwrap();
            ensure(
                pred.gauss.m.abs() <= 1e-12 && (pred.gauss.s - 1.0).abs() <= 1e-12,
                format!("MA({q}) lag {}: {:?}", q + extra, pred.gauss),
            )
        })
        .map_err(|e| e.to_string())
}

pub fn pack_unpack(runner: &mut TestRunner) -> Result<(), String> {
    let strat = (0usize..4, 0usize..4, 0usize..3, 0usize..3, any::<u64>());
    runner
        .run(&strat, |(p, q, extra_mean, extra_prec, seed)| {
            let mut mean = vec![CovariateTerm::Intercept];
            mean.extend((1..=extra_mean as u32).map(CovariateTerm::SinHarmonic));
            let mut prec = vec![CovariateTerm::Intercept, CovariateTerm::ScaledTrend];
            prec.truncate(1 + extra_prec.min(1));
            prec.extend((1..extra_prec as u32).map(CovariateTerm::CosHarmonic));
            let spec = ModelSpec::new(mean, prec, p, q, 52).unwrap();
            let d = spec.n_params();
            let theta: Vec<f64> = (0..d).map(|i| ((seed.wrapping_add(i as u64 * 7919)) % 2001) as f64 / 1000.0 - 1.0).collect();
            let pv = ParameterVector::unpack(&spec, &theta).unwrap();
            ensure(pv.conforms_to(&spec), "unpacked vector does not conform".into())?;
            ensure(pv.pack() == theta, "pack ∘ unpack is not the identity".into())?;
            let again = ParameterVector::unpack(&spec, &pv.pack()).unwrap();
            ensure(again == pv, "unpack ∘ pack is not the identity".into())?;
            ensure(spec.parameter_names().len() == d, "names do not match dimension".into())
        })
        .map_err(|e| e.to_string())
}

/// Every fit reports `aic = −2ℓ + 2·dim(θ)`.
pub fn aic_identity(runner: &mut TestRunner) -> Result<(), String> {
    let strat = (0usize..2, 0usize..2, -2.0f64..1.0, 1.5f64..4.0, any::<u64>());
    runner
        .run(&strat, |(p, q, bx, bz, seed)| {
            let spec = intercept_spec(p, q);
            let truth = ParameterVector {
                beta_x: vec![bx],
                beta_z: vec![bz],
                psi: vec![0.4; p],
                lambda: vec![0.2; q],
            };
            let none = Columns::new();
            let series = simulate(&spec, &truth, 40, &none, seed).unwrap();
            let f = fit(&spec, &series, &none, None).unwrap();
            let dim = spec.n_params();
            ensure(f.dim() == dim, format!("dimension {} vs {dim}", f.dim()))?;
            ensure(f.aic == aic(f.loglik_max, dim), "aic helper disagrees".into())?;
            ensure(f.aic == -2.0 * f.loglik_max + 2.0 * dim as f64, format!("aic {} vs ll {}", f.aic, f.loglik_max))
        })
        .map_err(|e| e.to_string())
}

/// Raising one residual never lowers any later `C⁺`, and the chart
/// matches a direct recomputation of the recursion.
pub fn cusum_monotonicity(runner: &mut TestRunner) -> Result<(), String> {
    let strat = (prop::collection::vec(-4.0f64..4.0, 1..80), any::<prop::sample::Index>(), 0.0f64..5.0, 0.0f64..1.5, 1.0f64..6.0);
    runner
        .run(&strat, |(r, at, bump, k, h)| {
            let i = at.index(r.len());
            let base = cusum(&r, k, h, CusumMode::Bilateral);
            let mut raised = r.clone();
            raised[i] += bump;
            let up = cusum(&raised, k, h, CusumMode::Bilateral);
            for t in 0..r.len() {
                ensure(up.c_plus[t] >= base.c_plus[t], format!("C+ decreased at {t}"))?;
            }
            let mut prev = 0.0f64;
            for (t, &x) in r.iter().enumerate() {
                let c = (x - k + prev).max(0.0);
                ensure(c == base.c_plus[t], format!("recursion mismatch at {t}"))?;
                ensure(base.c_plus[t] >= 0.0 && base.c_minus[t] >= 0.0, "negative sum".into())?;
                ensure(base.alarms[t] == (base.c_plus[t] > h || base.c_minus[t] > h), "alarm flag mismatch".into())?;
                prev = c;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}
