//! Gaussian-copula marginal beta regression.
//!
//! Each observation is tied to a latent standard-normal error through the
//! probability integral transform, `y_t = F_t⁻¹(Φ(ε_t))`, and the errors
//! follow a unit-variance ARMA process. The likelihood is the independence
//! beta likelihood times a calibration term
//! `∏ φ(ε_t; m_{t|t−1}, s_{t|t−1}) / φ(ε_t)` computed by the Kalman filter.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::arma_gauss::{build_state_space, ArmaStateSpace, KalmanPrediction, KalmanState};
use crate::dist::{beta_logpdf, beta_quantile, norm_cdf, norm_logpdf, norm_quantile, regularized_incomplete_beta, BetaMP};
use crate::error::{Error, Result};
use crate::quad::integrate;
use crate::real::Real;
use crate::regressors::{build_design_at, linear_predictors, Columns, Design, ModelSpec, ParameterVector};

/// Stand-in for `−∞` returned at parameter points where the likelihood
/// cannot be evaluated.
pub const LOGLIK_SENTINEL: f64 = -1e10;

/// Lower and upper integration limits for predictive-density checks.
pub const DENSITY_SUPPORT: (f64, f64) = (1e-12, 1.0 - 1e-12);

/// Observations strictly inside `(0, 1)` with their (1-based) time indices.
///
/// Times are consecutive unless observations have been removed; every jump
/// in `times` starts a new segment, and the error filter restarts at the
/// stationary law on each segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundedSeries<T> {
    values: Vec<T>,
    times: Vec<f64>,
    start_date: Option<NaiveDate>,
    period: u32,
}

impl<T: Real> BoundedSeries<T> {
    /// Consecutive observations at times `1..=n`. Rejects values outside `(0,1)`.
    pub fn new(values: Vec<T>) -> Result<Self> {
        let times = (1..=values.len()).map(|t| t as f64).collect();
        Self::with_times(values, times)
    }

    pub fn with_times(values: Vec<T>, times: Vec<f64>) -> Result<Self> {
        if values.len() != times.len() {
            return Err(Error::Dimension(format!("{} values but {} time indices", values.len(), times.len())));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > T::zero() && **v < T::one())) {
            return Err(Error::Domain(format!("observation {} equals {v}; values must lie strictly inside (0,1)", i + 1)));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Data("time indices must be strictly increasing".into()));
        }
        Ok(Self { values, times, start_date: None, period: 52 })
    }

    /// Maps `y` to `(y(n−1) + 1/2)/n`, pulling exact zeros and ones inside the
    /// unit interval. Only applied when explicitly requested.
    pub fn squeezed(raw: &[T]) -> Result<Self> {
        let n = T::lit(raw.len() as f64);
        let half = T::lit(0.5);
        if let Some(v) = raw.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return Err(Error::Domain(format!("value {v} outside [0,1] cannot be squeezed")));
        }
        Self::new(raw.iter().map(|&y| (y * (n - T::one()) + half) / n).collect())
    }

    pub fn with_start_date(mut self, date: NaiveDate) -> Self {
        self.start_date = Some(date);
        self
    }

    pub fn with_period(mut self, period: u32) -> Self {
        self.period = period;
        self
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn start_date(&self) -> Option<NaiveDate> {
        self.start_date
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index ranges of the contiguous segments.
    pub fn segments(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..self.times.len() {
            if self.times[i] - self.times[i - 1] != 1.0 {
                out.push(start..i);
                start = i;
            }
        }
        if !self.times.is_empty() {
            out.push(start..self.times.len());
        }
        out
    }

    /// Drops the observations at `indices` (positions in this series),
    /// returning the gapped series and the matching rows of `extras`.
    pub fn without(&self, indices: &[usize], extras: &Columns<T>) -> (Self, Columns<T>) {
        let keep: Vec<bool> = (0..self.len()).map(|i| !indices.contains(&i)).collect();
        let pick = |v: &[T]| v.iter().zip(&keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect::<Vec<T>>();
        let times = self.times.iter().zip(&keep).filter(|(_, k)| **k).map(|(t, _)| *t).collect();
        let series = Self { values: pick(&self.values), times, start_date: self.start_date, period: self.period };
        let extras = extras.iter().map(|(k, v)| (k.clone(), pick(v))).collect();
        (series, extras)
    }
}

/// Latent errors `ε_t = Φ⁻¹(F_t(y_t))`.
///
/// Upper-tail values go through the survival function so that `ε` keeps
/// its precision when `F_t(y_t)` is close to one.
pub fn to_errors<T: Real>(values: &[T], mu_kappa: &[(T, T)]) -> Result<Vec<T>> {
    if values.len() != mu_kappa.len() {
        return Err(Error::Dimension(format!("{} values but {} predictor pairs", values.len(), mu_kappa.len())));
    }
    values.iter().zip(mu_kappa).map(|(&y, &(mu, kappa))| to_error(y, &BetaMP::new(mu, kappa)?)).collect()
}

fn to_error<T: Real>(y: T, d: &BetaMP<T>) -> Result<T> {
    if !(y > T::zero() && y < T::one()) {
        return Err(Error::Domain(format!("observation {y} outside (0,1)")));
    }
    let half = T::lit(0.5);
    let cdf = regularized_incomplete_beta(d.a(), d.b(), y)?;
    if cdf <= half {
        if cdf == T::zero() {
            return Err(Error::Numerical(format!("probability integral transform underflows at y={y}")));
        }
        norm_quantile(cdf)
    } else {
        let sf = regularized_incomplete_beta(d.b(), d.a(), T::one() - y)?;
        if sf == T::zero() {
            return Err(Error::Numerical(format!("probability integral transform saturates at y={y}")));
        }
        Ok(-norm_quantile(sf)?)
    }
}

/// Observations `y_t = F_t⁻¹(Φ(ε_t))` at times `1..=n`.
pub fn from_errors<T: Real>(eps: &[T], mu_kappa: &[(T, T)]) -> Result<BoundedSeries<T>> {
    if eps.len() != mu_kappa.len() {
        return Err(Error::Dimension(format!("{} errors but {} predictor pairs", eps.len(), mu_kappa.len())));
    }
    let values = eps
        .iter()
        .zip(mu_kappa)
        .map(|(&e, &(mu, kappa))| from_error(e, mu, kappa))
        .collect::<Result<Vec<T>>>()?;
    BoundedSeries::new(values)
}

fn from_error<T: Real>(eps: T, mu: T, kappa: T) -> Result<T> {
    if !eps.is_finite() {
        return Err(Error::Domain(format!("non-finite error {eps}")));
    }
    if eps <= T::zero() {
        beta_quantile(&BetaMP::new(mu, kappa)?, norm_cdf(eps))
    } else {
        // Reflect: 1 − Y follows Beta(1 − μ, κ).
        let reflected = beta_quantile(&BetaMP::new(T::one() - mu, kappa)?, norm_cdf(-eps))?;
        Ok(T::one() - reflected)
    }
}

/// Independence log-likelihood and the Gaussian calibration sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoglikParts<T> {
    pub independence: T,
    pub calibration: T,
}

impl<T: Real> LoglikParts<T> {
    pub fn total(&self) -> T {
        self.independence + self.calibration
    }
}

/// A series bound to a model specification, with its design precomputed.
#[derive(Clone, Debug)]
pub struct CopulaModel<T> {
    spec: ModelSpec,
    series: BoundedSeries<T>,
    extras: Columns<T>,
    design: Design<T>,
    center: f64,
}

impl<T: Real> CopulaModel<T> {
    pub fn new(spec: &ModelSpec, series: &BoundedSeries<T>, extras: &Columns<T>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::Data("empty series".into()));
        }
        let center = spec.center_for(series.times());
        let design = build_design_at(spec, series.times(), center, extras)?;
        Ok(Self { spec: spec.with_trend_center(center), series: series.clone(), extras: extras.clone(), design, center })
    }

    /// Specification with the trend center pinned to this series.
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn series(&self) -> &BoundedSeries<T> {
        &self.series
    }

    pub fn extras(&self) -> &Columns<T> {
        &self.extras
    }

    pub fn design(&self) -> &Design<T> {
        &self.design
    }

    pub fn trend_center(&self) -> f64 {
        self.center
    }

    fn check(&self, pv: &ParameterVector<T>) -> Result<()> {
        if !pv.conforms_to(&self.spec) {
            return Err(Error::Dimension(format!(
                "parameter vector of length {} does not match the specification ({})",
                pv.len(),
                self.spec.n_params()
            )));
        }
        Ok(())
    }

    pub fn mu_kappa(&self, pv: &ParameterVector<T>) -> Result<Vec<(T, T)>> {
        self.check(pv)?;
        linear_predictors(&self.design.x, &self.design.z, pv)
    }

    pub fn marginals(&self, pv: &ParameterVector<T>) -> Result<Vec<BetaMP<T>>> {
        self.mu_kappa(pv)?.into_iter().map(|(m, k)| BetaMP::new(m, k)).collect()
    }

    pub fn errors(&self, pv: &ParameterVector<T>) -> Result<Vec<T>> {
        to_errors(self.series.values(), &self.mu_kappa(pv)?)
    }

    /// One-step predictions of every error, restarting at each segment.
    pub fn one_step(&self, pv: &ParameterVector<T>, eps: &[T]) -> Result<Vec<KalmanPrediction<T>>> {
        let ss = build_state_space(&pv.arma()?)?;
        let mut out = Vec::with_capacity(eps.len());
        for seg in self.series.segments() {
            let mut state = KalmanState::stationary(&ss);
            for &e in &eps[seg] {
                out.push(state.prediction()?);
                state.update(&ss, e)?;
            }
        }
        Ok(out)
    }

    pub fn loglik_parts(&self, pv: &ParameterVector<T>) -> Result<LoglikParts<T>> {
        let marginals = self.marginals(pv)?;
        let mut independence = T::zero();
        for (d, &y) in marginals.iter().zip(self.series.values()) {
            independence = independence + beta_logpdf(d, y)?;
        }
        let arma = pv.arma()?;
        if arma.p() == 0 && arma.q() == 0 {
            return Ok(LoglikParts { independence, calibration: T::zero() });
        }
        let eps = marginals.iter().zip(self.series.values()).map(|(d, &y)| to_error(y, d)).collect::<Result<Vec<T>>>()?;
        let ss = build_state_space(&arma)?;
        let mut calibration = T::zero();
        let zero = T::zero();
        let one = T::one();
        for seg in self.series.segments() {
            let mut state = KalmanState::stationary(&ss);
            for &e in &eps[seg] {
                let pred = state.prediction()?;
                calibration = calibration + norm_logpdf(e, pred.m, pred.s) - norm_logpdf(e, zero, one);
                state.update(&ss, e)?;
            }
        }
        Ok(LoglikParts { independence, calibration })
    }

    /// Log-likelihood, or [`LOGLIK_SENTINEL`] where it cannot be evaluated.
    pub fn loglik(&self, pv: &ParameterVector<T>) -> T {
        match self.loglik_parts(pv) {
            Ok(parts) if parts.total().is_finite() => parts.total(),
            _ => T::lit(LOGLIK_SENTINEL),
        }
    }

    /// Predictive quantile residuals `(ε_t − m_{t|t−1}) / s_{t|t−1}`.
    pub fn quantile_residuals(&self, pv: &ParameterVector<T>) -> Result<Vec<T>> {
        let eps = self.errors(pv)?;
        let preds = self.one_step(pv, &eps)?;
        Ok(eps.iter().zip(&preds).map(|(&e, p)| p.standardize(e)).collect())
    }

    /// The same residuals computed as `Φ⁻¹` of the one-step predictive CDF at `y_t`.
    pub fn quantile_residuals_via_cdf(&self, pv: &ParameterVector<T>) -> Result<Vec<T>> {
        let marginals = self.marginals(pv)?;
        let eps = self.errors(pv)?;
        let preds = self.one_step(pv, &eps)?;
        marginals
            .into_iter()
            .zip(preds)
            .zip(self.series.values())
            .map(|((marginal, gauss), &y)| norm_quantile(PredictiveDistribution { marginal, gauss }.cdf(y)?))
            .collect()
    }

    /// Law of the observation `k ≥ 1` steps after the last one.
    /// `future_extras[name][k − 1]` supplies dummy values at that time.
    pub fn predict(&self, pv: &ParameterVector<T>, future_extras: &Columns<T>, k: usize) -> Result<PredictiveDistribution<T>> {
        if k == 0 {
            return Err(Error::Domain("prediction lag must be at least 1".into()));
        }
        let eps = self.errors(pv)?;
        let ss = build_state_space(&pv.arma()?)?;
        let last = self.series.segments().pop().expect("non-empty series");
        let gauss = forecast_from(&ss, &eps[last], k)?;
        let marginal = self.marginal_at(pv, future_extras, k)?;
        Ok(PredictiveDistribution { marginal, gauss })
    }

    /// Marginal law `k` steps after the last observation.
    pub fn marginal_at(&self, pv: &ParameterVector<T>, future_extras: &Columns<T>, k: usize) -> Result<BetaMP<T>> {
        self.check(pv)?;
        let t = self.series.times().last().copied().expect("non-empty series") + k as f64;
        let mut row = Columns::new();
        for name in self.spec.dummy_names() {
            let col = future_extras.get(&name).ok_or_else(|| Error::MissingColumn(name.clone()))?;
            let v = *col
                .get(k - 1)
                .ok_or_else(|| Error::MissingColumn(format!("{name} (no value for lag {k})")))?;
            row.insert(name, vec![v]);
        }
        let design = build_design_at(&self.spec, &[t], self.center, &row)?;
        let (mu, kappa) = linear_predictors(&design.x, &design.z, pv)?[0];
        BetaMP::new(mu, kappa)
    }
}

fn forecast_from<T: Real>(ss: &ArmaStateSpace<T>, eps: &[T], k: usize) -> Result<KalmanPrediction<T>> {
    let mut state = KalmanState::stationary(ss);
    for &e in eps {
        state.update(ss, e)?;
    }
    for _ in 1..k {
        state.advance(ss);
    }
    state.prediction()
}

/// k-step predictive law of an observation: beta marginal plus the Gaussian
/// conditional law of its latent error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution<T> {
    pub marginal: BetaMP<T>,
    pub gauss: KalmanPrediction<T>,
}

impl<T: Real> PredictiveDistribution<T> {
    /// Log density; `−∞` where the probability integral transform saturates,
    /// since `s ≤ 1` makes the copula factor vanish there.
    pub fn ln_pdf(&self, y: T) -> Result<T> {
        let eps = match to_error(y, &self.marginal) {
            Ok(e) => e,
            Err(Error::Numerical(_)) => return Ok(T::neg_infinity()),
            Err(e) => return Err(e),
        };
        Ok(beta_logpdf(&self.marginal, y)? + norm_logpdf(eps, self.gauss.m, self.gauss.s)
            - norm_logpdf(eps, T::zero(), T::one()))
    }

    pub fn pdf(&self, y: T) -> Result<T> {
        Ok(self.ln_pdf(y)?.exp())
    }

    pub fn cdf(&self, y: T) -> Result<T> {
        if y <= T::zero() {
            return Ok(T::zero());
        }
        if y >= T::one() {
            return Ok(T::one());
        }
        let eps = to_error(y, &self.marginal)?;
        Ok(norm_cdf(self.gauss.standardize(eps)))
    }

    /// `F⁻¹[Φ{m + Φ⁻¹(α) s}]`.
    pub fn quantile(&self, alpha: T) -> Result<T> {
        let z = norm_quantile(alpha)?;
        from_error(self.gauss.m + z * self.gauss.s, self.marginal.mu(), self.marginal.kappa())
    }

    /// Equal-tailed interval with coverage `level`.
    pub fn interval(&self, level: T) -> Result<(T, T)> {
        if !(level > T::zero() && level < T::one()) {
            return Err(Error::Domain(format!("interval level {level} outside (0,1)")));
        }
        let tail = (T::one() - level) / T::lit(2.0);
        Ok((self.quantile(tail)?, self.quantile(T::one() - tail)?))
    }

    /// Adaptive quadrature of `∫ y^j p(y) dy` for `j = 0, 1, 2`.
    pub fn moments(&self) -> (f64, f64, f64) {
        let (lo, hi) = DENSITY_SUPPORT;
        let dens = |y: f64| self.pdf(T::lit(y)).map(|v| v.to_f64_lossy()).unwrap_or(0.0);
        let tol = 1e-10;
        let (m0, _) = integrate(dens, lo, hi, tol);
        let (m1, _) = integrate(|y| y * dens(y), lo, hi, tol);
        let (m2, _) = integrate(|y| y * y * dens(y), lo, hi, tol);
        (m0, m1, m2)
    }

    /// Mean and variance by quadrature.
    pub fn mean_variance(&self) -> (f64, f64) {
        let (m0, m1, m2) = self.moments();
        let mean = m1 / m0;
        (mean, m2 / m0 - mean * mean)
    }
}

/// Log-likelihood of `series` under `(spec, pv)`; sentinel on failure.
pub fn loglik<T: Real>(spec: &ModelSpec, pv: &ParameterVector<T>, series: &BoundedSeries<T>, extras: &Columns<T>) -> T {
    match CopulaModel::new(spec, series, extras) {
        Ok(model) => model.loglik(pv),
        Err(_) => T::lit(LOGLIK_SENTINEL),
    }
}

pub fn predict<T: Real>(
    spec: &ModelSpec,
    pv: &ParameterVector<T>,
    series: &BoundedSeries<T>,
    extras: &Columns<T>,
    future_extras: &Columns<T>,
    k: usize,
) -> Result<PredictiveDistribution<T>> {
    CopulaModel::new(spec, series, extras)?.predict(pv, future_extras, k)
}

pub fn quantile_residuals<T: Real>(
    spec: &ModelSpec,
    pv_hat: &ParameterVector<T>,
    series: &BoundedSeries<T>,
    extras: &Columns<T>,
) -> Result<Vec<T>> {
    CopulaModel::new(spec, series, extras)?.quantile_residuals(pv_hat)
}

/// Draws `n` errors from the stationary ARMA process of `ss`.
pub fn simulate_errors<T: Real>(ss: &ArmaStateSpace<T>, n: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let r = ss.dim();
    let chol = ss.stationary_cov().psd_sqrt();
    let mut draw = || T::lit(StandardNormal.sample(rng));
    let z: Vec<T> = (0..r).map(|_| draw()).collect();
    let mut state = chol.mat_vec(&z);
    let sd = ss.innovation_variance().sqrt();
    let mut next = vec![T::zero(); r];
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        out.push(state[0]);
        if t + 1 == n {
            break;
        }
        ss.apply_transition(&state, &mut next);
        let eta = draw() * sd;
        for (i, v) in next.iter_mut().enumerate() {
            *v = *v + ss.loading()[i] * eta;
        }
        std::mem::swap(&mut state, &mut next);
    }
    out
}

/// Simulates `n` observations at times `1..=n`. Deterministic in `seed`.
pub fn simulate<T: Real>(
    spec: &ModelSpec,
    pv: &ParameterVector<T>,
    n: usize,
    extras: &Columns<T>,
    seed: u64,
) -> Result<BoundedSeries<T>> {
    if n == 0 {
        return Err(Error::Data("cannot simulate an empty series".into()));
    }
    if !pv.conforms_to(spec) {
        return Err(Error::Dimension("parameter vector does not match the specification".into()));
    }
    let times: Vec<f64> = (1..=n).map(|t| t as f64).collect();
    let center = spec.center_for(&times);
    let design = build_design_at(spec, &times, center, extras)?;
    let mu_kappa = linear_predictors(&design.x, &design.z, pv)?;
    let ss = build_state_space(&pv.arma()?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = simulate_errors(&ss, n, &mut rng);
    from_errors(&eps, &mu_kappa).map(|s| s.with_period(spec.period()))
}
