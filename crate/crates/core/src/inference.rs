//! Maximum-likelihood fitting, standard errors, AIC ranking and profile
//! likelihood.
//!
//! The optimizer works on an unconstrained scale: regression coefficients
//! as they are, AR and MA blocks through the PACF/tanh maps. Standard errors
//! come from the observed information on the natural scale.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arma_gauss::{theoretical_acf, ArmaCoefficients};
use crate::copula_model::{BoundedSeries, CopulaModel, LOGLIK_SENTINEL};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::optim::{central_hessian, minimize, BfgsOptions};
use crate::regressors::{logit, Columns, ModelSpec, ParameterVector};

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub bfgs: BfgsOptions,
    /// Extra BFGS restarts from the last point when the first run stops early.
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { bfgs: BfgsOptions::default(), restarts: 2 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    /// Specification with the trend center pinned to the fitting data.
    pub spec: ModelSpec,
    pub pv_hat: ParameterVector<f64>,
    /// Natural-scale standard errors; `None` when the observed information
    /// is not positive definite.
    pub se: Option<Vec<f64>>,
    pub loglik_max: f64,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Sup-norm of the unconstrained-scale gradient at the returned point.
    pub grad_norm: f64,
    pub residuals: Vec<f64>,
    pub n_obs: usize,
}

impl FitResult {
    pub fn dim(&self) -> usize {
        self.pv_hat.len()
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.spec.parameter_names()
    }

    pub fn arma(&self) -> Result<ArmaCoefficients<f64>> {
        self.pv_hat.arma()
    }
}

/// `−2ℓ + 2·dim`.
pub fn aic(loglik: f64, dim: usize) -> f64 {
    -2.0 * loglik + 2.0 * dim as f64
}

/// Regression blocks mapped as-is, ARMA blocks through the PACF maps.
fn to_unconstrained(spec: &ModelSpec, pv: &ParameterVector<f64>) -> Result<Vec<f64>> {
    let mut u = pv.beta_x.clone();
    u.extend_from_slice(&pv.beta_z);
    u.extend(pv.arma()?.to_unconstrained());
    debug_assert_eq!(u.len(), spec.n_params());
    Ok(u)
}

fn from_unconstrained(spec: &ModelSpec, u: &[f64]) -> Result<ParameterVector<f64>> {
    let (nx, nz) = (spec.n_mean(), spec.n_precision());
    let arma = ArmaCoefficients::from_unconstrained(spec.p(), spec.q(), &u[nx + nz..])?;
    Ok(ParameterVector {
        beta_x: u[..nx].to_vec(),
        beta_z: u[nx..nx + nz].to_vec(),
        psi: arma.psi().to_vec(),
        lambda: arma.lambda().to_vec(),
    })
}

fn neg_loglik_unconstrained(model: &CopulaModel<f64>, u: &[f64]) -> f64 {
    match from_unconstrained(model.spec(), u) {
        Ok(pv) => -model.loglik(&pv),
        Err(_) => -LOGLIK_SENTINEL,
    }
}

/// Method-of-moments starting values: intercepts only.
fn moment_start(spec: &ModelSpec, series: &BoundedSeries<f64>) -> ParameterVector<f64> {
    let y = series.values();
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n.max(2.0);
    let kappa = if var > 0.0 { (mean * (1.0 - mean) / var - 1.0).max(1.0) } else { 100.0 };
    let mut beta_x = vec![0.0; spec.n_mean()];
    let mut beta_z = vec![0.0; spec.n_precision()];
    beta_x[0] = logit(mean.clamp(1e-6, 1.0 - 1e-6));
    beta_z[0] = kappa.ln();
    ParameterVector { beta_x, beta_z, psi: vec![0.0; spec.p()], lambda: vec![0.0; spec.q()] }
}

/// Sample autocorrelations at lags `1..=max_lag`.
pub fn sample_acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return vec![0.0; max_lag];
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    (1..=max_lag)
        .map(|l| {
            if l >= n || c0 == 0.0 {
                return 0.0;
            }
            (l..n).map(|t| (x[t] - mean) * (x[t - l] - mean)).sum::<f64>() / c0
        })
        .collect()
}

fn yule_walker(x: &[f64], order: usize) -> Vec<f64> {
    let r = sample_acf(x, order);
    let mut phi: Vec<f64> = Vec::with_capacity(order);
    let mut v = 1.0;
    for k in 0..order {
        let num = r[k] - phi.iter().enumerate().map(|(j, p)| p * r[k - 1 - j]).sum::<f64>();
        let a = if v > 0.0 { (num / v).clamp(-0.999, 0.999) } else { 0.0 };
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = prev[j] - a * prev[k - 1 - j];
        }
        phi.push(a);
        v *= 1.0 - a * a;
    }
    phi
}

/// Hannan–Rissanen starting values for the ARMA block, shrunk toward zero
/// until admissible.
fn hannan_rissanen(eps: &[f64], p: usize, q: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = eps.len();
    if p + q == 0 {
        return Some((Vec::new(), Vec::new()));
    }
    let (psi, lambda) = if q == 0 {
        (yule_walker(eps, p), Vec::new())
    } else {
        let m = (2 * (p + q)).max(10).min(n / 4);
        if m == 0 {
            return None;
        }
        let phi = yule_walker(eps, m);
        let mut a = vec![0.0; n];
        for t in m..n {
            a[t] = eps[t] - (0..m).map(|j| phi[j] * eps[t - 1 - j]).sum::<f64>();
        }
        let start = m + q.max(p);
        let k = p + q;
        if n <= start + k {
            return None;
        }
        let mut xtx = Matrix::<f64>::zeros(k, k);
        let mut xty = vec![0.0; k];
        let mut row = vec![0.0; k];
        for t in start..n {
            for i in 0..p {
                row[i] = eps[t - 1 - i];
            }
            for j in 0..q {
                row[p + j] = a[t - 1 - j];
            }
            for i in 0..k {
                xty[i] += row[i] * eps[t];
                for j in 0..k {
                    xtx[(i, j)] += row[i] * row[j];
                }
            }
        }
        let b = xtx.solve(&xty).ok()?;
        (b[..p].to_vec(), b[p..].to_vec())
    };
    let mut shrink = 1.0;
    for _ in 0..30 {
        let ps: Vec<f64> = psi.iter().map(|v| v * shrink).collect();
        let ls: Vec<f64> = lambda.iter().map(|v| v * shrink).collect();
        if ArmaCoefficients::new(ps.clone(), ls.clone()).is_ok() {
            return Some((ps, ls));
        }
        shrink *= 0.85;
    }
    None
}

fn run_bfgs(model: &CopulaModel<f64>, start: Vec<f64>, opts: &FitOptions) -> crate::optim::Minimum {
    let objective = |u: &[f64]| neg_loglik_unconstrained(model, u);
    let mut best = minimize(objective, &start, &opts.bfgs);
    for _ in 0..opts.restarts {
        if best.converged {
            break;
        }
        let again = minimize(objective, &best.x, &opts.bfgs);
        let improved = again.f < best.f || again.converged;
        let iterations = best.iterations + again.iterations;
        if improved {
            best = again;
        }
        best.iterations = iterations;
    }
    best
}

/// Fits `spec` by maximum likelihood.
pub fn fit(
    spec: &ModelSpec,
    series: &BoundedSeries<f64>,
    extras: &Columns<f64>,
    init: Option<&ParameterVector<f64>>,
) -> Result<FitResult> {
    fit_with(spec, series, extras, init, &FitOptions::default())
}

pub fn fit_with(
    spec: &ModelSpec,
    series: &BoundedSeries<f64>,
    extras: &Columns<f64>,
    init: Option<&ParameterVector<f64>>,
    opts: &FitOptions,
) -> Result<FitResult> {
    if series.len() <= spec.n_params() {
        return Err(Error::Data(format!(
            "{} observations cannot identify {} parameters",
            series.len(),
            spec.n_params()
        )));
    }
    let model = CopulaModel::new(spec, series, extras)?;
    let spec = model.spec().clone();
    let start = match init {
        Some(pv) if pv.conforms_to(&spec) => to_unconstrained(&spec, pv)?,
        Some(_) => return Err(Error::Dimension("initial values do not match the specification".into())),
        None => default_start(&model, opts)?,
    };
    let best = run_bfgs(&model, start, opts);
    finish(&model, best)
}

/// Independence fit on the regression blocks, then Hannan–Rissanen (or
/// zero) ARMA values, whichever gives the higher likelihood.
fn default_start(model: &CopulaModel<f64>, opts: &FitOptions) -> Result<Vec<f64>> {
    let spec = model.spec();
    let ind_spec = spec.with_orders(0, 0);
    let ind_model = CopulaModel::new(&ind_spec, model.series(), model.extras())?;
    let m0 = moment_start(&ind_spec, model.series());
    let ind = run_bfgs(&ind_model, to_unconstrained(&ind_spec, &m0)?, opts);
    let beta = ind.x;
    if spec.p() + spec.q() == 0 {
        return Ok(beta);
    }
    let mut candidates = Vec::new();
    let mut zero = beta.clone();
    zero.extend(std::iter::repeat(0.0).take(spec.p() + spec.q()));
    candidates.push(zero);
    let pv_ind = from_unconstrained(&ind_spec, &beta)?;
    if let Ok(eps) = ind_model.errors(&pv_ind) {
        if let Some((psi, lambda)) = hannan_rissanen(&eps, spec.p(), spec.q()) {
            let mut u = beta.clone();
            u.extend(ArmaCoefficients::new(psi, lambda)?.to_unconstrained());
            candidates.push(u);
        }
    }
    let best = candidates
        .into_iter()
        .map(|u| (neg_loglik_unconstrained(model, &u), u))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one candidate");
    Ok(best.1)
}

fn finish(model: &CopulaModel<f64>, best: crate::optim::Minimum) -> Result<FitResult> {
    let spec = model.spec().clone();
    let pv_hat = from_unconstrained(&spec, &best.x)?;
    let loglik_max = model.loglik(&pv_hat);
    if loglik_max <= LOGLIK_SENTINEL {
        return Err(Error::Numerical("likelihood could not be evaluated at any visited point".into()));
    }
    let info = information_at(model, &pv_hat);
    let se = standard_errors(&info);
    let residuals = model.quantile_residuals(&pv_hat)?;
    Ok(FitResult {
        aic: aic(loglik_max, spec.n_params()),
        spec,
        pv_hat,
        se,
        loglik_max,
        converged: best.converged,
        iterations: best.iterations,
        grad_norm: best.grad_norm,
        residuals,
        n_obs: model.series().len(),
    })
}

/// Negative Hessian of `f` at `x`, symmetrized.
pub fn information_from<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Matrix<f64> {
    let mut info = central_hessian(&f, x).scale(-1.0);
    info.symmetrize();
    info
}

fn information_at(model: &CopulaModel<f64>, pv: &ParameterVector<f64>) -> Matrix<f64> {
    let spec = model.spec();
    information_from(
        |theta| match ParameterVector::unpack(spec, theta) {
            Ok(pv) => model.loglik(&pv),
            Err(_) => LOGLIK_SENTINEL,
        },
        &pv.pack(),
    )
}

/// Observed information of the natural-scale parameters at `pv_hat`.
pub fn observed_information(
    spec: &ModelSpec,
    series: &BoundedSeries<f64>,
    extras: &Columns<f64>,
    pv_hat: &ParameterVector<f64>,
) -> Result<Matrix<f64>> {
    let model = CopulaModel::new(spec, series, extras)?;
    if !pv_hat.conforms_to(model.spec()) {
        return Err(Error::Dimension("parameter vector does not match the specification".into()));
    }
    Ok(information_at(&model, pv_hat))
}

/// Square roots of the diagonal of `info⁻¹`, or `None` unless `info` is
/// positive definite.
pub fn standard_errors(info: &Matrix<f64>) -> Option<Vec<f64>> {
    info.cholesky().ok()?;
    let inv = info.inverse().ok()?;
    let se: Vec<f64> = (0..inv.rows()).map(|i| inv[(i, i)].sqrt()).collect();
    se.iter().all(|v| v.is_finite() && *v > 0.0).then_some(se)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankedModel {
    pub p: usize,
    pub q: usize,
    /// `NaN` when the fit failed.
    pub aic: f64,
    /// Theoretical error autocorrelations at lags 1–4.
    pub error_acf: Vec<f64>,
    pub converged: bool,
    pub failure: Option<String>,
    #[serde(skip)]
    pub fit: Option<FitResult>,
}

impl RankedModel {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Fits every ARMA(p,q) with `p ≤ p_max`, `q ≤ q_max` and sorts by AIC.
/// Failed fits are kept, marked, and placed last.
pub fn select_arma(
    spec_base: &ModelSpec,
    series: &BoundedSeries<f64>,
    extras: &Columns<f64>,
    p_max: usize,
    q_max: usize,
) -> Result<Vec<RankedModel>> {
    let base = CopulaModel::new(&spec_base.with_orders(0, 0), series, extras)?;
    let spec_base = base.spec().clone();
    let orders: Vec<(usize, usize)> = (0..=p_max).flat_map(|p| (0..=q_max).map(move |q| (p, q))).collect();
    let mut rows: Vec<RankedModel> = orders
        .par_iter()
        .map(|&(p, q)| {
            let outcome = fit(&spec_base.with_orders(p, q), series, extras, None)
                .and_then(|f| theoretical_acf(&f.arma()?, 4).map(|acf| (acf, f)));
            match outcome {
                Ok((acf, f)) => RankedModel {
                    p,
                    q,
                    aic: f.aic,
                    error_acf: acf[1..].to_vec(),
                    converged: f.converged,
                    failure: None,
                    fit: Some(f),
                },
                Err(e) => RankedModel {
                    p,
                    q,
                    aic: f64::NAN,
                    error_acf: vec![f64::NAN; 4],
                    converged: false,
                    failure: Some(e.to_string()),
                    fit: None,
                },
            }
        })
        .collect();
    rows.sort_by(|a, b| a.failed().cmp(&b.failed()).then(a.aic.total_cmp(&b.aic)).then((a.p, a.q).cmp(&(b.p, b.q))));
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub value: f64,
    pub loglik: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct ProfileCurve {
    pub target: String,
    pub points: Vec<ProfilePoint>,
    pub mle: f64,
    pub loglik_max: f64,
    /// Region where the profile is within 1.92 of its maximum, interpolated
    /// linearly between grid points. `None` if it touches the grid edge.
    pub interval: Option<(f64, f64)>,
}

/// Maximizes `f` over all coordinates except `target`, held at each grid
/// value in turn. Every point starts from `x_start`.
pub fn profile_objective<F>(f: F, x_start: &[f64], target: usize, grid: &[f64], opts: &BfgsOptions) -> Vec<ProfilePoint>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let free0: Vec<f64> = x_start.iter().enumerate().filter(|&(i, _)| i != target).map(|(_, v)| *v).collect();
    let embed = |free: &[f64], value: f64| {
        let mut x = Vec::with_capacity(free.len() + 1);
        x.extend_from_slice(&free[..target]);
        x.push(value);
        x.extend_from_slice(&free[target..]);
        x
    };
    grid.par_iter()
        .map(|&value| {
            let m = minimize(|free: &[f64]| -f(&embed(free, value)), &free0, opts);
            ProfilePoint { value, loglik: -m.f, converged: m.converged }
        })
        .collect()
}

/// 95% profile interval from grid points (threshold `max − 1.92`).
pub fn profile_interval(points: &[ProfilePoint], loglik_max: f64) -> Option<(f64, f64)> {
    let cut = loglik_max - 1.92;
    let inside: Vec<usize> = (0..points.len()).filter(|&i| points[i].loglik >= cut).collect();
    let (&first, &last) = (inside.first()?, inside.last()?);
    if first == 0 || last + 1 == points.len() {
        return None;
    }
    let cross = |a: &ProfilePoint, b: &ProfilePoint| {
        let w = (cut - a.loglik) / (b.loglik - a.loglik);
        a.value + w * (b.value - a.value)
    };
    Some((cross(&points[first - 1], &points[first]), cross(&points[last + 1], &points[last])))
}

/// Profile log-likelihood of the named parameter over `grid`.
///
/// The other parameters are re-optimized at each point. When the target
/// is an AR or MA coefficient its block is searched on the natural scale.
pub fn profile_loglik(
    spec: &ModelSpec,
    series: &BoundedSeries<f64>,
    extras: &Columns<f64>,
    target: &str,
    grid: &[f64],
) -> Result<ProfileCurve> {
    let full = fit(spec, series, extras, None)?;
    let spec = full.spec.clone();
    let idx = spec
        .parameter_index(target)
        .ok_or_else(|| Error::Spec(format!("unknown parameter `{target}`; expected one of {:?}", spec.parameter_names())))?;
    let model = CopulaModel::new(&spec, series, extras)?;
    let n_reg = spec.n_mean() + spec.n_precision();
    let natural_arma = idx >= n_reg;
    let to_pv = |x: &[f64]| -> Result<ParameterVector<f64>> {
        if natural_arma {
            ParameterVector::unpack(&spec, x)
        } else {
            from_unconstrained(&spec, x)
        }
    };
    let start = if natural_arma { full.pv_hat.pack() } else { to_unconstrained(&spec, &full.pv_hat)? };
    let objective = |x: &[f64]| match to_pv(x) {
        Ok(pv) => model.loglik(&pv),
        Err(_) => LOGLIK_SENTINEL,
    };
    let points = profile_objective(objective, &start, idx, grid, &BfgsOptions::default());
    let best_grid = points.iter().map(|p| p.loglik).fold(f64::NEG_INFINITY, f64::max);
    let loglik_max = full.loglik_max.max(best_grid);
    Ok(ProfileCurve {
        target: target.to_string(),
        interval: profile_interval(&points, loglik_max),
        mle: full.pv_hat.pack()[idx],
        loglik_max,
        points,
    })
}
