//! Covariate terms, design matrices and parameter packing.
//!
//! The mean follows `logit(μ_t) = x_tᵀ β_x` and the precision
//! `log(κ_t) = z_tᵀ β_z`. Columns are always laid out as intercept, scaled
//! trend, harmonics (declared order), dummies (declared order), and the
//! packed parameter vector is `(β_x, β_z, ψ, λ)`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arma_gauss::ArmaCoefficients;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::real::Real;

/// Divisor applied to the centered time index.
pub const TREND_SCALE: f64 = 100.0;

/// Named covariate columns supplied alongside a series (for dummy terms).
pub type Columns<T> = BTreeMap<String, Vec<T>>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "arg", rename_all = "snake_case")]
pub enum CovariateTerm {
    Intercept,
    /// `(t − center) / 100`.
    ScaledTrend,
    /// `sin(2π h t / period)` for harmonic `h`.
    SinHarmonic(u32),
    CosHarmonic(u32),
    /// A user-supplied column, looked up by name.
    Dummy(String),
}

impl CovariateTerm {
    pub fn name(&self) -> String {
        match self {
            Self::Intercept => "intercept".into(),
            Self::ScaledTrend => "trend".into(),
            Self::SinHarmonic(h) => format!("sin{h}"),
            Self::CosHarmonic(h) => format!("cos{h}"),
            Self::Dummy(n) => n.clone(),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Self::Intercept => 0,
            Self::ScaledTrend => 1,
            Self::SinHarmonic(_) | Self::CosHarmonic(_) => 2,
            Self::Dummy(_) => 3,
        }
    }

    fn value<T: Real>(&self, t: f64, center: f64, period: u32, row: usize, extras: &Columns<T>) -> Result<T> {
        let angle = |h: u32| std::f64::consts::TAU * f64::from(h) * t / f64::from(period);
        Ok(match self {
            Self::Intercept => T::one(),
            Self::ScaledTrend => T::lit((t - center) / TREND_SCALE),
            Self::SinHarmonic(h) => T::lit(angle(*h).sin()),
            Self::CosHarmonic(h) => T::lit(angle(*h).cos()),
            Self::Dummy(name) => {
                let col = extras.get(name).ok_or_else(|| Error::MissingColumn(name.clone()))?;
                *col.get(row).ok_or_else(|| {
                    Error::Dimension(format!("column `{name}` has {} rows, row {row} requested", col.len()))
                })?
            }
        })
    }
}

impl fmt::Display for CovariateTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for CovariateTerm {
    type Err = Error;

    /// Accepts `intercept`, `trend`, `sinH`, `cosH`, `dummy:NAME`, or a bare column name.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Spec("empty covariate term".into()));
        }
        let harmonic = |rest: &str| -> Result<u32> {
            let h: u32 = if rest.is_empty() { 1 } else { rest.parse().map_err(|_| Error::Spec(format!("bad harmonic `{s}`")))? };
            if h == 0 {
                return Err(Error::Spec(format!("harmonic number must be positive in `{s}`")));
            }
            Ok(h)
        };
        Ok(match s {
            "intercept" | "1" => Self::Intercept,
            "trend" => Self::ScaledTrend,
            _ if s.starts_with("dummy:") => Self::Dummy(s["dummy:".len()..].to_string()),
            _ if s.starts_with("sin") && s[3..].chars().all(|c| c.is_ascii_digit()) => Self::SinHarmonic(harmonic(&s[3..])?),
            _ if s.starts_with("cos") && s[3..].chars().all(|c| c.is_ascii_digit()) => Self::CosHarmonic(harmonic(&s[3..])?),
            _ => Self::Dummy(s.to_string()),
        })
    }
}

/// Parses a comma-separated term list.
pub fn parse_terms(list: &str) -> Result<Vec<CovariateTerm>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// Mean/precision covariates plus the ARMA orders of the errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    mean_terms: Vec<CovariateTerm>,
    precision_terms: Vec<CovariateTerm>,
    p: usize,
    q: usize,
    period: u32,
    /// Centering constant for the trend; resolved from the data when absent.
    trend_center: Option<f64>,
}

impl ModelSpec {
    pub fn new(
        mean_terms: Vec<CovariateTerm>,
        precision_terms: Vec<CovariateTerm>,
        p: usize,
        q: usize,
        period: u32,
    ) -> Result<Self> {
        if period == 0 {
            return Err(Error::Spec("period must be positive".into()));
        }
        let mean_terms = canonical_terms(mean_terms, "mean")?;
        let precision_terms = canonical_terms(precision_terms, "precision")?;
        Ok(Self { mean_terms, precision_terms, p, q, period, trend_center: None })
    }

    /// Trend, one annual harmonic pair in both mean and precision: the
    /// weekly surveillance layout.
    pub fn seasonal(p: usize, q: usize, period: u32) -> Self {
        let terms = vec![
            CovariateTerm::Intercept,
            CovariateTerm::ScaledTrend,
            CovariateTerm::SinHarmonic(1),
            CovariateTerm::CosHarmonic(1),
        ];
        Self::new(terms.clone(), terms, p, q, period).expect("valid built-in spec")
    }

    pub fn mean_terms(&self) -> &[CovariateTerm] {
        &self.mean_terms
    }

    pub fn precision_terms(&self) -> &[CovariateTerm] {
        &self.precision_terms
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn trend_center(&self) -> Option<f64> {
        self.trend_center
    }

    /// Same covariates with different ARMA orders.
    pub fn with_orders(&self, p: usize, q: usize) -> Self {
        Self { p, q, ..self.clone() }
    }

    /// Pins the trend centering constant (used when a fitted model is applied
    /// to later data).
    pub fn with_trend_center(&self, center: f64) -> Self {
        Self { trend_center: Some(center), ..self.clone() }
    }

    /// The centering constant: pinned value, or the midpoint of the time span.
    pub fn center_for(&self, times: &[f64]) -> f64 {
        self.trend_center.unwrap_or_else(|| match (times.first(), times.last()) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            _ => 0.0,
        })
    }

    pub fn n_mean(&self) -> usize {
        self.mean_terms.len()
    }

    pub fn n_precision(&self) -> usize {
        self.precision_terms.len()
    }

    /// `dim(θ)`: all regression coefficients plus `p + q`.
    pub fn n_params(&self) -> usize {
        self.n_mean() + self.n_precision() + self.p + self.q
    }

    /// Names of dummy columns required by either predictor.
    pub fn dummy_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for t in self.mean_terms.iter().chain(&self.precision_terms) {
            if let CovariateTerm::Dummy(n) = t {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
        }
        out
    }

    /// Parameter names in packing order, e.g. `mean:trend`, `prec:sin1`, `ar2`, `ma1`.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.mean_terms.iter().map(|t| format!("mean:{t}")).collect();
        names.extend(self.precision_terms.iter().map(|t| format!("prec:{t}")));
        names.extend((1..=self.p).map(|i| format!("ar{i}")));
        names.extend((1..=self.q).map(|j| format!("ma{j}")));
        names
    }

    pub fn parameter_index(&self, name: &str) -> Option<usize> {
        self.parameter_names().iter().position(|n| n == name)
    }
}

fn canonical_terms(terms: Vec<CovariateTerm>, which: &str) -> Result<Vec<CovariateTerm>> {
    let intercepts = terms.iter().filter(|t| **t == CovariateTerm::Intercept).count();
    if intercepts != 1 {
        return Err(Error::Spec(format!("{which} terms must contain exactly one intercept, found {intercepts}")));
    }
    let mut seen = HashSet::new();
    for t in &terms {
        if !seen.insert(t.name()) {
            return Err(Error::Spec(format!("duplicate {which} term `{t}`")));
        }
    }
    let mut terms = terms;
    // Stable: harmonics and dummies keep their declared order.
    terms.sort_by_key(CovariateTerm::rank);
    Ok(terms)
}

/// Mean (`x`) and precision (`z`) design matrices.
#[derive(Clone, Debug)]
pub struct Design<T> {
    pub x: Matrix<T>,
    pub z: Matrix<T>,
}

impl<T: Real> Design<T> {
    pub fn n(&self) -> usize {
        self.x.rows()
    }
}

/// Design for times `1..=n` with `extras` aligned to those rows.
pub fn build_design<T: Real>(spec: &ModelSpec, n: usize, extras: &Columns<T>) -> Result<Design<T>> {
    if n == 0 {
        return Err(Error::Data("design needs at least one row".into()));
    }
    let times: Vec<f64> = (1..=n).map(|t| t as f64).collect();
    let center = spec.center_for(&times);
    build_design_at(spec, &times, center, extras)
}

/// Design evaluated at explicit (1-based) time indices; `extras[name][i]`
/// is the dummy value for `times[i]`.
pub fn build_design_at<T: Real>(spec: &ModelSpec, times: &[f64], center: f64, extras: &Columns<T>) -> Result<Design<T>> {
    let n = times.len();
    if n == 0 {
        return Err(Error::Data("design needs at least one row".into()));
    }
    for name in spec.dummy_names() {
        match extras.get(&name) {
            None => return Err(Error::MissingColumn(name)),
            Some(col) if col.len() != n => {
                return Err(Error::Dimension(format!("column `{name}` has {} rows, expected {n}", col.len())))
            }
            Some(_) => {}
        }
    }
    let fill = |terms: &[CovariateTerm]| -> Result<Matrix<T>> {
        let mut m = Matrix::zeros(n, terms.len());
        for (i, &t) in times.iter().enumerate() {
            for (j, term) in terms.iter().enumerate() {
                m[(i, j)] = term.value(t, center, spec.period, i, extras)?;
            }
        }
        Ok(m)
    };
    Ok(Design { x: fill(&spec.mean_terms)?, z: fill(&spec.precision_terms)? })
}

/// Full parameter vector `θ = (β_x, β_z, ψ, λ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector<T> {
    pub beta_x: Vec<T>,
    pub beta_z: Vec<T>,
    pub psi: Vec<T>,
    pub lambda: Vec<T>,
}

impl<T: Real> ParameterVector<T> {
    /// Regression coefficients only; white-noise errors.
    pub fn independent(beta_x: Vec<T>, beta_z: Vec<T>) -> Self {
        Self { beta_x, beta_z, psi: Vec::new(), lambda: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.beta_x.len() + self.beta_z.len() + self.psi.len() + self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pack(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.beta_x);
        v.extend_from_slice(&self.beta_z);
        v.extend_from_slice(&self.psi);
        v.extend_from_slice(&self.lambda);
        v
    }

    /// Splits a packed vector according to `spec`. Does not check ARMA admissibility.
    pub fn unpack(spec: &ModelSpec, theta: &[T]) -> Result<Self> {
        if theta.len() != spec.n_params() {
            return Err(Error::Dimension(format!("expected {} parameters, got {}", spec.n_params(), theta.len())));
        }
        let (nx, nz, p) = (spec.n_mean(), spec.n_precision(), spec.p);
        Ok(Self {
            beta_x: theta[..nx].to_vec(),
            beta_z: theta[nx..nx + nz].to_vec(),
            psi: theta[nx + nz..nx + nz + p].to_vec(),
            lambda: theta[nx + nz + p..].to_vec(),
        })
    }

    pub fn conforms_to(&self, spec: &ModelSpec) -> bool {
        self.beta_x.len() == spec.n_mean()
            && self.beta_z.len() == spec.n_precision()
            && self.psi.len() == spec.p
            && self.lambda.len() == spec.q
    }

    /// Validated ARMA block.
    pub fn arma(&self) -> Result<ArmaCoefficients<T>> {
        ArmaCoefficients::new(self.psi.clone(), self.lambda.clone())
    }
}

/// Inverse logit, kept strictly inside `(0, 1)`.
pub fn logistic<T: Real>(eta: T) -> T {
    let one = T::one();
    let mu = if eta >= T::zero() {
        one / (one + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (one + e)
    };
    mu.max(T::min_positive_value()).min(one - T::epsilon() / T::lit(2.0))
}

pub fn logit<T: Real>(mu: T) -> T {
    (mu / (T::one() - mu)).ln()
}

/// Per-row `(μ_t, κ_t)` from the designs and regression coefficients.
pub fn linear_predictors<T: Real>(x: &Matrix<T>, z: &Matrix<T>, pv: &ParameterVector<T>) -> Result<Vec<(T, T)>> {
    if x.cols() != pv.beta_x.len() || z.cols() != pv.beta_z.len() || x.rows() != z.rows() {
        return Err(Error::Dimension(format!(
            "design {}x{} / {}x{} does not conform to {} mean and {} precision coefficients",
            x.rows(),
            x.cols(),
            z.rows(),
            z.cols(),
            pv.beta_x.len(),
            pv.beta_z.len()
        )));
    }
    let eta_x = x.mat_vec(&pv.beta_x);
    let eta_z = z.mat_vec(&pv.beta_z);
    Ok(eta_x
        .into_iter()
        .zip(eta_z)
        .map(|(ex, ez)| (logistic(ex), ez.exp().max(T::min_positive_value()).min(T::max_value())))
        .collect())
}
