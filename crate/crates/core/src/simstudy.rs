//! Monte Carlo study of estimation and prediction-interval coverage.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula_model::{simulate, BoundedSeries, CopulaModel};
use crate::error::{Error, Result};
use crate::inference::{fit, FitResult};
use crate::regressors::{Columns, ModelSpec, ParameterVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitVariant {
    CopulaArma,
    Independence,
}

impl FitVariant {
    pub fn label(self) -> &'static str {
        match self {
            Self::CopulaArma => "arma",
            Self::Independence => "independence",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub replicates: usize,
    pub n_fit: usize,
    pub n_ahead: usize,
    /// Generating model; its ARMA orders are those of the copula-ARMA fit.
    pub spec: ModelSpec,
    pub truth: ParameterVector<f64>,
    pub seed: u64,
    pub levels: Vec<f64>,
    pub variants: Vec<FitVariant>,
    /// Largest tolerated share of failed fits per variant.
    pub max_failure_rate: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            replicates: 200,
            n_fit: 364,
            n_ahead: 4,
            spec: ModelSpec::seasonal(2, 1, 52),
            truth: ParameterVector {
                beta_x: vec![-4.0, 0.15, -0.22, -0.67],
                beta_z: vec![6.0, 0.10, -0.06, -0.19],
                psi: vec![1.5, -0.6],
                lambda: vec![-0.3],
            },
            seed: 20_130_101,
            levels: vec![0.90, 0.95, 0.99],
            variants: vec![FitVariant::CopulaArma, FitVariant::Independence],
            max_failure_rate: 0.05,
        }
    }
}

impl SimConfig {
    pub fn generated_len(&self) -> usize {
        self.n_fit + self.n_ahead
    }

    /// Trend center of the fitting window, shared by simulation and fits.
    pub fn trend_center(&self) -> f64 {
        0.5 * (1.0 + self.n_fit as f64)
    }

    fn variant_spec(&self, v: FitVariant) -> ModelSpec {
        let spec = self.spec.with_trend_center(self.trend_center());
        match v {
            FitVariant::CopulaArma => spec,
            FitVariant::Independence => spec.with_orders(0, 0),
        }
    }
}

/// Seed of replicate `r`: a SplitMix64 step from the master seed, so a
/// replicate's data never depends on scheduling.
pub fn replicate_seed(master: u64, r: usize) -> u64 {
    let mut z = master.wrapping_add((r as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub truth: f64,
    pub ave: f64,
    pub sd: f64,
    pub mean_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub lag: usize,
    pub level: f64,
    pub coverage: f64,
    /// Binomial Monte Carlo standard error.
    pub mc_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: FitVariant,
    pub successes: usize,
    pub failures: usize,
    pub parameters: Vec<ParameterSummary>,
    pub coverage: Vec<CoverageCell>,
}

impl VariantSummary {
    pub fn parameter(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn coverage_at(&self, lag: usize, level: f64) -> Option<&CoverageCell> {
        self.coverage.iter().find(|c| c.lag == lag && (c.level - level).abs() < 1e-12)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub replicates: usize,
    pub variants: Vec<VariantSummary>,
}

impl SimSummary {
    pub fn variant(&self, v: FitVariant) -> Option<&VariantSummary> {
        self.variants.iter().find(|s| s.variant == v)
    }
}

/// One successful fit: estimates, SEs and interval hits indexed `[lag][level]`.
#[derive(Clone, Debug)]
struct Outcome {
    theta: Vec<f64>,
    se: Vec<f64>,
    hits: Vec<Vec<bool>>,
}

fn fit_and_predict(cfg: &SimConfig, spec: &ModelSpec, train: &BoundedSeries<f64>, held_out: &[f64]) -> Result<Outcome> {
    let none = Columns::new();
    let f: FitResult = fit(spec, train, &none, None)?;
    if !f.converged {
        return Err(Error::Convergence { routine: "bfgs", iterations: f.iterations });
    }
    let se = f.se.clone().ok_or_else(|| Error::Numerical("observed information is not positive definite".into()))?;
    let model = CopulaModel::new(&f.spec, train, &none)?;
    let mut hits = Vec::with_capacity(cfg.n_ahead);
    for (k, &y) in held_out.iter().enumerate() {
        let pred = model.predict(&f.pv_hat, &none, k + 1)?;
        let row = cfg
            .levels
            .iter()
            .map(|&level| pred.interval(level).map(|(lo, hi)| lo <= y && y <= hi))
            .collect::<Result<Vec<bool>>>()?;
        hits.push(row);
    }
    Ok(Outcome { theta: f.pv_hat.pack(), se, hits })
}

fn replicate(cfg: &SimConfig, r: usize) -> Result<Vec<Result<Outcome>>> {
    let gen_spec = cfg.spec.with_trend_center(cfg.trend_center());
    let full = simulate(&gen_spec, &cfg.truth, cfg.generated_len(), &Columns::new(), replicate_seed(cfg.seed, r))?;
    let train = BoundedSeries::new(full.values()[..cfg.n_fit].to_vec())?;
    let held_out = &full.values()[cfg.n_fit..];
    Ok(cfg
        .variants
        .iter()
        .map(|&v| fit_and_predict(cfg, &cfg.variant_spec(v), &train, held_out))
        .collect())
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { f64::NAN };
    (mean, sd)
}

fn summarize(cfg: &SimConfig, v: FitVariant, outcomes: &[&Result<Outcome>]) -> VariantSummary {
    let spec = cfg.variant_spec(v);
    let ok: Vec<&Outcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let truth = match v {
        FitVariant::CopulaArma => cfg.truth.pack(),
        FitVariant::Independence => ParameterVector::independent(cfg.truth.beta_x.clone(), cfg.truth.beta_z.clone()).pack(),
    };
    let parameters = if ok.is_empty() {
        Vec::new()
    } else {
        spec.parameter_names()
            .into_iter()
            .enumerate()
            .map(|(i, name)| {
                let est: Vec<f64> = ok.iter().map(|o| o.theta[i]).collect();
                let se: Vec<f64> = ok.iter().map(|o| o.se[i]).collect();
                let (ave, sd) = mean_sd(&est);
                ParameterSummary { name, truth: truth[i], ave, sd, mean_se: mean_sd(&se).0 }
            })
            .collect()
    };
    let mut coverage = Vec::new();
    if !ok.is_empty() {
        let m = ok.len() as f64;
        for lag in 1..=cfg.n_ahead {
            for (li, &level) in cfg.levels.iter().enumerate() {
                let c = ok.iter().filter(|o| o.hits[lag - 1][li]).count() as f64 / m;
                coverage.push(CoverageCell { lag, level, coverage: c, mc_se: (c * (1.0 - c) / m).sqrt() });
            }
        }
    }
    VariantSummary { variant: v, successes: ok.len(), failures: outcomes.len() - ok.len(), parameters, coverage }
}

/// Runs the study. Replicates are simulated and fitted in parallel; the
/// result depends only on the configuration.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimSummary> {
    if cfg.n_fit <= cfg.spec.n_params() {
        return Err(Error::Spec(format!("n_fit = {} is too small for {} parameters", cfg.n_fit, cfg.spec.n_params())));
    }
    if !cfg.truth.conforms_to(&cfg.spec) {
        return Err(Error::Spec("true parameter vector does not match the specification".into()));
    }
    cfg.truth.arma()?;
    let per_rep: Vec<Vec<Result<Outcome>>> =
        (0..cfg.replicates).into_par_iter().map(|r| replicate(cfg, r)).collect::<Result<Vec<_>>>()?;
    let mut variants = Vec::with_capacity(cfg.variants.len());
    for (j, &v) in cfg.variants.iter().enumerate() {
        let column: Vec<&Result<Outcome>> = per_rep.iter().map(|row| &row[j]).collect();
        let s = summarize(cfg, v, &column);
        if cfg.replicates > 0 && s.failures as f64 > cfg.max_failure_rate * cfg.replicates as f64 {
            return Err(Error::Numerical(format!(
                "{} of {} {} fits failed",
                s.failures,
                cfg.replicates,
                v.label()
            )));
        }
        variants.push(s);
    }
    Ok(SimSummary { replicates: cfg.replicates, variants })
}
