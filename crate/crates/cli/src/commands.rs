use std::path::Path;

use betats::arma_gauss::KalmanPrediction;
use betats::copula_model::{CopulaModel, PredictiveDistribution};
use betats::dist::norm_quantile;
use betats::inference::{fit, profile_loglik, sample_acf, select_arma, FitResult};
use betats::regressors::{parse_terms, Columns, ModelSpec};
use betats::simstudy::{run_simulation, SimConfig};
use betats::surveillance::{phase1_calibrate, phase2_monitor, CusumConfig};
use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::data::{read_dataset, read_future, Dataset};
use crate::error::{CliError, CliResult};
use crate::format::{ensure_dir, flag, g6, write_csv};
use crate::{Command, DataArgs, ModelFileArgs, TermArgs};

/// Everything `predict`, `residuals` and `plotdata` need to rebuild a fit.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    start_date: NaiveDate,
    n_obs: usize,
    squeeze: bool,
    period: u32,
    fit: FitResult,
}

pub fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Fit { data, terms, arma, ahead, levels, future, out } => {
            cmd_fit(&data, &terms, arma, ahead, &levels, future.as_deref(), &out)
        }
        Command::Select { data, terms, p_max, q_max, out } => cmd_select(&data, &terms, p_max, q_max, &out),
        Command::Predict { model, ahead, levels, out } => cmd_predict(&model, ahead, &levels, &out),
        Command::Residuals { model, max_lag, out } => cmd_residuals(&model, max_lag, &out),
        Command::Monitor { phase1_data, phase2_data, terms, squeeze, period, k, h, out } => {
            cmd_monitor(&phase1_data, &phase2_data, &terms, squeeze, period, CusumConfig { k, h }, &out)
        }
        Command::Profile { data, terms, arma, param, grid, out } => cmd_profile(&data, &terms, arma, &param, grid, &out),
        Command::Simulate { replicates, seed, out } => cmd_simulate(replicates, seed, &out),
        Command::Plotdata { model, lags, points, out } => cmd_plotdata(&model, &lags, points, &out),
    }
}

fn build_spec(terms: &TermArgs, (p, q): (usize, usize), period: u32) -> CliResult<ModelSpec> {
    let mean = parse_terms(&terms.mean_terms)?;
    let prec = parse_terms(&terms.prec_terms)?;
    Ok(ModelSpec::new(mean, prec, p, q, period)?)
}

fn week(start: NaiveDate, i: usize) -> NaiveDate {
    start + Duration::weeks(i as i64)
}

fn load_model(args: &ModelFileArgs) -> CliResult<(ModelFile, Dataset, CopulaModel<f64>, Columns<f64>)> {
    let text = std::fs::read_to_string(&args.model)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", args.model.display())))?;
    let mf: ModelFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{} is not a model file: {e}", args.model.display())))?;
    let ds = read_dataset(&args.data, mf.squeeze)?;
    if ds.start() != mf.start_date {
        return Err(CliError::Data(format!(
            "data starts {} but the model was fitted to data starting {}",
            ds.start(),
            mf.start_date
        )));
    }
    let series = ds.series(mf.period)?;
    let model = CopulaModel::new(&mf.fit.spec, &series, &ds.dummies)?;
    let future = match &args.future {
        Some(p) => read_future(p)?,
        None => Columns::new(),
    };
    Ok((mf, ds, model, future))
}

fn level_label(level: f64) -> String {
    g6(level * 100.0)
}

fn write_forecasts(
    model: &CopulaModel<f64>,
    fit: &FitResult,
    future: &Columns<f64>,
    last: NaiveDate,
    ahead: usize,
    levels: &[f64],
    path: &Path,
) -> CliResult<()> {
    let mut header = vec!["lag".to_string(), "date".into(), "median".into()];
    for &l in levels {
        header.push(format!("lower_{}", level_label(l)));
        header.push(format!("upper_{}", level_label(l)));
    }
    let mut rows = Vec::with_capacity(ahead);
    for k in 1..=ahead {
        let pred = model.predict(&fit.pv_hat, future, k)?;
        let mut row = vec![k.to_string(), week(last, k).to_string(), g6(pred.quantile(0.5)?)];
        for &l in levels {
            let (lo, hi) = pred.interval(l)?;
            row.push(g6(lo));
            row.push(g6(hi));
        }
        rows.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(path, &header, &rows)
}

fn cmd_fit(
    data: &DataArgs,
    terms: &TermArgs,
    arma: (usize, usize),
    ahead: usize,
    levels: &[f64],
    future: Option<&Path>,
    out: &Path,
) -> CliResult<()> {
    let ds = read_dataset(&data.data, data.squeeze)?;
    let series = ds.series(data.period)?;
    let spec = build_spec(terms, arma, data.period)?;
    let f = fit(&spec, &series, &ds.dummies, None)?;
    if !f.converged {
        eprintln!(
            "betats: warning: optimizer stopped after {} iterations with gradient norm {}",
            f.iterations,
            g6(f.grad_norm)
        );
    }
    if f.se.is_none() {
        eprintln!("betats: warning: observed information is not positive definite; standard errors unavailable");
    }
    ensure_dir(out)?;
    let theta = f.pv_hat.pack();
    let rows: Vec<Vec<String>> = f
        .parameter_names()
        .into_iter()
        .enumerate()
        .map(|(i, name)| vec![name, g6(theta[i]), f.se.as_ref().map_or_else(|| g6(f64::NAN), |s| g6(s[i]))])
        .collect();
    write_csv(&out.join("estimates.csv"), &["parameter", "estimate", "se"], &rows)?;
    write_csv(
        &out.join("summary.csv"),
        &["n", "p", "q", "dim", "loglik", "aic", "converged", "iterations", "grad_norm"],
        &[vec![
            f.n_obs.to_string(),
            f.spec.p().to_string(),
            f.spec.q().to_string(),
            f.dim().to_string(),
            g6(f.loglik_max),
            g6(f.aic),
            flag(f.converged),
            f.iterations.to_string(),
            g6(f.grad_norm),
        ]],
    )?;
    let rows: Vec<Vec<String>> = ds
        .dates
        .iter()
        .zip(&ds.values)
        .zip(&f.residuals)
        .map(|((d, y), r)| vec![d.to_string(), g6(*y), g6(*r)])
        .collect();
    write_csv(&out.join("residuals.csv"), &["date", "value", "residual"], &rows)?;
    let mf = ModelFile { start_date: ds.start(), n_obs: ds.len(), squeeze: data.squeeze, period: data.period, fit: f };
    let json = serde_json::to_string_pretty(&mf).map_err(|e| CliError::Numerical(e.to_string()))?;
    std::fs::write(out.join("model.json"), json + "\n")?;
    if ahead > 0 {
        let model = CopulaModel::new(&mf.fit.spec, &series, &ds.dummies)?;
        let future = match future {
            Some(p) => read_future(p)?,
            None => Columns::new(),
        };
        write_forecasts(&model, &mf.fit, &future, ds.last(), ahead, levels, &out.join("forecasts.csv"))?;
    }
    println!(
        "ARMA({},{}) fit on {} weeks: loglik {}, AIC {}",
        mf.fit.spec.p(),
        mf.fit.spec.q(),
        mf.n_obs,
        g6(mf.fit.loglik_max),
        g6(mf.fit.aic)
    );
    Ok(())
}

fn cmd_select(data: &DataArgs, terms: &TermArgs, p_max: usize, q_max: usize, out: &Path) -> CliResult<()> {
    let ds = read_dataset(&data.data, data.squeeze)?;
    let series = ds.series(data.period)?;
    let spec = build_spec(terms, (0, 0), data.period)?;
    let ranking = select_arma(&spec, &series, &ds.dummies, p_max, q_max)?;
    let rows: Vec<Vec<String>> = ranking
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = vec![(i + 1).to_string(), r.p.to_string(), r.q.to_string(), g6(r.aic)];
            row.extend((0..4).map(|l| r.error_acf.get(l).map_or_else(|| g6(f64::NAN), |v| g6(*v))));
            row.push(flag(r.converged));
            row.push(r.failure.clone().unwrap_or_default());
            row
        })
        .collect();
    write_csv(out, &["rank", "p", "q", "aic", "acf1", "acf2", "acf3", "acf4", "converged", "failure"], &rows)?;
    match ranking.iter().find(|r| !r.failed()) {
        Some(best) => println!("best: ARMA({},{}) with AIC {}", best.p, best.q, g6(best.aic)),
        None => return Err(CliError::Numerical("every ARMA order failed to fit".into())),
    }
    Ok(())
}

fn cmd_predict(args: &ModelFileArgs, ahead: usize, levels: &[f64], out: &Path) -> CliResult<()> {
    if ahead == 0 {
        return Err(CliError::Usage("--ahead must be at least 1".into()));
    }
    let (mf, ds, model, future) = load_model(args)?;
    write_forecasts(&model, &mf.fit, &future, ds.last(), ahead, levels, out)
}

fn cmd_residuals(args: &ModelFileArgs, max_lag: usize, out: &Path) -> CliResult<()> {
    let (mf, ds, model, _) = load_model(args)?;
    let r = model.quantile_residuals(&mf.fit.pv_hat)?;
    ensure_dir(out)?;
    let rows: Vec<Vec<String>> = ds.dates.iter().zip(&r).map(|(d, v)| vec![d.to_string(), g6(*v)]).collect();
    write_csv(&out.join("residuals.csv"), &["date", "residual"], &rows)?;

    // Normal probability plot with Blom plotting positions.
    let mut sorted = r.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let rows = sorted
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let z = norm_quantile((i as f64 + 1.0 - 0.375) / (n + 0.25))?;
            Ok(vec![(i + 1).to_string(), g6(z), g6(*v)])
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_csv(&out.join("qq.csv"), &["rank", "theoretical", "sample"], &rows)?;

    let bound = 1.96 / n.sqrt();
    let rows: Vec<Vec<String>> = sample_acf(&r, max_lag)
        .into_iter()
        .enumerate()
        .map(|(l, a)| vec![(l + 1).to_string(), g6(a), g6(-bound), g6(bound)])
        .collect();
    write_csv(&out.join("acf.csv"), &["lag", "acf", "lower", "upper"], &rows)
}

fn cmd_monitor(
    phase1: &Path,
    phase2: &Path,
    terms: &TermArgs,
    squeeze: bool,
    period: u32,
    cfg: CusumConfig,
    out: &Path,
) -> CliResult<()> {
    if !(cfg.k >= 0.0 && cfg.h > 0.0) {
        return Err(CliError::Usage(format!("CUSUM needs k ≥ 0 and h > 0, got k={} h={}", cfg.k, cfg.h)));
    }
    let d1 = read_dataset(phase1, squeeze)?;
    let d2 = read_dataset(phase2, squeeze)?;
    if d2.start() != week(d1.last(), 1) {
        return Err(CliError::Data(format!(
            "Phase II data start {} but must begin the week after the Phase I data ({})",
            d2.start(),
            week(d1.last(), 1)
        )));
    }
    let spec = build_spec(terms, (0, 0), period)?;
    let p1 = phase1_calibrate(&spec, &d1.series(period)?, &d1.dummies, &cfg)?;
    if p1.suspect {
        eprintln!("betats: warning: {} of {} Phase I weeks were out of control", p1.removed.len(), d1.len());
    }
    let report = phase2_monitor(&p1, &d2.series(period)?, &d2.dummies, &cfg)?;
    let rows: Vec<Vec<String>> = report
        .steps
        .iter()
        .map(|s| {
            let date = s.date.map(|d| d.to_string()).unwrap_or_default();
            vec![date, g6(s.value), g6(s.residual), g6(s.c_plus), flag(s.alarm)]
        })
        .collect();
    write_csv(out, &["date", "value", "residual", "c_plus", "alarm"], &rows)?;
    let (p, q) = report.phase1_selected;
    println!("phase I: removed {} of {} weeks, selected ARMA({p},{q})", p1.removed.len(), d1.len());
    match report.first_alarm().and_then(|s| s.date) {
        Some(d) => println!(
            "phase II: {} alarm weeks, first {d}, longest run {}",
            report.alarm_indices.len(),
            report.longest_alarm_run()
        ),
        None => println!("phase II: no alarms in {} weeks", report.steps.len()),
    }
    Ok(())
}

fn cmd_profile(
    data: &DataArgs,
    terms: &TermArgs,
    arma: (usize, usize),
    param: &str,
    (lo, hi, steps): (f64, f64, usize),
    out: &Path,
) -> CliResult<()> {
    let ds = read_dataset(&data.data, data.squeeze)?;
    let series = ds.series(data.period)?;
    let spec = build_spec(terms, arma, data.period)?;
    let grid: Vec<f64> = (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect();
    let curve = profile_loglik(&spec, &series, &ds.dummies, param, &grid)?;
    let rows: Vec<Vec<String>> =
        curve.points.iter().map(|p| vec![g6(p.value), g6(p.loglik), flag(p.converged)]).collect();
    write_csv(out, &["value", "loglik", "converged"], &rows)?;
    match curve.interval {
        Some((a, b)) => println!("{param}: MLE {}, 95% profile interval [{}, {}]", g6(curve.mle), g6(a), g6(b)),
        None => println!("{param}: MLE {}, 95% profile interval not bracketed by the grid", g6(curve.mle)),
    }
    Ok(())
}

fn cmd_simulate(replicates: usize, seed: u64, out: &Path) -> CliResult<()> {
    let cfg = SimConfig { replicates, seed, ..SimConfig::default() };
    let summary = run_simulation(&cfg)?;
    ensure_dir(out)?;
    let mut t1 = Vec::new();
    let mut t2 = Vec::new();
    for v in &summary.variants {
        for p in &v.parameters {
            t1.push(vec![v.variant.label().into(), p.name.clone(), g6(p.truth), g6(p.ave), g6(p.sd), g6(p.mean_se)]);
        }
        for c in &v.coverage {
            t2.push(vec![v.variant.label().into(), c.lag.to_string(), g6(c.level), g6(c.coverage), g6(c.mc_se)]);
        }
        if replicates > 0 {
            println!("{}: {} fits, {} failures", v.variant.label(), v.successes, v.failures);
        }
    }
    write_csv(&out.join("table1.csv"), &["variant", "parameter", "truth", "ave", "sd", "mean_se"], &t1)?;
    write_csv(&out.join("table2.csv"), &["variant", "lag", "level", "coverage", "mc_se"], &t2)
}

fn cmd_plotdata(args: &ModelFileArgs, lags: &[usize], points: usize, out: &Path) -> CliResult<()> {
    if points < 2 || lags.iter().any(|&k| k == 0) {
        return Err(CliError::Usage("--points must be at least 2 and every lag at least 1".into()));
    }
    let (mf, _, model, future) = load_model(args)?;
    let mut rows = Vec::new();
    for &k in lags {
        let pred = model.predict(&mf.fit.pv_hat, &future, k)?;
        let marginal = PredictiveDistribution { marginal: pred.marginal, gauss: KalmanPrediction::unconditional() };
        let lo = marginal.quantile(1e-4)?.min(pred.quantile(1e-4)?);
        let hi = marginal.quantile(1.0 - 1e-4)?.max(pred.quantile(1.0 - 1e-4)?);
        for i in 0..points {
            let y = lo + (hi - lo) * i as f64 / (points - 1) as f64;
            rows.push(vec![k.to_string(), g6(y), g6(marginal.pdf(y)?), g6(pred.pdf(y)?)]);
        }
    }
    write_csv(out, &["lag", "y", "marginal", "predictive"], &rows)
}
