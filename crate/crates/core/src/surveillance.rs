//! CUSUM charts on predictive quantile residuals and two-phase outbreak
//! monitoring.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::arma_gauss::{build_state_space, ArmaStateSpace, KalmanState};
use crate::copula_model::{to_errors, BoundedSeries, CopulaModel};
use crate::error::{Error, Result};
use crate::inference::{fit, select_arma, FitResult, RankedModel};
use crate::real::Real;
use crate::regressors::{build_design_at, linear_predictors, Columns, ModelSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CusumMode {
    Bilateral,
    PositiveOnly,
}

/// Reference value `k` and decision limit `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CusumConfig {
    pub k: f64,
    pub h: f64,
}

impl Default for CusumConfig {
    fn default() -> Self {
        Self { k: 0.5, h: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CusumChart<T> {
    pub k: T,
    pub h: T,
    pub mode: CusumMode,
    pub c_plus: Vec<T>,
    pub c_minus: Vec<T>,
    pub alarms: Vec<bool>,
}

impl<T: Real> CusumChart<T> {
    pub fn new(k: T, h: T, mode: CusumMode) -> Self {
        Self { k, h, mode, c_plus: Vec::new(), c_minus: Vec::new(), alarms: Vec::new() }
    }

    /// Adds one residual and returns whether that week is out of control.
    /// Sums keep accumulating after an alarm.
    pub fn push(&mut self, r: T) -> bool {
        let zero = T::zero();
        let prev_plus = self.c_plus.last().copied().unwrap_or(zero);
        let prev_minus = self.c_minus.last().copied().unwrap_or(zero);
        let plus = (r - self.k + prev_plus).max(zero);
        let minus = (-r - self.k + prev_minus).max(zero);
        let alarm = plus > self.h || (self.mode == CusumMode::Bilateral && minus > self.h);
        self.c_plus.push(plus);
        self.c_minus.push(minus);
        self.alarms.push(alarm);
        alarm
    }

    pub fn len(&self) -> usize {
        self.alarms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alarms.is_empty()
    }

    pub fn alarm_indices(&self) -> Vec<usize> {
        self.alarms.iter().enumerate().filter(|(_, &a)| a).map(|(i, _)| i).collect()
    }

    pub fn first_alarm(&self) -> Option<usize> {
        self.alarms.iter().position(|&a| a)
    }
}

/// Runs the chart over `residuals` from `C_0 = 0`.
pub fn cusum<T: Real>(residuals: &[T], k: T, h: T, mode: CusumMode) -> CusumChart<T> {
    let mut chart = CusumChart::new(k, h, mode);
    for &r in residuals {
        chart.push(r);
    }
    chart
}

/// Length of the longest run of consecutive `true` flags.
pub fn longest_run(flags: &[bool]) -> usize {
    let (mut best, mut cur) = (0, 0);
    for &f in flags {
        cur = if f { cur + 1 } else { 0 };
        best = best.max(cur);
    }
    best
}

/// Share of flagged observations above which Phase I is reported as suspect.
pub const SUSPECT_FRACTION: f64 = 0.2;

#[derive(Clone, Debug)]
pub struct Phase1Result {
    /// The series as supplied, with the trend center pinned in `spec`.
    pub raw: BoundedSeries<f64>,
    pub raw_extras: Columns<f64>,
    pub initial_fit: FitResult,
    pub chart: CusumChart<f64>,
    pub removed: Vec<usize>,
    pub cleaned: BoundedSeries<f64>,
    pub cleaned_extras: Columns<f64>,
    pub ranking: Vec<RankedModel>,
    pub spec: ModelSpec,
    pub fit: FitResult,
    /// More than [`SUSPECT_FRACTION`] of the weeks were flagged.
    pub suspect: bool,
}

/// Phase I: ARMA(3,3) fit, bilateral CUSUM on its residuals, removal of the
/// out-of-control weeks, and AIC selection over ARMA(p ≤ 3, q ≤ 3) on the
/// gapped remainder.
pub fn phase1_calibrate(
    spec_base: &ModelSpec,
    series: &BoundedSeries<f64>,
    extras: &Columns<f64>,
    cfg: &CusumConfig,
) -> Result<Phase1Result> {
    let center = spec_base.center_for(series.times());
    let base = spec_base.with_trend_center(center);
    let initial_fit = fit(&base.with_orders(3, 3), series, extras, None)?;
    let chart = cusum(&initial_fit.residuals, cfg.k, cfg.h, CusumMode::Bilateral);
    let removed = chart.alarm_indices();
    let (cleaned, cleaned_extras) = series.without(&removed, extras);
    let ranking = select_arma(&base, &cleaned, &cleaned_extras, 3, 3)?;
    let best = ranking
        .iter()
        .find(|r| !r.failed())
        .and_then(|r| r.fit.clone())
        .ok_or_else(|| Error::Numerical("every ARMA order failed to fit in Phase I".into()))?;
    let suspect = removed.len() as f64 > SUSPECT_FRACTION * series.len() as f64;
    Ok(Phase1Result {
        raw: series.clone(),
        raw_extras: extras.clone(),
        initial_fit,
        chart,
        removed,
        cleaned,
        cleaned_extras,
        spec: best.spec.clone(),
        ranking,
        fit: best,
        suspect,
    })
}

/// One monitored week.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorStep {
    pub time: f64,
    pub date: Option<NaiveDate>,
    pub value: f64,
    pub residual: f64,
    pub c_plus: f64,
    pub alarm: bool,
}

/// Sequential Phase II monitor: frozen parameters, Kalman state advanced by
/// every new observation, positive-only CUSUM.
#[derive(Clone, Debug)]
pub struct Phase2Monitor {
    fit: FitResult,
    ss: ArmaStateSpace<f64>,
    state: KalmanState<f64>,
    chart: CusumChart<f64>,
    center: f64,
    last_time: f64,
}

impl Phase2Monitor {
    /// Initializes the filter on `history` (the Phase I data as observed).
    pub fn new(fit: &FitResult, history: &BoundedSeries<f64>, history_extras: &Columns<f64>, cfg: &CusumConfig) -> Result<Self> {
        let model = CopulaModel::new(&fit.spec, history, history_extras)?;
        let ss = build_state_space(&fit.arma()?)?;
        let eps = model.errors(&fit.pv_hat)?;
        let mut state = KalmanState::stationary(&ss);
        let last_segment = history.segments().pop().expect("non-empty history");
        for &e in &eps[last_segment] {
            state.update(&ss, e)?;
        }
        Ok(Self {
            center: model.trend_center(),
            last_time: *history.times().last().expect("non-empty history"),
            fit: fit.clone(),
            ss,
            state,
            chart: CusumChart::new(cfg.k, cfg.h, CusumMode::PositiveOnly),
        })
    }

    pub fn chart(&self) -> &CusumChart<f64> {
        &self.chart
    }

    /// Processes the next week. `row` holds the dummy values for that week.
    pub fn observe(&mut self, y: f64, row: &Columns<f64>) -> Result<MonitorStep> {
        if !(y > 0.0 && y < 1.0) {
            return Err(Error::Domain(format!("observation {y} is outside (0, 1)")));
        }
        let t = self.last_time + 1.0;
        let design = build_design_at(&self.fit.spec, &[t], self.center, row)?;
        let mk = linear_predictors(&design.x, &design.z, &self.fit.pv_hat)?;
        let eps = to_errors(&[y], &mk)?[0];
        let pred = self.state.prediction()?;
        let residual = pred.standardize(eps);
        let alarm = self.chart.push(residual);
        self.state.update(&self.ss, eps)?;
        self.last_time = t;
        Ok(MonitorStep { time: t, date: None, value: y, residual, c_plus: *self.chart.c_plus.last().unwrap(), alarm })
    }
}

#[derive(Clone, Debug)]
pub struct SurveillanceReport {
    pub phase1_removed_indices: Vec<usize>,
    pub phase1_selected: (usize, usize),
    pub steps: Vec<MonitorStep>,
    /// Indices into `steps` of out-of-control weeks.
    pub alarm_indices: Vec<usize>,
    pub alarm_dates: Vec<NaiveDate>,
    pub fitted: FitResult,
}

impl SurveillanceReport {
    pub fn first_alarm(&self) -> Option<&MonitorStep> {
        self.alarm_indices.first().map(|&i| &self.steps[i])
    }

    /// Longest run of consecutive out-of-control weeks.
    pub fn longest_alarm_run(&self) -> usize {
        longest_run(&self.steps.iter().map(|s| s.alarm).collect::<Vec<_>>())
    }
}

/// Phase II over `stream`, which continues directly after the Phase I data.
/// `stream_extras[name][i]` is the dummy value for `stream.values()[i]`.
pub fn phase2_monitor(
    phase1: &Phase1Result,
    stream: &BoundedSeries<f64>,
    stream_extras: &Columns<f64>,
    cfg: &CusumConfig,
) -> Result<SurveillanceReport> {
    let mut monitor = Phase2Monitor::new(&phase1.fit, &phase1.raw, &phase1.raw_extras, cfg)?;
    let names = phase1.spec.dummy_names();
    let start = stream.start_date();
    let mut steps = Vec::with_capacity(stream.len());
    for (i, &y) in stream.values().iter().enumerate() {
        let mut row = Columns::new();
        for name in &names {
            let col = stream_extras.get(name).ok_or_else(|| Error::MissingColumn(name.clone()))?;
            let v = *col.get(i).ok_or_else(|| Error::Dimension(format!("column `{name}` too short for the stream")))?;
            row.insert(name.clone(), vec![v]);
        }
        let mut step = monitor.observe(y, &row)?;
        step.date = start.map(|d| d + chrono::Duration::weeks(i as i64));
        steps.push(step);
    }
    let alarm_indices: Vec<usize> = steps.iter().enumerate().filter(|(_, s)| s.alarm).map(|(i, _)| i).collect();
    let alarm_dates = alarm_indices.iter().filter_map(|&i| steps[i].date).collect();
    Ok(SurveillanceReport {
        phase1_removed_indices: phase1.removed.clone(),
        phase1_selected: (phase1.spec.p(), phase1.spec.q()),
        steps,
        alarm_indices,
        alarm_dates,
        fitted: phase1.fit.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_residuals_never_alarm() {
        let c = cusum(&[0.0f64; 20], 0.5, 4.0, CusumMode::Bilateral);
        assert!(c.c_plus.iter().chain(&c.c_minus).all(|&v| v == 0.0));
        assert!(c.first_alarm().is_none());
    }

    #[test]
    fn hand_recursion() {
        let c = cusum(&[2.0f64, 2.0, 2.0], 0.5, 4.0, CusumMode::Bilateral);
        assert_eq!(c.c_plus, vec![1.5, 3.0, 4.5]);
        assert_eq!(c.alarms, vec![false, false, true]);
        let d = cusum(&[-2.0f64, -2.0, -2.0], 0.5, 4.0, CusumMode::Bilateral);
        assert_eq!(d.c_minus, vec![1.5, 3.0, 4.5]);
        assert_eq!(d.c_plus, vec![0.0; 3]);
        assert_eq!(d.first_alarm(), Some(2));
        let e = cusum(&[-2.0f64, -2.0, -2.0], 0.5, 4.0, CusumMode::PositiveOnly);
        assert!(e.first_alarm().is_none());
    }

    #[test]
    fn limit_is_strict() {
        let c = cusum(&[4.5f64], 0.5, 4.0, CusumMode::PositiveOnly);
        assert_eq!(c.c_plus, vec![4.0]);
        assert!(!c.alarms[0]);
    }

    #[test]
    fn sums_continue_after_alarm() {
        let c = cusum(&[5.0f64, 0.0, 0.0], 0.5, 4.0, CusumMode::PositiveOnly);
        assert_eq!(c.c_plus, vec![4.5, 4.0, 3.5]);
        assert_eq!(c.alarms, vec![true, false, false]);
        assert_eq!(longest_run(&[true, true, false, true, true, true]), 3);
    }
}
