use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use betats::copula_model::simulate;
use betats::regressors::{Columns, ModelSpec, ParameterVector};
use chrono::{Duration, NaiveDate};
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_betats");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2007, 1, 7).unwrap()
}

/// Weekly series from the seasonal ARMA(1,0) model with a holiday column.
fn simulated(n: usize, seed: u64) -> Vec<f64> {
    let spec = ModelSpec::seasonal(1, 0, 52);
    let pv = ParameterVector {
        beta_x: vec![-2.5, 0.1, 0.4, -0.3],
        beta_z: vec![5.0, 0.0, 0.1, -0.1],
        psi: vec![0.6],
        lambda: vec![],
    };
    simulate(&spec, &pv, n, &Columns::new(), seed).unwrap().values().to_vec()
}

fn holiday(i: usize) -> u8 {
    u8::from(matches!(i % 52, 51 | 0))
}

fn write_series(path: &Path, first: NaiveDate, offset: usize, values: &[f64]) {
    let mut s = String::from("date,value,holiday\n");
    for (i, v) in values.iter().enumerate() {
        s.push_str(&format!("{},{v},{}\n", first + Duration::weeks(i as i64), holiday(offset + i)));
    }
    fs::write(path, s).unwrap();
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self { dir: TempDir::new().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.path(name)).unwrap()
    }

    fn data(&self, name: &str, n: usize, seed: u64) -> String {
        write_series(&self.path(name), start(), 0, &simulated(n, seed));
        self.p(name)
    }
}

fn assert_ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(o));
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().skip(1).collect()
}

#[test]
fn fit_writes_outputs_and_predict_reproduces_forecasts() {
    let ws = Workspace::new();
    let data = ws.data("d.csv", 156, 1);
    let out = ws.p("fit");
    let o = run(&["fit", "--data", &data, "--arma", "1,0", "--ahead", "4", "--out", &out]);
    assert_ok(&o);
    let est = ws.read("fit/estimates.csv");
    assert!(est.starts_with("parameter,estimate,se\n"));
    assert_eq!(data_lines(&est).len(), 9);
    assert!(est.contains("\nar1,"));
    let summary = ws.read("fit/summary.csv");
    assert!(summary.starts_with("n,p,q,dim,loglik,aic,converged,iterations,grad_norm\n156,1,0,9,"));
    assert_eq!(data_lines(&ws.read("fit/residuals.csv")).len(), 156);

    let pred = ws.p("pred.csv");
    let o = run(&["predict", "--model", &ws.p("fit/model.json"), "--data", &data, "--ahead", "4", "--out", &pred]);
    assert_ok(&o);
    let forecasts = ws.read("fit/forecasts.csv");
    assert_eq!(ws.read("pred.csv"), forecasts);
    let header = forecasts.lines().next().unwrap();
    assert_eq!(header, "lag,date,median,lower_90,upper_90,lower_95,upper_95,lower_99,upper_99");
    let first: Vec<f64> = data_lines(&forecasts)[0].split(',').skip(2).map(|v| v.parse().unwrap()).collect();
    // Nested intervals around the median.
    assert!(first[3] < first[1] && first[1] < first[0] && first[0] < first[2] && first[2] < first[4]);
    assert!(data_lines(&forecasts)[0].starts_with("1,2010-01-03,"));
}

#[test]
fn commands_are_idempotent() {
    let ws = Workspace::new();
    let data = ws.data("d.csv", 120, 2);
    for out in ["a", "b"] {
        assert_ok(&run(&["fit", "--data", &data, "--arma", "1,0", "--ahead", "2", "--out", &ws.p(out)]));
    }
    for file in ["estimates.csv", "summary.csv", "residuals.csv", "forecasts.csv", "model.json"] {
        assert_eq!(ws.read(&format!("a/{file}")), ws.read(&format!("b/{file}")), "{file}");
    }
}

#[test]
fn numbers_have_six_significant_digits() {
    let ws = Workspace::new();
    let data = ws.data("d.csv", 120, 3);
    assert_ok(&run(&["fit", "--data", &data, "--out", &ws.p("o")]));
    for line in data_lines(&ws.read("o/estimates.csv")) {
        for field in line.split(',').skip(1) {
            let digits: String = field.split('e').next().unwrap().chars().filter(char::is_ascii_digit).collect();
            assert!(digits.trim_start_matches('0').len() <= 6, "{field}");
            field.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn holiday_dummy_enters_the_mean() {
    let ws = Workspace::new();
    let data = ws.data("d.csv", 156, 4);
    let o = run(&["fit", "--data", &data, "--mean-terms", "intercept,trend,sin1,cos1,holiday", "--out", &ws.p("o")]);
    assert_ok(&o);
    assert!(ws.read("o/estimates.csv").contains("\nmean:holiday,"));
    // Forecasting needs future dummy values.
    let model = ws.p("o/model.json");
    let o = run(&["predict", "--model", &model, "--data", &data, "--ahead", "2", "--out", &ws.p("p.csv")]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    fs::write(ws.path("future.csv"), "holiday\n0\n1\n").unwrap();
    let o = run(&[
        "predict", "--model", &model, "--data", &data, "--future", &ws.p("future.csv"), "--ahead", "2", "--out",
        &ws.p("p.csv"),
    ]);
    assert_ok(&o);
    assert_eq!(data_lines(&ws.read("p.csv")).len(), 2);
}

#[test]
fn select_ranks_sixteen_models() {
    let ws = Workspace::new();
    let data = ws.data("d.csv", 156, 5);
    let o = run(&["select", "--data", &data, "--out", &ws.p("s.csv")]);
    assert_ok(&o);
    let text = ws.read("s.csv");
    assert!(text.starts_with("rank,p,q,aic,acf1,acf2,acf3,acf4,converged,failure\n"));
    let rows = data_lines(&text);
    assert_eq!(rows.len(), 16);
    let aics: Vec<f64> = rows.iter().map(|r| r.split(',').nth(3).unwrap().parse().unwrap()).collect();
    let finite: Vec<f64> = aics.iter().copied().filter(|a| a.is_finite()).collect();
    assert!(finite.windows(2).all(|w| w[0] <= w[1]));
    assert!(rows[0].starts_with("1,"));
}

#[test]
fn residuals_and_plot_data() {
    let ws = Workspace::new();
    let data = ws.data("d.csv", 130, 6);
    assert_ok(&run(&["fit", "--data", &data, "--arma", "1,0", "--out", &ws.p("o")]));
    let model = ws.p("o/model.json");
    assert_ok(&run(&["residuals", "--model", &model, "--data", &data, "--max-lag", "10", "--out", &ws.p("r")]));
    assert_eq!(data_lines(&ws.read("r/residuals.csv")).len(), 130);
    assert_eq!(data_lines(&ws.read("r/qq.csv")).len(), 130);
    let acf = ws.read("r/acf.csv");
    assert_eq!(data_lines(&acf).len(), 10);
    assert!(acf.starts_with("lag,acf,lower,upper\n"));
    // Residuals match those written by `fit`.
    let from_fit: Vec<String> =
        data_lines(&ws.read("o/residuals.csv")).iter().map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
    let from_cmd: Vec<String> =
        data_lines(&ws.read("r/residuals.csv")).iter().map(|l| l.rsplit(',').next().unwrap().to_string()).collect();
    assert_eq!(from_fit, from_cmd);

    let o = run(&["plotdata", "--model", &model, "--data", &data, "--lags", "1,4", "--points", "50", "--out", &ws.p("pd.csv")]);
    assert_ok(&o);
    let text = ws.read("pd.csv");
    assert!(text.starts_with("lag,y,marginal,predictive\n"));
    assert_eq!(data_lines(&text).len(), 100);
}

#[test]
fn profile_writes_the_curve() {
    let ws = Workspace::new();
    let data = ws.data("d.csv", 120, 7);
    let o = run(&["profile", "--data", &data, "--arma", "1,0", "--param", "ar1", "--grid", "0.2,0.9,8", "--out", &ws.p("pr.csv")]);
    assert_ok(&o);
    let text = ws.read("pr.csv");
    assert!(text.starts_with("value,loglik,converged\n"));
    assert_eq!(data_lines(&text).len(), 8);
    let o = run(&["profile", "--data", &data, "--param", "nope", "--grid", "0,1,3", "--out", &ws.p("x.csv")]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn monitor_flags_an_injected_outbreak() {
    let ws = Workspace::new();
    let all = simulated(208, 8);
    let mut stream = all[156..].to_vec();
    for y in &mut stream[20..32] {
        *y = (*y * 2.5).min(0.9);
    }
    write_series(&ws.path("p1.csv"), start(), 0, &all[..156]);
    write_series(&ws.path("p2.csv"), start() + Duration::weeks(156), 156, &stream);
    let o = run(&["monitor", "--phase1-data", &ws.p("p1.csv"), "--phase2-data", &ws.p("p2.csv"), "--out", &ws.p("m.csv")]);
    assert_ok(&o);
    let text = ws.read("m.csv");
    assert!(text.starts_with("date,value,residual,c_plus,alarm\n"));
    let rows = data_lines(&text);
    assert_eq!(rows.len(), 52);
    let alarms: Vec<bool> = rows.iter().map(|r| r.ends_with(",1")).collect();
    assert!(alarms[20..32].iter().filter(|a| **a).count() >= 6, "{text}");
    assert!(String::from_utf8_lossy(&o.stdout).contains("phase II:"));

    // Phase II must continue the Phase I weeks.
    write_series(&ws.path("late.csv"), start() + Duration::weeks(160), 160, &stream);
    let o = run(&["monitor", "--phase1-data", &ws.p("p1.csv"), "--phase2-data", &ws.p("late.csv"), "--out", &ws.p("m2.csv")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_with_zero_replicates_writes_headers() {
    let ws = Workspace::new();
    let o = run(&["simulate", "--replicates", "0", "--out", &ws.p("sim")]);
    assert_ok(&o);
    assert_eq!(ws.read("sim/table1.csv"), "variant,parameter,truth,ave,sd,mean_se\n");
    assert_eq!(ws.read("sim/table2.csv"), "variant,lag,level,coverage,mc_se\n");
}

fn expect_data_error(ws: &Workspace, csv: &str, needle: &str) {
    fs::write(ws.path("bad.csv"), csv).unwrap();
    let o = run(&["fit", "--data", &ws.p("bad.csv"), "--mean-terms", "intercept", "--prec-terms", "intercept", "--out", &ws.p("o")]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let err = stderr(&o);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains(needle), "{err}");
}

#[test]
fn malformed_inputs_are_data_errors() {
    let ws = Workspace::new();
    expect_data_error(&ws, "date,value\n2010-01-03,0.2\n2010-01-17,0.3\n", "one week");
    expect_data_error(&ws, "date,value\n2010-01-03,0.2\n2010-01-10,0\n", "--squeeze");
    expect_data_error(&ws, "date,value\n2010-01-03,0.2\n2010-01-10,abc\n", "not a finite number");
    expect_data_error(&ws, "date,value\n03/01/2010,0.2\n", "ISO-8601");
    expect_data_error(&ws, "day,value\n2010-01-03,0.2\n", "missing `date`");
    expect_data_error(&ws, "date,value,holiday\n2010-01-03,0.2,2\n", "0 or 1");
    expect_data_error(&ws, "date,value\n2010-01-03,0.2\n2010-01-10,0.3,9\n", "CSV");
    let o = run(&["fit", "--data", &ws.p("missing.csv"), "--out", &ws.p("o")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn squeeze_admits_boundary_values() {
    let ws = Workspace::new();
    let mut values = simulated(60, 9);
    values[10] = 0.0;
    values[20] = 1.0;
    write_series(&ws.path("b.csv"), start(), 0, &values);
    let args = ["fit", "--data", &ws.p("b.csv"), "--mean-terms", "intercept", "--prec-terms", "intercept", "--out", &ws.p("o")];
    assert_eq!(run(&args).status.code(), Some(2));
    let mut with = args.to_vec();
    with.push("--squeeze");
    assert_ok(&run(&with));
}

#[test]
fn usage_errors_exit_with_one() {
    let ws = Workspace::new();
    let data = ws.data("d.csv", 60, 10);
    assert_eq!(run(&["fit", "--data", &data]).status.code(), Some(1));
    assert_eq!(run(&["fit", "--data", &data, "--arma", "x", "--out", "o"]).status.code(), Some(1));
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    assert_eq!(run(&["predict", "--model", "m", "--data", &data, "--levels", "1.5", "--out", "o"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let o = run(&["fit", "--data", &data, "--mean-terms", "intercept,sin0", "--out", &ws.p("o")]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    // A term naming an absent column is a data problem.
    let o = run(&["fit", "--data", &data, "--mean-terms", "intercept,flu_season", "--out", &ws.p("o")]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
