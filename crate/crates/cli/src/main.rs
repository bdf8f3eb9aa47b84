mod commands;
mod data;
mod error;
mod format;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Marginal beta regression for bounded weekly time series with
/// Gaussian-copula ARMA errors.
#[derive(Parser, Debug)]
#[command(name = "betats", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// CSV with columns date, value and optional 0/1 dummy columns.
    #[arg(long)]
    pub data: PathBuf,
    /// Map y to (y(n-1)+0.5)/n so that exact 0 and 1 are admissible.
    #[arg(long)]
    pub squeeze: bool,
    /// Seasonal period of the harmonic terms.
    #[arg(long, default_value_t = 52)]
    pub period: u32,
}

#[derive(Args, Debug, Clone)]
pub struct TermArgs {
    /// Mean covariates: intercept, trend, sinH, cosH or a dummy column name.
    #[arg(long, default_value = "intercept,trend,sin1,cos1")]
    pub mean_terms: String,
    /// Precision covariates, same syntax as --mean-terms.
    #[arg(long, default_value = "intercept,trend,sin1,cos1")]
    pub prec_terms: String,
}

#[derive(Args, Debug, Clone)]
pub struct ModelFileArgs {
    /// model.json written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// The series the model was fitted to (optionally extended).
    #[arg(long)]
    pub data: PathBuf,
    /// CSV of future dummy values; row i is used at lag i+1.
    #[arg(long)]
    pub future: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a model; writes estimates, summary, residuals and model.json.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        terms: TermArgs,
        /// ARMA orders of the errors as p,q.
        #[arg(long, default_value = "0,0", value_parser = parse_orders)]
        arma: (usize, usize),
        /// Also write forecasts.csv for lags 1..=K.
        #[arg(long, default_value_t = 0)]
        ahead: usize,
        #[arg(long, default_value = "0.90,0.95,0.99", value_delimiter = ',', value_parser = parse_level)]
        levels: Vec<f64>,
        /// Future dummy values for --ahead.
        #[arg(long)]
        future: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank ARMA(p,q) error models by AIC.
    Select {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        terms: TermArgs,
        #[arg(long, default_value_t = 3)]
        p_max: usize,
        #[arg(long, default_value_t = 3)]
        q_max: usize,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-lag predictive quantile bounds from a fitted model.
    Predict {
        #[command(flatten)]
        model: ModelFileArgs,
        #[arg(long, default_value_t = 4)]
        ahead: usize,
        #[arg(long, default_value = "0.90,0.95,0.99", value_delimiter = ',', value_parser = parse_level)]
        levels: Vec<f64>,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Quantile residuals with normal-probability-plot and ACF data.
    Residuals {
        #[command(flatten)]
        model: ModelFileArgs,
        #[arg(long, default_value_t = 26)]
        max_lag: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Phase I calibration followed by Phase II CUSUM monitoring.
    Monitor {
        /// Historical data for calibration.
        #[arg(long)]
        phase1_data: PathBuf,
        /// Data to monitor, starting the week after the Phase I data.
        #[arg(long)]
        phase2_data: PathBuf,
        #[command(flatten)]
        terms: TermArgs,
        #[arg(long)]
        squeeze: bool,
        #[arg(long, default_value_t = 52)]
        period: u32,
        /// CUSUM reference value.
        #[arg(long, default_value_t = 0.5)]
        k: f64,
        /// CUSUM decision limit.
        #[arg(long, default_value_t = 4.0)]
        h: f64,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Profile log-likelihood of one parameter over a grid.
    Profile {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        terms: TermArgs,
        #[arg(long, default_value = "0,0", value_parser = parse_orders)]
        arma: (usize, usize),
        /// Parameter name, e.g. mean:holiday, prec:intercept or ar1.
        #[arg(long)]
        param: String,
        /// Grid as lo,hi,steps.
        #[arg(long, value_parser = parse_grid)]
        grid: (f64, f64, usize),
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo study of estimates and interval coverage.
    Simulate {
        #[arg(long, default_value_t = 200)]
        replicates: usize,
        #[arg(long, default_value_t = 20_130_101)]
        seed: u64,
        /// Output directory for table1.csv and table2.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Marginal and predictive density curves at the requested lags.
    Plotdata {
        #[command(flatten)]
        model: ModelFileArgs,
        #[arg(long, default_value = "1,2,3,4", value_delimiter = ',')]
        lags: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_orders(s: &str) -> Result<(usize, usize), String> {
    let (p, q) = s.split_once(',').ok_or("expected p,q")?;
    let p = p.trim().parse().map_err(|_| format!("bad AR order `{p}`"))?;
    let q = q.trim().parse().map_err(|_| format!("bad MA order `{q}`"))?;
    Ok((p, q))
}

fn parse_level(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(l) if l > 0.0 && l < 1.0 => Ok(l),
        _ => Err(format!("level `{s}` must be a number in (0,1)")),
    }
}

fn parse_grid(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [lo, hi, steps] = parts[..] else {
        return Err("expected lo,hi,steps".into());
    };
    let lo: f64 = lo.parse().map_err(|_| format!("bad grid start `{lo}`"))?;
    let hi: f64 = hi.parse().map_err(|_| format!("bad grid end `{hi}`"))?;
    let steps: usize = steps.parse().map_err(|_| format!("bad step count `{steps}`"))?;
    if !(lo < hi) || steps < 2 {
        return Err("grid needs lo < hi and at least 2 steps".into());
    }
    Ok((lo, hi, steps))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("betats: {e}");
            e.exit_code()
        }
    }
}
