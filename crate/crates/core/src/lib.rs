//! Marginal beta regression for bounded time series with Gaussian-copula
//! ARMA errors.
//!
//! The numerical kernels ([`dist`], [`arma_gauss`], [`regressors`],
//! [`copula_model`], [`surveillance::cusum`]) are generic over [`Real`];
//! fitting, simulation studies and surveillance run in `f64` and use the
//! aliases defined here.

pub mod arma_gauss;
pub mod copula_model;
pub mod dist;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod optim;
pub mod quad;
pub mod real;
pub mod regressors;
pub mod simstudy;
pub mod surveillance;

pub use error::{Error, Result};
pub use real::Real;

pub type BetaMP64 = dist::BetaMP<f64>;
pub type ArmaCoefficients64 = arma_gauss::ArmaCoefficients<f64>;
pub type ArmaStateSpace64 = arma_gauss::ArmaStateSpace<f64>;
pub type KalmanPrediction64 = arma_gauss::KalmanPrediction<f64>;
pub type BoundedSeries64 = copula_model::BoundedSeries<f64>;
pub type CopulaModel64 = copula_model::CopulaModel<f64>;
pub type PredictiveDistribution64 = copula_model::PredictiveDistribution<f64>;
pub type ParameterVector64 = regressors::ParameterVector<f64>;
pub type Columns64 = regressors::Columns<f64>;
pub type Design64 = regressors::Design<f64>;
pub type CusumChart64 = surveillance::CusumChart<f64>;
pub type Matrix64 = linalg::Matrix<f64>;
