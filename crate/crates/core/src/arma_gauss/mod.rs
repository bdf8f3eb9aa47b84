//! Stationary, invertible Gaussian ARMA(p, q) errors scaled to unit variance.
//!
//! `ε_t = Σ ψ_i ε_{t−i} + Σ λ_j η_{t−j} + η_t` with the innovation variance
//! chosen so that `var(ε_t) = 1`. [`ArmaStateSpace`] holds the companion
//! form and the stationary state covariance; [`KalmanState`] runs the
//! prediction recursions over an observed error series.

mod kalman;
pub mod pacf;
mod state_space;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

pub use kalman::{kalman_filter, kalman_forecast, KalmanPrediction, KalmanState};
pub use state_space::{build_state_space, theoretical_acf, ArmaStateSpace};

/// Autoregressive (`psi`) and moving-average (`lambda`) coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmaCoefficients<T> {
    psi: Vec<T>,
    lambda: Vec<T>,
}

impl<T: Real> ArmaCoefficients<T> {
    /// Validates stationarity of `1 − Σ ψ_i z^i` and invertibility of `1 + Σ λ_j z^j`.
    pub fn new(psi: Vec<T>, lambda: Vec<T>) -> Result<Self> {
        if psi.iter().chain(&lambda).any(|x| !x.is_finite()) {
            return Err(Error::Inadmissible("non-finite coefficient".into()));
        }
        if pacf::ar_to_pacf(&psi).is_none() {
            return Err(Error::Inadmissible(format!("AR polynomial {psi:?} is not stationary")));
        }
        let neg: Vec<T> = lambda.iter().map(|&x| -x).collect();
        if pacf::ar_to_pacf(&neg).is_none() {
            return Err(Error::Inadmissible(format!("MA polynomial {lambda:?} is not invertible")));
        }
        Ok(Self { psi, lambda })
    }

    pub fn white_noise() -> Self {
        Self { psi: Vec::new(), lambda: Vec::new() }
    }

    /// Maps unconstrained reals (`p` AR values followed by `q` MA values)
    /// into the admissible region through the PACF/`tanh` transform.
    pub fn from_unconstrained(p: usize, q: usize, u: &[T]) -> Result<Self> {
        if u.len() != p + q {
            return Err(Error::Dimension(format!("expected {} unconstrained ARMA values, got {}", p + q, u.len())));
        }
        let psi = pacf::unconstrained_to_ar(&u[..p]);
        let lambda = pacf::unconstrained_to_ma(&u[p..]);
        // Saturated tanh can land on the boundary; re-check.
        Self::new(psi, lambda)
    }

    /// Inverse of [`Self::from_unconstrained`].
    pub fn to_unconstrained(&self) -> Vec<T> {
        let mut out = pacf::ar_to_unconstrained(&self.psi).expect("validated at construction");
        out.extend(pacf::ma_to_unconstrained(&self.lambda).expect("validated at construction"));
        out
    }

    #[inline]
    pub fn psi(&self) -> &[T] {
        &self.psi
    }

    #[inline]
    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.psi.len()
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_white_noise(&self) -> bool {
        self.psi.iter().chain(&self.lambda).all(|&x| x == T::zero())
    }
}
