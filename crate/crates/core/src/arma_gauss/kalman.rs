use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

use super::ArmaStateSpace;

const MIN_PREDICTIVE_SD: f64 = 1e-12;

/// Conditional mean and standard deviation of an ARMA error given its past.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KalmanPrediction<T> {
    pub m: T,
    pub s: T,
}

impl<T: Real> KalmanPrediction<T> {
    pub fn unconditional() -> Self {
        Self { m: T::zero(), s: T::one() }
    }

    /// Standardized innovation `(ε − m)/s`.
    #[inline]
    pub fn standardize(&self, eps: T) -> T {
        (eps - self.m) / self.s
    }
}

/// Filtering state holding the one-step prediction of the state vector.
///
/// The error is observed without noise, so every measurement update zeroes
/// the first row and column of the state covariance.
#[derive(Clone, Debug)]
pub struct KalmanState<T> {
    a: Vec<T>,
    p: Vec<T>,
    scratch: Vec<T>,
    gain: Vec<T>,
}

impl<T: Real> KalmanState<T> {
    /// Starts at the stationary distribution, so the first prediction is `(0, 1)`.
    pub fn stationary(ss: &ArmaStateSpace<T>) -> Self {
        let r = ss.dim();
        let cov = ss.stationary_cov();
        let mut p = vec![T::zero(); r * r];
        for i in 0..r {
            for j in 0..r {
                p[i * r + j] = cov[(i, j)];
            }
        }
        Self { a: vec![T::zero(); r], p, scratch: vec![T::zero(); r * r], gain: vec![T::zero(); r] }
    }

    /// Predictive law of the next error given everything absorbed so far.
    pub fn prediction(&self) -> Result<KalmanPrediction<T>> {
        let f = self.p[0];
        let s = f.max(T::zero()).sqrt();
        if !(s >= T::lit(MIN_PREDICTIVE_SD)) {
            return Err(Error::Numerical(format!("predictive standard deviation {s} below threshold")));
        }
        Ok(KalmanPrediction { m: self.a[0], s })
    }

    /// Absorbs the observed error `eps` and moves to the next time point.
    pub fn update(&mut self, ss: &ArmaStateSpace<T>, eps: T) -> Result<()> {
        let r = ss.dim();
        let f = self.p[0];
        if !(f >= T::lit(MIN_PREDICTIVE_SD * MIN_PREDICTIVE_SD)) {
            return Err(Error::Numerical(format!("predictive variance {f} below threshold")));
        }
        let v = eps - self.a[0];
        for i in 0..r {
            self.gain[i] = self.p[i * r] / f;
        }
        for i in 0..r {
            self.a[i] = self.a[i] + self.gain[i] * v;
        }
        // Row 0 is read by every row update, so it is rewritten last.
        for i in (0..r).rev() {
            let gi = self.gain[i];
            for j in 0..r {
                self.p[i * r + j] = self.p[i * r + j] - gi * self.p[j];
            }
        }
        for j in 0..r {
            self.p[j] = T::zero();
            self.p[j * r] = T::zero();
        }
        self.advance(ss);
        Ok(())
    }

    /// Time update without an observation: `a ← T a`, `P ← T P Tᵀ + σ² R Rᵀ`.
    pub fn advance(&mut self, ss: &ArmaStateSpace<T>) {
        let r = ss.dim();
        let psi = ss.coefficients().psi();
        let ar = |i: usize| if i < psi.len() { psi[i] } else { T::zero() };

        let a0 = self.a[0];
        for i in 0..r {
            let shift = if i + 1 < r { self.a[i + 1] } else { T::zero() };
            self.a[i] = ar(i) * a0 + shift;
        }

        // scratch = T P
        for i in 0..r {
            for j in 0..r {
                let shift = if i + 1 < r { self.p[(i + 1) * r + j] } else { T::zero() };
                self.scratch[i * r + j] = ar(i) * self.p[j] + shift;
            }
        }
        // P = scratch Tᵀ + σ² R Rᵀ
        let s2 = ss.innovation_variance();
        let loading = ss.loading();
        for i in 0..r {
            let first = self.scratch[i * r];
            for j in 0..r {
                let shift = if j + 1 < r { self.scratch[i * r + j + 1] } else { T::zero() };
                self.p[i * r + j] = ar(j) * first + shift + s2 * loading[i] * loading[j];
            }
        }
    }
}

/// One-step predictions `(m_{t|t−1}, s_{t|t−1})` for every entry of `eps`.
pub fn kalman_filter<T: Real>(ss: &ArmaStateSpace<T>, eps: &[T]) -> Result<Vec<KalmanPrediction<T>>> {
    let mut state = KalmanState::stationary(ss);
    let mut out = Vec::with_capacity(eps.len());
    for &e in eps {
        if !e.is_finite() {
            return Err(Error::Domain(format!("non-finite error value {e}")));
        }
        out.push(state.prediction()?);
        state.update(ss, e)?;
    }
    Ok(out)
}

/// Law of `ε_{n+k}` given `ε_1, …, ε_n` for `k ≥ 1`.
pub fn kalman_forecast<T: Real>(ss: &ArmaStateSpace<T>, eps: &[T], k: usize) -> Result<KalmanPrediction<T>> {
    if k == 0 {
        return Err(Error::Domain("forecast horizon must be at least 1".into()));
    }
    let mut state = KalmanState::stationary(ss);
    for &e in eps {
        if !e.is_finite() {
            return Err(Error::Domain(format!("non-finite error value {e}")));
        }
        state.update(ss, e)?;
    }
    for _ in 1..k {
        state.advance(ss);
    }
    state.prediction()
}
