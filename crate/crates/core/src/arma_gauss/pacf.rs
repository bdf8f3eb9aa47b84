//! Partial-autocorrelation parametrization of stationary AR polynomials.
//!
//! Any vector of partial autocorrelations in `(-1, 1)^p` maps, through the
//! Durbin–Levinson recursion, to the coefficients of a stationary AR(p)
//! polynomial and back. Composing with `tanh` gives an unconstrained
//! parametrization of the stationarity region.

use crate::real::Real;

/// Partial autocorrelations to AR coefficients `ψ` (polynomial `1 − Σ ψ_i z^i`).
pub fn pacf_to_ar<T: Real>(pacf: &[T]) -> Vec<T> {
    let mut phi: Vec<T> = Vec::with_capacity(pacf.len());
    for (k, &r) in pacf.iter().enumerate() {
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = prev[j] - r * prev[k - 1 - j];
        }
        phi.push(r);
    }
    phi
}

/// AR coefficients to partial autocorrelations by the step-down recursion.
/// Returns `None` if the polynomial is not stationary.
pub fn ar_to_pacf<T: Real>(ar: &[T]) -> Option<Vec<T>> {
    let p = ar.len();
    let mut phi = ar.to_vec();
    let mut out = vec![T::zero(); p];
    for k in (0..p).rev() {
        let r = phi[k];
        if !(r.abs() < T::one()) {
            return None;
        }
        out[k] = r;
        let denom = T::one() - r * r;
        let prev = phi.clone();
        for j in 0..k {
            phi[j] = (prev[j] + r * prev[k - 1 - j]) / denom;
        }
        phi.truncate(k);
    }
    Some(out)
}

/// Unconstrained reals to AR coefficients via `tanh` then Durbin–Levinson.
pub fn unconstrained_to_ar<T: Real>(u: &[T]) -> Vec<T> {
    let pacf: Vec<T> = u.iter().map(|x| x.tanh()).collect();
    pacf_to_ar(&pacf)
}

/// Inverse of [`unconstrained_to_ar`]. `None` for non-stationary input.
pub fn ar_to_unconstrained<T: Real>(ar: &[T]) -> Option<Vec<T>> {
    ar_to_pacf(ar).map(|pacf| pacf.into_iter().map(atanh).collect())
}

/// Unconstrained reals to invertible MA coefficients `λ` (polynomial `1 + Σ λ_j z^j`).
pub fn unconstrained_to_ma<T: Real>(u: &[T]) -> Vec<T> {
    unconstrained_to_ar(u).into_iter().map(|x| -x).collect()
}

pub fn ma_to_unconstrained<T: Real>(ma: &[T]) -> Option<Vec<T>> {
    let neg: Vec<T> = ma.iter().map(|&x| -x).collect();
    ar_to_unconstrained(&neg)
}

fn atanh<T: Real>(r: T) -> T {
    let half = T::lit(0.5);
    half * ((T::one() + r) / (T::one() - r)).ln()
}
