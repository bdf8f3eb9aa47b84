use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::real::Real;

use super::ArmaCoefficients;

/// Companion (Harvey) state-space form of a unit-variance ARMA(p, q):
///
/// ```text
/// α_{t+1} = T α_t + R η_{t+1},   ε_t = α_t[0],   η ~ N(0, σ²)
/// ```
///
/// with `r = max(p, q + 1)`, `T[i,0] = ψ_{i+1}`, ones on the superdiagonal
/// and `R = (1, λ_1, …, λ_{r−1})`.
#[derive(Clone, Debug)]
pub struct ArmaStateSpace<T> {
    coefs: ArmaCoefficients<T>,
    transition: Matrix<T>,
    loading: Vec<T>,
    innovation_variance: T,
    stationary_cov: Matrix<T>,
}

impl<T: Real> ArmaStateSpace<T> {
    #[inline]
    pub fn dim(&self) -> usize {
        self.loading.len()
    }

    pub fn coefficients(&self) -> &ArmaCoefficients<T> {
        &self.coefs
    }

    pub fn transition(&self) -> &Matrix<T> {
        &self.transition
    }

    pub fn loading(&self) -> &[T] {
        &self.loading
    }

    /// `var(η_t)`, scaled so that `var(ε_t) = 1`.
    pub fn innovation_variance(&self) -> T {
        self.innovation_variance
    }

    /// Stationary covariance of the state vector.
    pub fn stationary_cov(&self) -> &Matrix<T> {
        &self.stationary_cov
    }

    /// Marginal variance of `ε_t` implied by the stationary covariance.
    pub fn marginal_variance(&self) -> T {
        self.stationary_cov[(0, 0)]
    }

    /// `out = T x`, exploiting the companion structure:
    /// `(T x)_i = ψ_i x_0 + x_{i+1}`.
    pub(crate) fn apply_transition(&self, x: &[T], out: &mut [T]) {
        let r = self.dim();
        let psi = self.coefs.psi();
        for i in 0..r {
            let ar = if i < psi.len() { psi[i] * x[0] } else { T::zero() };
            let shift = if i + 1 < r { x[i + 1] } else { T::zero() };
            out[i] = ar + shift;
        }
    }
}

/// Builds the state space of `c` with innovation variance rescaled so the
/// stationary variance of `ε_t` is exactly one.
pub fn build_state_space<T: Real>(c: &ArmaCoefficients<T>) -> Result<ArmaStateSpace<T>> {
    let p = c.p();
    let q = c.q();
    let r = p.max(q + 1);

    let mut transition = Matrix::zeros(r, r);
    for (i, &v) in c.psi().iter().enumerate() {
        transition[(i, 0)] = v;
    }
    for i in 0..r - 1 {
        transition[(i, i + 1)] = T::one();
    }
    let mut loading = vec![T::zero(); r];
    loading[0] = T::one();
    for (j, &v) in c.lambda().iter().enumerate() {
        loading[j + 1] = v;
    }

    let unit = solve_lyapunov(&transition, &loading)?;
    let var = unit[(0, 0)];
    if !(var > T::zero()) || !var.is_finite() {
        return Err(Error::Numerical(format!("implied ARMA variance {var} is not positive")));
    }
    let innovation_variance = var.recip();
    let mut stationary_cov = unit.scale(innovation_variance);
    stationary_cov.symmetrize();
    Ok(ArmaStateSpace { coefs: c.clone(), transition, loading, innovation_variance, stationary_cov })
}

/// Solves `P = T P Tᵀ + R Rᵀ` through the vectorized system
/// `(I − T ⊗ T) vec P = vec(R Rᵀ)`.
fn solve_lyapunov<T: Real>(t: &Matrix<T>, loading: &[T]) -> Result<Matrix<T>> {
    let r = t.rows();
    let n = r * r;
    let mut system = Matrix::identity(n);
    for i in 0..r {
        for j in 0..r {
            let row = i * r + j;
            for k in 0..r {
                let tik = t[(i, k)];
                if tik == T::zero() {
                    continue;
                }
                for l in 0..r {
                    let col = k * r + l;
                    system[(row, col)] = system[(row, col)] - tik * t[(j, l)];
                }
            }
        }
    }
    let rhs: Vec<T> = (0..n).map(|idx| loading[idx / r] * loading[idx % r]).collect();
    let sol = system.solve(&rhs)?;
    Ok(Matrix::from_fn(r, r, |i, j| sol[i * r + j]))
}

/// Autocorrelations `ρ(1), …, ρ(max_lag)` of the unit-variance process.
pub fn theoretical_acf<T: Real>(c: &ArmaCoefficients<T>, max_lag: usize) -> Result<Vec<T>> {
    let ss = build_state_space(c)?;
    let r = ss.dim();
    // Cov(α_{t+ℓ}, ε_t) = T^ℓ P e_0
    let mut x = ss.stationary_cov.column(0);
    let mut next = vec![T::zero(); r];
    let mut out = Vec::with_capacity(max_lag);
    for _ in 0..max_lag {
        ss.apply_transition(&x, &mut next);
        std::mem::swap(&mut x, &mut next);
        out.push(x[0]);
    }
    Ok(out)
}
