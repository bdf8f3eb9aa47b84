//! Beta distribution in mean–precision form and standard normal helpers.
//!
//! `BetaMP { mu, kappa }` has shape parameters `a = mu·kappa` and
//! `b = (1 − mu)·kappa`. The CDF is the regularized incomplete beta
//! function, evaluated by a modified Lentz continued fraction on whichever
//! tail converges fast. The quantile is a safeguarded Newton iteration on
//! that CDF.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const CF_MAX_ITER: usize = 5_000;
const QUANTILE_MAX_ITER: usize = 200;

/// Beta distribution parametrized by mean `mu ∈ (0,1)` and precision `kappa > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaMP<T> {
    mu: T,
    kappa: T,
}

impl<T: Real> BetaMP<T> {
    pub fn new(mu: T, kappa: T) -> Result<Self> {
        if !(mu > T::zero() && mu < T::one()) {
            return Err(Error::Domain(format!("beta mean must lie in (0,1), got {mu}")));
        }
        if !(kappa > T::zero()) || !kappa.is_finite() {
            return Err(Error::Domain(format!("beta precision must be positive and finite, got {kappa}")));
        }
        let d = Self { mu, kappa };
        if !(d.a() > T::zero() && d.b() > T::zero()) {
            return Err(Error::Domain(format!("beta shapes underflow for mu={mu}, kappa={kappa}")));
        }
        Ok(d)
    }

    #[inline]
    pub fn mu(&self) -> T {
        self.mu
    }

    #[inline]
    pub fn kappa(&self) -> T {
        self.kappa
    }

    /// First shape parameter `mu·kappa`.
    #[inline]
    pub fn a(&self) -> T {
        self.mu * self.kappa
    }

    /// Second shape parameter `(1 − mu)·kappa`.
    #[inline]
    pub fn b(&self) -> T {
        (T::one() - self.mu) * self.kappa
    }

    pub fn mean(&self) -> T {
        self.mu
    }

    pub fn variance(&self) -> T {
        self.mu * (T::one() - self.mu) / (T::one() + self.kappa)
    }

    pub fn ln_pdf(&self, y: T) -> Result<T> {
        beta_logpdf(self, y)
    }

    pub fn cdf(&self, y: T) -> Result<T> {
        beta_cdf(self, y)
    }

    pub fn quantile(&self, p: T) -> Result<T> {
        beta_quantile(self, p)
    }
}

/// Log density of `d` at `y ∈ (0,1)`.
pub fn beta_logpdf<T: Real>(d: &BetaMP<T>, y: T) -> Result<T> {
    if !(y > T::zero() && y < T::one()) {
        return Err(Error::Domain(format!("beta density needs y in (0,1), got {y}")));
    }
    Ok(log_density_unchecked(d.a(), d.b(), y))
}

#[inline]
fn log_density_unchecked<T: Real>(a: T, b: T, y: T) -> T {
    (a - T::one()) * y.ln() + (b - T::one()) * (-y).ln_1p() - ln_beta(a, b)
}

/// Distribution function of `d` at `y ∈ [0,1]`.
pub fn beta_cdf<T: Real>(d: &BetaMP<T>, y: T) -> Result<T> {
    if !(y >= T::zero() && y <= T::one()) {
        return Err(Error::Domain(format!("beta cdf needs y in [0,1], got {y}")));
    }
    regularized_incomplete_beta(d.a(), d.b(), y)
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta<T: Real>(a: T, b: T, x: T) -> Result<T> {
    if !(a > T::zero() && b > T::zero()) {
        return Err(Error::Domain(format!("incomplete beta needs positive shapes, got ({a}, {b})")));
    }
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::Domain(format!("incomplete beta argument {x} outside [0,1]")));
    }
    if x == T::zero() {
        return Ok(T::zero());
    }
    if x == T::one() {
        return Ok(T::one());
    }
    let two = T::lit(2.0);
    if x < (a + T::one()) / (a + b + two) {
        Ok(lower_tail_cf(a, b, x)?)
    } else {
        Ok(T::one() - lower_tail_cf(b, a, T::one() - x)?)
    }
}

/// `x^a (1−x)^b / (a B(a,b))` times the continued fraction, valid (and fast)
/// for `x < (a+1)/(a+b+2)`.
fn lower_tail_cf<T: Real>(a: T, b: T, x: T) -> Result<T> {
    let log_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b) - a.ln();
    let front = log_front.exp();
    if front == T::zero() {
        return Ok(T::zero());
    }
    Ok(front * beta_continued_fraction(a, b, x)?)
}

fn beta_continued_fraction<T: Real>(a: T, b: T, x: T) -> Result<T> {
    let one = T::one();
    let two = T::lit(2.0);
    let tiny = T::min_positive_value() / T::epsilon();
    let eps = T::epsilon();
    let qab = a + b;
    let qap = a + one;
    let qam = a - one;

    let mut c = one;
    let mut d = one - qab * x / qap;
    if d.abs() < tiny {
        d = tiny;
    }
    d = d.recip();
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let mf = T::lit(m as f64);
        let m2 = two * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        h = h * d * c;

        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = one + aa * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = one + aa / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let del = d * c;
        h = h * del;
        if (del - one).abs() <= eps {
            return Ok(h);
        }
    }
    Err(Error::Convergence { routine: "incomplete beta continued fraction", iterations: CF_MAX_ITER })
}

/// Quantile function of `d` at `p ∈ (0,1)`.
///
/// The result is clamped to the representable bracket
/// `[max(1e-300, MIN_POSITIVE), 1 − ε/2]`; when the true quantile lies
/// beyond it the nearest endpoint is returned.
pub fn beta_quantile<T: Real>(d: &BetaMP<T>, p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::Domain(format!("beta quantile needs p in (0,1), got {p}")));
    }
    let (a, b) = (d.a(), d.b());
    let one = T::one();
    let eps = T::epsilon();
    let mut lo = T::lit(1e-300).max(T::min_positive_value());
    let mut hi = one - eps / T::lit(2.0);

    let f_lo = regularized_incomplete_beta(a, b, lo)? - p;
    if f_lo >= T::zero() {
        return Ok(lo);
    }
    let f_hi = regularized_incomplete_beta(a, b, hi)? - p;
    if f_hi <= T::zero() {
        return Ok(hi);
    }

    let mut x = initial_quantile_guess(a, b, p);
    if !(x > lo && x < hi) {
        x = bisect_point(lo, hi);
    }

    for _ in 0..QUANTILE_MAX_ITER {
        let f = regularized_incomplete_beta(a, b, x)? - p;
        if f == T::zero() {
            return Ok(x);
        }
        if f < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let log_pdf = log_density_unchecked(a, b, x);
        let newton = if log_pdf.is_finite() { x - f / log_pdf.exp() } else { T::nan() };
        let next = if newton > lo && newton < hi { newton } else { bisect_point(lo, hi) };
        let scale = x.min(one - x);
        if (next - x).abs() <= T::lit(4.0) * eps * scale || next == lo || next == hi {
            // Pick the bracketing candidate with the smaller residual, then
            // walk to neighbouring floats while that keeps improving.
            let x = best_of(a, b, p, x, next)?;
            return polish(a, b, p, x);
        }
        x = next;
    }
    Err(Error::Convergence { routine: "beta quantile", iterations: QUANTILE_MAX_ITER })
}

fn best_of<T: Real>(a: T, b: T, p: T, x: T, y: T) -> Result<T> {
    if !(y > T::zero() && y < T::one()) || x == y {
        return Ok(x);
    }
    let fx = (regularized_incomplete_beta(a, b, x)? - p).abs();
    let fy = (regularized_incomplete_beta(a, b, y)? - p).abs();
    Ok(if fy < fx { y } else { x })
}

fn polish<T: Real>(a: T, b: T, p: T, mut x: T) -> Result<T> {
    let one = T::one();
    let half = T::lit(0.5);
    let residual = |y: T| regularized_incomplete_beta(a, b, y).map(|f| (f - p).abs());
    let mut best = residual(x)?;
    for _ in 0..64 {
        let spacing = if x >= half { T::epsilon() * half } else { x * T::epsilon() * T::lit(0.75) };
        let mut moved = false;
        for y in [x - spacing, x + spacing] {
            if y > T::zero() && y < one && y != x {
                let r = residual(y)?;
                if r < best {
                    best = r;
                    x = y;
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            break;
        }
    }
    Ok(x)
}

/// Midpoint of a bracket, geometric when the bracket spans several decades
/// near either end of the unit interval.
fn bisect_point<T: Real>(lo: T, hi: T) -> T {
    let one = T::one();
    let wide = T::lit(1e3);
    if lo > T::zero() && hi / lo > wide && hi <= T::lit(0.5) {
        ((lo.ln() + hi.ln()) / T::lit(2.0)).exp()
    } else if (one - lo) / (one - hi) > wide && lo >= T::lit(0.5) {
        one - (((one - lo).ln() + (one - hi).ln()) / T::lit(2.0)).exp()
    } else {
        lo + (hi - lo) / T::lit(2.0)
    }
}

/// Starting point for the quantile Newton iteration, after the classical
/// normal-approximation / tail-power guesses for the incomplete beta inverse.
fn initial_quantile_guess<T: Real>(a: T, b: T, p: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    if a >= one && b >= one {
        let pp = if p < T::lit(0.5) { p } else { one - p };
        let t = (-two * pp.ln()).sqrt();
        let mut x = (T::lit(2.30753) + t * T::lit(0.27061)) / (one + t * (T::lit(0.99229) + t * T::lit(0.04481))) - t;
        if p < T::lit(0.5) {
            x = -x;
        }
        let al = (x * x - T::lit(3.0)) / T::lit(6.0);
        let h = two / (one / (two * a - one) + one / (two * b - one));
        let w = x * (al + h).sqrt() / h
            - (one / (two * b - one) - one / (two * a - one)) * (al + T::lit(5.0 / 6.0) - two / (T::lit(3.0) * h));
        a / (a + b * (two * w).exp())
    } else {
        let lna = (a / (a + b)).ln();
        let lnb = (b / (a + b)).ln();
        let t = (a * lna).exp() / a;
        let u = (b * lnb).exp() / b;
        let w = t + u;
        if p < t / w {
            (a * w * p).powf(one / a)
        } else {
            one - (b * w * (one - p)).powf(one / b)
        }
    }
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // Reflection keeps the Lanczos sum in its accurate range.
        let pi = T::PI();
        return (pi / (pi * x).sin().abs()).ln() - ln_gamma(T::one() - x);
    }
    let z = x - T::one();
    let mut sum = T::lit(LANCZOS_COEF[0]);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        sum = sum + T::lit(c) / (z + T::lit(i as f64));
    }
    let t = z + T::lit(LANCZOS_G) + half;
    half * (T::TAU()).ln() + (z + half) * t.ln() - t + sum.ln()
}

/// Stirling remainder `ln Γ(x) − [(x − ½) ln x − x + ½ ln 2π]` for `x ≥ 10`.
fn stirling_remainder<T: Real>(x: T) -> T {
    const COEF: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let inv = x.recip();
    let inv2 = inv * inv;
    let mut acc = T::zero();
    for &c in COEF.iter().rev() {
        acc = acc * inv2 + T::lit(c);
    }
    acc * inv
}

/// `ln B(a, b)`, using Stirling remainders when an argument is large so that
/// the `ln Γ(a+b) − ln Γ(b)` cancellation does not eat digits.
pub fn ln_beta<T: Real>(a: T, b: T) -> T {
    let (p, q) = if a < b { (a, b) } else { (b, a) };
    let ten = T::lit(10.0);
    let half = T::lit(0.5);
    let ln_sqrt_2pi = half * T::TAU().ln();
    if p >= ten {
        let corr = stirling_remainder(p) + stirling_remainder(q) - stirling_remainder(p + q);
        -half * q.ln() + ln_sqrt_2pi + corr + (p - half) * (p / (p + q)).ln() + q * (-(p / (p + q))).ln_1p()
    } else if q >= ten {
        let corr = stirling_remainder(q) - stirling_remainder(p + q);
        ln_gamma(p) + corr + p - p * (p + q).ln() + (q - half) * (-(p / (p + q))).ln_1p()
    } else {
        ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)
    }
}

/// Standard normal distribution function.
#[inline]
pub fn norm_cdf<T: Real>(x: T) -> T {
    T::lit(0.5) * (-x / T::SQRT_2()).erfc()
}

/// Log density of `N(m, s²)` at `x`.
#[inline]
pub fn norm_logpdf<T: Real>(x: T, m: T, s: T) -> T {
    let z = (x - m) / s;
    -T::lit(0.5) * (T::TAU().ln() + z * z) - s.ln()
}

/// Standard normal quantile: Wichura's AS 241 rational approximation
/// followed by one Newton correction on `norm_cdf`.
pub fn norm_quantile<T: Real>(p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::Domain(format!("normal quantile needs p in (0,1), got {p}")));
    }
    let x = as241(p.to_f64_lossy());
    let mut x = T::lit(x);
    if x.is_finite() {
        let dens = norm_logpdf(x, T::zero(), T::one()).exp();
        if dens > T::zero() {
            // Work on the smaller tail so the residual keeps its relative precision.
            let resid = if x < T::zero() { norm_cdf(x) - p } else { (T::one() - p) - norm_cdf(-x) };
            let resid = if x < T::zero() { resid } else { -resid };
            let step = resid / dens;
            if step.is_finite() {
                x = x - step;
            }
        }
    }
    Ok(x)
}

#[allow(clippy::excessive_precision)]
fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r
                + 45921.953931549871457)
                * r
                + 13731.693765509461125)
                * r
                + 1971.5909503065514427)
                * r
                + 133.14166789178437745)
                * r
                + 3.387132872796366608)
            / (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r
                + 21213.794301586595867)
                * r
                + 5394.1960214247511077)
                * r
                + 687.1870074920579083)
                * r
                + 42.313330701600911252)
                * r
                + 1.0);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734)
            / (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966)
                * r
                + 0.14810397642748007459)
                * r
                + 0.68976733498510000455)
                * r
                + 1.6763848301838038494)
                * r
                + 2.05319162663775882187)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772)
            / (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5)
                * r
                + 7.868691311456132591e-4)
                * r
                + 0.0148753612908506148525)
                * r
                + 0.13692988092273580531)
                * r
                + 0.59983220655588793769)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn beta(mu: f64, kappa: f64) -> BetaMP<f64> {
        BetaMP::new(mu, kappa).unwrap()
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(BetaMP::new(0.0, 1.0).is_err());
        assert!(BetaMP::new(1.0, 1.0).is_err());
        assert!(BetaMP::new(0.5, 0.0).is_err());
        assert!(BetaMP::new(0.5, f64::INFINITY).is_err());
        assert!(BetaMP::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn shapes_and_variance() {
        let d = beta(0.3, 10.0);
        assert_abs_diff_eq!(d.a(), 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.b(), 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.variance(), 0.3 * 0.7 / 11.0, epsilon = 1e-15);
    }

    #[test]
    fn logpdf_examples() {
        assert_abs_diff_eq!(beta_logpdf(&beta(0.5, 2.0), 0.37).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(beta_logpdf(&beta(0.5, 4.0), 0.5).unwrap(), 1.5f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(beta_logpdf(&beta(0.5, 4.0), 0.25).unwrap(), 1.125f64.ln(), epsilon = 1e-14);
        assert!(beta_logpdf(&beta(0.5, 4.0), 0.0).is_err());
        assert!(beta_logpdf(&beta(0.5, 4.0), 1.0).is_err());
    }

    #[test]
    fn cdf_examples() {
        assert_abs_diff_eq!(beta_cdf(&beta(0.5, 7.0), 0.5).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(beta_cdf(&beta(0.5, 2.0), 0.3).unwrap(), 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(beta_cdf(&beta(0.5, 4.0), 0.25).unwrap(), 0.15625, epsilon = 1e-14);
        assert_eq!(beta_cdf(&beta(0.2, 4.0), 0.0).unwrap(), 0.0);
        assert_eq!(beta_cdf(&beta(0.2, 4.0), 1.0).unwrap(), 1.0);
        assert!(beta_cdf(&beta(0.2, 4.0), -0.1).is_err());
        assert!(beta_cdf(&beta(0.2, 4.0), 1.1).is_err());
    }

    #[test]
    fn quantile_examples() {
        assert_abs_diff_eq!(beta_quantile(&beta(0.5, 2.0), 0.73).unwrap(), 0.73, epsilon = 1e-12);
        assert_abs_diff_eq!(beta_quantile(&beta(0.5, 9.0), 0.5).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(beta_quantile(&beta(0.5, 4.0), 0.15625).unwrap(), 0.25, epsilon = 1e-12);
        assert!(beta_quantile(&beta(0.5, 4.0), 0.0).is_err());
        assert!(beta_quantile(&beta(0.5, 4.0), 1.0).is_err());
    }

    #[test]
    fn quantile_in_extreme_lower_tail() {
        // a = 0.025: the 1e-6 quantile sits near 1e-240.
        let d = beta(0.05, 0.5);
        let x = beta_quantile(&d, 1e-6).unwrap();
        assert!(x < 1e-200);
        assert!((beta_cdf(&d, x).unwrap() - 1e-6).abs() < 1e-16);
    }

    #[test]
    fn large_precision_cdf_matches_symmetry() {
        let d = beta(0.5, 2.0 * 403.428_793_492_735_1);
        assert_abs_diff_eq!(beta_cdf(&d, 0.5).unwrap(), 0.5, epsilon = 1e-13);
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..30 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12 * fact.ln().abs().max(1.0), "n={n}");
            fact *= n as f64;
        }
        assert_abs_diff_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), epsilon = 1e-14);
    }

    #[test]
    fn ln_beta_branches_agree() {
        for &(a, b) in &[(0.3f64, 12.0), (12.0, 0.3), (15.0, 40.0), (9.99, 10.01), (2.5, 3.5)] {
            let direct = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
            assert!((ln_beta(a, b) - direct).abs() < 1e-11, "({a},{b})");
        }
    }

    #[test]
    fn normal_examples() {
        assert_eq!(norm_cdf(0.0f64), 0.5);
        assert_abs_diff_eq!(norm_quantile(0.975f64).unwrap(), 1.959_964, epsilon = 5e-7);
        assert_abs_diff_eq!(norm_logpdf(0.0f64, 0.0, 1.0), -0.918_938_5, epsilon = 1e-7);
        assert!(norm_quantile(0.0f64).is_err());
        assert!(norm_quantile(1.0f64).is_err());
    }

    #[test]
    fn normal_round_trip() {
        let mut x = -6.0f64;
        while x <= 6.0 {
            let back = norm_quantile(norm_cdf(x)).unwrap();
            // Near 1 the probability itself only carries ~1e-16 absolute precision.
            let slack = 4.0 * f64::EPSILON / norm_logpdf(x, 0.0, 1.0).exp();
            assert!((back - x).abs() < 1e-9 + slack, "x={x} back={back}");
            x += 0.01;
        }
    }

    #[test]
    fn single_precision_kernels() {
        let d = BetaMP::new(0.5f32, 4.0).unwrap();
        assert!((beta_cdf(&d, 0.25).unwrap() - 0.15625).abs() < 1e-6);
        assert!((beta_quantile(&d, 0.15625).unwrap() - 0.25).abs() < 1e-5);
        assert!((norm_quantile(0.975f32).unwrap() - 1.959_964).abs() < 1e-5);
    }
}
