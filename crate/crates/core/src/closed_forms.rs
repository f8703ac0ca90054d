//! Exact reference values: the comparison functions `a_K`, `b_K`, the
//! Gaussian-type solution of the quadratic drift equation, and the
//! quadratic-potential cost function with its minimizing path.
//!
//! Everything here is evaluated in closed form and serves as the oracle side
//! of the checks elsewhere in the crate. `a_K` solves the Riccati equation
//! `a' + a^2 + K = 0` and `b_K` solves `b' = a_K b` with `b(0+) = 0`:
//!
//! ```text
//!         K > 0: sqrt(K) cot(sqrt(K) t)          sin(sqrt(K) t)/sqrt(K)
//! a_K =   K = 0: 1/t                       b_K = t
//!         K < 0: sqrt(-K) coth(sqrt(-K) t)       sinh(sqrt(-K) t)/sqrt(-K)
//! ```

use crate::grid::{norm_sq, Point};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ComparisonError {
    #[error("comparison functions require t > 0, got {0}")]
    NonPositiveTime(f64),
    #[error("t = {t} is past the first zero pi/sqrt(K) = {limit} for K = {k}")]
    PastConjugateTime { k: f64, t: f64, limit: f64 },
}

/// Switch to a Taylor expansion around K = 0 when the trig/hyperbolic
/// branches start cancelling; both branches share the same series.
const TAYLOR_THRESHOLD: f64 = 1e-6;

fn check_domain(k: f64, t: f64) -> Result<(), ComparisonError> {
    if !(t > 0.0) {
        return Err(ComparisonError::NonPositiveTime(t));
    }
    if k > 0.0 {
        let limit = std::f64::consts::PI / k.sqrt();
        if t >= limit {
            return Err(ComparisonError::PastConjugateTime { k, t, limit });
        }
    }
    Ok(())
}

/// The comparison function `a_K(t)`.
pub fn a_comparison(k: f64, t: f64) -> Result<f64, ComparisonError> {
    check_domain(k, t)?;
    let z = k * t * t;
    if z.abs() < TAYLOR_THRESHOLD {
        // 1/t - K t/3 - K^2 t^3/45 - 2 K^3 t^5/945
        return Ok(1.0 / t - k * t / 3.0 - k * k * t * t * t / 45.0
            - 2.0 * k * k * k * t.powi(5) / 945.0);
    }
    if k > 0.0 {
        let s = k.sqrt();
        Ok(s / (s * t).tan())
    } else {
        let s = (-k).sqrt();
        Ok(s / (s * t).tanh())
    }
}

/// The comparison function `b_K(t)`; `b_K(0) = 0`.
pub fn b_comparison(k: f64, t: f64) -> Result<f64, ComparisonError> {
    if t == 0.0 {
        return Ok(0.0);
    }
    check_domain(k, t)?;
    let z = k * t * t;
    if z.abs() < TAYLOR_THRESHOLD {
        // t (1 - K t^2/6 + K^2 t^4/120 - K^3 t^6/5040)
        return Ok(t * (1.0 - z / 6.0 + z * z / 120.0 - z * z * z / 5040.0));
    }
    if k > 0.0 {
        let s = k.sqrt();
        Ok((s * t).sin() / s)
    } else {
        let s = (-k).sqrt();
        Ok((s * t).sinh() / s)
    }
}

/// `log b_K(t)`, stable for small arguments (used by the ratio bounds).
pub fn log_b_comparison(k: f64, t: f64) -> Result<f64, ComparisonError> {
    Ok(b_comparison(k, t)?.ln())
}

/// The normalized solution of `rho' = div(grad rho) - k <x, grad rho>`:
///
/// ```text
/// rho_t(x) = (2 pi (e^{2tk} - 1) / (k e^{2tk}))^{-n/2}
///            exp(-k |x|^2 / (2 (e^{2tk} - 1)))
/// ```
///
/// As k -> 0 this tends to the heat kernel (4 pi t)^{-n/2} e^{-|x|^2/(4t)}.
pub fn gaussian_like_solution(n: usize, k: f64, t: f64, x: &Point) -> f64 {
    gaussian_like_log(n, k, t, x).exp()
}

/// Log of `gaussian_like_solution`, safe far into the tails.
pub fn gaussian_like_log(n: usize, k: f64, t: f64, x: &Point) -> f64 {
    assert!(n >= 1 && t > 0.0 && k >= 0.0, "need n >= 1, t > 0, k >= 0");
    // (e^{2tk} - 1)/k and (e^{2tk} - 1)/(k e^{2tk}) via expm1 so the k -> 0
    // limit degrades gracefully into 2t.
    let e_over_k = if k == 0.0 { 2.0 * t } else { (2.0 * t * k).exp_m1() / k };
    let variance_like = e_over_k * (-2.0 * t * k).exp(); // (e^{2tk}-1)/(k e^{2tk})
    let r2 = norm_sq(x, n.min(3));
    -(n as f64) / 2.0 * (2.0 * std::f64::consts::PI * variance_like).ln() - r2 / (2.0 * e_over_k)
}

/// Coefficient `c(k, t)` with `hess(log rho_t) = c I` for the solution above:
/// `c = -k/(e^{2tk} - 1)`, and `lap(log rho_t) = n c`.
pub fn gaussian_like_log_hessian_coeff(k: f64, t: f64) -> f64 {
    assert!(t > 0.0 && k >= 0.0);
    if k == 0.0 {
        -1.0 / (2.0 * t)
    } else {
        -k / (2.0 * t * k).exp_m1()
    }
}

/// Optimal transport cost for the quadratic potential
/// `V(x) = -kn + k^2 |x|^2 / 2` from the origin at time 0 to `y` at time t:
/// `c_{0,t}(0, y) = k |y|^2 coth(kt)/2 - k n t`.
pub fn quadratic_cost(n: usize, k: f64, t: f64, y: &Point) -> f64 {
    assert!(k > 0.0 && t > 0.0);
    let coth = 1.0 / (k * t).tanh();
    k * norm_sq(y, n.min(3)) * coth / 2.0 - k * n as f64 * t
}

/// The minimizing path of `quadratic_cost`: `x(s) = sinh(ks)/sinh(kt) y`.
pub fn quadratic_minimizer(k: f64, t: f64, y: &Point, s: f64) -> Point {
    assert!(k > 0.0 && t > 0.0 && (0.0..=t).contains(&s));
    let w = (k * s).sinh() / (k * t).sinh();
    let mut p = [0.0; 3];
    for c in 0..3 {
        p[c] = w * y[c];
    }
    p
}
