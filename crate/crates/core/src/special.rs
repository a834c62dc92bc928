//! Incomplete beta function and the finite sums it replaces.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};

/// Absolute error target of the quadrature.
pub const QUAD_TOL: f64 = 1e-13;

/// Regularized incomplete beta `I_z(a,b)`, integrating the Beta(a,b)
/// density over `[0, z]`.
pub fn regularized_incomplete_beta(z: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return invalid(format!("z must lie in [0, 1], got {z}"));
    }
    if !(a >= 1.0 && b >= 1.0) {
        return invalid(format!("need a, b >= 1, got a={a} b={b}"));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let log_norm = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    density_integral(z, a, b, log_norm)
}

/// Unregularized `B_z(a,b) = ∫₀^z t^{a−1}(1−t)^{b−1} dt`.
pub fn incomplete_beta(z: f64, a: f64, b: f64) -> Result<f64> {
    let log_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    Ok(regularized_incomplete_beta(z, a, b)? * log_beta.exp())
}

fn density_integral(z: f64, a: f64, b: f64, log_norm: f64) -> Result<f64> {
    let f = |t: f64| {
        if t <= 0.0 || t >= 1.0 {
            let edge = if t <= 0.0 { a } else { b };
            return if edge == 1.0 { log_norm.exp() } else { 0.0 };
        }
        (log_norm + (a - 1.0) * t.ln() + (b - 1.0) * (-t).ln_1p()).exp()
    };
    let out = quadrature::integrate(f, 0.0, z, QUAD_TOL);
    if !out.integral.is_finite() || out.error_estimate > 1e3 * QUAD_TOL {
        return Err(Error::Diagnostic(format!(
            "incomplete beta quadrature did not converge (error estimate {:.3e})",
            out.error_estimate
        )));
    }
    Ok(out.integral)
}

pub fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// `(−1)^n Σ_{ν=n}^{m} C(m,ν) C(ν−1,n−1) (−z)^ν`, summed in exact rational
/// arithmetic from the binary value of `z`.
pub fn alternating_beta_sum(z: f64, n: u32, m: u32) -> Result<f64> {
    if n < 1 || n > m {
        return invalid(format!("need 1 <= n <= m, got n={n} m={m}"));
    }
    let zr = BigRational::from_float(z).ok_or_else(|| Error::InvalidInput(format!("z = {z} is not finite")))?;
    let minus_z = -zr;
    let mut power = num_traits::pow(minus_z.clone(), n as usize);
    let mut acc = BigRational::zero();
    for nu in n..=m {
        let c = binomial(m, nu) * binomial(nu - 1, n - 1);
        acc += BigRational::from_integer(c) * &power;
        power *= &minus_z;
    }
    if n % 2 == 1 {
        acc = -acc;
    }
    acc.to_f64().ok_or_else(|| Error::Diagnostic("alternating sum overflowed f64".into()))
}
