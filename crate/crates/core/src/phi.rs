//! Scalar evaluation of the exponential-integrator functions
//!
//! ```text
//! phi_0(z) = e^z,    phi_{k+1}(z) = (phi_k(z) - 1/k!) / z,    phi_k(0) = 1/k!
//! ```
//!
//! Near the origin the recursion cancels catastrophically, so small arguments
//! go through the Taylor series `sum_m z^m / (m + k)!`. Larger arguments use
//! the upward recursion seeded with `expm1(z) / z`.

use crate::error::{Error, Result};

/// Highest order accepted by [`phi`].
pub const MAX_ORDER: u32 = 8;

const INV_FACTORIAL: [f64; 10] = [
    1.0,
    1.0,
    0.5,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40320.0,
    1.0 / 362880.0,
];

/// `1/k!` for `k <= MAX_ORDER + 1`.
pub fn inv_factorial(k: u32) -> f64 {
    INV_FACTORIAL[k as usize]
}

/// Radius below which the series branch is used. The upward recursion loses
/// roughly a factor `k/|z|` per step when `|z| < k`, so the series takes over
/// there for the higher orders.
fn series_radius(k: u32) -> f64 {
    if k <= 3 {
        1.0
    } else {
        k as f64
    }
}

/// Evaluates `phi_k(z)`.
pub fn phi(k: u32, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("phi_{k} evaluated at non-finite z = {z}")));
    }
    if k > MAX_ORDER {
        return Err(Error::Domain(format!(
            "phi order {k} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    Ok(phi_unchecked(k, z))
}

pub(crate) fn phi_unchecked(k: u32, z: f64) -> f64 {
    if k == 0 {
        return z.exp();
    }
    if z.abs() < series_radius(k) {
        return taylor(k, z);
    }
    let mut value = z.exp_m1() / z;
    for j in 1..k {
        value = (value - inv_factorial(j)) / z;
    }
    value
}

fn taylor(k: u32, z: f64) -> f64 {
    // term_m = z^m / (m + k)!
    let mut term = inv_factorial(k);
    let mut sum = term;
    let mut m = 0u32;
    loop {
        m += 1;
        term *= z / f64::from(m + k);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() || m > 200 {
            break;
        }
    }
    sum
}

/// Evaluates `phi_0(z), ..., phi_k(z)` in one pass.
pub fn phi_all(k: u32, z: f64) -> Result<Vec<f64>> {
    (0..=k).map(|j| phi(j, z)).collect()
}
