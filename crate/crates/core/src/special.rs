//! Bessel J₁, modified Bessel I₀/I₁, sinc and the transverse function Γ⊥.
//!
//! Small arguments use power series, large arguments the Hankel-type
//! asymptotic expansions. The switch points are where both representations
//! agree to ~1e-11 or better.

use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpecialError {
    #[error("argument must be finite, got {0}")]
    NonFinite(f64),
    #[error("argument must be non-negative, got {0}")]
    Negative(f64),
    #[error("argument must be strictly positive, got {0}")]
    NonPositive(f64),
    #[error("unsupported Bessel order {0}; only 0 and 1 are implemented")]
    Order(u32),
}

/// Below this |x| J₁ is summed from its power series.
pub const J1_SERIES_LIMIT: f64 = 14.0;
/// Below this x the modified Bessel functions are summed from their series.
pub const I_SERIES_LIMIT: f64 = 50.0;
/// Γ⊥ switches to 1 − x²/2 below this x.
pub const GAMMA_PERP_TINY: f64 = 1e-4;
/// Γ⊥ uses the Kummer expansion of 1 − e^{−u}(I₀+I₁) for u = x² up to here.
pub const GAMMA_PERP_KUMMER_LIMIT: f64 = 2.0;

fn finite(x: f64) -> Result<f64, SpecialError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(SpecialError::NonFinite(x))
    }
}

/// Bessel function of the first kind of order one.
pub fn bessel_j1(x: f64) -> Result<f64, SpecialError> {
    finite(x)?;
    let ax = x.abs();
    let v = if ax < J1_SERIES_LIMIT {
        j1_series(ax)
    } else {
        j1_asymptotic(ax)
    };
    Ok(if x < 0.0 { -v } else { v })
}

fn j1_series(x: f64) -> f64 {
    // Σ (−1)^k (x/2)^{2k+1} / (k!(k+1)!)
    let h = 0.5 * x;
    let q = h * h;
    let mut term = h;
    let mut sum = term;
    for k in 0..200 {
        term *= -q / ((k + 1) as f64 * (k + 2) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn j1_asymptotic(x: f64) -> f64 {
    // J₁(x) = √(2/(πx)) [P cos χ − Q sin χ], χ = x − 3π/4, μ = 4.
    let mu = 4.0;
    let (mut p, mut q) = (1.0, 0.0);
    let mut term = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        // a_k/x^k enters P (k even) or Q (k odd) with sign (−1)^{⌊k/2⌋}
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - 0.75 * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// 2J₁(x)/x, equal to 1 at x = 0.
pub fn jinc(x: f64) -> Result<f64, SpecialError> {
    finite(x)?;
    let ax = x.abs();
    if ax < J1_SERIES_LIMIT {
        // Σ (−1)^k (x/2)^{2k} / (k!(k+1)!)
        let q = 0.25 * ax * ax;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 0..200 {
            term *= -q / ((k + 1) as f64 * (k + 2) as f64);
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        Ok(sum)
    } else {
        Ok(2.0 * j1_asymptotic(ax) / ax)
    }
}

/// Unnormalised sinc, sin(y)/y.
pub fn sinc(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        let y2 = y * y;
        1.0 - y2 / 6.0 + y2 * y2 / 120.0
    } else {
        y.sin() / y
    }
}

fn check_i_args(order: u32, x: f64) -> Result<(), SpecialError> {
    finite(x)?;
    if order > 1 {
        return Err(SpecialError::Order(order));
    }
    if x < 0.0 {
        return Err(SpecialError::Negative(x));
    }
    Ok(())
}

/// Modified Bessel function of the first kind, I₀ or I₁, for x ≥ 0.
///
/// Overflows to +∞ beyond x ≈ 713; use [`bessel_i_scaled`] there.
pub fn bessel_i(order: u32, x: f64) -> Result<f64, SpecialError> {
    check_i_args(order, x)?;
    if x < I_SERIES_LIMIT {
        Ok(i_series(order, x))
    } else {
        let scaled = i_scaled_asymptotic(order, x);
        // split e^x to postpone overflow
        Ok(scaled * (0.5 * x).exp() * (0.5 * x).exp())
    }
}

/// Exponentially scaled e^{−x} I_n(x), finite for every x ≥ 0.
pub fn bessel_i_scaled(order: u32, x: f64) -> Result<f64, SpecialError> {
    check_i_args(order, x)?;
    if x < I_SERIES_LIMIT {
        Ok(i_series(order, x) * (-x).exp())
    } else {
        Ok(i_scaled_asymptotic(order, x))
    }
}

fn i_series(order: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let q = h * h;
    let n = order as f64;
    let mut term = if order == 0 { 1.0 } else { h };
    let mut sum = term;
    for k in 0..500 {
        let k1 = (k + 1) as f64;
        term *= q / (k1 * (k1 + n));
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    sum
}

fn i_scaled_asymptotic(order: u32, x: f64) -> f64 {
    // e^{−x} I_ν(x) ≈ (2πx)^{−1/2} Σ (−1)^k a_k(ν) / x^k
    let mu = 4.0 * (order * order) as f64;
    let mut term = 1.0f64;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (k as f64 * 8.0 * x);
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

/// Transverse geometry function
/// Γ⊥(x) = (2/x²)[1 − e^{−x²}(I₀(x²) + I₁(x²))], with Γ⊥(0⁺) = 1.
pub fn gamma_perp(x: f64) -> Result<f64, SpecialError> {
    finite(x)?;
    if x <= 0.0 {
        return Err(SpecialError::NonPositive(x));
    }
    if x < GAMMA_PERP_TINY {
        return Ok(1.0 - 0.5 * x * x);
    }
    let u = x * x;
    if u <= GAMMA_PERP_KUMMER_LIMIT {
        Ok(gamma_perp_kummer(u))
    } else {
        gamma_perp_direct(u)
    }
}

/// Direct evaluation of the defining formula through the scaled Bessel
/// functions; loses relative accuracy for small u.
pub fn gamma_perp_direct(u: f64) -> Result<f64, SpecialError> {
    let s = bessel_i_scaled(0, u)? + bessel_i_scaled(1, u)?;
    Ok(2.0 / u * (1.0 - s))
}

// e^{−u}I₀(u) = M(½,1,−2u) and e^{−u}I₁(u) = (u/2) M(3/2,3,−2u), so
// Γ⊥ = −2 Σ_{k≥1} (½)_k/(k!)² (−2)^k u^{k−1} − M(3/2,3,−2u), which has no
// cancellation at small u.
fn gamma_perp_kummer(u: f64) -> f64 {
    let z = -2.0 * u;
    // g = Σ_{k≥1} (½)_k/(k!·k!) z^k / u
    let mut coef = 1.0; // (½)_k/(k!)² · z^k, k = 0
    let mut g = 0.0;
    let mut m = 1.0; // M(3/2, 3, z)
    let mut mterm = 1.0;
    for k in 0..200 {
        let kf = k as f64;
        coef *= (0.5 + kf) / ((kf + 1.0) * (kf + 1.0)) * z;
        g += coef / u;
        mterm *= (1.5 + kf) / ((3.0 + kf) * (kf + 1.0)) * z;
        m += mterm;
        if coef.abs() < 1e-18 && mterm.abs() < 1e-18 {
            break;
        }
    }
    -2.0 * g - m
}
