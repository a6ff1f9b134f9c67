use num_complex::Complex64;

use crate::error::{domain, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

// B_{2n} / (2n (2n-1)) for n = 1..8
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

const SHIFT_TO: f64 = 12.0;

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("ln_gamma requires a positive finite argument, got {x}"));
    }
    if x.fract() == 0.0 && x <= 171.0 {
        return Ok(ln_factorial(x as usize - 1));
    }
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut z = x;
    // product is kept below ~1e300 by accumulating logs in chunks
    let mut prod = 1.0;
    while z < SHIFT_TO {
        prod *= z;
        z += 1.0;
        if prod > 1e280 {
            shift += prod.ln();
            prod = 1.0;
        }
    }
    shift += prod.ln();
    stirling(z) - shift
}

fn stirling(z: f64) -> f64 {
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv;
    for c in STIRLING {
        series += c * pow;
        pow *= inv2;
    }
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + series
}

/// `Γ(x)` for positive `x`; exact for small integers.
pub fn gamma(x: f64) -> Result<f64> {
    if x.fract() == 0.0 && (1.0..=171.0).contains(&x) {
        return Ok(factorial(x as usize - 1));
    }
    Ok(ln_gamma(x)?.exp())
}

/// `n!` as a double (exact through 22!).
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `ln n!`
pub fn ln_factorial(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    if n <= 170 {
        return factorial(n).ln();
    }
    ln_gamma_unchecked(n as f64 + 1.0)
}

/// Digamma at a positive integer: `ψ(n) = -γ + H_{n-1}`.
pub fn digamma_int(n: usize) -> f64 {
    debug_assert!(n >= 1);
    -EULER_GAMMA + (1..n).map(|k| 1.0 / k as f64).sum::<f64>()
}

/// Complex `ln Γ(s)` on some branch; only `exp` of the result is meaningful.
///
/// Valid away from the poles at non-positive integers.
pub fn ln_gamma_complex(s: Complex64) -> Complex64 {
    let mut z = s;
    let mut shift = Complex64::new(0.0, 0.0);
    while z.re < SHIFT_TO {
        shift += z.ln();
        z += 1.0;
    }
    let inv = z.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = inv;
    for c in STIRLING {
        series += pow * c;
        pow *= inv2;
    }
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + series - shift
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorial_values() {
        assert_eq!(ln_gamma(1.0).unwrap(), 0.0);
        assert_eq!(ln_gamma(2.0).unwrap(), 0.0);
        assert!((ln_gamma(5.0).unwrap() - 24f64.ln()).abs() < 1e-15);
        assert_eq!(gamma(5.0).unwrap(), 24.0);
    }

    #[test]
    fn half_integer() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((gamma(0.5).unwrap() / sqrt_pi - 1.0).abs() < 1e-14);
        assert!((gamma(3.5).unwrap() / (15.0 / 8.0 * sqrt_pi) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(ln_gamma(0.0).is_err());
        assert!(ln_gamma(-1.5).is_err());
        assert!(ln_gamma(f64::NAN).is_err());
    }

    #[test]
    fn integer_path_matches_stirling_path() {
        for n in [3usize, 10, 36, 100, 170] {
            let a = ln_factorial(n - 1);
            let b = ln_gamma_unchecked(n as f64);
            assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0), "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn complex_matches_real_axis() {
        for x in [0.3, 1.7, 5.0, 25.5] {
            let c = ln_gamma_complex(Complex64::new(x, 0.0));
            assert!((c.re - ln_gamma_unchecked(x)).abs() < 1e-13);
            assert!(c.im.abs() < 1e-13);
        }
    }

    #[test]
    fn complex_reflection_identity() {
        // Γ(s)Γ(1-s) = π / sin(πs)
        let s = Complex64::new(0.5, 3.2);
        let lhs = (ln_gamma_complex(s) + ln_gamma_complex(1.0 - s)).exp();
        let rhs = std::f64::consts::PI / (s * std::f64::consts::PI).sin();
        assert!(((lhs - rhs) / rhs).norm() < 1e-12);
    }

    #[test]
    fn digamma_values() {
        assert!((digamma_int(1) + EULER_GAMMA).abs() < 1e-16);
        assert!((digamma_int(3) - (1.5 - EULER_GAMMA)).abs() < 1e-15);
    }
}
