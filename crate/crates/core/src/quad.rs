//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{FrisError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-300, rel_tol: 1e-11, max_intervals: 2000 }
    }
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<Interval>
where
    F: FnMut(f64) -> Result<f64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx)? + f(c + dx)?;
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    Ok(Interval { a, b, value: k * h, error: ((k - g) * h).abs() })
}

/// Integrates `f` over `[a, b]` by bisecting the worst interval until the
/// summed error estimate meets `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut parts = vec![gk15(&mut f, a, b)?];
    let mut evaluations = 15;
    loop {
        let value: f64 = parts.iter().map(|p| p.value).sum();
        let error: f64 = parts.iter().map(|p| p.error).sum();
        if error <= opts.abs_tol.max(opts.rel_tol * value.abs()) {
            return Ok(QuadResult { value, error, evaluations });
        }
        if parts.len() >= opts.max_intervals {
            return Err(FrisError::Quadrature { estimate: value, error });
        }
        let worst =
            parts.iter().enumerate().max_by(|x, y| x.1.error.total_cmp(&y.1.error)).map(|(i, _)| i).expect("non-empty");
        let p = parts.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            // interval exhausted at machine resolution
            return Err(FrisError::Quadrature { estimate: value, error });
        }
        parts.push(gk15(&mut f, p.a, mid)?);
        parts.push(gk15(&mut f, mid, p.b)?);
        evaluations += 30;
    }
}

/// `∫_a^∞ f`, via `x = a + t/(1 − t)` on `[0, 1)`.
pub fn integrate_to_infinity<F>(mut f: F, a: f64, opts: QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate(
        |t| {
            let u = 1.0 - t;
            let x = a + t / u;
            if !x.is_finite() {
                return Ok(0.0);
            }
            Ok(f(x)? / (u * u))
        },
        0.0,
        1.0,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_exact() {
        let r = integrate(|x| Ok(x.powi(5) - 3.0 * x * x), 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((r.value - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn singular_endpoint() {
        // ∫_0^1 ln x dx = -1
        let r = integrate(|x| Ok(x.ln()), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert!((r.value + 1.0).abs() < 1e-10);
    }

    #[test]
    fn infinite_tail() {
        let r = integrate_to_infinity(|x| Ok((-x).exp()), 0.0, QuadOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        let r = integrate_to_infinity(|x| Ok(1.0 / (1.0 + x * x)), 1.0, QuadOptions::default()).unwrap();
        assert!((r.value - std::f64::consts::FRAC_PI_4).abs() < 1e-11);
    }

    #[test]
    fn reports_failure() {
        let opts = QuadOptions { max_intervals: 3, ..Default::default() };
        let r = integrate(|x| Ok((100.0 * x).sin().abs()), 0.0, 10.0, opts);
        assert!(matches!(r, Err(FrisError::Quadrature { .. })));
    }

    #[test]
    fn propagates_errors() {
        let r = integrate(|_| Err(FrisError::Domain("boom".into())), 0.0, 1.0, QuadOptions::default());
        assert!(matches!(r, Err(FrisError::Domain(_))));
    }
}
