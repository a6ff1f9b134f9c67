use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use super::gamma::{digamma_int, factorial};
use crate::error::{domain, Result};

/// A positive value stored as `value · exp(log_scale)` so that `K_ν` at large
/// (or tiny) argument neither underflows nor overflows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledBessel {
    pub value: f64,
    pub log_scale: f64,
}

impl ScaledBessel {
    pub fn ln(&self) -> f64 {
        self.value.ln() + self.log_scale
    }

    /// Plain value; may underflow to 0 or overflow to infinity.
    pub fn to_f64(&self) -> f64 {
        self.value * self.log_scale.exp()
    }

    fn normalized(value: f64, log_scale: f64) -> Self {
        if value == 0.0 || !value.is_finite() {
            return Self { value, log_scale };
        }
        let e = value.ln().floor();
        Self { value: value * (-e).exp(), log_scale: log_scale + e }
    }
}

pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("bessel_j0 requires a finite argument, got {x}"));
    }
    let x = x.abs();
    Ok(if x <= 8.0 {
        j0_series(x)
    } else if x <= 25.0 {
        j0_miller(x)
    } else {
        j0_hankel(x)
    })
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-3) {
            break;
        }
    }
    sum
}

/// Backward recurrence normalised by `J_0 + 2 Σ J_{2k} = 1`.
fn j0_miller(x: f64) -> f64 {
    let start = (x + 20.0 + 6.0 * x.sqrt()) as usize;
    let start = start + start % 2;
    let (mut jp, mut j) = (0.0f64, 1e-30f64);
    let mut norm = 0.0;
    let mut j0 = 0.0;
    for n in (1..=start).rev() {
        let jm = 2.0 * n as f64 / x * j - jp;
        jp = j;
        j = jm;
        if (n - 1) % 2 == 0 && n - 1 > 0 {
            norm += 2.0 * j;
        }
        if n - 1 == 0 {
            j0 = j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            norm *= 1e-250;
        }
    }
    j0 / (norm + j0)
}

fn j0_hankel(x: f64) -> f64 {
    // P, Q asymptotic series; term_k = a_k(0) / x^k with
    // a_k(0) = Π_{m≤k} (-(2m-1)²) / (k! 8^k).
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..80usize {
        let odd = (2 * k - 1) as f64;
        term *= -(odd * odd) / (8.0 * k as f64 * x);
        if term.abs() > prev || term.abs() < 1e-18 {
            break;
        }
        prev = term.abs();
        if k % 2 == 0 {
            p += if (k / 2) % 2 == 0 { term } else { -term };
        } else {
            q += if ((k - 1) / 2) % 2 == 0 { term } else { -term };
        }
    }
    let (s, c) = x.sin_cos();
    let cos_chi = (c + s) * FRAC_1_SQRT_2;
    let sin_chi = (s - c) * FRAC_1_SQRT_2;
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

// Chebyshev coefficients of e^x √x K_ν(x) in u = 4/x - 1, for x ≥ 2.
const K0_CHEB: [f64; 26] = [
    1.220_151_541_032_977_7e0,
    -3.144_810_131_196_450_2e-2,
    1.569_883_885_730_053_3e-3,
    -1.284_954_958_162_780_2e-4,
    1.394_981_371_887_650_0e-5,
    -1.831_755_522_719_119_5e-6,
    2.766_813_639_445_014_9e-7,
    -4.660_489_897_687_947_8e-8,
    8.574_034_017_414_225_3e-9,
    -1.697_534_509_389_061_4e-9,
    3.577_397_281_400_328_3e-10,
    -7.957_489_244_477_396_5e-11,
    1.855_949_114_954_926_5e-11,
    -4.514_597_883_374_519_3e-12,
    1.140_340_588_207_344_1e-12,
    -2.980_096_923_148_178_4e-13,
    8.032_890_775_068_374_6e-14,
    -2.227_513_326_746_296_5e-14,
    6.340_076_476_276_646_1e-15,
    -1.848_593_377_920_907_1e-15,
    5.512_055_999_404_333_5e-16,
    -1.678_231_125_754_900_6e-16,
    5.210_391_777_643_554_3e-17,
    -1.647_580_593_984_263_2e-17,
    5.300_433_771_177_335_4e-18,
    -1.733_171_200_582_100_1e-18,
];

const K1_CHEB: [f64; 26] = [
    1.360_313_095_242_221_3e0,
    1.039_237_365_768_172_4e-1,
    -2.857_816_859_622_779_2e-3,
    1.952_155_184_713_516_2e-4,
    -1.936_197_974_166_083_0e-5,
    2.406_484_947_837_217_0e-6,
    -3.501_960_603_087_812_6e-7,
    5.741_084_125_450_049_5e-8,
    -1.034_576_246_567_809_7e-8,
    2.015_049_755_197_034_7e-9,
    -4.190_354_759_341_925_4e-10,
    9.218_315_187_605_314_6e-11,
    -2.129_967_838_427_790_9e-11,
    5.139_639_673_482_343_2e-12,
    -1.289_173_960_949_822_9e-12,
    3.348_419_666_052_243_1e-13,
    -8.976_705_182_010_146_3e-14,
    2.477_154_424_219_598_8e-14,
    -7.019_837_089_214_768_5e-15,
    2.038_703_166_239_861_0e-15,
    -6.057_047_270_643_017_7e-16,
    1.838_093_575_243_045_5e-16,
    -5.689_462_849_193_648_4e-17,
    1.794_051_047_886_357_2e-17,
    -5.756_744_482_073_302_5e-18,
    1.877_865_190_162_326_8e-18,
];

fn clenshaw(coeffs: &[f64], u: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * u * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    u * b1 - b2 + coeffs[0]
}

/// Power series for `K_n(x)` at small argument.
///
/// `K_n(z) = ½(z/2)^{-n} Σ_{k<n} (n-k-1)!/k! (-z²/4)^k + (-1)^{n+1} ln(z/2) I_n(z)
///          + (-1)^n ½ (z/2)^n Σ_k (ψ(k+1)+ψ(n+k+1)) (z²/4)^k / (k!(n+k)!)`
fn k_series(n: usize, x: f64) -> f64 {
    let h = 0.5 * x;
    let q = h * h;
    let ln_h = h.ln();
    let mut head = 0.0;
    if n > 0 {
        let mut t = factorial(n - 1);
        head = t;
        for k in 1..n {
            t *= -q / (k * (n - k)) as f64;
            head += t;
        }
        head *= 0.5 * h.powi(-(n as i32));
    }
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut t = h.powi(n as i32) / factorial(n);
    let mut sum_i = 0.0;
    let mut sum_psi = 0.0;
    let mut psi_a = digamma_int(1);
    let mut psi_b = digamma_int(n + 1);
    for k in 0..100 {
        if k > 0 {
            t *= q / (k * (n + k)) as f64;
            psi_a += 1.0 / k as f64;
            psi_b += 1.0 / (n + k) as f64;
        }
        sum_i += t;
        sum_psi += (psi_a + psi_b) * t;
        if t < 1e-18 * sum_i.abs() {
            break;
        }
    }
    head - sign * ln_h * sum_i + sign * 0.5 * sum_psi
}

/// `K_0` and `K_1` at `x > 0`, sharing a common log-scale.
fn k01(x: f64) -> (f64, f64, f64) {
    if x <= 2.0 {
        (k_series(0, x), k_series(1, x), 0.0)
    } else {
        let u = 4.0 / x - 1.0;
        let r = x.sqrt().recip();
        (clenshaw(&K0_CHEB, u) * r, clenshaw(&K1_CHEB, u) * r, -x)
    }
}

/// Exponentially scaled `K_ν(x)` for integer `ν ≥ 0` and `x > 0`.
pub fn bessel_k(nu: usize, x: f64) -> Result<ScaledBessel> {
    Ok(*bessel_k_orders(nu, x)?.last().expect("non-empty"))
}

/// `K_0(x), …, K_{ν_max}(x)` by upward recurrence (stable for `K`).
pub fn bessel_k_orders(nu_max: usize, x: f64) -> Result<Vec<ScaledBessel>> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("bessel_k requires a positive finite argument, got {x}"));
    }
    let (k0, k1, mut log_scale) = k01(x);
    let mut out = Vec::with_capacity(nu_max + 1);
    out.push(ScaledBessel::normalized(k0, log_scale));
    if nu_max == 0 {
        return Ok(out);
    }
    out.push(ScaledBessel::normalized(k1, log_scale));
    let (mut prev, mut cur) = (k0, k1);
    for n in 1..nu_max {
        let next = prev + 2.0 * n as f64 / x * cur;
        prev = cur;
        cur = next;
        if cur > 1e250 {
            let e = cur.ln().floor();
            let f = (-e).exp();
            cur *= f;
            prev *= f;
            log_scale += e;
        }
        out.push(ScaledBessel::normalized(cur, log_scale));
    }
    Ok(out)
}

/// Small-argument approximations of `K_ν(z)`:
/// `K_1(z) ≃ 1/z + (z/2) ln(z/2)` and
/// `K_ν(z) ≃ ½(ν-1)!(2/z)^ν − ½(ν-2)!(z/2)^{2-ν}` for `ν ≥ 2`.
pub fn bessel_k_small(nu: usize, z: f64) -> Result<f64> {
    if nu == 0 {
        return domain("small-argument expansion is defined for nu >= 1");
    }
    if !(z > 0.0 && z <= 0.1) {
        return domain(format!("small-argument expansion requires 0 < z <= 0.1, got {z}"));
    }
    let h = 0.5 * z;
    Ok(if nu == 1 {
        1.0 / z + h * h.ln()
    } else {
        0.5 * factorial(nu - 1) * (2.0 / z).powi(nu as i32) - 0.5 * factorial(nu - 2) * h.powi(2 - nu as i32)
    })
}
