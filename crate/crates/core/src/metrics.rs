//! Link budget, outage probability and ergodic capacity.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FrisError, Result};
use crate::mixture::{MixtureModel, Regime};
use crate::quad::{integrate, integrate_to_infinity, QuadOptions};
use crate::specfun::{ln_factorial, ln_gamma_complex};
use crate::sum::Compensated;

/// Transmit/noise powers, two pathloss legs and the target rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudget {
    pub p_tx_w: f64,
    pub n0_w: f64,
    pub rho_f: f64,
    pub rho_u: f64,
    pub d_f_m: f64,
    pub d_u_m: f64,
    pub alpha_f: f64,
    pub alpha_u: f64,
    pub r0_bps_hz: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            p_tx_w: 1.0,
            n0_w: 1.0,
            rho_f: 10.0,
            rho_u: 10.0,
            d_f_m: 20.0,
            d_u_m: 40.0,
            alpha_f: 2.1,
            alpha_u: 2.1,
            r0_bps_hz: 0.1,
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("p_tx_w", self.p_tx_w),
            ("n0_w", self.n0_w),
            ("rho_f", self.rho_f),
            ("rho_u", self.rho_u),
            ("d_f_m", self.d_f_m),
            ("d_u_m", self.d_u_m),
            ("alpha_f", self.alpha_f),
            ("alpha_u", self.alpha_u),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FrisError::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.r0_bps_hz >= 0.0 && self.r0_bps_hz.is_finite()) {
            return Err(FrisError::Config(format!("r0_bps_hz must be non-negative, got {}", self.r0_bps_hz)));
        }
        Ok(())
    }

    /// Normalised SNR `γ̄ = P/N0`.
    pub fn snr(&self) -> f64 {
        self.p_tx_w / self.n0_w
    }

    /// Same budget with the transmit power set so that `γ̄` equals `db` decibels.
    pub fn with_snr_db(&self, db: f64) -> Self {
        Self { p_tx_w: self.n0_w * 10f64.powf(db / 10.0), ..*self }
    }

    pub fn with_snr(&self, snr: f64) -> Self {
        Self { p_tx_w: self.n0_w * snr, ..*self }
    }

    pub fn pathloss_f(&self) -> f64 {
        self.rho_f * self.d_f_m.powf(-self.alpha_f)
    }

    pub fn pathloss_u(&self) -> f64 {
        self.rho_u * self.d_u_m.powf(-self.alpha_u)
    }

    /// `γ̄ L_f L_u`
    pub fn effective_gain(&self) -> f64 {
        self.snr() * self.pathloss_f() * self.pathloss_u()
    }

    /// `2^{R0} − 1`
    pub fn rate_excess(&self) -> f64 {
        (self.r0_bps_hz * LN_2).exp_m1()
    }
}

/// Outage threshold on the gain, `R̃ = (2^{R0} − 1)/(γ̄ L_f L_u)`.
pub fn gain_threshold(budget: &LinkBudget) -> f64 {
    budget.rate_excess() / budget.effective_gain()
}

/// The SNR at which `R̃ = 10⁻¹⁴ · tr C`, used to check the asymptote.
pub fn asymptotic_reference_snr(budget: &LinkBudget, trace_c: f64) -> f64 {
    1e14 * budget.rate_excess() / (budget.pathloss_f() * budget.pathloss_u() * trace_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCoefficients {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

/// `S1 = Σ c_{i,1}/λᵢ`, `S2 = Σ c_{i,1} ln λᵢ/λᵢ`, `S3 = Σ_{k≥2} c_{i,k}/((k−1)λᵢ)`.
pub fn asymptotic_coefficients(model: &MixtureModel) -> AsymptoticCoefficients {
    let (mut s1, mut s2, mut s3) = (Compensated::default(), Compensated::default(), Compensated::default());
    for t in &model.terms {
        if t.k == 1 {
            s1.add(t.c / t.lambda);
            s2.add(t.c * t.lambda.ln() / t.lambda);
        } else {
            s3.add(t.c / ((t.k - 1) as f64 * t.lambda));
        }
    }
    AsymptoticCoefficients { s1: s1.value(), s2: s2.value(), s3: s3.value() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageResult {
    pub gain_threshold: f64,
    pub exact: f64,
    pub asymptotic: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub regime: Regime,
    /// `exact / asymptotic`
    pub ratio: f64,
}

pub fn outage_exact(model: &MixtureModel, budget: &LinkBudget) -> Result<f64> {
    model.cdf(gain_threshold(budget))
}

/// High-SNR outage in the regime-specific form, alongside the exact value.
pub fn outage_asymptotic(model: &MixtureModel, budget: &LinkBudget) -> Result<OutageResult> {
    let r = gain_threshold(budget);
    let co = asymptotic_coefficients(model);
    let asymptotic = match model.regime {
        Regime::Equal | Regime::Uncorrelated => {
            let t = model.terms[0];
            if t.k < 2 {
                return Err(FrisError::UnsupportedRegime(format!(
                    "{} asymptote needs multiplicity ≥ 2, got {}",
                    model.regime, t.k
                )));
            }
            let lambda = if model.regime == Regime::Uncorrelated { 1.0 } else { t.lambda };
            r / ((t.k - 1) as f64 * lambda)
        }
        Regime::Simple => r * (-co.s1 * r.ln() + co.s2),
        Regime::General => r * (-co.s1 * r.ln() + co.s2 + co.s3),
    };
    if !(asymptotic > 0.0) {
        return Err(FrisError::Conditioning(format!(
            "asymptotic outage {asymptotic:e} is not positive (S1 = {:e}, S2 = {:e}, S3 = {:e})",
            co.s1, co.s2, co.s3
        )));
    }
    let exact = model.cdf(r)?;
    Ok(OutageResult {
        gain_threshold: r,
        exact,
        asymptotic,
        s1: co.s1,
        s2: co.s2,
        s3: co.s3,
        regime: model.regime,
        ratio: exact / asymptotic,
    })
}

/// Least-squares slope of `−ln P_out` against `ln γ̄` over `snr_grid` (linear SNR values).
pub fn diversity_slope(model: &MixtureModel, budget: &LinkBudget, snr_grid: &[f64]) -> Result<f64> {
    if snr_grid.len() < 3 {
        return Err(FrisError::Domain("diversity fit needs at least 3 SNR points".into()));
    }
    let mut xs = Vec::with_capacity(snr_grid.len());
    let mut ys = Vec::with_capacity(snr_grid.len());
    for &snr in snr_grid {
        let p = outage_exact(model, &budget.with_snr(snr))?;
        if !(p > 0.0) {
            return Err(FrisError::Domain(format!("outage underflows at SNR {snr:e}; shrink the grid")));
        }
        xs.push(snr.ln());
        ys.push(-p.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    /// bits/s/Hz
    pub value: f64,
    pub error_estimate: f64,
}

/// Smallest `g` with `F(g) ≥ p`, by bisection.
pub fn quantile(model: &MixtureModel, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(FrisError::Domain(format!("quantile level {p} outside (0, 1)")));
    }
    let mut hi = model.mean().max(f64::MIN_POSITIVE);
    while model.cdf(hi)? < p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if model.cdf(mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(hi)
}

/// `E[log₂(1 + γ̄ L_f L_u G0)]` by adaptive quadrature over the mixture density,
/// split at the median with a mapped infinite tail.
pub fn ergodic_capacity(model: &MixtureModel, budget: &LinkBudget) -> Result<CapacityResult> {
    let a = budget.effective_gain();
    if !(a > 0.0) {
        return Err(FrisError::Domain("effective gain must be positive".into()));
    }
    let opts = QuadOptions { abs_tol: 1e-300, rel_tol: 1e-11, max_intervals: 4000 };
    let integrand = |g: f64| -> Result<f64> {
        let v = (a * g).ln_1p();
        if v == 0.0 {
            return Ok(0.0);
        }
        Ok(v * model.pdf(g)?)
    };
    let median = quantile(model, 0.5)?;
    let head = integrate(integrand, 0.0, median, opts)?;
    let tail = integrate_to_infinity(integrand, median, opts)?;
    Ok(CapacityResult { value: (head.value + tail.value) / LN_2, error_estimate: (head.error + tail.error) / LN_2 })
}

/// `G^{1,4}_{4,2}(x | 1−k, 0, 1, 1; 1, 0)`, so that `E[ln(1 + x·G)] = G(x)/Γ(k)` for
/// a unit-scale K law of shape `k`.
///
/// Evaluated on the vertical contour `Re s = ½`, which separates the poles of
/// `Γ(s)²Γ(s+k)` (at `s ≤ 0`) from those of `Γ(1−s)` (at `s ≥ 1`). For small
/// `x` the contour integrand is far larger than the result, so the residues
/// at `s = 1, 2, …` are summed instead whenever that series settles.
pub fn meijer_g_ec(k: usize, x: f64) -> Result<f64> {
    if k == 0 || !(x > 0.0 && x.is_finite()) {
        return Err(FrisError::Domain(format!("meijer_g_ec needs k ≥ 1 and x > 0, got k = {k}, x = {x}")));
    }
    match meijer_residue_series(k, x) {
        Some(v) => Ok(v),
        None => meijer_contour(k, x),
    }
}

fn meijer_contour(k: usize, x: f64) -> Result<f64> {
    const C: f64 = 0.5;
    let kf = k as f64;
    let lx = x.ln();
    let ln_phi = |t: f64| -> Complex64 {
        let s = Complex64::new(C, t);
        2.0 * ln_gamma_complex(s) + ln_gamma_complex(1.0 - s) + ln_gamma_complex(s + kf) + s * lx
    };
    // Truncate where |Φ| has fallen 1e-18 below its peak.
    let cutoff = (1e-18f64).ln();
    let mut peak = ln_phi(0.0).re;
    let mut t_max = 0.0;
    let scan = 0.25;
    loop {
        t_max += scan;
        let m = ln_phi(t_max).re;
        peak = peak.max(m);
        if m < peak + cutoff && t_max > 2.0 {
            break;
        }
        if t_max > 1e4 {
            return Err(FrisError::Quadrature { estimate: f64::NAN, error: f64::INFINITY });
        }
    }
    let f = |t: f64| ln_phi(t).exp().re;

    // Trapezoid on [0, t_max] with step halving.
    let mut h = 0.25f64.min(PI / (4.0 * (lx.abs() + 1.0)));
    let mut n = (t_max / h).ceil() as usize;
    h = t_max / n as f64;
    let mut sum = Compensated::default();
    sum.add(0.5 * f(0.0));
    sum.add(0.5 * f(t_max));
    for j in 1..n {
        sum.add(f(j as f64 * h));
    }
    let mut est = h * sum.value();
    for level in 0..24 {
        if n > MAX_TRAPEZOID_NODES {
            break;
        }
        for j in 0..n {
            sum.add(f((2 * j + 1) as f64 * h * 0.5));
        }
        n *= 2;
        h *= 0.5;
        let next = h * sum.value();
        let change = (next - est).abs();
        est = next;
        if level >= 2 && change <= 1e-11 * est.abs() {
            return Ok(est / PI);
        }
    }
    Err(FrisError::Quadrature { estimate: est / PI, error: f64::NAN })
}

const MAX_TRAPEZOID_NODES: usize = 1 << 22;

/// `Σ_{n≥1} (−1)^{n+1} (n−1)! Γ(n+k) xⁿ`, the residue sum at the poles of `Γ(1−s)`.
/// The series is asymptotic; it is used only when its terms fall below `1e-17`
/// of the running sum before they start growing.
fn meijer_residue_series(k: usize, x: f64) -> Option<f64> {
    let lx = x.ln();
    let mut sum = Compensated::default();
    let mut prev = f64::INFINITY;
    for n in 1..=200usize {
        let mag = (ln_factorial(n - 1) + ln_factorial(n + k - 1) + n as f64 * lx).exp();
        if mag >= prev {
            return None;
        }
        sum.add(if n % 2 == 1 { mag } else { -mag });
        if mag <= 1e-17 * sum.value().abs() {
            return Some(sum.value());
        }
        prev = mag;
    }
    None
}

/// Ergodic capacity from the mixture via the contour-evaluated Meijer-G terms.
pub fn ergodic_capacity_mellin_barnes(model: &MixtureModel, budget: &LinkBudget) -> Result<f64> {
    let a = budget.effective_gain();
    let mut s = Compensated::default();
    for t in &model.terms {
        let g = meijer_g_ec(t.k, a * t.lambda)?;
        s.add(t.c * g * (-ln_factorial(t.k - 1)).exp());
    }
    Ok(s.value() / LN_2)
}
