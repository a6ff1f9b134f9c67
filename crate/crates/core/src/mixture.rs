//! The exact K-mixture law of the end-to-end gain `G0`.
//!
//! With `T = g_uᴴ C g_u`, the Laplace transform `Π (1 + sλᵢ)^{-mᵢ}` splits into
//! partial fractions `Σ c_{i,k} (1 + sλᵢ)^{-k}`, so `T` is a signed mixture of
//! Gamma laws and `G0 | T ~ Exp(T)` is the matching mixture of K laws.

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::channel::{EigenGroup, SpectralModel};
use crate::error::{domain, FrisError, Result};
use crate::specfun::{bessel_k, digamma_int, ln_factorial};
use crate::sum::Compensated;

/// Warn (but still return) above this coefficient condition number.
pub const ILL_CONDITIONED: f64 = 1e12;
const SUM_TOL: f64 = 1e-8;
const CLAMP_TOL: f64 = 1e-12;
const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Repeated distinct eigenvalues.
    General,
    /// All eigenvalues distinct with multiplicity one.
    Simple,
    /// A single distinct eigenvalue.
    Equal,
    /// `C = I`.
    Uncorrelated,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::General => "general",
            Regime::Simple => "simple",
            Regime::Equal => "equal",
            Regime::Uncorrelated => "uncorrelated",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureTerm {
    pub lambda: f64,
    pub k: usize,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    /// Terms in descending `|c|` (the summation order).
    pub terms: Vec<MixtureTerm>,
    pub regime: Regime,
    /// `max |c| / |Σ c|`.
    pub condition_estimate: f64,
    pub ill_conditioned: bool,
}

/// Classifies a spectrum. A single group counts as uncorrelated when its
/// eigenvalue is 1 to within `unit_tol`.
pub fn classify(spectral: &SpectralModel, unit_tol: f64) -> Regime {
    match spectral.groups.as_slice() {
        [g] if (g.lambda - 1.0).abs() <= unit_tol => Regime::Uncorrelated,
        [_] => Regime::Equal,
        gs if gs.iter().all(|g| g.multiplicity == 1) => Regime::Simple,
        _ => Regime::General,
    }
}

/// Partial-fraction coefficients with regime dispatch.
pub fn coefficients(spectral: &SpectralModel) -> Result<MixtureModel> {
    let regime = classify(spectral, spectral.cluster_tol.max(1e-10));
    let terms = match regime {
        Regime::Equal | Regime::Uncorrelated => {
            let g = spectral.groups[0];
            vec![MixtureTerm { lambda: g.lambda, k: g.multiplicity, c: 1.0 }]
        }
        Regime::Simple => simple_terms(&spectral.groups),
        Regime::General => general_terms(&spectral.groups),
    };
    MixtureModel::from_terms(terms, regime)
}

/// Always uses the Taylor-series path, whatever the regime.
pub fn coefficients_general(spectral: &SpectralModel) -> Result<MixtureModel> {
    MixtureModel::from_terms(general_terms(&spectral.groups), classify(spectral, 0.0))
}

/// `c_i = Π_{j≠i} λᵢ/(λᵢ − λⱼ)`.
fn simple_terms(groups: &[EigenGroup]) -> Vec<MixtureTerm> {
    groups
        .iter()
        .enumerate()
        .map(|(i, gi)| {
            let li = TwoFloat::from(gi.lambda);
            let c = groups
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .fold(TwoFloat::from(1.0), |acc, (_, gj)| acc * li / (li - gj.lambda));
            MixtureTerm { lambda: gi.lambda, k: 1, c: c.hi() }
        })
        .collect()
}

/// `c_{i,k} = h_{mᵢ−k}` where `h` are the Taylor coefficients at 0 of
/// `Hᵢ(u) = Π_{j≠i} (rⱼu + 1 − rⱼ)^{-mⱼ}`, `rⱼ = λⱼ/λᵢ`.
///
/// Carried in double-double so that the returned coefficients are correctly
/// rounded even when the partial fractions cancel heavily.
fn general_terms(groups: &[EigenGroup]) -> Vec<MixtureTerm> {
    let mut terms = Vec::new();
    for (i, gi) in groups.iter().enumerate() {
        let order = gi.multiplicity; // coefficients h_0..h_{m-1}
        let mut h = vec![TwoFloat::from(0.0); order];
        h[0] = TwoFloat::from(1.0);
        for (j, gj) in groups.iter().enumerate() {
            if j == i {
                continue;
            }
            let r = TwoFloat::from(gj.lambda) / gi.lambda;
            let factor = binomial_series(r, gj.multiplicity, order);
            h = truncated_product(&h, &factor);
        }
        for k in 1..=gi.multiplicity {
            terms.push(MixtureTerm { lambda: gi.lambda, k, c: h[gi.multiplicity - k].hi() });
        }
    }
    terms
}

/// First `len` Taylor coefficients of `(r u + 1 − r)^{-m}`.
fn binomial_series(r: TwoFloat, m: usize, len: usize) -> Vec<TwoFloat> {
    let base = 1.0 - r;
    let ratio = r / base;
    let mut out = Vec::with_capacity(len);
    let mut a = base.powi(-(m as i32));
    for n in 0..len {
        out.push(a);
        a = a * ratio * (-((m + n) as f64) / (n + 1) as f64);
    }
    out
}

fn truncated_product(a: &[TwoFloat], b: &[TwoFloat]) -> Vec<TwoFloat> {
    (0..a.len()).map(|k| (0..=k).fold(TwoFloat::from(0.0), |acc, j| acc + a[j] * b[k - j])).collect()
}

impl MixtureModel {
    /// Validates `Σ c = 1` and orders the terms for summation.
    pub fn from_terms(mut terms: Vec<MixtureTerm>, regime: Regime) -> Result<Self> {
        if terms.is_empty() {
            return Err(FrisError::DegenerateChannel("mixture has no terms".into()));
        }
        if terms.iter().any(|t| !(t.lambda > 0.0) || t.k == 0 || !t.c.is_finite()) {
            return domain("mixture terms need λ > 0, k ≥ 1 and finite coefficients");
        }
        // exact zeros carry no mass (e.g. the lower shapes of a single repeated eigenvalue)
        terms.retain(|t| t.c != 0.0);
        if terms.is_empty() {
            return Err(FrisError::DegenerateChannel("all mixture coefficients vanish".into()));
        }
        terms.sort_by(|a, b| b.c.abs().total_cmp(&a.c.abs()));
        let mut s = Compensated::default();
        terms.iter().for_each(|t| s.add(t.c));
        let total = s.value();
        let cmax = terms[0].c.abs();
        let condition_estimate = cmax / total.abs();
        if !((total - 1.0).abs() <= SUM_TOL * condition_estimate.max(1.0)) {
            return Err(FrisError::Conditioning(format!(
                "coefficients sum to {total} (condition estimate {condition_estimate:e})"
            )));
        }
        Ok(Self { terms, regime, condition_estimate, ill_conditioned: condition_estimate > ILL_CONDITIONED })
    }

    /// Distinct eigenvalues with their largest shape index, descending in `λ`.
    pub fn groups(&self) -> Vec<EigenGroup> {
        let mut g: Vec<EigenGroup> = Vec::new();
        for t in &self.terms {
            match g.iter_mut().find(|x| x.lambda == t.lambda) {
                Some(x) => x.multiplicity = x.multiplicity.max(t.k),
                None => g.push(EigenGroup { lambda: t.lambda, multiplicity: t.k }),
            }
        }
        g.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
        g
    }

    pub fn rank(&self) -> usize {
        self.groups().iter().map(|g| g.multiplicity).sum()
    }

    pub fn pdf(&self, g: f64) -> Result<f64> {
        check_gain(g)?;
        if g == 0.0 {
            return Ok(self.pdf_at_zero());
        }
        let vals = self.terms.iter().map(|t| kdist_pdf(t.k, t.lambda, g)).collect::<Result<Vec<_>>>()?;
        self.combine(&vals, "pdf", g)
    }

    pub fn cdf(&self, g: f64) -> Result<f64> {
        check_gain(g)?;
        if g == 0.0 {
            return Ok(0.0);
        }
        let vals = self.terms.iter().map(|t| kdist_cdf(t.k, t.lambda, g)).collect::<Result<Vec<_>>>()?;
        Ok(self.combine(&vals, "cdf", g)?.min(1.0))
    }

    /// `Σ c·k·λ`, which must equal `trace(C)`.
    pub fn mean(&self) -> f64 {
        self.terms.iter().fold(TwoFloat::from(0.0), |acc, t| acc + TwoFloat::from(t.c) * (t.k as f64 * t.lambda)).hi()
    }

    /// `E[G0²] = Σ c · 2k(k+1)λ²`.
    pub fn second_moment(&self) -> f64 {
        self.terms
            .iter()
            .fold(TwoFloat::from(0.0), |acc, t| {
                let l = TwoFloat::from(t.lambda);
                acc + TwoFloat::from(t.c) * l * l * (2 * t.k * (t.k + 1)) as f64
            })
            .hi()
    }

    pub fn variance(&self) -> f64 {
        self.second_moment() - self.mean().powi(2)
    }

    /// `E[1/T]`, finite once the rank is at least 2.
    pub fn pdf_at_zero(&self) -> f64 {
        if self.rank() < 2 {
            return match self.terms.as_slice() {
                [t] if t.k >= 2 => 1.0 / (t.lambda * (t.k - 1) as f64),
                _ => f64::INFINITY,
            };
        }
        // The k = 1 log singularities cancel because Σ c_{i,1}/λᵢ = 0.
        let mut s = Compensated::default();
        for t in &self.terms {
            if t.k == 1 {
                s.add(t.c * t.lambda.ln() / t.lambda);
            } else {
                s.add(t.c / (t.lambda * (t.k - 1) as f64));
            }
        }
        s.value()
    }

    fn combine(&self, vals: &[f64], what: &str, g: f64) -> Result<f64> {
        let mut s = Compensated::default();
        let mut scale = 0.0;
        for (t, v) in self.terms.iter().zip(vals) {
            let x = t.c * v;
            s.add(x);
            scale += x.abs();
        }
        let total = s.value();
        if total >= 0.0 {
            return Ok(total);
        }
        if -total <= CLAMP_TOL * scale {
            return Ok(0.0);
        }
        Err(FrisError::Conditioning(format!(
            "{what} at g = {g:e} is {total:e}, below the rounding envelope {:e}",
            CLAMP_TOL * scale
        )))
    }
}

fn check_gain(g: f64) -> Result<()> {
    if !(g >= 0.0) || g.is_infinite() {
        return domain(format!("gain must be finite and non-negative, got {g}"));
    }
    Ok(())
}

pub fn pdf_g0(model: &MixtureModel, g: f64) -> Result<f64> {
    model.pdf(g)
}

pub fn cdf_g0(model: &MixtureModel, g: f64) -> Result<f64> {
    model.cdf(g)
}

pub fn mixture_mean(model: &MixtureModel) -> f64 {
    model.mean()
}

/// Density of the K law with shape `k` and scale `λ`:
/// `2/(λΓ(k)) · x^{(k−1)/2} K_{k−1}(2√x)`, `x = g/λ`.
pub fn kdist_pdf(k: usize, lambda: f64, g: f64) -> Result<f64> {
    check_shape(k, lambda)?;
    check_gain(g)?;
    if g == 0.0 {
        return Ok(if k == 1 { f64::INFINITY } else { 1.0 / (lambda * (k - 1) as f64) });
    }
    let x = g / lambda;
    let kb = bessel_k(k - 1, 2.0 * x.sqrt())?;
    Ok((LN_2 - lambda.ln() - ln_factorial(k - 1) + 0.5 * (k - 1) as f64 * x.ln() + kb.ln()).exp())
}

/// CDF of the K law: `1 − (2/Γ(k)) x^{k/2} K_k(2√x)`.
///
/// The closed form cancels for small `x`, where a convergent series is used instead.
pub fn kdist_cdf(k: usize, lambda: f64, g: f64) -> Result<f64> {
    check_shape(k, lambda)?;
    check_gain(g)?;
    if g == 0.0 {
        return Ok(0.0);
    }
    let x = g / lambda;
    if x <= series_limit(k) {
        return Ok(small_cdf(k, x));
    }
    Ok(-kdist_ln_ccdf(k, x)?.exp_m1())
}

/// Below this `x` the series has no cancellation: its finite part has
/// decreasing alternating terms and the logarithmic tail is negligible.
fn series_limit(k: usize) -> f64 {
    1.0f64.max((k as f64 - 1.0) / 4.0)
}

/// `ln[(2/Γ(k)) x^{k/2} K_k(2√x)]`.
fn kdist_ln_ccdf(k: usize, x: f64) -> Result<f64> {
    let kb = bessel_k(k, 2.0 * x.sqrt())?;
    Ok(LN_2 - ln_factorial(k - 1) + 0.5 * k as f64 * x.ln() + kb.ln())
}

/// `F(n, x) = Σ_{j=1}^{n−1} (−1)^{j+1} (n−j−1)!/((n−1)! j!) x^j
///   + (−1)^n/(n−1)! Σ_{j≥0} x^{n+j}/(j!(n+j)!) [ln x − ψ(j+1) − ψ(n+j+1)]`
fn small_cdf(n: usize, x: f64) -> f64 {
    let mut s = Compensated::default();
    let mut t = x / (n as f64 - 1.0);
    for j in 1..n {
        s.add(t);
        t *= -x / ((j + 1) as f64 * (n - j - 1) as f64);
    }
    let ln_x = x.ln();
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut b = sign * (n as f64 * ln_x - ln_factorial(n) - ln_factorial(n - 1)).exp();
    let mut psi_a = digamma_int(1);
    let mut psi_b = digamma_int(n + 1);
    for j in 0..200 {
        let term = b * (ln_x - psi_a - psi_b);
        s.add(term);
        if term.abs() <= 1e-18 * s.value().abs() || b == 0.0 {
            break;
        }
        let jf = (j + 1) as f64;
        b *= x / (jf * (n + j + 1) as f64);
        psi_a += 1.0 / jf;
        psi_b += 1.0 / (n + j + 1) as f64;
    }
    s.value()
}

fn check_shape(k: usize, lambda: f64) -> Result<()> {
    if k == 0 || !(lambda > 0.0 && lambda.is_finite()) {
        return domain(format!("K law needs k ≥ 1 and λ > 0, got k = {k}, λ = {lambda}"));
    }
    Ok(())
}
