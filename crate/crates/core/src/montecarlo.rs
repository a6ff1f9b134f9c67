//! Monte Carlo simulation of the cascaded gain and statistical validation of
//! the analytic model.
//!
//! Every trial owns a ChaCha8 stream selected by its index, so the sample
//! vector is bit-identical for any batch size, thread count or strategy.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{FrisError, Result};
use crate::exec::Execution;
use crate::linalg::CMatrix;
use crate::metrics::{ergodic_capacity, gain_threshold, LinkBudget};
use crate::mixture::MixtureModel;
use crate::sum::pairwise_sum;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub trials: usize,
    pub seed: u64,
    pub batch: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { trials: 1_000_000, seed: 2, batch: 1 << 14 }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(FrisError::Config("trials must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(FrisError::Config("batch must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-trial random source: the seeded key with the trial index as stream id.
#[derive(Debug, Clone)]
pub struct TrialRng {
    base: ChaCha8Rng,
}

impl TrialRng {
    pub fn new(seed: u64) -> Self {
        Self { base: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn for_trial(&self, trial: u64) -> ChaCha8Rng {
        let mut r = self.base.clone();
        r.set_stream(trial);
        r.set_word_pos(0);
        r
    }
}

fn cn<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * FRAC_1_SQRT_2
}

/// One draw of `|g_uᴴ A g_f|²` with `g_f, g_u ~ CN(0, I)` drawn from `rng`.
pub fn draw_g0<R: Rng>(a: &CMatrix, rng: &mut R) -> f64 {
    let n = a.dim();
    let gf: Vec<Complex64> = (0..n).map(|_| cn(rng)).collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let gu = cn(rng);
        let row: Complex64 = a.row(i).iter().zip(&gf).map(|(x, y)| x * y).sum();
        acc += gu.conj() * row;
    }
    acc.norm_sqr()
}

/// `mc.trials` samples of `G0` in trial order.
pub fn sample_g0(a: &CMatrix, mc: &McConfig, exec: Execution) -> Result<Vec<f64>> {
    mc.validate()?;
    let rngs = TrialRng::new(mc.seed);
    let batches = mc.trials.div_ceil(mc.batch);
    let parts = exec.map(batches, |b| {
        let start = b * mc.batch;
        let end = (start + mc.batch).min(mc.trials);
        (start..end).map(|t| draw_g0(a, &mut rngs.for_trial(t as u64))).collect::<Vec<f64>>()
    });
    Ok(parts.concat())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
}

impl SampleSummary {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = pairwise_sum(samples) / n as f64;
        let dev: Vec<f64> = samples.iter().map(|x| (x - mean).powi(2)).collect();
        let variance = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        Self { count: n, mean, variance }
    }

    pub fn std_err(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub g: f64,
    pub empirical: f64,
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub summary: SampleSummary,
    pub ks_distance: f64,
    pub analytic_mean: f64,
    pub analytic_variance: f64,
    /// `(sample mean − analytic mean) / std err`
    pub mean_z: f64,
    /// Mean within 4σ but beyond 3σ.
    pub mean_flagged: bool,
    pub mean_ok: bool,
    pub variance_rel_delta: f64,
    pub cdf_grid: Vec<CdfPoint>,
}

/// Sorted copy of the samples (NaN-free by construction).
pub fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    s
}

/// Kolmogorov–Smirnov distance between sorted samples and an analytic CDF.
pub fn ks_distance(sorted: &[f64], model: &MixtureModel, exec: Execution) -> Result<f64> {
    let n = sorted.len();
    const CHUNK: usize = 4096;
    let chunks = n.div_ceil(CHUNK);
    let parts = exec.try_map(chunks, |c| -> Result<f64> {
        let mut d = 0.0f64;
        let lo = c * CHUNK;
        for (i, &g) in sorted.iter().enumerate().take(((c + 1) * CHUNK).min(n)).skip(lo) {
            let f = model.cdf(g)?;
            d = d.max(f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f);
        }
        Ok(d)
    })?;
    Ok(parts.into_iter().fold(0.0, f64::max))
}

/// Empirical CDF at `g`: fraction of samples strictly below `g`.
pub fn empirical_cdf(sorted: &[f64], g: f64) -> f64 {
    sorted.partition_point(|&x| x < g) as f64 / sorted.len() as f64
}

pub fn validate_distribution(
    samples: &[f64],
    model: &MixtureModel,
    grid_points: usize,
    exec: Execution,
) -> Result<DistributionReport> {
    if samples.is_empty() {
        return Err(FrisError::Domain("no samples".into()));
    }
    let summary = SampleSummary::of(samples);
    let s = sorted(samples);
    let ks = ks_distance(&s, model, exec)?;
    let analytic_mean = model.mean();
    let analytic_variance = model.variance();
    let mean_z = (summary.mean - analytic_mean) / summary.std_err();
    let mut cdf_grid = Vec::with_capacity(grid_points);
    for j in 1..=grid_points {
        // quantile-spaced evaluation points of the sample
        let idx = ((j as f64 / (grid_points + 1) as f64) * s.len() as f64) as usize;
        let g = s[idx.min(s.len() - 1)];
        cdf_grid.push(CdfPoint { g, empirical: empirical_cdf(&s, g), analytic: model.cdf(g)? });
    }
    Ok(DistributionReport {
        summary,
        ks_distance: ks,
        analytic_mean,
        analytic_variance,
        mean_z,
        mean_flagged: mean_z.abs() > 3.0 && mean_z.abs() <= 4.0,
        mean_ok: mean_z.abs() <= 4.0,
        variance_rel_delta: (summary.variance - analytic_variance) / analytic_variance,
        cdf_grid,
    })
}

/// Wilson score interval for `k` successes out of `n` at normal quantile `z`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub snr_db: f64,
    pub gain_threshold: f64,
    pub op_exact: f64,
    pub op_mc: f64,
    pub op_lo: f64,
    pub op_hi: f64,
    /// No outage event observed: `op_hi` is the one-sided 95% upper bound.
    pub op_one_sided: bool,
    pub op_inside: bool,
    pub ec_exact: f64,
    pub ec_mc: f64,
    pub ec_lo: f64,
    pub ec_hi: f64,
    pub ec_inside: bool,
}

/// Compares per-SNR empirical outage (Wilson 95%) and capacity (normal 99%)
/// against the analytic values.
pub fn validate_metrics(
    samples: &[f64],
    model: &MixtureModel,
    budget: &LinkBudget,
    snr_grid_db: &[f64],
    exec: Execution,
) -> Result<Vec<MetricPoint>> {
    if samples.is_empty() {
        return Err(FrisError::Domain("no samples".into()));
    }
    let s = sorted(samples);
    let n = s.len();
    exec.try_map(snr_grid_db.len(), |i| {
        let db = snr_grid_db[i];
        let b = budget.with_snr_db(db);
        let r = gain_threshold(&b);
        let op_exact = model.cdf(r)?;
        let failures = s.partition_point(|&x| x < r);
        let (op_lo, op_hi, one_sided) = if failures == 0 {
            (0.0, 1.0 - 0.05f64.powf(1.0 / n as f64), true)
        } else {
            let (lo, hi) = wilson_interval(failures, n, Z95);
            (lo, hi, false)
        };
        let a = b.effective_gain();
        let logs: Vec<f64> = samples.iter().map(|&g| (a * g).ln_1p() / LN_2).collect();
        let ec = SampleSummary::of(&logs);
        let half = Z99 * ec.std_err();
        let ec_exact = ergodic_capacity(model, &b)?.value;
        Ok(MetricPoint {
            snr_db: db,
            gain_threshold: r,
            op_exact,
            op_mc: failures as f64 / n as f64,
            op_lo,
            op_hi,
            op_one_sided: one_sided,
            op_inside: op_exact >= op_lo && op_exact <= op_hi,
            ec_exact,
            ec_mc: ec.mean,
            ec_lo: ec.mean - half,
            ec_hi: ec.mean + half,
            ec_inside: (ec_exact - ec.mean).abs() <= half,
        })
    })
}
