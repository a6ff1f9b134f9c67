//! End-to-end scenario: configuration, the analytic pipeline, and report rows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{
    build_correlation, build_coupling, spectral_group, CorrelationModel, Coupling, PhaseConfig, SpectralModel,
    DEFAULT_CLUSTER_TOL, DEFAULT_RANK_TOL,
};
use crate::error::{FrisError, Result};
use crate::exec::Execution;
use crate::geometry::UpaGeometry;
use crate::metrics::{
    ergodic_capacity, ergodic_capacity_mellin_barnes, gain_threshold, outage_asymptotic, quantile, LinkBudget,
};
use crate::mixture::{coefficients, MixtureModel, Regime};
use crate::montecarlo::{sorted, McConfig, MetricPoint};
use crate::selection::{select, ActiveSet, SelectionMode, SelectionPolicy};

/// Inclusive, evenly spaced SNR grid in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrGrid {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

impl Default for SnrGrid {
    fn default() -> Self {
        Self { start_db: 0.0, stop_db: 100.0, step_db: 5.0 }
    }
}

const MAX_GRID_POINTS: usize = 100_000;

impl SnrGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.start_db.is_finite() && self.stop_db.is_finite()) {
            return Err(FrisError::Config("snr_db: bounds must be finite".into()));
        }
        if !(self.step_db > 0.0 && self.step_db.is_finite()) {
            return Err(FrisError::Config(format!("snr_db.step_db = {} must be positive", self.step_db)));
        }
        if self.stop_db < self.start_db {
            return Err(FrisError::Config(format!(
                "snr_db.stop_db = {} is below start_db = {}",
                self.stop_db, self.start_db
            )));
        }
        if self.len_unchecked() > MAX_GRID_POINTS {
            return Err(FrisError::Config(format!("snr_db: more than {MAX_GRID_POINTS} points")));
        }
        Ok(())
    }

    fn len_unchecked(&self) -> usize {
        // tolerate the last point landing a hair past stop_db in floating point
        ((self.stop_db - self.start_db) / self.step_db + 1e-9).floor() as usize + 1
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len_unchecked()).map(|i| self.start_db + i as f64 * self.step_db).collect()
    }
}

impl FromStr for SnrGrid {
    type Err = FrisError;

    /// Parses `lo:hi:step`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(FrisError::Config(format!("snr range '{s}' is not lo:hi:step")));
        }
        let num =
            |p: &str| p.trim().parse::<f64>().map_err(|e| FrisError::Config(format!("snr range '{s}': '{p}' {e}")));
        let g = Self { start_db: num(parts[0])?, stop_db: num(parts[1])?, step_db: num(parts[2])? };
        g.validate()?;
        Ok(g)
    }
}

impl fmt::Display for SnrGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start_db, self.stop_db, self.step_db)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative gap under which adjacent eigenvalues merge into one group.
    pub cluster_tol: f64,
    /// Eigenvalues at or below `rank_tol · λ_max` are treated as zero.
    pub rank_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { cluster_tol: DEFAULT_CLUSTER_TOL, rank_tol: DEFAULT_RANK_TOL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub geometry: UpaGeometry,
    pub selection: SelectionPolicy,
    pub link: LinkBudget,
    pub phase_seed: u64,
    /// `trials = 0` disables simulation.
    pub mc: McConfig,
    pub snr_db: SnrGrid,
    pub tolerances: Tolerances,
    /// Number of points on the exported PDF curve.
    pub pdf_points: usize,
    /// Output directory, relative to the working directory.
    pub out_dir: Option<String>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "fris25".into(),
            geometry: UpaGeometry::default(),
            selection: SelectionPolicy::default(),
            link: LinkBudget::default(),
            phase_seed: 1,
            mc: McConfig::default(),
            snr_db: SnrGrid::default(),
            tolerances: Tolerances::default(),
            pdf_points: 200,
            out_dir: None,
        }
    }
}

/// Names accepted by [`Scenario::preset`].
pub const PRESETS: [&str; 4] = ["fris25", "ris25", "fris36", "ris36"];

impl Scenario {
    /// The reference fluid (`fris*`) and contiguous (`ris*`) scenarios with 25 or 36 active elements.
    pub fn preset(name: &str) -> Result<Self> {
        let (mode, m_on) = match name {
            "fris25" => (SelectionMode::Fluid, 25),
            "ris25" => (SelectionMode::Contiguous, 25),
            "fris36" => (SelectionMode::Fluid, 36),
            "ris36" => (SelectionMode::Contiguous, 36),
            _ => return Err(FrisError::Config(format!("unknown preset '{name}', expected one of {PRESETS:?}"))),
        };
        Ok(Self {
            name: name.into(),
            selection: SelectionPolicy { mode, m_on, ..SelectionPolicy::default() },
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let field = |prefix: &str, e: FrisError| match e {
            FrisError::Config(m) | FrisError::Domain(m) => FrisError::Config(format!("{prefix}: {m}")),
            other => other,
        };
        UpaGeometry::new(self.geometry.m_x, self.geometry.m_z, self.geometry.d_w, self.geometry.lambda_c)
            .map_err(|e| field("geometry", e))?;
        self.selection.validate(&self.geometry).map_err(|e| field("selection", e))?;
        self.link.validate().map_err(|e| field("link", e))?;
        if self.mc.trials > 0 {
            self.mc.validate().map_err(|e| field("mc", e))?;
        }
        self.snr_db.validate()?;
        let t = self.tolerances;
        if !(t.cluster_tol >= 0.0 && t.cluster_tol < 1.0) {
            return Err(FrisError::Config(format!("tolerances.cluster_tol = {} not in [0, 1)", t.cluster_tol)));
        }
        if !(t.rank_tol >= 0.0 && t.rank_tol < 1.0) {
            return Err(FrisError::Config(format!("tolerances.rank_tol = {} not in [0, 1)", t.rank_tol)));
        }
        if self.pdf_points < 2 {
            return Err(FrisError::Config("pdf_points must be at least 2".into()));
        }
        Ok(())
    }

    pub fn mc_enabled(&self) -> bool {
        self.mc.trials > 0
    }
}

/// Every analytic object derived from a scenario.
#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub active_set: ActiveSet,
    pub correlation: CorrelationModel,
    pub phase: PhaseConfig,
    pub coupling: Coupling,
    pub spectral: SpectralModel,
    pub mixture: MixtureModel,
}

pub fn analyze(scenario: &Scenario) -> Result<Analysis> {
    scenario.validate()?;
    let active_set = select(&scenario.geometry, &scenario.selection)?;
    let correlation = build_correlation(&scenario.geometry, &active_set)?;
    let phase = PhaseConfig::sample(active_set.len(), scenario.phase_seed);
    let coupling = build_coupling(&correlation, &phase)?;
    let t = scenario.tolerances;
    let spectral = spectral_group(&coupling.c, t.cluster_tol, t.rank_tol)?;
    let mixture = coefficients(&spectral)?;
    Ok(Analysis { active_set, correlation, phase, coupling, spectral, mixture })
}

/// Analytic metrics at one SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticPoint {
    pub snr_db: f64,
    pub gain_threshold: f64,
    pub op_exact: f64,
    /// `None` where the regime has no asymptote (single-element equal spectra).
    pub op_asymptotic: Option<f64>,
    pub op_ratio: Option<f64>,
    pub ec_exact: f64,
    pub ec_error: f64,
    pub ec_mellin_barnes: f64,
}

impl AnalyticPoint {
    pub fn ec_relative_gap(&self) -> f64 {
        (self.ec_exact - self.ec_mellin_barnes).abs() / self.ec_exact.abs()
    }
}

pub fn analytic_sweep(
    model: &MixtureModel,
    budget: &LinkBudget,
    snr_db: &[f64],
    exec: Execution,
) -> Result<Vec<AnalyticPoint>> {
    exec.try_map(snr_db.len(), |i| {
        let b = budget.with_snr_db(snr_db[i]);
        let (op_asymptotic, op_ratio) = match outage_asymptotic(model, &b) {
            Ok(o) => (Some(o.asymptotic), Some(o.ratio)),
            Err(FrisError::UnsupportedRegime(_)) => (None, None),
            Err(e) => return Err(e),
        };
        let ec = ergodic_capacity(model, &b)?;
        Ok(AnalyticPoint {
            snr_db: snr_db[i],
            gain_threshold: gain_threshold(&b),
            op_exact: model.cdf(gain_threshold(&b))?,
            op_asymptotic,
            op_ratio,
            ec_exact: ec.value,
            ec_error: ec.error_estimate,
            ec_mellin_barnes: ergodic_capacity_mellin_barnes(model, &b)?,
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdfPoint {
    pub g: f64,
    pub pdf: f64,
    pub cdf: f64,
    /// Histogram density of the samples on the bin centred at `g`.
    pub mc_density: Option<f64>,
}

/// PDF/CDF on `points` evenly spaced gains up to the 99.5% quantile, with an
/// optional sample histogram on matching bins.
pub fn pdf_curve(model: &MixtureModel, points: usize, samples: Option<&[f64]>) -> Result<Vec<PdfPoint>> {
    if points < 2 {
        return Err(FrisError::Domain("pdf curve needs at least 2 points".into()));
    }
    let g_max = quantile(model, 0.995)?;
    let h = g_max / (points - 1) as f64;
    let hist = samples.map(|s| {
        let s = sorted(s);
        let n = s.len() as f64;
        (0..points)
            .map(|i| {
                let lo = ((i as f64 - 0.5) * h).max(0.0);
                let hi = (i as f64 + 0.5) * h;
                let count = s.partition_point(|&x| x < hi) - s.partition_point(|&x| x < lo);
                count as f64 / (n * (hi - lo))
            })
            .collect::<Vec<f64>>()
    });
    (0..points)
        .map(|i| {
            let g = i as f64 * h;
            Ok(PdfPoint { g, pdf: model.pdf(g)?, cdf: model.cdf(g)?, mc_density: hist.as_ref().map(|v| v[i]) })
        })
        .collect()
}

/// Joined analytic and simulated values for one SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportRow {
    pub analytic: AnalyticPoint,
    pub mc: Option<MetricPoint>,
}

pub fn join_rows(analytic: &[AnalyticPoint], mc: Option<&[MetricPoint]>) -> Result<Vec<ReportRow>> {
    if let Some(m) = mc {
        if m.len() != analytic.len() {
            return Err(FrisError::Dimension { expected: analytic.len(), got: m.len() });
        }
    }
    Ok(analytic.iter().enumerate().map(|(i, a)| ReportRow { analytic: *a, mc: mc.map(|m| m[i]) }).collect())
}

/// Everything needed to regenerate a run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub crate_version: &'static str,
    pub parallel_feature: bool,
    pub scenario: Scenario,
    pub phase_seed: u64,
    pub mc_seed: Option<u64>,
    pub mc_trials: usize,
    pub tolerances: Tolerances,
    pub stride_used: usize,
    pub tau_used: f64,
    pub max_corr: f64,
    pub active_indices: Vec<usize>,
    pub rank: usize,
    pub trace_c: f64,
    pub groups: Vec<crate::channel::EigenGroup>,
    pub dropped_mass_ratio: f64,
    pub dropped_mass_flagged: bool,
    pub regime: Regime,
    pub condition_estimate: f64,
    pub ill_conditioned: bool,
}

impl Provenance {
    pub fn new(scenario: &Scenario, analysis: &Analysis) -> Self {
        Self {
            crate_version: env!("CARGO_PKG_VERSION"),
            parallel_feature: cfg!(feature = "parallel"),
            scenario: scenario.clone(),
            phase_seed: scenario.phase_seed,
            mc_seed: scenario.mc_enabled().then_some(scenario.mc.seed),
            mc_trials: scenario.mc.trials,
            tolerances: scenario.tolerances,
            stride_used: analysis.active_set.stride_used,
            tau_used: analysis.active_set.tau_used,
            max_corr: analysis.active_set.max_corr,
            active_indices: analysis.active_set.indices.clone(),
            rank: analysis.spectral.rank,
            trace_c: analysis.spectral.trace_c,
            groups: analysis.spectral.groups.clone(),
            dropped_mass_ratio: analysis.spectral.dropped_mass_ratio(),
            dropped_mass_flagged: analysis.spectral.dropped_mass_flagged(),
            regime: analysis.mixture.regime,
            condition_estimate: analysis.mixture.condition_estimate,
            ill_conditioned: analysis.mixture.ill_conditioned,
        }
    }
}
