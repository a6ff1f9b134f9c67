//! Cascaded channel assembly: spatial correlation, fixed phases, the coupling
//! matrix `A = R^{1/2} Φ R^{1/2}`, and the eigenvalue groups of `C = A Aᴴ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FrisError, Result};
use crate::geometry::{grid_norm, UpaGeometry};
use crate::linalg::{eig_hermitian, psd_sqrt, CMatrix, HermitianMatrix};
use crate::selection::ActiveSet;
use crate::specfun::bessel_j0;

pub const DEFAULT_RANK_TOL: f64 = 1e-10;
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;
const TRACE_TOL: f64 = 1e-8;
const DROPPED_MASS_FLAG: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationModel {
    pub active_set: ActiveSet,
    pub matrix: HermitianMatrix,
}

/// Jakes correlation `J0(2π‖p_m − p_m'‖/λ_c)` between the active elements.
pub fn build_correlation(geom: &UpaGeometry, active_set: &ActiveSet) -> Result<CorrelationModel> {
    let el = active_set.elements(geom)?;
    let n = el.len();
    let mut r = CMatrix::identity(n);
    for a in 0..n {
        for b in a + 1..n {
            let v = bessel_j0(2.0 * PI * geom.d_w * grid_norm(el[a], el[b]))?;
            r[(a, b)] = Complex64::new(v, 0.0);
            r[(b, a)] = Complex64::new(v, 0.0);
        }
    }
    Ok(CorrelationModel { active_set: active_set.clone(), matrix: HermitianMatrix::new(r)? })
}

/// Surface phases, drawn once and then held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub phases: Vec<f64>,
    pub seed: Option<u64>,
}

impl PhaseConfig {
    /// `n` phases i.i.d. `U[0, 2π)` from a seeded ChaCha8 stream.
    pub fn sample(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phases = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Self { phases, seed: Some(seed) }
    }

    pub fn from_phases(phases: Vec<f64>) -> Result<Self> {
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(FrisError::Domain("phases must be finite".into()));
        }
        Ok(Self { phases, seed: None })
    }

    pub fn zeros(n: usize) -> Self {
        Self { phases: vec![0.0; n], seed: None }
    }

    pub fn unit_factors(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&t| Complex64::from_polar(1.0, t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub a: CMatrix,
    pub c: HermitianMatrix,
}

pub fn build_coupling(corr: &CorrelationModel, phase: &PhaseConfig) -> Result<Coupling> {
    let n = corr.matrix.dim();
    if phase.phases.len() != n {
        return Err(FrisError::Dimension { expected: n, got: phase.phases.len() });
    }
    let half = psd_sqrt(&corr.matrix)?;
    let phi = CMatrix::diagonal(&phase.unit_factors());
    let a = half.matrix().matmul(&phi)?.matmul(half.matrix())?;
    let c = HermitianMatrix::symmetrized(a.matmul(&a.adjoint())?);
    Ok(Coupling { a, c })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenGroup {
    pub lambda: f64,
    pub multiplicity: usize,
}

/// Distinct strictly positive eigenvalues of `C` with multiplicities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub groups: Vec<EigenGroup>,
    pub rank: usize,
    pub trace_c: f64,
    pub cluster_tol: f64,
    pub rank_tol: f64,
    /// Sum of |λ| over eigenvalues discarded by the rank threshold.
    pub dropped_mass: f64,
}

impl SpectralModel {
    /// Builds a model from explicit groups (trace taken as `Σ m λ`).
    pub fn from_groups(groups: Vec<EigenGroup>) -> Result<Self> {
        if groups.is_empty() {
            return Err(FrisError::DegenerateChannel("no eigenvalue groups".into()));
        }
        for g in &groups {
            if !(g.lambda > 0.0 && g.lambda.is_finite()) || g.multiplicity == 0 {
                return Err(FrisError::Domain(format!(
                    "group ({}, {}) needs a positive eigenvalue and multiplicity",
                    g.lambda, g.multiplicity
                )));
            }
        }
        for (k, a) in groups.iter().enumerate() {
            if groups[k + 1..].iter().any(|b| b.lambda == a.lambda) {
                return Err(FrisError::Domain(format!("eigenvalue {} listed twice", a.lambda)));
            }
        }
        let mut groups = groups;
        groups.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
        let rank = groups.iter().map(|g| g.multiplicity).sum();
        let trace_c = groups.iter().map(|g| g.multiplicity as f64 * g.lambda).sum();
        Ok(Self { groups, rank, trace_c, cluster_tol: 0.0, rank_tol: 0.0, dropped_mass: 0.0 })
    }

    pub fn dropped_mass_ratio(&self) -> f64 {
        self.dropped_mass / self.trace_c.abs()
    }

    /// True when discarded eigenvalues carry more than `1e-8` of the trace.
    pub fn dropped_mass_flagged(&self) -> bool {
        self.dropped_mass_ratio() > DROPPED_MASS_FLAG
    }

    pub fn lambda_max(&self) -> f64 {
        self.groups[0].lambda
    }
}

pub fn spectral_group(c: &HermitianMatrix, cluster_tol: f64, rank_tol: f64) -> Result<SpectralModel> {
    if !(cluster_tol >= 0.0 && rank_tol >= 0.0) {
        return Err(FrisError::Domain("tolerances must be non-negative".into()));
    }
    let eig = eig_hermitian(c);
    let trace_c = c.trace();
    let lmax = eig.eigenvalues.first().copied().unwrap_or(0.0);
    if !(lmax > 0.0) {
        return Err(FrisError::DegenerateChannel("C has no positive eigenvalue".into()));
    }
    let cut = rank_tol * lmax;
    let (kept, dropped): (Vec<f64>, Vec<f64>) = eig.eigenvalues.iter().partition(|&&l| l > cut);
    let dropped_mass = dropped.iter().map(|l| l.abs()).sum();

    // kept is descending; chain adjacent eigenvalues whose relative gap is below cluster_tol
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for l in kept {
        match clusters.last_mut() {
            Some(cl) if (cl.last().unwrap() - l) / cl.last().unwrap() < cluster_tol => cl.push(l),
            _ => clusters.push(vec![l]),
        }
    }
    let groups: Vec<EigenGroup> = clusters
        .iter()
        .map(|cl| EigenGroup { lambda: cl.iter().sum::<f64>() / cl.len() as f64, multiplicity: cl.len() })
        .collect();
    let rank = groups.iter().map(|g| g.multiplicity).sum();
    let model = SpectralModel { groups, rank, trace_c, cluster_tol, rank_tol, dropped_mass };

    let recon: f64 = model.groups.iter().map(|g| g.multiplicity as f64 * g.lambda).sum();
    let drift = (recon - trace_c).abs() / trace_c.abs();
    if !(drift <= TRACE_TOL) {
        return Err(FrisError::Conditioning(format!(
            "Σ m·λ = {recon} drifts from trace(C) = {trace_c} by {drift:e} (relative)"
        )));
    }
    Ok(model)
}
