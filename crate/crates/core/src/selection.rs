//! Active-element selection.
//!
//! Fluid mode places elements on a strided sub-lattice whose worst stencil
//! correlation stays under a cap, relaxing the cap in fixed steps until some
//! stride fits `m_on` elements. Contiguous mode takes a centred block.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{FrisError, Result};
use crate::geometry::{grid_norm, ElementIndex, UpaGeometry};
use crate::specfun::bessel_j0;

pub const DEFAULT_STENCIL: [(u32, u32); 6] = [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2), (3, 0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    Fluid,
    Contiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionPolicy {
    pub mode: SelectionMode,
    pub m_on: usize,
    pub tau_init: f64,
    pub relaxation_step: f64,
    pub stencil: Vec<(u32, u32)>,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self {
            mode: SelectionMode::Fluid,
            m_on: 25,
            tau_init: 0.3,
            relaxation_step: 0.030_25,
            stencil: DEFAULT_STENCIL.to_vec(),
        }
    }
}

impl SelectionPolicy {
    pub fn validate(&self, geom: &UpaGeometry) -> Result<()> {
        if self.m_on == 0 || self.m_on > geom.len() {
            return Err(FrisError::Config(format!("m_on = {} must lie in [1, {}]", self.m_on, geom.len())));
        }
        if !(self.tau_init > 0.0 && self.tau_init < 1.0) {
            return Err(FrisError::Config(format!("tau_init = {} not in (0, 1)", self.tau_init)));
        }
        if !(self.relaxation_step > 0.0 && self.relaxation_step.is_finite()) {
            return Err(FrisError::Config(format!("relaxation_step = {} must be positive", self.relaxation_step)));
        }
        if self.stencil.is_empty() || self.stencil.iter().any(|&(p, q)| p == 0 && q == 0) {
            return Err(FrisError::Config("stencil must be non-empty and exclude (0,0)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub indices: Vec<usize>,
    pub stride_used: usize,
    pub tau_used: f64,
    pub max_corr: f64,
}

impl ActiveSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn elements(&self, geom: &UpaGeometry) -> Result<Vec<ElementIndex>> {
        self.indices.iter().map(|&m| geom.delinearize(m)).collect()
    }

    /// One row per `j`, `#` for active and `.` for idle elements.
    pub fn text_grid(&self, geom: &UpaGeometry) -> String {
        let on: BTreeSet<usize> = self.indices.iter().copied().collect();
        let mut out = String::with_capacity((geom.m_x + 1) * geom.m_z);
        for j in 0..geom.m_z {
            for i in 0..geom.m_x {
                let m = i + j * geom.m_x + 1;
                out.push(if on.contains(&m) { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }
}

/// `|J0(2π ρ)|` for a separation `ρ` in wavelengths.
pub(crate) fn jakes(rho: f64) -> f64 {
    bessel_j0(2.0 * PI * rho).expect("validated geometry gives finite separations").abs()
}

/// Worst `|J0|` over the stencil scaled by `stride`.
pub fn stencil_max_corr(geom: &UpaGeometry, stride: usize, stencil: &[(u32, u32)]) -> f64 {
    stencil
        .iter()
        .map(|&(p, q)| {
            let r = ((p as f64).powi(2) + (q as f64).powi(2)).sqrt();
            jakes(stride as f64 * geom.d_w * r)
        })
        .fold(0.0, f64::max)
}

pub fn stencil_cap_satisfied(geom: &UpaGeometry, stride: usize, tau: f64, stencil: &[(u32, u32)]) -> bool {
    stride >= 1 && stencil_max_corr(geom, stride, stencil) <= tau
}

/// Largest `|J0(2π d_w ρ)|` over all distinct pairs, `ρ` in grid units.
pub fn max_pairwise_corr(geom: &UpaGeometry, elements: &[ElementIndex]) -> f64 {
    let mut offsets = BTreeSet::new();
    for (k, a) in elements.iter().enumerate() {
        for b in &elements[k + 1..] {
            let p = a.i.abs_diff(b.i);
            let q = a.j.abs_diff(b.j);
            offsets.insert((p.min(q), p.max(q)));
        }
    }
    offsets
        .into_iter()
        .map(|(p, q)| {
            let r = ((p * p + q * q) as f64).sqrt();
            jakes(geom.d_w * r)
        })
        .fold(0.0, f64::max)
}

pub fn select(geom: &UpaGeometry, policy: &SelectionPolicy) -> Result<ActiveSet> {
    match policy.mode {
        SelectionMode::Fluid => select_fluid(geom, policy),
        SelectionMode::Contiguous => select_contiguous(geom, policy.m_on),
    }
}

/// Number of points of the stride-`s` lattice with offset `o` along an axis of length `n`.
fn lattice_count(n: usize, s: usize, o: usize) -> usize {
    if o >= n {
        0
    } else {
        (n - o).div_ceil(s)
    }
}

fn max_lattice_size(geom: &UpaGeometry, s: usize) -> usize {
    lattice_count(geom.m_x, s, 0) * lattice_count(geom.m_z, s, 0)
}

pub fn select_fluid(geom: &UpaGeometry, policy: &SelectionPolicy) -> Result<ActiveSet> {
    policy.validate(geom)?;
    let m_on = policy.m_on;
    let max_stride = geom.m_x.max(geom.m_z);

    // Cap sequence τ_k = τ_init + k·δ, evaluated without accumulated rounding.
    let mut k = 0u32;
    let (stride, tau) = loop {
        let tau = policy.tau_init + k as f64 * policy.relaxation_step;
        if tau >= 1.0 {
            return Err(FrisError::Config(format!(
                "no stride fits {m_on} elements on a {}x{} aperture under any cap below 1",
                geom.m_x, geom.m_z
            )));
        }
        let hit = (1..=max_stride)
            .find(|&s| max_lattice_size(geom, s) >= m_on && stencil_cap_satisfied(geom, s, tau, &policy.stencil));
        if let Some(s) = hit {
            break (s, tau);
        }
        k += 1;
    };

    let elements = centered_lattice(geom, stride, m_on);
    let mut indices: Vec<usize> = elements.iter().map(|e| e.linear).collect();
    indices.sort_unstable();
    let max_corr = max_pairwise_corr(geom, &elements);
    let set = ActiveSet { indices, stride_used: stride, tau_used: tau, max_corr };
    debug_assert!(check_cap(geom, &set, &policy.stencil));
    Ok(set)
}

/// Exhaustive post-check: every selected pair at a stencil offset meets the cap.
pub fn check_cap(geom: &UpaGeometry, set: &ActiveSet, stencil: &[(u32, u32)]) -> bool {
    let Ok(el) = set.elements(geom) else { return false };
    let s = set.stride_used;
    let allowed: BTreeSet<(usize, usize)> = stencil
        .iter()
        .flat_map(|&(p, q)| {
            let (p, q) = (p as usize * s, q as usize * s);
            [(p, q), (q, p)]
        })
        .collect();
    for (k, a) in el.iter().enumerate() {
        for b in &el[k + 1..] {
            let off = (a.i.abs_diff(b.i), a.j.abs_diff(b.j));
            if allowed.contains(&off) {
                let c = jakes(geom.d_w * grid_norm(*a, *b));
                if c > set.tau_used {
                    return false;
                }
            }
        }
    }
    true
}

/// Picks `m_on` lattice points nearest the aperture centre for each lattice
/// offset and keeps the offset whose selection centroid is best centred.
///
/// "Nearest" orders by Chebyshev distance, then Euclidean, then linear
/// index; with a perfect-square `m_on` this yields square patterns.
fn centered_lattice(geom: &UpaGeometry, s: usize, m_on: usize) -> Vec<ElementIndex> {
    let (cx, cz) = geom.center();
    let mut best: Option<(f64, Vec<ElementIndex>)> = None;
    for oz in 0..s {
        for ox in 0..s {
            if lattice_count(geom.m_x, s, ox) * lattice_count(geom.m_z, s, oz) < m_on {
                continue;
            }
            let mut pts: Vec<(f64, f64, ElementIndex)> = (oz..geom.m_z)
                .step_by(s)
                .flat_map(|j| (ox..geom.m_x).step_by(s).map(move |i| (i, j)))
                .map(|(i, j)| {
                    let dx = (i as f64 - cx).abs();
                    let dz = (j as f64 - cz).abs();
                    let e = ElementIndex { linear: i + j * geom.m_x + 1, i, j };
                    (dx.max(dz), dx * dx + dz * dz, e)
                })
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.linear.cmp(&b.2.linear)));
            let chosen: Vec<ElementIndex> = pts.into_iter().take(m_on).map(|p| p.2).collect();
            let n = chosen.len() as f64;
            let gx = chosen.iter().map(|e| e.i as f64).sum::<f64>() / n;
            let gz = chosen.iter().map(|e| e.j as f64).sum::<f64>() / n;
            let off = (gx - cx).hypot(gz - cz);
            // strict improvement only: ties stay with the lower offset visited first
            if best.as_ref().is_none_or(|(b, _)| off < *b - 1e-12) {
                best = Some((off, chosen));
            }
        }
    }
    best.map(|b| b.1).unwrap_or_default()
}

/// Factor pair `(rows, cols)` with `rows ≤ cols` and `rows·cols = m`, as square as possible.
fn block_shape(m: usize) -> (usize, usize) {
    let mut r = (m as f64).sqrt().floor() as usize;
    while r > 1 && !m.is_multiple_of(r) {
        r -= 1;
    }
    let r = r.max(1);
    (r, m / r)
}

/// Centred contiguous block. Non-square counts use the most square exact factorisation.
pub fn select_contiguous(geom: &UpaGeometry, m_on: usize) -> Result<ActiveSet> {
    if m_on == 0 || m_on > geom.len() {
        return Err(FrisError::Config(format!("m_on = {m_on} must lie in [1, {}]", geom.len())));
    }
    let (short, long) = block_shape(m_on);
    let (w, h) = if long <= geom.m_x && short <= geom.m_z {
        (long, short)
    } else if short <= geom.m_x && long <= geom.m_z {
        (short, long)
    } else {
        return Err(FrisError::Config(format!(
            "{short}x{long} block does not fit a {}x{} aperture",
            geom.m_x, geom.m_z
        )));
    };
    let i0 = (geom.m_x - w) / 2;
    let j0 = (geom.m_z - h) / 2;
    let elements: Vec<ElementIndex> = (j0..j0 + h)
        .flat_map(|j| (i0..i0 + w).map(move |i| ElementIndex { linear: i + j * geom.m_x + 1, i, j }))
        .collect();
    let max_corr = max_pairwise_corr(geom, &elements);
    Ok(ActiveSet { indices: elements.iter().map(|e| e.linear).collect(), stride_used: 1, tau_used: max_corr, max_corr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> UpaGeometry {
        UpaGeometry::new(20, 20, 0.15, 0.125).unwrap()
    }

    #[test]
    fn stencil_examples() {
        let g = grid();
        assert!(!stencil_cap_satisfied(&g, 1, 0.3, &DEFAULT_STENCIL));
        for s in 1..8 {
            assert!(stencil_cap_satisfied(&g, s, 0.999, &DEFAULT_STENCIL));
        }
        assert!((stencil_max_corr(&g, 1, &DEFAULT_STENCIL) - 0.789_962_234_125_382_3).abs() < 1e-12);
    }

    #[test]
    fn fluid_reproduces_reference_metrics() {
        let g = grid();
        let set = select_fluid(&g, &SelectionPolicy::default()).unwrap();
        assert_eq!(set.len(), 25);
        assert_eq!(set.stride_used, 2);
        assert!((set.tau_used - 0.421).abs() < 1e-12);
        assert!((set.max_corr - 0.402).abs() < 0.002);
        assert!(check_cap(&g, &set, &DEFAULT_STENCIL));
        assert!(set.indices.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fluid_pattern_is_square_and_centred() {
        let g = grid();
        for (m_on, side) in [(25usize, 5usize), (36, 6)] {
            let policy = SelectionPolicy { m_on, ..Default::default() };
            let set = select_fluid(&g, &policy).unwrap();
            let el = set.elements(&g).unwrap();
            let xs: BTreeSet<usize> = el.iter().map(|e| e.i).collect();
            let zs: BTreeSet<usize> = el.iter().map(|e| e.j).collect();
            assert_eq!((xs.len(), zs.len()), (side, side));
            assert!(xs.iter().zip(xs.iter().skip(1)).all(|(a, b)| b - a == 2));
        }
    }

    #[test]
    fn contiguous_block() {
        let g = grid();
        let set = select_contiguous(&g, 25).unwrap();
        let el = set.elements(&g).unwrap();
        assert!(el.iter().all(|e| (7..12).contains(&e.i) && (7..12).contains(&e.j)));
        assert!((set.max_corr - 0.790).abs() < 0.002);
        assert_eq!(set.stride_used, 1);
        assert_eq!(select_contiguous(&g, 36).unwrap().len(), 36);
        let one = select_contiguous(&g, 1).unwrap();
        assert_eq!(one.max_corr, 0.0);
        assert_eq!(g.delinearize(one.indices[0]).unwrap().i, 9);
        // non-square count: most square exact rectangle
        let r = select_contiguous(&g, 12).unwrap();
        assert_eq!(r.len(), 12);
        assert!(select_contiguous(&UpaGeometry::new(4, 4, 0.5, 1.0).unwrap(), 17).is_err());
        assert!(select_contiguous(&UpaGeometry::new(3, 3, 0.5, 1.0).unwrap(), 7).is_err());
    }

    #[test]
    fn fluid_beats_contiguous() {
        let g = grid();
        let f = select_fluid(&g, &SelectionPolicy::default()).unwrap();
        let c = select_contiguous(&g, 25).unwrap();
        assert!(f.max_corr < c.max_corr);
    }

    #[test]
    fn singleton_and_errors() {
        let g = grid();
        let p = SelectionPolicy { m_on: 1, ..Default::default() };
        let s = select_fluid(&g, &p).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.max_corr, 0.0);
        let too_many = SelectionPolicy { m_on: 401, ..Default::default() };
        assert!(matches!(select_fluid(&g, &too_many), Err(FrisError::Config(_))));
        let bad_tau = SelectionPolicy { tau_init: 1.2, ..Default::default() };
        assert!(select_fluid(&g, &bad_tau).is_err());
    }

    #[test]
    fn text_grid_shape() {
        let g = grid();
        let set = select_contiguous(&g, 25).unwrap();
        let txt = set.text_grid(&g);
        let rows: Vec<&str> = txt.lines().collect();
        assert_eq!(rows.len(), 20);
        assert!(rows.iter().all(|r| r.len() == 20));
        assert_eq!(txt.matches('#').count(), 25);
        assert_eq!(&rows[7][7..12], "#####");
    }

    proptest! {
        #[test]
        fn fluid_invariants(m_on in 1usize..=100, d_w in 0.1f64..0.6) {
            let g = UpaGeometry::new(20, 20, d_w, 0.125).unwrap();
            let p = SelectionPolicy { m_on, ..Default::default() };
            let a = select_fluid(&g, &p).unwrap();
            prop_assert_eq!(a.len(), m_on);
            prop_assert!(a.indices.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(a.indices.iter().all(|&m| (1..=400).contains(&m)));
            prop_assert!(a.max_corr <= 1.0);
            prop_assert!(check_cap(&g, &a, &DEFAULT_STENCIL));
            prop_assert_eq!(a, select_fluid(&g, &p).unwrap());
        }
    }
}
