//! Uniform planar array geometry.
//!
//! Elements sit on a regular `m_x × m_z` grid with spacing `d = d_w · λ_c`.
//! Grid coordinates `(i, j)` are 0-based; linear indices are 1-based and
//! row-major, `m = i + j·m_x + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpaGeometry {
    pub m_x: usize,
    pub m_z: usize,
    /// Spacing normalised to the carrier wavelength.
    pub d_w: f64,
    /// Carrier wavelength in meters.
    #[serde(rename = "lambda_c_m")]
    pub lambda_c: f64,
}

/// A validated element reference carrying both its linear and grid form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElementIndex {
    pub linear: usize,
    pub i: usize,
    pub j: usize,
}

/// A 20 × 20 array at 0.15 λ spacing with a 12.5 cm carrier.
impl Default for UpaGeometry {
    fn default() -> Self {
        Self { m_x: 20, m_z: 20, d_w: 0.15, lambda_c: 0.125 }
    }
}

impl UpaGeometry {
    pub fn new(m_x: usize, m_z: usize, d_w: f64, lambda_c: f64) -> Result<Self> {
        if m_x == 0 || m_z == 0 {
            return domain(format!("array dimensions must be positive, got {m_x}x{m_z}"));
        }
        if !(d_w > 0.0 && d_w.is_finite()) {
            return domain(format!("normalised spacing must be positive, got {d_w}"));
        }
        if !(lambda_c > 0.0 && lambda_c.is_finite()) {
            return domain(format!("wavelength must be positive, got {lambda_c}"));
        }
        Ok(Self { m_x, m_z, d_w, lambda_c })
    }

    /// Total number of elements `M = m_x · m_z`.
    pub fn len(&self) -> usize {
        self.m_x * self.m_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical spacing `d = d_w · λ_c` in meters.
    pub fn spacing(&self) -> f64 {
        self.d_w * self.lambda_c
    }

    pub fn linearize(&self, i: usize, j: usize) -> Result<ElementIndex> {
        if i >= self.m_x || j >= self.m_z {
            return domain(format!("grid coordinate ({i}, {j}) outside {}x{} array", self.m_x, self.m_z));
        }
        Ok(ElementIndex { linear: i + j * self.m_x + 1, i, j })
    }

    pub fn delinearize(&self, m: usize) -> Result<ElementIndex> {
        if m == 0 || m > self.len() {
            return domain(format!("linear index {m} outside [1, {}]", self.len()));
        }
        let z = m - 1;
        Ok(ElementIndex { linear: m, i: z % self.m_x, j: z / self.m_x })
    }

    fn check(&self, idx: ElementIndex) -> Result<()> {
        let expected = self.linearize(idx.i, idx.j)?;
        if expected.linear != idx.linear {
            return domain(format!("inconsistent element index: linear {} vs grid ({}, {})", idx.linear, idx.i, idx.j));
        }
        Ok(())
    }

    /// Element position `[i·d, j·d]` in meters.
    pub fn position(&self, idx: ElementIndex) -> Result<(f64, f64)> {
        self.check(idx)?;
        let d = self.spacing();
        Ok((idx.i as f64 * d, idx.j as f64 * d))
    }

    /// Euclidean distance, computed as `d·√(p² + q²)` from exact integer offsets.
    pub fn distance(&self, a: ElementIndex, b: ElementIndex) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.spacing() * grid_norm(a, b))
    }

    /// Iterator over all elements in linear-index order.
    pub fn elements(&self) -> impl Iterator<Item = ElementIndex> + '_ {
        (1..=self.len()).map(move |m| {
            let z = m - 1;
            ElementIndex { linear: m, i: z % self.m_x, j: z / self.m_x }
        })
    }

    /// Grid centre in (fractional) grid coordinates.
    pub fn center(&self) -> (f64, f64) {
        ((self.m_x as f64 - 1.0) / 2.0, (self.m_z as f64 - 1.0) / 2.0)
    }
}

/// `√(p² + q²)` for the integer grid offset between two elements.
pub(crate) fn grid_norm(a: ElementIndex, b: ElementIndex) -> f64 {
    let p = a.i.abs_diff(b.i) as u64;
    let q = a.j.abs_diff(b.j) as u64;
    ((p * p + q * q) as f64).sqrt()
}
