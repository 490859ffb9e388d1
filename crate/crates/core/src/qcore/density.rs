use nalgebra::{DMatrix, SymmetricEigen};

use super::layout::{LocalIndexer, SubsystemLayout};
use super::{StateVector, C64};
use crate::error::{Error, Result};

/// Hermitian positive-semidefinite matrix over a layout. The trace is kept
/// as-is so it can carry a probability weight.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    layout: SubsystemLayout,
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates shape and Hermiticity (to 1e-12, relative to the largest entry).
    pub fn new(layout: SubsystemLayout, entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                got: entries.nrows().max(entries.ncols()),
            });
        }
        let rho = Self { layout, entries };
        let scale = rho.entries.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if rho.hermiticity_defect() > 1e-12 * scale {
            return Err(Error::InvalidInput("density matrix is not Hermitian".into()));
        }
        Ok(rho)
    }

    pub(crate) fn from_parts_unchecked(layout: SubsystemLayout, entries: DMatrix<C64>) -> Self {
        Self { layout, entries }
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// Copy rescaled to unit trace.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace().re;
        if tr.abs() < f64::MIN_POSITIVE || !tr.is_finite() {
            return Err(Error::ZeroTrace);
        }
        Ok(Self {
            layout: self.layout.clone(),
            entries: &self.entries / C64::new(tr, 0.0),
        })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            layout: self.layout.clone(),
            entries: &self.entries * C64::new(factor, 0.0),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(Self {
            layout: self.layout.clone(),
            entries: &self.entries + &other.entries,
        })
    }

    /// Largest entrywise modulus of `ρ - ρ†`.
    pub fn hermiticity_defect(&self) -> f64 {
        (&self.entries - self.entries.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.entries - &other.entries)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Trace out everything except `keep`. The result is ordered as in the input
/// layout regardless of the order of `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: &[&str]) -> Result<DensityMatrix> {
    let positions = rho.layout.sorted_positions(keep)?;
    let out_layout = rho.layout.restrict(keep)?;
    let ix = LocalIndexer::new(&rho.layout, &positions);
    let d = ix.offsets.len();
    let mut entries = DMatrix::zeros(d, d);
    for (r, &ro) in ix.offsets.iter().enumerate() {
        for (c, &co) in ix.offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &base in &ix.bases {
                acc += rho.entries[(base + ro, base + co)];
            }
            entries[(r, c)] = acc;
        }
    }
    Ok(DensityMatrix::from_parts_unchecked(out_layout, entries))
}

/// `⟨target|ρ|target⟩ / tr ρ`, clamped to `[0, 1]`.
pub fn fidelity_pure(rho: &DensityMatrix, target: &StateVector) -> Result<f64> {
    if rho.layout() != target.layout() {
        return Err(Error::LayoutMismatch);
    }
    let tr = rho.trace().re;
    if tr.abs() < f64::MIN_POSITIVE || !tr.is_finite() {
        return Err(Error::ZeroTrace);
    }
    let t = target.amps();
    let overlap = t.dotc(&(rho.entries() * t)).re;
    Ok((overlap / tr).clamp(0.0, 1.0))
}
