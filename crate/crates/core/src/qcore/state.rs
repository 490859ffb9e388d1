use nalgebra::{DMatrix, DVector};

use super::layout::{LocalIndexer, SubsystemLayout};
use super::operator::{target_positions, OperatorMatrix};
use super::{DensityMatrix, C64};
use crate::error::{Error, Result};

/// Complex amplitudes over a layout. Not necessarily normalized: after
/// conditional evolution the squared norm is a probability.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    layout: SubsystemLayout,
    amps: DVector<C64>,
}

impl StateVector {
    pub fn new(layout: SubsystemLayout, amps: DVector<C64>) -> Result<Self> {
        if amps.len() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                got: amps.len(),
            });
        }
        Ok(Self { layout, amps })
    }

    pub fn from_slice(layout: SubsystemLayout, amps: &[C64]) -> Result<Self> {
        Self::new(layout, DVector::from_column_slice(amps))
    }

    pub fn zeros(layout: &SubsystemLayout) -> Self {
        Self {
            amps: DVector::zeros(layout.dim()),
            layout: layout.clone(),
        }
    }

    /// Product basis state with the given digit per subsystem.
    pub fn basis(layout: &SubsystemLayout, digits: &[usize]) -> Result<Self> {
        let idx = layout.index_of(digits)?;
        let mut s = Self::zeros(layout);
        s.amps[idx] = C64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn amps(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut DVector<C64> {
        &mut self.amps
    }

    /// Amplitude of the product basis state with the given digits.
    pub fn amp(&self, digits: &[usize]) -> Result<C64> {
        Ok(self.amps[self.layout.index_of(digits)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(self.scale(C64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            layout: self.layout.clone(),
            amps: &self.amps * factor,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(Self {
            layout: self.layout.clone(),
            amps: &self.amps + &other.amps,
        })
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.amps - &other.amps)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Apply an operator on the factors `labels` (listed in the operator's own
    /// factor order) without forming the global matrix.
    pub fn apply_on(&self, op: &OperatorMatrix, labels: &[&str]) -> Result<Self> {
        let positions = target_positions(&self.layout, labels)?;
        let target_dim: usize = positions.iter().map(|&p| self.layout.dims()[p]).product();
        if op.dim() != target_dim {
            return Err(Error::DimensionMismatch {
                expected: target_dim,
                got: op.dim(),
            });
        }
        let ix = LocalIndexer::new(&self.layout, &positions);
        let m = op.entries();
        let mut out = DVector::zeros(self.amps.len());
        for &base in &ix.bases {
            for (r, &ro) in ix.offsets.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (c, &co) in ix.offsets.iter().enumerate() {
                    acc += m[(r, c)] * self.amps[base + co];
                }
                out[base + ro] = acc;
            }
        }
        Ok(Self {
            layout: self.layout.clone(),
            amps: out,
        })
    }

    /// Projector `|ψ⟩⟨ψ|` (unnormalized: trace equals the squared norm).
    pub fn to_density(&self) -> DensityMatrix {
        let entries = &self.amps * self.amps.adjoint();
        DensityMatrix::from_parts_unchecked(self.layout.clone(), entries)
    }

    /// Reduced density matrix of `|ψ⟩⟨ψ|` on `keep`, summing directly over the
    /// complement. Trace equals the squared norm.
    pub fn reduced_density(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let positions = self.layout.sorted_positions(keep)?;
        let out_layout = self.layout.restrict(keep)?;
        let ix = LocalIndexer::new(&self.layout, &positions);
        let d = ix.offsets.len();
        let mut entries = DMatrix::zeros(d, d);
        for (r, &ro) in ix.offsets.iter().enumerate() {
            for (c, &co) in ix.offsets.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for &base in &ix.bases {
                    acc += self.amps[base + ro] * self.amps[base + co].conj();
                }
                entries[(r, c)] = acc;
            }
        }
        Ok(DensityMatrix::from_parts_unchecked(out_layout, entries))
    }
}

/// Tensor product of states on disjoint layouts, in the listed order.
pub fn tensor(factors: &[StateVector]) -> Result<StateVector> {
    let (first, rest) = factors.split_first().ok_or(Error::EmptyKeep)?;
    let mut layout = first.layout.clone();
    let mut amps = first.amps.clone();
    for f in rest {
        layout = layout.concat(&f.layout)?;
        amps = amps.kronecker(&f.amps);
    }
    StateVector::new(layout, amps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn basis_product() {
        let atom = SubsystemLayout::single("atom", 2).unwrap();
        let cav = SubsystemLayout::single("cav", 3).unwrap();
        let e = StateVector::basis(&atom, &[1]).unwrap();
        let vac = StateVector::basis(&cav, &[0]).unwrap();
        let s = tensor(&[e, vac]).unwrap();
        assert_eq!(s.amp(&[1, 0]).unwrap(), c(1.0, 0.0));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn superposition_product() {
        let atom = SubsystemLayout::single("atom", 2).unwrap();
        let cav = SubsystemLayout::single("cav", 2).unwrap();
        let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
        // g = 0, e = 1
        let psi = StateVector::from_slice(atom, &[b, a]).unwrap();
        let vac = StateVector::basis(&cav, &[0]).unwrap();
        let s = tensor(&[psi, vac]).unwrap();
        assert_eq!(s.amp(&[1, 0]).unwrap(), a);
        assert_eq!(s.amp(&[0, 0]).unwrap(), b);
        assert_eq!(s.amp(&[1, 1]).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let atom = SubsystemLayout::single("atom", 2).unwrap();
        let s = StateVector::basis(&atom, &[0]).unwrap();
        assert_eq!(
            tensor(&[s.clone(), s]),
            Err(Error::DuplicateLabel("atom".into()))
        );
    }

    #[test]
    fn normalizing_zero_fails() {
        let l = SubsystemLayout::single("x", 2).unwrap();
        assert_eq!(StateVector::zeros(&l).normalized(), Err(Error::ZeroNorm));
    }
}
