use nalgebra::DMatrix;

use super::layout::{LocalIndexer, SubsystemLayout};
use super::{StateVector, C64};
use crate::error::{Error, Result};

/// Square complex matrix acting on a layout.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    layout: SubsystemLayout,
    entries: DMatrix<C64>,
}

impl OperatorMatrix {
    pub fn new(layout: SubsystemLayout, entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        if entries.nrows() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                got: entries.nrows(),
            });
        }
        Ok(Self { layout, entries })
    }

    pub fn identity(layout: &SubsystemLayout) -> Self {
        Self {
            entries: DMatrix::identity(layout.dim(), layout.dim()),
            layout: layout.clone(),
        }
    }

    pub fn zeros(layout: &SubsystemLayout) -> Self {
        Self {
            entries: DMatrix::zeros(layout.dim(), layout.dim()),
            layout: layout.clone(),
        }
    }

    /// Outer product `|ket⟩⟨bra|` on a single factor of dimension `dim`.
    pub fn transition(label: &str, dim: usize, ket: usize, bra: usize) -> Result<Self> {
        let layout = SubsystemLayout::single(label, dim)?;
        if ket >= dim || bra >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: ket.max(bra),
            });
        }
        let mut entries = DMatrix::zeros(dim, dim);
        entries[(ket, bra)] = C64::new(1.0, 0.0);
        Ok(Self { layout, entries })
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            entries: self.entries.adjoint(),
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            layout: self.layout.clone(),
            entries: &self.entries * factor,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            layout: self.layout.clone(),
            entries: &self.entries + &other.entries,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            layout: self.layout.clone(),
            entries: &self.entries - &other.entries,
        })
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            layout: self.layout.clone(),
            entries: &self.entries * &other.entries,
        })
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if state.layout() != &self.layout {
            return Err(Error::LayoutMismatch);
        }
        StateVector::new(self.layout.clone(), &self.entries * state.amps())
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.entries - &other.entries)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `exp(factor · self)` by scaling and squaring.
    pub fn exp_scaled(&self, factor: C64) -> Self {
        Self {
            layout: self.layout.clone(),
            entries: (&self.entries * factor).exp(),
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::LayoutMismatch);
        }
        Ok(())
    }
}

/// Annihilation operator on Fock states `|0⟩..|n_max⟩`, on a single factor
/// labeled `"mode"`.
pub fn annihilation(n_max: usize) -> Result<OperatorMatrix> {
    if n_max < 1 {
        return Err(Error::InvalidInput("n_max must be at least 1".into()));
    }
    let dim = n_max + 1;
    let mut entries = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        entries[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    OperatorMatrix::new(SubsystemLayout::single("mode", dim)?, entries)
}

/// Lift an operator on one factor to the whole layout (identity elsewhere).
pub fn embed(op: &OperatorMatrix, target_label: &str, layout: &SubsystemLayout) -> Result<OperatorMatrix> {
    embed_on(op, &[target_label], layout)
}

/// Lift an operator acting on several factors, given in the operator's own
/// factor order, to the whole layout.
pub fn embed_on(op: &OperatorMatrix, target_labels: &[&str], layout: &SubsystemLayout) -> Result<OperatorMatrix> {
    let positions = target_positions(layout, target_labels)?;
    let target_dim: usize = positions.iter().map(|&p| layout.dims()[p]).product();
    if op.dim() != target_dim {
        return Err(Error::DimensionMismatch {
            expected: target_dim,
            got: op.dim(),
        });
    }
    let ix = LocalIndexer::new(layout, &positions);
    let mut entries = DMatrix::zeros(layout.dim(), layout.dim());
    for &base in &ix.bases {
        for (r, &ro) in ix.offsets.iter().enumerate() {
            for (c, &co) in ix.offsets.iter().enumerate() {
                entries[(base + ro, base + co)] = op.entries[(r, c)];
            }
        }
    }
    OperatorMatrix::new(layout.clone(), entries)
}

pub(crate) fn target_positions(layout: &SubsystemLayout, labels: &[&str]) -> Result<Vec<usize>> {
    if labels.is_empty() {
        return Err(Error::EmptyKeep);
    }
    let positions = labels
        .iter()
        .map(|l| layout.position(l))
        .collect::<Result<Vec<_>>>()?;
    for (i, p) in positions.iter().enumerate() {
        if positions[..i].contains(p) {
            return Err(Error::DuplicateLabel(labels[i].to_string()));
        }
    }
    Ok(positions)
}
