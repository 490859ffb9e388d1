use crate::error::{Error, Result};

/// Default upper bound on the product of subsystem dimensions.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Ordered list of labeled tensor factors.
///
/// Basis indices are row-major in the listed order: the first subsystem is the
/// most significant digit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsystemLayout {
    labels: Vec<String>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
}

impl SubsystemLayout {
    pub fn new<I, S>(subsystems: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        Self::with_cap(subsystems, DEFAULT_DIM_CAP)
    }

    pub fn with_cap<I, S>(subsystems: I, cap: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut labels: Vec<String> = Vec::new();
        let mut dims = Vec::new();
        let mut total: usize = 1;
        for (label, dim) in subsystems {
            let label = label.into();
            if labels.contains(&label) {
                return Err(Error::DuplicateLabel(label));
            }
            if dim < 2 {
                return Err(Error::DimTooSmall { label, dim });
            }
            total = total.saturating_mul(dim);
            if total > cap {
                return Err(Error::DimensionCap { total, cap });
            }
            labels.push(label);
            dims.push(dim);
        }
        if labels.is_empty() {
            return Err(Error::EmptyKeep);
        }
        let mut strides = vec![1; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        Ok(Self {
            labels,
            dims,
            strides,
            total,
        })
    }

    /// Layout with a single factor.
    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new([(label.into(), dim)])
    }

    pub fn dim(&self) -> usize {
        self.total
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.position(label)?])
    }

    /// Basis digit of subsystem `pos` inside the global index.
    #[inline]
    pub fn digit(&self, index: usize, pos: usize) -> usize {
        (index / self.strides[pos]) % self.dims[pos]
    }

    /// Global index of a full list of digits.
    pub fn index_of(&self, digits: &[usize]) -> Result<usize> {
        if digits.len() != self.dims.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dims.len(),
                got: digits.len(),
            });
        }
        let mut idx = 0;
        for (pos, (&d, &dim)) in digits.iter().zip(&self.dims).enumerate() {
            if d >= dim {
                return Err(Error::DimensionMismatch { expected: dim, got: d });
            }
            idx += d * self.strides[pos];
        }
        Ok(idx)
    }

    /// Concatenation `self ⊗ other`.
    pub fn concat(&self, other: &SubsystemLayout) -> Result<Self> {
        Self::new(
            self.labels
                .iter()
                .cloned()
                .zip(self.dims.iter().copied())
                .chain(other.labels.iter().cloned().zip(other.dims.iter().copied())),
        )
    }

    /// Sub-layout made of the given labels, in layout order.
    pub fn restrict(&self, keep: &[&str]) -> Result<Self> {
        let positions = self.sorted_positions(keep)?;
        Self::new(
            positions
                .iter()
                .map(|&p| (self.labels[p].clone(), self.dims[p])),
        )
    }

    /// Positions of `labels` in layout order, deduplicated.
    pub(crate) fn sorted_positions(&self, labels: &[&str]) -> Result<Vec<usize>> {
        if labels.is_empty() {
            return Err(Error::EmptyKeep);
        }
        let mut positions = labels
            .iter()
            .map(|l| self.position(l))
            .collect::<Result<Vec<_>>>()?;
        positions.sort_unstable();
        positions.dedup();
        Ok(positions)
    }
}

/// Index bookkeeping for operations that act on a subset of factors.
///
/// `offsets[m]` is the global-index contribution of target multi-index `m`
/// (row-major over `positions` in the given order); `bases` lists every global
/// index whose target digits are all zero.
#[derive(Clone, Debug)]
pub(crate) struct LocalIndexer {
    pub offsets: Vec<usize>,
    pub bases: Vec<usize>,
}

impl LocalIndexer {
    pub fn new(layout: &SubsystemLayout, positions: &[usize]) -> Self {
        let target_dim: usize = positions.iter().map(|&p| layout.dims[p]).product();
        let mut offsets = Vec::with_capacity(target_dim);
        for m in 0..target_dim {
            let mut rem = m;
            let mut off = 0;
            for &p in positions.iter().rev() {
                let d = rem % layout.dims[p];
                rem /= layout.dims[p];
                off += d * layout.strides[p];
            }
            offsets.push(off);
        }
        let bases = (0..layout.total)
            .filter(|&i| positions.iter().all(|&p| layout.digit(i, p) == 0))
            .collect();
        Self { offsets, bases }
    }
}
