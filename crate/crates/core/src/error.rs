use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("duplicate subsystem label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),
    #[error("subsystem `{label}` has dimension {dim}; every subsystem needs dim >= 2")]
    DimTooSmall { label: String, dim: usize },
    #[error("total dimension {total} exceeds the cap {cap}")]
    DimensionCap { total: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operands live on different layouts")]
    LayoutMismatch,
    #[error("a nonempty set of labels is required")]
    EmptyKeep,
    #[error("density matrix has zero trace; fidelity is undefined")]
    ZeroTrace,
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("overdamped regime: 2*delta = {two_delta} <= k = {k}")]
    Overdamped { two_delta: f64, k: f64 },
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("click time {t_j} outside the detection window [0, {t2}]")]
    ClickTimeOutOfRange { t_j: f64, t2: f64 },
    #[error("closed-form results require matched pairs (a = c, b = d)")]
    UnmatchedPairs,
    #[error("Fock truncation leakage {population:e} above level 1")]
    FockLeakage { population: f64 },
    #[error("quadrature did not converge: refinement changed {quantity} by {change:e}")]
    QuadratureNonConvergence { quantity: &'static str, change: f64 },
}

impl Error {
    /// True for errors caused by physical parameters outside the modeled regime.
    pub fn is_regime(&self) -> bool {
        matches!(self, Error::Overdamped { .. })
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::FockLeakage { .. } | Error::QuadratureNonConvergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
