use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid slice frame: {0}")]
    InvalidFrame(String),
    #[error("matrix is not in the image of the embedding (residual {residual:.3e})")]
    SymmetryViolation { residual: f64 },
    #[error("operation requires a scalar (1x1) element")]
    NotScalar,
    #[error("singular value encountered: {0}")]
    Singular(String),
    #[error("element is not invertible (minimum |det| on the contour {min_modulus:.3e})")]
    NotInvertible { min_modulus: f64 },
    #[error("grid refinement cap reached at {grid} points without a reliable winding count")]
    GridTooCoarse { grid: usize },
    #[error("coefficient tail {tail:.3e} still above tolerance at truncation {trunc}")]
    TailTooHeavy { tail: f64, trunc: i64 },
    #[error("residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },
    #[error("truncation/grid cap exceeded: {0}")]
    DegreeCapExceeded(String),
    #[error("internal invariant violated: {0}")]
    InternalInvariantViolation(String),
    #[error("out of scope: {0}")]
    OutOfScope(String),
    #[error("pole on the unit sphere")]
    PoleOnBoundary,
    #[error("improper rational function: {0}")]
    ImproperInput(String),
    #[error("pencil is singular at the evaluation point")]
    SingularPencil,
    #[error("pencil has an eigenvalue on the unit circle")]
    PoleOnCircle,
    #[error("condition (i) fails: pencil of A^x meets the unit circle (min |det| {min_modulus:.3e})")]
    ObstructionConditionI { min_modulus: f64 },
    #[error("condition (ii) fails: subspaces are not complementary (defect {defect:.3e})")]
    ObstructionConditionII { defect: f64 },
    #[error("operator symbol is not rational: {0}")]
    SymbolNotRational(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures that reflect a mathematical obstruction rather than bad input.
    pub fn is_obstruction(&self) -> bool {
        matches!(
            self,
            Error::NotInvertible { .. }
                | Error::PoleOnBoundary
                | Error::PoleOnCircle
                | Error::ObstructionConditionI { .. }
                | Error::ObstructionConditionII { .. }
                | Error::Singular(_)
                | Error::SingularPencil
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
