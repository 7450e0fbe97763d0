use thiserror::Error;

/// Errors surfaced by the geometry and flow pipelines.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum FinslerError {
    #[error("variable index {var} out of range for {nvars} variables")]
    VarOutOfRange { var: usize, nvars: usize },

    #[error("jet order {order} exceeds the supported maximum {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("mismatched jet shapes: ({nvars_a} vars, order {order_a}) vs ({nvars_b} vars, order {order_b})")]
    ShapeMismatch {
        nvars_a: usize,
        order_a: usize,
        nvars_b: usize,
        order_b: usize,
    },

    #[error("multi-index degree {degree} exceeds jet order {order}")]
    DegreeTooHigh { degree: usize, order: usize },

    #[error("insufficient jet order: need {needed}, field supplies {got}")]
    InsufficientOrder { needed: usize, got: usize },

    #[error("structural degeneracy: metric not positive definite (min eigenvalue {min_eig:.6e}){}", location.as_deref().map(|l| format!(" at {l}")).unwrap_or_default())]
    StructuralDegeneracy {
        min_eig: f64,
        location: Option<String>,
    },

    #[error("degenerate flag: transverse vector is parallel to the flagpole (denominator {denom:.3e})")]
    DegenerateFlag { denom: f64 },

    #[error("positivity violation: tau = {tau:.6e} is not positive")]
    PositivityViolation { tau: f64 },

    #[error("diffeomorphism breakdown at t = {t:.6e}: Jacobian determinant {det:.3e}")]
    DiffeoBreakdown { t: f64, det: f64 },

    #[error("non-finite value encountered at t = {t:.6e}")]
    NonFinite { t: f64 },

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, FinslerError>;
