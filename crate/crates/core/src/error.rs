use thiserror::Error;

/// Failures raised by the laboratory.
#[derive(Debug, Error)]
pub enum SmtError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("mesh would need about {estimated} vertices, over the budget of {budget}")]
    ResourceLimit { estimated: usize, budget: usize },

    #[error("triangle {triangle} is degenerate (signed area {area:e})")]
    MeshQuality { triangle: usize, area: f64 },

    #[error("bad mesh file: {0}")]
    MeshFormat(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("fit window holds {count} vertices, at least {required} are needed")]
    FitWindow { count: usize, required: usize },

    #[error("accuracy target not certified: {0}")]
    Accuracy(String),

    #[error("functional saturated: alpha * u^2 reaches {exponent:.1}")]
    Saturated { exponent: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SmtError>;
