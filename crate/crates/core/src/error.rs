use thiserror::Error;

/// Errors raised anywhere in the analysis pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unbound identifier `{0}`")]
    UnboundIdentifier(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("seed dimension mismatch: {0} vs {1}")]
    SeedMismatch(usize, usize),
    #[error("singular elimination: |d/d{variable}| = {derivative:e} below tolerance")]
    SingularElimination { variable: char, derivative: f64 },
    #[error("Newton iteration diverged: {0}")]
    NewtonDivergence(String),
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        reason: String,
    },
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("no section crossing within horizon {horizon}")]
    NoReturn { horizon: f64 },
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("no sign change of {quantity} on [{lo}, {hi}]")]
    NoSignChange { quantity: String, lo: f64, hi: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// `true` for failures caused by malformed user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::UnknownFunction(_)
                | Error::UnboundIdentifier(_)
                | Error::InvalidParameter { .. }
                | Error::Precondition(_)
                | Error::Input(_)
        )
    }

    /// Short snake-case name of the variant.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "syntax",
            Error::UnknownFunction(_) => "unknown_function",
            Error::UnboundIdentifier(_) => "unbound_identifier",
            Error::Domain(_) => "domain",
            Error::SeedMismatch(..) => "seed_mismatch",
            Error::SingularElimination { .. } => "singular_elimination",
            Error::NewtonDivergence(_) => "newton_divergence",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::StepSizeUnderflow { .. } => "step_size_underflow",
            Error::NoReturn { .. } => "no_return",
            Error::NotConverged(_) => "not_converged",
            Error::NoSignChange { .. } => "no_sign_change",
            Error::Precondition(_) => "precondition",
            Error::Input(_) => "input",
        }
    }
}
