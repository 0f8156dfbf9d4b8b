use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix exponential did not converge (input norm {norm:e})")]
    ExpmNotConverged { norm: f64 },

    #[error("matrix is not Hermitian (max |m - m†| = {defect:e})")]
    NotHermitian { defect: f64 },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("negative rate {rate} on {what}")]
    NegativeRate { what: String, rate: f64 },

    #[error("channel `{0}` is non-local; the closed-form rates only hold for local jump operators")]
    NonLocalChannel(String),

    #[error("operation not supported for this scenario: {0}")]
    Unsupported(String),

    #[error("time step too large: total jump probability {prob:.4} exceeds {limit}")]
    StepTooLarge { prob: f64, limit: f64 },

    #[error("jump selected on channel `{0}` with vanishing amplitude")]
    ImpossibleJump(String),

    #[error("density matrix lost positivity at t = {time}: min eigenvalue {min_eig:e}")]
    PositivityViolation { time: f64, min_eig: f64 },

    #[error("insufficient signal for a rate fit: {0}")]
    InsufficientSignal(String),

    #[error("time grids of trajectory records do not match")]
    GridMismatch,

    #[error("scenario validation failed: {0}")]
    InvalidScenario(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// True when the error came from numerics rather than from the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ExpmNotConverged { .. }
                | Error::NonFinite(_)
                | Error::ImpossibleJump(_)
                | Error::PositivityViolation { .. }
                | Error::InsufficientSignal(_)
        )
    }
}
