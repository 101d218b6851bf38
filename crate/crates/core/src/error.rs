use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("steady state undefined: both writing Rabi frequencies are zero")]
    UndefinedSteadyState,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error(
        "quadrature did not converge on [{a}, {b}]: estimate {estimate:e}, error {error:e} after {intervals} intervals"
    )]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("step size underflow at t = {t} (h = {h:e}); state {state:?}")]
    Stiffness { t: f64, h: f64, state: Vec<f64> },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("non-uniform time grid (max spacing deviation {0:e}); resample before filtering")]
    ResampleRequired(f64),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::UndefinedSteadyState
            | Error::UnsupportedRegime(_)
            | Error::ResampleRequired(_)
            | Error::Io(_) => 2,
            Error::Quadrature { .. } | Error::Stiffness { .. } => 3,
            Error::DegenerateFit(_) => 4,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
