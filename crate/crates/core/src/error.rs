use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: estimate {estimate:e}, error estimate {error:e}")]
    QuadratureNonConvergence { estimate: f64, error: f64 },

    #[error("no sign change found while bracketing root up to {upper}")]
    RootNotBracketed { upper: f64 },

    #[error("closed-form feasible region unavailable for path-loss exponent {alpha} (only alpha = 4)")]
    UnsupportedRegime { alpha: f64 },

    /// Minimum active probability above one: even all BSs active cannot meet
    /// the outage target.
    #[error("infeasible load{}: minimum active probability {rho_min:.6} > 1", horizon_suffix(.horizon))]
    InfeasibleLoad { horizon: Option<usize>, rho_min: f64 },

    #[error("energy demand violated: supply short by {shortfall:e} W/m^2")]
    DemandViolation { shortfall: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("grid budget exceeded: {required} cells required, budget {budget}")]
    BudgetExceeded { required: usize, budget: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("thinning left no active base station")]
    NoActiveBs,

    #[error("i/o error: {0}")]
    Io(String),
}

fn horizon_suffix(horizon: &Option<usize>) -> String {
    match horizon {
        Some(t) => format!(" in horizon {t}"),
        None => String::new(),
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl Error {
    /// Attach a 1-based horizon index to an `InfeasibleLoad` error.
    pub fn at_horizon(self, t: usize) -> Self {
        match self {
            Error::InfeasibleLoad { rho_min, .. } => Error::InfeasibleLoad { horizon: Some(t), rho_min },
            other => other,
        }
    }
}
