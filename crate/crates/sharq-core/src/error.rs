use core::fmt;

/// Which optimisation constraint ruled out every candidate policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// The secondary-user outage target was unreachable.
    SuOutage,
    /// The primary-user outage target was unreachable.
    PuOutage,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::SuOutage => write!(f, "su-outage"),
            Constraint::PuOutage => write!(f, "pu-outage"),
        }
    }
}

/// Errors surfaced by the analytical and simulation routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated a documented precondition.
    Domain(&'static str),
    /// Node doubling failed to bring the quadrature residual below tolerance.
    QuadratureConvergence { residual: f64 },
    /// A root-finding target lies outside the achievable bracket. Carries the
    /// error probabilities attainable at the bracket endpoints.
    InfeasibleTarget { eps_at_min: f64, eps_at_max: f64 },
    /// A quantity that must be a probability fell outside [0, 1].
    ProbabilityOutOfRange { value: f64 },
    /// The requested outage target cannot be met by any access policy.
    InfeasiblePolicy { binding: Constraint },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(what) => write!(f, "domain error: {what}"),
            Error::QuadratureConvergence { residual } => {
                write!(f, "quadrature did not converge (residual {residual:e})")
            }
            Error::InfeasibleTarget {
                eps_at_min,
                eps_at_max,
            } => write!(
                f,
                "target outside achievable range [{eps_at_max:e}, {eps_at_min:e}]"
            ),
            Error::ProbabilityOutOfRange { value } => {
                write!(f, "computed probability {value} outside [0, 1]")
            }
            Error::InfeasiblePolicy { binding } => {
                write!(
                    f,
                    "no feasible access policy ({binding} constraint binding)"
                )
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
