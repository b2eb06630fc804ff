use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors surfaced by validation, solvers and estimators.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates a named constraint.
    Invalid {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    /// The effective horizon is too short for the hyperbolic closed forms:
    /// `sqrt(rho) * horizon` underflows the shape denominator.
    DegenerateHorizon { sqrt_rho_t: f64 },
    /// The discretized objective is not strictly concave; the symmetric
    /// factorization of the negated Hessian failed (invalid claim coefficient).
    NonConcave,
    /// Two containers that must share a grid have different lengths.
    GridMismatch { expected: usize, found: usize },
    /// Grid times are not uniformly spaced.
    NonUniformGrid,
    /// A time argument lies outside its admissible interval.
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    /// A Monte Carlo exponent overflowed or was not finite on this path
    /// (claim coefficient too close to its bound for the sampled tail).
    NonFiniteExponent { path_index: u64 },
    /// A perturbation direction does not preserve the liquidation constraint.
    NotLiquidationPreserving { integral: f64 },
    /// Node-doubling changed the quadrature by more than the tolerance.
    QuadratureNotConverged { estimate: f64, tolerance: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Invalid {
                name,
                value,
                constraint,
            } => write!(f, "invalid {name} = {value}: requires {constraint}"),
            Error::DegenerateHorizon { sqrt_rho_t } => write!(
                f,
                "degenerate horizon: sqrt(rho)*T = {sqrt_rho_t} below 1e-6"
            ),
            Error::NonConcave => write!(
                f,
                "discretized objective is not strictly concave (claim coefficient out of range)"
            ),
            Error::GridMismatch { expected, found } => {
                write!(
                    f,
                    "grid length mismatch: expected {expected}, found {found}"
                )
            }
            Error::NonUniformGrid => write!(f, "grid is not uniform"),
            Error::OutOfRange {
                name,
                value,
                lo,
                hi,
            } => write!(f, "{name} = {value} outside [{lo}, {hi})"),
            Error::NonFiniteExponent { path_index } => write!(
                f,
                "non-finite utility exponent on path {path_index} (claim too close to bound)"
            ),
            Error::NotLiquidationPreserving { integral } => write!(
                f,
                "perturbation integral {integral} != 0: liquidation not preserved"
            ),
            Error::QuadratureNotConverged {
                estimate,
                tolerance,
            } => write!(
                f,
                "quadrature error estimate {estimate} above tolerance {tolerance}"
            ),
        }
    }
}

impl core::error::Error for Error {}
