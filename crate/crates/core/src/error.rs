use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{family}: parameter violates {constraint}")]
    InvalidParameter {
        family: &'static str,
        constraint: String,
    },

    #[error("invalid Young pair: {quantity} = {value} violates {condition}")]
    InvalidYoungPair {
        quantity: &'static str,
        value: f64,
        condition: &'static str,
    },

    #[error("inverse derivative target {target:e} outside reachable range [{reachable_lo:e}, {reachable_hi:e}]")]
    DomainLimit {
        target: f64,
        reachable_lo: f64,
        reachable_hi: f64,
    },

    #[error("quadrature did not converge on [{lo:e}, {hi:e}]: error estimate {achieved:e}")]
    Quadrature { lo: f64, hi: f64, achieved: f64 },

    #[error("matrix {matrix} is not elliptic: lambda = {lambda}")]
    NotElliptic { matrix: String, lambda: f64 },

    #[error("matrix {matrix} is not {p}-elliptic: Delta_p = {delta}")]
    NotPElliptic { matrix: String, p: f64, delta: f64 },

    #[error("exponent p = {0} is below 2")]
    ExponentBelowTwo(f64),

    #[error("derivative undefined at pole ({0} = 0)")]
    Pole(&'static str),

    #[error("second derivatives undefined on the critical surface |v| = Phi'(|u|)")]
    OnCriticalSurface,

    #[error("check not applicable: {0}")]
    Inapplicable(String),

    #[error("linear solve failed after {iterations} iterations (relative residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
