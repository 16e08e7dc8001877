use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain ({domain})")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("dimension {0} is not prime")]
    NotPrime(usize),
    #[error("dimension {d} exceeds the brute-force oracle limit {limit}")]
    OracleScale { d: usize, limit: usize },
    #[error("n = {n} exceeds the exact counting regime (n <= {limit})")]
    ExactRange { n: usize, limit: usize },
    #[error("eigendecomposition residual {residual:e} exceeds {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
    #[error("index {what} = {value} out of range (< {bound})")]
    Index {
        what: &'static str,
        value: usize,
        bound: usize,
    },
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
    #[error("statistics are inconsistent with any Bell-diagonal state: negative weight {negativity} exceeds {threshold}")]
    Infeasible { negativity: f64, threshold: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_index(what: &'static str, value: usize, bound: usize) -> Result<()> {
    if value < bound {
        Ok(())
    } else {
        Err(Error::Index { what, value, bound })
    }
}
