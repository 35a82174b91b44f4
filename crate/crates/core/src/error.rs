use thiserror::Error;

/// Errors raised by the link-budget engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A numeric argument lies outside its physical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Two objects cannot be combined (mismatched grids, bad chain layout).
    #[error("structural error: {0}")]
    Structural(String),
    /// A frequency falls outside the grid or a lookup table.
    #[error("out of range: {0}")]
    OutOfRange(String),
    /// An operation was called with inputs it does not accept.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// The requested quantity cannot be solved for.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// Failure while applying a chain element.
    #[error("element {index} ({label}): {source}")]
    Element {
        index: usize,
        label: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

impl Error {
    /// Innermost error, skipping element context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Element { source, .. } => source.root(),
            other => other,
        }
    }
}
