use thiserror::Error;

/// Errors raised while evaluating systems, splits and steppers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SdeError {
    #[error("{what}: expected length {expected}, got {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },
}

impl SdeError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        SdeError::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), SdeError> {
    if expected == found {
        Ok(())
    } else {
        Err(SdeError::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
