use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped so callers (notably the CLI) can map them onto
/// distinct exit classes: bad parameters/configuration, malformed file
/// formats, and data that is well-formed but unusable.
#[derive(Debug, Error)]
pub enum Error {
    /// A function argument violates its documented precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A configuration document is missing keys, has out-of-range values,
    /// or describes an unusable model.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A file does not conform to its declared format.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// A record is syntactically valid but inconsistent (bad channel,
    /// time regression, missing channel, ...).
    #[error("data error at {location}: {message}")]
    Data { location: String, message: String },

    /// A correlation normalization is undefined (zero singles rate or
    /// zero observation time).
    #[error("normalization undefined: {0}")]
    Normalization(String),

    /// A model fit failed to converge or the data cannot constrain it.
    #[error("fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(location: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Data {
            location: location.into(),
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_name_the_offending_location() {
        let e = Error::Format {
            offset: 16,
            message: "bad magic".into(),
        };
        assert_eq!(e.to_string(), "format error at byte 16: bad magic");

        let e = Error::data("record 3", "time regression");
        assert_eq!(e.to_string(), "data error at record 3: time regression");
    }
}
