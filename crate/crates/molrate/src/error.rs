use std::fmt;

#[derive(Debug)]
pub enum Error {
    Core(molrate_core::Error),
    Io(std::io::Error),
    Csv(csv::Error),
    Toml(toml::de::Error),
    /// Inconsistent or missing experiment settings.
    Config(String),
    UnknownAxis(String),
    /// A CSV file parsed but its contents are unusable.
    Format {
        path: String,
        reason: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Core(e) => write!(f, "{e}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::Csv(e) => write!(f, "csv error: {e}"),
            Error::Toml(e) => write!(f, "spec file: {e}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::UnknownAxis(name) => write!(
                f,
                "unknown sweep axis `{name}` (expected slot_duration, distance, power, threshold or memory_bits)"
            ),
            Error::Format { path, reason } => write!(f, "{path}: {reason}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Core(e) => Some(e),
            Error::Io(e) => Some(e),
            Error::Csv(e) => Some(e),
            Error::Toml(e) => Some(e),
            _ => None,
        }
    }
}

impl From<molrate_core::Error> for Error {
    fn from(e: molrate_core::Error) -> Self {
        Error::Core(e)
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e)
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Toml(e)
    }
}
