use core::fmt;

/// Errors raised by the model, transmitter and analysis routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible range.
    InvalidParameter { name: &'static str, value: f64 },
    /// The requested physical regime has no supported closed form.
    UnsupportedRegime(&'static str),
    /// The level-table system is singular; `state` is the first memory state whose pivot vanished.
    SingularSystem { memory_bits: u32, state: u32 },
    /// A genie transmitter was asked for a rate without an interference observation.
    MissingObservation,
    /// A root-finding problem has no solution in the admissible range.
    NoRoot(&'static str),
    /// Bisection for the target rate could not bracket the requested power.
    Calibration {
        target: f64,
        low: f64,
        high: f64,
        mean_at_high: f64,
    },
    /// A discrete distribution does not sum to one.
    Unnormalized { total: f64 },
    /// Exhaustive enumeration would exceed the supported size.
    TooLarge {
        what: &'static str,
        bits: u32,
        limit: u32,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, value } => {
                write!(f, "invalid parameter `{name}` = {value}")
            }
            Error::UnsupportedRegime(what) => write!(f, "unsupported regime: {what}"),
            Error::SingularSystem { memory_bits, state } => write!(
                f,
                "level system is singular (memory {memory_bits} bits, pivot lost at state {state:0width$b})",
                width = *memory_bits as usize
            ),
            Error::MissingObservation => {
                write!(f, "genie transmitter requires an interference observation")
            }
            Error::NoRoot(what) => write!(f, "no root: {what}"),
            Error::Calibration { target, low, high, mean_at_high } => write!(
                f,
                "cannot bracket power {target}: target rate interval [{low}, {high}] reaches mean rate {mean_at_high}"
            ),
            Error::Unnormalized { total } => {
                write!(f, "distribution sums to {total}, expected 1")
            }
            Error::TooLarge { what, bits, limit } => {
                write!(f, "{what}: {bits} bits exceeds the limit of {limit}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check(cond: bool, name: &'static str, value: f64) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value })
    }
}
