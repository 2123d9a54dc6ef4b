use std::fmt;

use thiserror::Error;

/// Cell coordinates attached to per-cell failures, when known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRef(pub Option<(usize, usize)>);

impl fmt::Display for CellRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some((x, y)) => write!(f, " at cell ({x}, {y})"),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid macroscopic state: {0}")]
    InvalidState(String),

    #[error("non-positive density {value}{cell}")]
    NegativeDensity { value: f64, cell: CellRef },

    #[error("non-positive temperature {value}{cell}")]
    NegativeTemperature { value: f64, cell: CellRef },

    #[error("temperature {value} is not representable on D2Q9 (must lie in (0, 1)){cell}")]
    LatticeRange { value: f64, cell: CellRef },

    #[error("equilibrium factor {value} is not positive (u = {u}, T = {temperature}){cell}")]
    Positivity {
        value: f64,
        u: f64,
        temperature: f64,
        cell: CellRef,
    },

    #[error("Newton closure Jacobian is singular{cell}")]
    ClosureSingular { cell: CellRef },

    #[error("network exponent {value} exceeds the saturation guard{cell}")]
    Saturation { value: f64, cell: CellRef },

    #[error("non-finite population value{cell}")]
    NonFinite { cell: CellRef },

    #[error("solver diverged at t = {t}: {cause}")]
    Divergence { t: u64, cause: Box<Error> },

    #[error("training aborted in epoch {epoch}: {cause}")]
    TrainingAborted { epoch: usize, cause: Box<Error> },

    #[error("backpropagation requested on an empty tape")]
    EmptyTape,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error describes a numerically broken state (as opposed to
    /// bad input or I/O). These abort a run as a divergence.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NegativeDensity { .. }
                | Error::NegativeTemperature { .. }
                | Error::LatticeRange { .. }
                | Error::Positivity { .. }
                | Error::ClosureSingular { .. }
                | Error::Saturation { .. }
                | Error::NonFinite { .. }
                | Error::Divergence { .. }
        )
    }

    /// Attach cell coordinates to a per-cell error.
    pub fn at(self, x: usize, y: usize) -> Self {
        let c = CellRef(Some((x, y)));
        match self {
            Error::NegativeDensity { value, .. } => Error::NegativeDensity { value, cell: c },
            Error::NegativeTemperature { value, .. } => {
                Error::NegativeTemperature { value, cell: c }
            }
            Error::LatticeRange { value, .. } => Error::LatticeRange { value, cell: c },
            Error::Positivity {
                value,
                u,
                temperature,
                ..
            } => Error::Positivity {
                value,
                u,
                temperature,
                cell: c,
            },
            Error::ClosureSingular { .. } => Error::ClosureSingular { cell: c },
            Error::Saturation { value, .. } => Error::Saturation { value, cell: c },
            Error::NonFinite { .. } => Error::NonFinite { cell: c },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) const NO_CELL: CellRef = CellRef(None);
