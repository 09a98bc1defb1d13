use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the hologram design and simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent or out-of-range configuration (grid sizes, pitches, units).
    #[error("configuration error: {0}")]
    Config(String),

    /// A requested position lies outside the representable region.
    #[error("range error: {0}")]
    Range(String),

    /// Propagation distance too large for the sampled grid.
    #[error(
        "sampling error: |distance| = {distance:.4e} m exceeds the unaliased bound; use at most {max_distance:.4e} m"
    )]
    Sampling { distance: f64, max_distance: f64 },

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    /// Illumination beyond the device damage threshold.
    #[error("device damage: beam intensity {intensity:.4e} W/m^2 exceeds limit {limit:.4e} W/m^2")]
    DeviceDamage { intensity: f64, limit: f64 },

    #[error("detection error: {0}")]
    Detection(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
