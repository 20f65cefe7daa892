use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} must be finite")]
    NonFinite(&'static str),

    #[error("{what} is not normalized (|norm^2 - 1| = {deviation:.3e})")]
    NotNormalized { what: &'static str, deviation: f64 },

    #[error("state vector has zero norm")]
    ZeroState,

    #[error("{name} = {value} outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("both players must use the same strategy kind (two unitaries or two gates)")]
    MixedStrategyKinds,

    #[error("degenerate game: mixed-strategy denominator for player {player} is zero")]
    DegenerateGame { player: char },

    #[error("no interior mixed equilibrium (p = {p}, q = {q})")]
    NoInteriorEquilibrium { p: f64, q: f64 },

    #[error("unknown {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },

    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("policy {policy} cannot run on the {scenario} scenario")]
    InvalidPolicy { policy: String, scenario: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Errors caused by bad input or configuration rather than a failure
    /// while running.
    pub fn is_usage(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_range(name: &'static str, value: f64, min: f64, max: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::NonFinite(name));
    }
    if value < min || value > max {
        return Err(Error::OutOfRange {
            name,
            value,
            min,
            max,
        });
    }
    Ok(())
}
