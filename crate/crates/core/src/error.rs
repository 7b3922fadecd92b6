use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("integration failed at t = {t}: {msg}")]
    Integration { t: f64, msg: String },

    #[error("hessian propagation failed at t = {t}: {msg}")]
    Propagation { t: f64, msg: String },

    #[error("degenerate amplitude: {0}")]
    Degenerate(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        SimError::Config { key: key.into(), msg: msg.into() }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        SimError::Input(msg.into())
    }

    /// Process exit status used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config { .. } | SimError::Input(_) => 2,
            SimError::Integration { .. } | SimError::Propagation { .. } | SimError::Degenerate(_) => 3,
            SimError::Verification(_) => 4,
            SimError::Io { .. } => 1,
        }
    }

    /// Rewrites the time stamp of a time-tagged error.
    pub fn at_time(self, t: f64) -> Self {
        match self {
            SimError::Integration { msg, .. } => SimError::Integration { t, msg },
            SimError::Propagation { msg, .. } => SimError::Propagation { t, msg },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
