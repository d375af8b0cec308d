use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("{what} = {value} outside its domain [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("unsupported branch: {0}")]
    UnsupportedBranch(&'static str),

    #[error("solver failure in {what}: {detail}")]
    SolverFailure { what: &'static str, detail: String },

    #[error("no case switch point at mu0 = {mu0}: {detail}")]
    NoSwitchPoint { mu0: f64, detail: String },

    #[error("internal consistency: {0}")]
    InternalConsistency(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn solver(what: &'static str, detail: impl Into<String>) -> Self {
        Error::SolverFailure {
            what,
            detail: detail.into(),
        }
    }
}
