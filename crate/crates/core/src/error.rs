use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A value or entity violates a documented invariant.
    #[error("invalid {entity} `{id}`: field `{field}` {reason}")]
    Invalid {
        entity: &'static str,
        id: String,
        field: &'static str,
        reason: String,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("duplicate {entity} id `{id}`")]
    DuplicateId { entity: &'static str, id: String },

    #[error("{entity} `{id}` references unknown {target} `{reference}`")]
    UnknownReference {
        entity: &'static str,
        id: String,
        target: &'static str,
        reference: String,
    },

    #[error(
        "exact solver supports at most {cap} clients, batch has {clients}; use the greedy solver"
    )]
    ExactCapExceeded { clients: usize, cap: usize },

    #[error("plan conflicts with current capacities: {0}")]
    Conflict(String),

    #[error("client `{0}` has no active allocation")]
    NotAllocated(String),

    #[error("no candidate with positive bandwidth")]
    NoCandidate,

    #[error("zero baseline bandwidth (dead direct path)")]
    DeadDirectPath,

    #[error("empty input to {0}")]
    Empty(&'static str),

    #[error("I/O error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("CSV error on {}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(
        entity: &'static str,
        id: impl Into<String>,
        field: &'static str,
        reason: impl Into<String>,
    ) -> Self {
        Error::Invalid {
            entity,
            id: id.into(),
            field,
            reason: reason.into(),
        }
    }
}
