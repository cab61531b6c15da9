use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("gave up after {attempts} attempts while {what}")]
    RetryCap { what: &'static str, attempts: u32 },

    #[error("size limit exceeded: {0}")]
    Size(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{context}: {source}")]
    Cell {
        context: String,
        #[source]
        source: Box<LabError>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Domain(msg.into()))
}

impl LabError {
    /// Wraps `self` with the sweep cell (or other unit of work) it came from.
    pub fn in_cell(self, context: impl Into<String>) -> Self {
        LabError::Cell {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
