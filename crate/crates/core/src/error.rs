use thiserror::Error;

use crate::model::TraceRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("asymmetric entry at t={t}, ({i},{j}): {a} != {b}")]
    Asymmetric {
        t: usize,
        i: usize,
        j: usize,
        a: f64,
        b: f64,
    },
    #[error("asymmetric mask at t={t}, ({i},{j})")]
    AsymmetricMask { t: usize, i: usize, j: usize },
    #[error("non-finite value at t={t}, ({i},{j})")]
    NonFinite { t: usize, i: usize, j: usize },
    #[error("value {value} at t={t}, ({i},{j}) outside the {kind} domain")]
    Domain {
        kind: &'static str,
        t: usize,
        i: usize,
        j: usize,
        value: f64,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("matrix not positive definite in {context}{}", location(*node, *time))]
    NotPositiveDefinite {
        context: &'static str,
        node: Option<usize>,
        time: Option<usize>,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numeric failure in sweep {sweep}: {source}")]
    Fit {
        sweep: usize,
        #[source]
        source: Box<Error>,
        trace: Vec<TraceRecord>,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn location(node: Option<usize>, time: Option<usize>) -> String {
    match (node, time) {
        (Some(i), Some(t)) => format!(" (node {i}, time {t})"),
        (Some(i), None) => format!(" (node {i})"),
        (None, Some(t)) => format!(" (time {t})"),
        (None, None) => String::new(),
    }
}

impl Error {
    /// Attach a node index to a positive-definiteness failure.
    pub fn at_node(self, i: usize) -> Self {
        match self {
            Error::NotPositiveDefinite { context, time, .. } => Error::NotPositiveDefinite {
                context,
                node: Some(i),
                time,
            },
            other => other,
        }
    }
}
