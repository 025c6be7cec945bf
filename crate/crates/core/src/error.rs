use std::path::PathBuf;

use crate::model::Violation;

pub type Result<T, E = PlanError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("invalid instance: {}", summarize(.0))]
    InvalidInstance(Vec<Violation>),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("route {route} window [{lo}, {hi}] s lies outside the horizon {horizon} s")]
    WindowOutsideHorizon {
        route: String,
        lo: i64,
        hi: i64,
        horizon: i64,
    },

    #[error("infeasible: no pod can reach route {route}")]
    InfeasibleRoute { route: String },

    #[error("infeasible interval for pod {pod} ({category}) at dt={dt}s: {reason}")]
    InfeasibleInterval {
        pod: usize,
        category: String,
        dt: i64,
        reason: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("flow contract violated: {0}")]
    Contract(String),

    #[error("oracle refused input: {0}")]
    OracleLimit(String),

    #[error("GTFS table {table}: {message}")]
    Gtfs { table: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl PlanError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PlanError::Io {
            path: path.into(),
            source,
        }
    }

    /// Infeasibility is a property of the data, not of the caller's input.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            PlanError::InfeasibleRoute { .. } | PlanError::InfeasibleInterval { .. }
        )
    }
}

fn summarize(violations: &[Violation]) -> String {
    let mut parts: Vec<String> = violations.iter().take(3).map(|v| v.to_string()).collect();
    if violations.len() > 3 {
        parts.push(format!("... and {} more", violations.len() - 3));
    }
    parts.join("; ")
}
