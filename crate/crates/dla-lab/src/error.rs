use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("linear system too large: {unknowns} unknowns exceeds limit {limit}")]
    SystemTooLarge { unknowns: usize, limit: usize },
    #[error("solver failed to converge: relative residual {residual:e}")]
    SolverDiverged { residual: f64 },
    #[error("empty solve domain at radius {radius}")]
    EmptyDomain { radius: i64 },
    #[error("site ({},{}) is not in the solve domain", site.0, site.1)]
    SiteOutsideDomain { site: (i64, i64) },
    #[error("site ({},{}) is not on the required boundary", site.0, site.1)]
    SiteNotOnBoundary { site: (i64, i64) },
    #[error("edge not present in table: ({},{}) -> ({},{})", edge.0, edge.1, edge.2, edge.3)]
    EdgeNotInTable { edge: (i64, i64, i64, i64) },
    #[error("launch radius {radius} does not clear the target (max target norm {target_norm:.1})")]
    LaunchInsideTarget { radius: i64, target_norm: f64 },
    #[error("window mismatch: laws were collected over different windows or time grids")]
    WindowMismatch,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty sample: {0}")]
    EmptySample(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
