use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite value produced by `{op}` (tape node {node})")]
    NonFinite { op: &'static str, node: usize },

    #[error("rank-deficient design: rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("SVD failed to converge")]
    SvdFailure,

    #[error("no improving direction: fitted IV coefficient is zero")]
    NoImprovingDirection,

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("malformed container: {0}")]
    Container(String),
}

pub type Result<T> = std::result::Result<T, Error>;
