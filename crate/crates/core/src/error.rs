use std::path::PathBuf;

use thiserror::Error;

use crate::types::ShardId;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shard {shard} has {residual} capacity units left, {requested} requested")]
    InsufficientCapacity {
        shard: ShardId,
        residual: u64,
        requested: u64,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: transaction has an empty write set")]
    EmptyWriteSet { path: PathBuf, line: usize },

    #[error("invalid synthetic workload spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("vertex {0} is not covered by the partition")]
    UncoveredVertex(String),

    #[error("partition infeasible: {vertices} vertices do not fit in {clusters} clusters of at most {cap}")]
    Infeasible {
        vertices: usize,
        clusters: usize,
        cap: usize,
    },

    #[error("graph has {0} vertices, exhaustive partitioning is limited to {max}", max = crate::partition::BRUTEFORCE_MAX_VERTICES)]
    TooLarge(usize),

    #[error("self-loop on vertex {0}")]
    SelfLoop(String),

    #[error("miner {miner} is not assigned to shard {shard}")]
    WrongShard { miner: u32, shard: ShardId },

    #[error("simulation produced no rounds")]
    EmptyRun,

    #[error("empty workload")]
    EmptyWorkload,

    #[error("simulation stalled at round {round}: {pending} transactions can never be admitted")]
    Stalled { round: u64, pending: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
