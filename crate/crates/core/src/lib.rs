pub mod economics;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod mapping;
pub mod partition;
pub mod policy;
pub mod report;
pub mod seed;
pub mod types;
pub mod window;
pub mod workload;

pub use error::{Error, Result};
pub use mapping::MappingService;
pub use policy::{CommitMode, PlacementPolicy, PolicyKind, TxPlan};
pub use types::{AccountId, AccountKind, CostModel, MigrationOp, ShardId, Transaction};
pub use window::{AlignmentTable, AlignmentVector, ShardState};
pub use engine::{run, FinalSummary, RoundReport, SimConfig, SimOutput, Simulator};
