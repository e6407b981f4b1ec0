use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::policy::{CommitMode, PolicyKind};
use crate::types::ShardId;
use crate::window::DEFAULT_WINDOW;

/// Which shard loads planning sees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum LoadView {
    /// Window sums including the charges already admitted this round.
    #[default]
    Live,
    /// Window sums published at the end of the previous round.
    Beacon,
}

impl LoadView {
    pub fn as_str(self) -> &'static str {
        match self {
            LoadView::Live => "live",
            LoadView::Beacon => "beacon",
        }
    }
}

impl fmt::Display for LoadView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LoadView {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "live" => Ok(LoadView::Live),
            "beacon" => Ok(LoadView::Beacon),
            other => Err(Error::Config(format!("unknown load view {other:?} (expected live or beacon)"))),
        }
    }
}

/// Parameters of one simulation run.
#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub shards: u32,
    /// Per-shard cost multiplier of a cross-shard transaction.
    pub cross_shard_cost: u64,
    /// Capacity units per shard per round.
    pub capacity: u64,
    /// Mempool size as a multiple of total per-round capacity.
    pub mempool_ratio: f64,
    /// Sliding window in blocks.
    pub window: usize,
    pub policy: PolicyKind,
    pub mode: CommitMode,
    pub ca_migration: bool,
    pub economics: bool,
    /// Rounds per epoch.
    pub epoch_length: u64,
    pub miners_per_shard: u32,
    pub seed: u64,
    /// Stop after this many rounds; `None` runs until the workload drains.
    pub max_rounds: Option<u64>,
    /// A shard that vetoes every migration out of it.
    pub refuse_outgoing_from: Option<ShardId>,
    /// Load figures the planner reads.
    pub load_view: LoadView,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            shards: 16,
            cross_shard_cost: 2,
            capacity: 200,
            mempool_ratio: 1.0,
            window: DEFAULT_WINDOW,
            policy: PolicyKind::Scheduler,
            mode: CommitMode::TwoPhase,
            ca_migration: false,
            economics: false,
            epoch_length: 100,
            miners_per_shard: 4,
            seed: 0,
            max_rounds: None,
            refuse_outgoing_from: None,
            load_view: LoadView::Live,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("shards", self.shards as u64),
            ("cross-cost", self.cross_shard_cost),
            ("capacity", self.capacity),
            ("window", self.window as u64),
            ("epoch-length", self.epoch_length),
            ("miners-per-shard", self.miners_per_shard as u64),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.mempool_ratio.is_finite() && self.mempool_ratio > 0.0) {
            return Err(Error::Config(format!("mempool-ratio must be positive, got {}", self.mempool_ratio)));
        }
        if self.max_rounds == Some(0) {
            return Err(Error::Config("max-rounds must be positive".into()));
        }
        if let Some(s) = self.refuse_outgoing_from {
            if s.0 >= self.shards {
                return Err(Error::Config(format!("shard {s} out of range")));
            }
        }
        Ok(())
    }

    /// `ceil(r * k * C)`, at least one.
    pub fn mempool_size(&self) -> usize {
        let size = (self.mempool_ratio * self.shards as f64 * self.capacity as f64).ceil();
        (size as usize).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_mempool() {
        let c = SimConfig::default();
        c.validate().unwrap();
        assert_eq!(c.mempool_size(), 3200);
        let c = SimConfig {
            shards: 1,
            capacity: 2,
            mempool_ratio: 2.5,
            ..SimConfig::default()
        };
        assert_eq!(c.mempool_size(), 5);
        let c = SimConfig {
            mempool_ratio: 0.01,
            shards: 1,
            capacity: 1,
            ..SimConfig::default()
        };
        assert_eq!(c.mempool_size(), 1);
    }

    #[test]
    fn load_view_parses() {
        assert_eq!("live".parse::<LoadView>().unwrap(), LoadView::Live);
        assert_eq!("Beacon".parse::<LoadView>().unwrap(), LoadView::Beacon);
        assert!("lagged".parse::<LoadView>().is_err());
    }

    #[test]
    fn rejects_nonpositive() {
        for bad in [
            SimConfig { shards: 0, ..Default::default() },
            SimConfig { capacity: 0, ..Default::default() },
            SimConfig { mempool_ratio: 0.0, ..Default::default() },
            SimConfig { mempool_ratio: f64::NAN, ..Default::default() },
            SimConfig { window: 0, ..Default::default() },
            SimConfig { max_rounds: Some(0), ..Default::default() },
            SimConfig { refuse_outgoing_from: Some(ShardId(16)), ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
        }
    }
}
