//! Placement and migration policies.
//!
//! Every policy answers one question per pending transaction: where do its
//! new accounts go, and which existing accounts move before it executes.
//! The answer is a [`TxPlan`], a pure function of the transaction and of
//! snapshots of the mapping, the beacon loads and the alignment vectors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::mapping::MappingService;
use crate::types::{AccountId, CostModel, MigrationOp, ShardId, Transaction};
use crate::window::{AlignmentTable, AlignmentVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Hash,
    Partition,
    Scheduler,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Hash, PolicyKind::Partition, PolicyKind::Scheduler];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Hash => "hash",
            PolicyKind::Partition => "partition",
            PolicyKind::Scheduler => "scheduler",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hash" => Ok(PolicyKind::Hash),
            "partition" | "metis" => Ok(PolicyKind::Partition),
            "scheduler" => Ok(PolicyKind::Scheduler),
            other => Err(format!("unknown policy {other:?} (expected hash, partition or scheduler)")),
        }
    }
}

/// How the underlying blockchain commits cross-shard transactions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum CommitMode {
    /// Two-phase commit: transactions may span several shards.
    #[default]
    TwoPhase,
    /// Mutex-based: all accounts must sit in one shard before execution.
    Mutex,
}

impl CommitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CommitMode::TwoPhase => "2pc",
            CommitMode::Mutex => "mutex",
        }
    }
}

impl fmt::Display for CommitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommitMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "2pc" | "twopc" => Ok(CommitMode::TwoPhase),
            "mutex" => Ok(CommitMode::Mutex),
            other => Err(format!("unknown mode {other:?} (expected 2pc or mutex)")),
        }
    }
}

/// Hash placement: SHA-256 of the 32 identifier bytes, first 8 digest bytes
/// read as a big-endian `u64`, reduced modulo `k`.
pub fn hash_place(account: &AccountId, k: u32) -> ShardId {
    assert!(k >= 1, "shard count must be positive");
    let digest = Sha256::digest(account.as_bytes());
    let prefix = u64::from_be_bytes(digest[..8].try_into().expect("8 bytes"));
    ShardId((prefix % k as u64) as u32)
}

/// Lowest-load shard among `candidates`, ties to the lowest id.
fn lowest_load(candidates: impl IntoIterator<Item = ShardId>, loads: &[u64]) -> Option<ShardId> {
    candidates
        .into_iter()
        .min_by_key(|s| (loads.get(s.index()).copied().unwrap_or(0), *s))
}

/// Chooses the main shard of a transaction and places its new accounts
/// there. The main shard is the least loaded involved shard, or the least
/// loaded of all shards when every account is new.
pub fn select_main_shard(
    write_set: &[AccountId],
    mapping: &MappingService,
    loads: &[u64],
) -> (ShardId, Vec<(AccountId, ShardId)>) {
    let involved = mapping.involved_shards(write_set);
    let main = if involved.is_empty() {
        lowest_load((0..loads.len() as u32).map(ShardId), loads)
    } else {
        lowest_load(involved, loads)
    }
    .expect("at least one shard");
    let placements = write_set
        .iter()
        .filter(|a| !mapping.contains(a))
        .map(|a| (*a, main))
        .collect();
    (main, placements)
}

/// Migration test for an already placed account: migrate iff its alignment
/// toward its current shard, scaled by the cross-shard cost, is strictly
/// smaller than its alignment toward all other shards.
pub fn should_migrate(alignment: &AlignmentVector, current: ShardId, cross_shard_cost: u64) -> bool {
    let own = alignment.toward(current);
    let others = alignment.sum() - own;
    own.saturating_mul(cross_shard_cost) < others
}

/// Outcome of planning one transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TxPlan {
    pub tx_id: String,
    /// Set by the scheduler only.
    pub main_shard: Option<ShardId>,
    /// In write-set order.
    pub new_placements: Vec<(AccountId, ShardId)>,
    /// In write-set order.
    pub migrations: Vec<MigrationOp>,
    /// Shards of all write-set accounts after placements and migrations.
    pub final_shards: BTreeSet<ShardId>,
    /// Transaction charge per final shard, migrations excluded.
    pub per_shard_charges: BTreeMap<ShardId, u64>,
}

impl TxPlan {
    pub fn new(
        tx: &Transaction,
        mapping: &MappingService,
        cost: &CostModel,
        main_shard: Option<ShardId>,
        new_placements: Vec<(AccountId, ShardId)>,
        migrations: Vec<MigrationOp>,
    ) -> Self {
        let mut plan = TxPlan {
            tx_id: tx.tx_id.clone(),
            main_shard,
            new_placements,
            migrations,
            final_shards: BTreeSet::new(),
            per_shard_charges: BTreeMap::new(),
        };
        plan.recompute(tx, mapping, cost);
        plan
    }

    /// Shard of `account` once this plan is applied.
    pub fn shard_after(&self, account: &AccountId, mapping: &MappingService) -> Option<ShardId> {
        self.migrations
            .iter()
            .find(|m| m.account == *account)
            .map(|m| m.dest)
            .or_else(|| self.new_placements.iter().find(|(a, _)| a == account).map(|(_, s)| *s))
            .or_else(|| mapping.get(account))
    }

    /// Recomputes final shards and charges after editing placements or
    /// migrations.
    pub fn recompute(&mut self, tx: &Transaction, mapping: &MappingService, cost: &CostModel) {
        self.final_shards = tx
            .write_set
            .iter()
            .filter_map(|a| self.shard_after(a, mapping))
            .collect();
        let charge = cost.per_shard_charge(tx.base_cost, self.final_shards.len());
        self.per_shard_charges = self.final_shards.iter().map(|s| (*s, charge)).collect();
    }

    pub fn is_cross_shard(&self) -> bool {
        self.final_shards.len() > 1
    }

    /// Total charge per shard: the transaction charge plus every migration's
    /// cost on both its source and destination.
    pub fn total_charges(&self) -> BTreeMap<ShardId, u64> {
        let mut out = self.per_shard_charges.clone();
        for m in &self.migrations {
            *out.entry(m.source).or_insert(0) += m.cost;
            *out.entry(m.dest).or_insert(0) += m.cost;
        }
        out
    }

    /// Removes migrations whose source is `shard` (a shard refusing to let
    /// accounts leave).
    pub fn drop_migrations_from(
        &mut self,
        shard: ShardId,
        tx: &Transaction,
        mapping: &MappingService,
        cost: &CostModel,
    ) -> usize {
        let before = self.migrations.len();
        self.migrations.retain(|m| m.source != shard);
        let dropped = before - self.migrations.len();
        if dropped > 0 {
            self.recompute(tx, mapping, cost);
        }
        dropped
    }
}

/// Read-only inputs of a planning decision.
#[derive(Clone, Copy)]
pub struct PlanContext<'a> {
    pub mapping: &'a MappingService,
    /// Beacon-chain window loads indexed by shard.
    pub loads: &'a [u64],
    pub alignments: &'a AlignmentTable,
    pub cost: CostModel,
    pub mode: CommitMode,
    /// Allow size-proportional contract migrations under two-phase commit.
    pub ca_migration: bool,
}

impl PlanContext<'_> {
    pub fn shard_count(&self) -> u32 {
        self.loads.len() as u32
    }
}

/// A placement/migration policy.
pub trait PlacementPolicy: Send + Sync {
    fn kind(&self) -> PolicyKind;
    fn plan(&self, tx: &Transaction, ctx: &PlanContext<'_>) -> TxPlan;
}

/// Hash-based placement, never migrates.
#[derive(Clone, Debug, Default)]
pub struct HashPolicy;

impl PlacementPolicy for HashPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Hash
    }

    fn plan(&self, tx: &Transaction, ctx: &PlanContext<'_>) -> TxPlan {
        let k = ctx.shard_count();
        let placements = tx
            .write_set
            .iter()
            .filter(|a| !ctx.mapping.contains(a))
            .map(|a| (*a, hash_place(a, k)))
            .collect();
        TxPlan::new(tx, ctx.mapping, &ctx.cost, None, placements, Vec::new())
    }
}

/// Placement from a precomputed partition of the transaction graph, with
/// hash placement for accounts the partition does not cover. Never migrates.
#[derive(Clone, Debug, Default)]
pub struct PartitionPolicy {
    assignment: HashMap<AccountId, ShardId>,
}

impl PartitionPolicy {
    pub fn new(assignment: HashMap<AccountId, ShardId>) -> Self {
        PartitionPolicy { assignment }
    }

    pub fn assignment(&self) -> &HashMap<AccountId, ShardId> {
        &self.assignment
    }
}

impl PlacementPolicy for PartitionPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Partition
    }

    fn plan(&self, tx: &Transaction, ctx: &PlanContext<'_>) -> TxPlan {
        let k = ctx.shard_count();
        let placements = tx
            .write_set
            .iter()
            .filter(|a| !ctx.mapping.contains(a))
            .map(|a| {
                let shard = self
                    .assignment
                    .get(a)
                    .copied()
                    .filter(|s| s.0 < k)
                    .unwrap_or_else(|| hash_place(a, k));
                (*a, shard)
            })
            .collect();
        TxPlan::new(tx, ctx.mapping, &ctx.cost, None, placements, Vec::new())
    }
}

/// Load- and alignment-driven scheduler: picks a main shard, places new
/// accounts there and migrates existing accounts toward it.
#[derive(Clone, Debug, Default)]
pub struct SchedulerPolicy;

impl PlacementPolicy for SchedulerPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Scheduler
    }

    fn plan(&self, tx: &Transaction, ctx: &PlanContext<'_>) -> TxPlan {
        let (main, placements) = select_main_shard(&tx.write_set, ctx.mapping, ctx.loads);
        let empty = AlignmentVector::default();
        let mut migrations = Vec::new();
        for (account, kind) in tx.write_set.iter().zip(&tx.kinds) {
            let Some(current) = ctx.mapping.get(account) else {
                continue;
            };
            if current == main {
                continue;
            }
            let migrate = match ctx.mode {
                // mutex commits cannot span shards, contracts included
                CommitMode::Mutex => true,
                CommitMode::TwoPhase => {
                    (!kind.is_contract() || ctx.ca_migration)
                        && should_migrate(
                            ctx.alignments.get(account).unwrap_or(&empty),
                            current,
                            ctx.cost.cross_shard_cost,
                        )
                }
            };
            if migrate {
                migrations.push(MigrationOp {
                    account: *account,
                    source: current,
                    dest: main,
                    cost: ctx.cost.migration_cost(*kind),
                });
            }
        }
        TxPlan::new(tx, ctx.mapping, &ctx.cost, Some(main), placements, migrations)
    }
}

/// Builds the policy object for `kind`. The partition policy needs its
/// assignment; pass an empty map to fall back to hash placement.
pub fn make_policy(kind: PolicyKind, partition: Option<HashMap<AccountId, ShardId>>) -> Box<dyn PlacementPolicy> {
    match kind {
        PolicyKind::Hash => Box::new(HashPolicy),
        PolicyKind::Partition => Box::new(PartitionPolicy::new(partition.unwrap_or_default())),
        PolicyKind::Scheduler => Box::new(SchedulerPolicy),
    }
}
