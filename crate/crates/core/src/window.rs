//! Sliding-window bookkeeping: per-shard residual capacity and rolling load,
//! and per-account alignment vectors.
//!
//! Both windows are per-block rings of `W` buckets. The newest bucket is the
//! block currently being built; advancing a block evicts the oldest bucket.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::mapping::MappingService;
use crate::types::{AccountId, BlockHeight, CostModel, ShardId, Transaction};

/// Default sliding window length in blocks.
pub const DEFAULT_WINDOW: usize = 100;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShardState {
    id: ShardId,
    capacity_per_round: u64,
    residual: u64,
    load_window: VecDeque<u64>,
    window_sum: u64,
}

impl ShardState {
    pub fn new(id: ShardId, capacity_per_round: u64, window: usize) -> Self {
        assert!(window > 0, "window must be positive");
        ShardState {
            id,
            capacity_per_round,
            residual: capacity_per_round,
            load_window: std::iter::repeat_n(0, window).collect(),
            window_sum: 0,
        }
    }

    pub fn id(&self) -> ShardId {
        self.id
    }

    pub fn capacity_per_round(&self) -> u64 {
        self.capacity_per_round
    }

    pub fn residual(&self) -> u64 {
        self.residual
    }

    pub fn window_sum(&self) -> u64 {
        self.window_sum
    }

    /// Load charged in the block currently being built.
    pub fn current_load(&self) -> u64 {
        *self.load_window.back().expect("window is never empty")
    }

    pub fn load_window(&self) -> impl Iterator<Item = u64> + '_ {
        self.load_window.iter().copied()
    }

    pub fn can_afford(&self, amount: u64) -> bool {
        amount <= self.residual
    }

    /// Spends `amount` capacity units in the current block.
    pub fn charge(&mut self, amount: u64) -> Result<()> {
        if amount > self.residual {
            return Err(Error::InsufficientCapacity {
                shard: self.id,
                residual: self.residual,
                requested: amount,
            });
        }
        self.residual -= amount;
        *self.load_window.back_mut().expect("window is never empty") += amount;
        self.window_sum += amount;
        Ok(())
    }

    /// Closes the current block: evicts the oldest bucket, opens an empty one
    /// and resets the residual capacity.
    pub fn advance_block(&mut self) {
        let evicted = self.load_window.pop_front().unwrap_or(0);
        self.window_sum -= evicted;
        self.load_window.push_back(0);
        self.residual = self.capacity_per_round;
    }
}

/// Per-account accumulated transaction cost toward each shard over the last
/// `W` blocks. Only blocks with activity are stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AlignmentVector {
    buckets: VecDeque<(BlockHeight, Vec<(ShardId, u64)>)>,
    totals: BTreeMap<ShardId, u64>,
}

impl AlignmentVector {
    /// Alignment toward `shard`.
    pub fn toward(&self, shard: ShardId) -> u64 {
        self.totals.get(&shard).copied().unwrap_or(0)
    }

    pub fn sum(&self) -> u64 {
        self.totals.values().sum()
    }

    pub fn totals(&self) -> &BTreeMap<ShardId, u64> {
        &self.totals
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    fn add(&mut self, block: BlockHeight, shard: ShardId, amount: u64) {
        if amount == 0 {
            return;
        }
        match self.buckets.back_mut() {
            Some((b, deltas)) if *b == block => match deltas.iter_mut().find(|(s, _)| *s == shard) {
                Some((_, v)) => *v += amount,
                None => deltas.push((shard, amount)),
            },
            _ => self.buckets.push_back((block, vec![(shard, amount)])),
        }
        *self.totals.entry(shard).or_insert(0) += amount;
    }

    /// Drops every bucket older than `oldest_kept`.
    fn evict_before(&mut self, oldest_kept: BlockHeight) {
        while let Some((b, _)) = self.buckets.front() {
            if *b >= oldest_kept {
                break;
            }
            let (_, deltas) = self.buckets.pop_front().unwrap();
            for (shard, v) in deltas {
                let t = self.totals.get_mut(&shard).expect("total exists for every delta");
                *t -= v;
                if *t == 0 {
                    self.totals.remove(&shard);
                }
            }
        }
    }

    /// Totals recomputed from the retained buckets.
    pub fn recompute_totals(&self) -> BTreeMap<ShardId, u64> {
        let mut out = BTreeMap::new();
        for (_, deltas) in &self.buckets {
            for (s, v) in deltas {
                *out.entry(*s).or_insert(0) += v;
            }
        }
        out.retain(|_, v| *v > 0);
        out
    }
}

/// Alignment vectors of all accounts with activity inside the window.
/// Accounts with all-zero totals are not stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignmentTable {
    window: usize,
    block: BlockHeight,
    vectors: HashMap<AccountId, AlignmentVector>,
}

impl AlignmentTable {
    pub fn new(window: usize) -> Self {
        assert!(window > 0, "window must be positive");
        AlignmentTable {
            window,
            block: 0,
            vectors: HashMap::new(),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn current_block(&self) -> BlockHeight {
        self.block
    }

    pub fn get(&self, account: &AccountId) -> Option<&AlignmentVector> {
        self.vectors.get(account)
    }

    /// Alignment toward `shard`, zero for accounts without a vector.
    pub fn toward(&self, account: &AccountId, shard: ShardId) -> u64 {
        self.get(account).map_or(0, |v| v.toward(shard))
    }

    pub fn sum(&self, account: &AccountId) -> u64 {
        self.get(account).map_or(0, |v| v.sum())
    }

    /// Number of vectors held in memory.
    pub fn live_vectors(&self) -> usize {
        self.vectors.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AccountId, &AlignmentVector)> {
        self.vectors.iter()
    }

    pub fn add(&mut self, account: AccountId, shard: ShardId, amount: u64) {
        if amount == 0 {
            return;
        }
        let block = self.block;
        self.vectors.entry(account).or_default().add(block, shard, amount);
    }

    /// Zeroes an account's vector (on migration).
    pub fn clear(&mut self, account: &AccountId) {
        self.vectors.remove(account);
    }

    /// Applies the pairwise update for an executed transaction: for every
    /// ordered pair `(i, j)` of distinct accounts, the alignment of `i`
    /// toward `φ(j)` grows by the per-shard charge of the transaction.
    /// Accounts without an assignment are ignored.
    pub fn update_alignments(&mut self, tx: &Transaction, mapping: &MappingService, cost: &CostModel) {
        let placed: Vec<(AccountId, ShardId)> = tx
            .write_set
            .iter()
            .filter_map(|a| mapping.get(a).map(|s| (*a, s)))
            .collect();
        if placed.len() < 2 {
            return;
        }
        let mut shards: Vec<ShardId> = placed.iter().map(|(_, s)| *s).collect();
        shards.sort_unstable();
        shards.dedup();
        let charge = cost.per_shard_charge(tx.base_cost, shards.len());
        for (i, (acc, _)) in placed.iter().enumerate() {
            for (j, (_, other_shard)) in placed.iter().enumerate() {
                if i != j {
                    self.add(*acc, *other_shard, charge);
                }
            }
        }
    }

    /// Closes the current block and evicts buckets that fell out of the
    /// window. Vectors left empty are dropped.
    pub fn advance_block(&mut self) {
        self.block += 1;
        let oldest_kept = (self.block + 1).saturating_sub(self.window as u64);
        self.vectors.retain(|_, v| {
            v.evict_before(oldest_kept);
            !v.is_empty()
        });
    }
}

/// Closes the current block on every shard and on the alignment table.
pub fn advance_block(shards: &mut [ShardState], alignments: &mut AlignmentTable) {
    for shard in shards.iter_mut() {
        shard.advance_block();
    }
    alignments.advance_block();
}
