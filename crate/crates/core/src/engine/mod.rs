//! Round-based simulation loop.
//!
//! Each round tops up the FIFO mempool from the workload, walks it in
//! arrival order planning and admitting transactions against the per-round
//! shard capacity, publishes the shard loads and closes the block.
//!
//! Planning reads per-shard window loads either live (updated after every
//! admitted transaction) or as the snapshot published at the end of the
//! previous round, see [`LoadView`].

mod config;

use std::collections::VecDeque;

pub use config::{LoadView, SimConfig};

use crate::economics::EpochLedger;
use crate::error::{Error, Result};
use crate::mapping::MappingService;
use crate::partition::partition_workload;
use crate::policy::{make_policy, PlacementPolicy, PlanContext, PolicyKind, TxPlan};
use crate::seed::derive_seed;
use crate::types::{CostModel, ShardId, Transaction};
use crate::window::{self, AlignmentTable, ShardState};

/// Result of an admission attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Executed,
    Deferred,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Pending {
    index: usize,
    first_seen: u64,
}

/// Per-round metrics.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RoundReport {
    pub round: u64,
    pub mempool_start: usize,
    pub topped_up: usize,
    pub executed: usize,
    pub mempool_end: usize,
    /// Capacity units spent per shard, migrations included.
    pub processed_cost: Vec<u64>,
    pub residuals: Vec<u64>,
    pub migrations: u64,
    pub cross_shard: u64,
    /// Rounds spent in the mempool by each transaction executed this round.
    pub latencies: Vec<u64>,
}

impl RoundReport {
    pub fn wasted(&self) -> u64 {
        self.residuals.iter().sum()
    }
}

/// Aggregate metrics of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct FinalSummary {
    pub rounds: u64,
    pub executed: u64,
    pub cross_shard: u64,
    pub migrations: u64,
    /// Mean transactions executed per round.
    pub throughput: f64,
    /// Mean rounds between mempool entry and execution.
    pub mean_latency: f64,
    /// Residual capacity summed over shards and rounds.
    pub wasted_capacity: u64,
    /// Cross-shard executions plus migrations, over executions plus
    /// migrations.
    pub cross_shard_ratio: f64,
    /// Transactions left in the mempool at the end.
    pub pending: u64,
}

/// Aggregates round reports.
pub fn finalize(reports: &[RoundReport]) -> Result<FinalSummary> {
    let last = reports.last().ok_or(Error::EmptyRun)?;
    let rounds = reports.len() as u64;
    let executed: u64 = reports.iter().map(|r| r.executed as u64).sum();
    let cross_shard: u64 = reports.iter().map(|r| r.cross_shard).sum();
    let migrations: u64 = reports.iter().map(|r| r.migrations).sum();
    let latency_sum: u64 = reports.iter().flat_map(|r| &r.latencies).sum();
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(FinalSummary {
        rounds,
        executed,
        cross_shard,
        migrations,
        throughput: ratio(executed, rounds),
        mean_latency: ratio(latency_sum, executed),
        wasted_capacity: reports.iter().map(RoundReport::wasted).sum(),
        cross_shard_ratio: ratio(cross_shard + migrations, executed + migrations),
        pending: last.mempool_end as u64,
    })
}

/// Everything a run produces.
#[derive(Debug)]
pub struct SimOutput {
    pub rounds: Vec<RoundReport>,
    pub summary: FinalSummary,
    pub ledger: Option<EpochLedger>,
    pub mapping: MappingService,
}

/// Planning inputs and result handed to a step observer before admission.
pub struct PlanView<'a> {
    pub round: u64,
    pub tx: &'a Transaction,
    pub plan: &'a TxPlan,
    pub context: PlanContext<'a>,
}

pub struct Simulator<'w> {
    config: SimConfig,
    cost: CostModel,
    policy: Box<dyn PlacementPolicy>,
    workload: &'w [Transaction],
    next: usize,
    mempool: VecDeque<Pending>,
    mempool_size: usize,
    mapping: MappingService,
    shards: Vec<ShardState>,
    alignments: AlignmentTable,
    beacon: Vec<u64>,
    live: Vec<u64>,
    round: u64,
    idle_rounds: u64,
    ledger: Option<EpochLedger>,
}

impl std::fmt::Debug for Simulator<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator")
            .field("round", &self.round)
            .field("policy", &self.policy.kind())
            .field("next", &self.next)
            .field("mempool", &self.mempool.len())
            .finish_non_exhaustive()
    }
}

/// Builds the policy of `config`; the partition baseline partitions the
/// co-occurrence graph of the whole workload up front.
pub fn build_policy(config: &SimConfig, workload: &[Transaction]) -> Result<Box<dyn PlacementPolicy>> {
    let partition = match config.policy {
        PolicyKind::Partition => Some(partition_workload(
            workload,
            config.shards as usize,
            derive_seed(config.seed, "partition"),
        )?),
        _ => None,
    };
    Ok(make_policy(config.policy, partition))
}

impl<'w> Simulator<'w> {
    pub fn new(config: SimConfig, workload: &'w [Transaction]) -> Result<Self> {
        config.validate()?;
        let policy = build_policy(&config, workload)?;
        Self::with_policy(config, workload, policy)
    }

    pub fn with_policy(config: SimConfig, workload: &'w [Transaction], policy: Box<dyn PlacementPolicy>) -> Result<Self> {
        config.validate()?;
        if workload.is_empty() {
            return Err(Error::EmptyWorkload);
        }
        let k = config.shards;
        let ledger = if config.economics {
            Some(EpochLedger::new(
                k,
                config.miners_per_shard,
                config.epoch_length,
                derive_seed(config.seed, "economics"),
            )?)
        } else {
            None
        };
        Ok(Simulator {
            cost: CostModel::new(config.cross_shard_cost),
            policy,
            workload,
            next: 0,
            mempool: VecDeque::new(),
            mempool_size: config.mempool_size(),
            mapping: MappingService::new(),
            shards: (0..k).map(|s| ShardState::new(ShardId(s), config.capacity, config.window)).collect(),
            alignments: AlignmentTable::new(config.window),
            beacon: vec![0; k as usize],
            live: vec![0; k as usize],
            round: 0,
            idle_rounds: 0,
            ledger,
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn mapping(&self) -> &MappingService {
        &self.mapping
    }

    pub fn alignments(&self) -> &AlignmentTable {
        &self.alignments
    }

    pub fn shards(&self) -> &[ShardState] {
        &self.shards
    }

    /// Window loads as published at the end of the previous round.
    pub fn beacon_loads(&self) -> &[u64] {
        &self.beacon
    }

    /// Window loads including this round's admitted charges.
    pub fn live_loads(&self) -> &[u64] {
        &self.live
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn mempool_len(&self) -> usize {
        self.mempool.len()
    }

    /// Transactions in the mempool, FIFO order.
    pub fn mempool(&self) -> impl Iterator<Item = &'w Transaction> + '_ {
        self.mempool.iter().map(|p| &self.workload[p.index])
    }

    pub fn ledger(&self) -> Option<&EpochLedger> {
        self.ledger.as_ref()
    }

    pub fn is_drained(&self) -> bool {
        self.next == self.workload.len() && self.mempool.is_empty()
    }

    fn context(&self) -> PlanContext<'_> {
        PlanContext {
            mapping: &self.mapping,
            loads: match self.config.load_view {
                LoadView::Live => &self.live,
                LoadView::Beacon => &self.beacon,
            },
            alignments: &self.alignments,
            cost: self.cost,
            mode: self.config.mode,
            ca_migration: self.config.ca_migration,
        }
    }

    /// Plans `tx` against the current mapping, alignments and loads.
    pub fn plan(&self, tx: &Transaction) -> TxPlan {
        let mut plan = self.policy.plan(tx, &self.context());
        if let Some(shard) = self.config.refuse_outgoing_from {
            plan.drop_migrations_from(shard, tx, &self.mapping, &self.cost);
        }
        plan
    }

    /// Admits `tx` with `plan` if every touched shard can pay its full
    /// charge this round; otherwise changes nothing.
    pub fn try_execute(&mut self, tx: &Transaction, plan: &TxPlan) -> Outcome {
        let charges = plan.total_charges();
        if !charges.iter().all(|(s, c)| self.shards[s.index()].can_afford(*c)) {
            return Outcome::Deferred;
        }
        for (s, c) in &charges {
            self.shards[s.index()].charge(*c).expect("affordability checked above");
            self.live[s.index()] = self.shards[s.index()].window_sum();
        }
        for (account, shard) in &plan.new_placements {
            self.mapping.place(*account, *shard);
        }
        for m in &plan.migrations {
            self.mapping.migrate(&m.account, m.dest);
            self.alignments.clear(&m.account);
        }
        self.alignments.update_alignments(tx, &self.mapping, &self.cost);
        Outcome::Executed
    }

    /// Runs one round.
    pub fn step(&mut self) -> Result<RoundReport> {
        self.step_observed(|_| {})
    }

    /// Runs one round, showing every plan to `observer` before admission.
    pub fn step_observed(&mut self, mut observer: impl FnMut(PlanView<'_>)) -> Result<RoundReport> {
        let round = self.round;
        let k = self.shards.len();
        let mempool_start = self.mempool.len();
        let mut topped_up = 0;
        while self.mempool.len() < self.mempool_size && self.next < self.workload.len() {
            self.mempool.push_back(Pending {
                index: self.next,
                first_seen: round,
            });
            self.next += 1;
            topped_up += 1;
        }

        let mut report = RoundReport {
            round,
            mempool_start,
            topped_up,
            ..RoundReport::default()
        };
        let pending = std::mem::take(&mut self.mempool);
        let mut retained = VecDeque::with_capacity(pending.len());
        let workload = self.workload;
        for p in pending {
            let tx = &workload[p.index];
            let plan = self.plan(tx);
            observer(PlanView {
                round,
                tx,
                plan: &plan,
                context: self.context(),
            });
            match self.try_execute(tx, &plan) {
                Outcome::Executed => {
                    report.executed += 1;
                    report.migrations += plan.migrations.len() as u64;
                    report.cross_shard += plan.is_cross_shard() as u64;
                    report.latencies.push(round - p.first_seen);
                    if let Some(ledger) = &mut self.ledger {
                        ledger.record_tx(round, &plan.final_shards, tx.fee);
                    }
                }
                Outcome::Deferred => retained.push_back(p),
            }
        }
        self.mempool = retained;
        report.mempool_end = self.mempool.len();
        report.processed_cost = self.shards.iter().map(|s| s.current_load()).collect();
        report.residuals = self.shards.iter().map(|s| s.residual()).collect();
        debug_assert_eq!(report.processed_cost.len(), k);

        // published with the block header, visible to the next round
        self.beacon = self.shards.iter().map(|s| s.window_sum()).collect();
        window::advance_block(&mut self.shards, &mut self.alignments);
        self.live = self.shards.iter().map(|s| s.window_sum()).collect();
        if let Some(ledger) = &mut self.ledger {
            ledger.end_round();
        }
        self.round += 1;

        if report.executed == 0 && !self.mempool.is_empty() {
            self.idle_rounds += 1;
            if self.idle_rounds > self.config.window as u64 {
                return Err(Error::Stalled {
                    round,
                    pending: self.mempool.len(),
                });
            }
        } else {
            self.idle_rounds = 0;
        }
        Ok(report)
    }

    /// Runs until the workload drains or `max_rounds` is reached.
    pub fn run(mut self) -> Result<SimOutput> {
        let mut rounds = Vec::new();
        while !self.is_drained() && self.config.max_rounds.is_none_or(|m| self.round < m) {
            rounds.push(self.step()?);
        }
        if let Some(ledger) = &mut self.ledger {
            ledger.finish();
        }
        let summary = finalize(&rounds)?;
        Ok(SimOutput {
            rounds,
            summary,
            ledger: self.ledger,
            mapping: self.mapping,
        })
    }
}

/// Convenience wrapper: builds the simulator and runs it.
pub fn run(config: SimConfig, workload: &[Transaction]) -> Result<SimOutput> {
    Simulator::new(config, workload)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{hash_place, CommitMode};
    use crate::types::{AccountId, MigrationOp};

    fn acc(i: u64) -> AccountId {
        AccountId::synthetic("engine", i)
    }

    /// Accounts with a known hash shard under `k`.
    fn accounts_on(shard: u32, k: u32, count: usize) -> Vec<AccountId> {
        (0..).map(acc).filter(|a| hash_place(a, k) == ShardId(shard)).take(count).collect()
    }

    fn single_shard_config() -> SimConfig {
        SimConfig {
            shards: 1,
            capacity: 2,
            mempool_ratio: 2.5,
            policy: PolicyKind::Hash,
            ..SimConfig::default()
        }
    }

    #[test]
    fn single_shard_fifo_scenario() {
        let txs: Vec<_> = (0..5).map(|i| Transaction::new(format!("t{i}"), i, [acc(i)], 1)).collect();
        let out = run(single_shard_config(), &txs).unwrap();
        assert_eq!(out.rounds.len(), 3);
        let latencies: Vec<u64> = out.rounds.iter().flat_map(|r| r.latencies.clone()).collect();
        assert_eq!(latencies, [0, 0, 1, 1, 2]);
        assert!((out.summary.throughput - 5.0 / 3.0).abs() < 1e-12);
        assert!((out.summary.mean_latency - 0.8).abs() < 1e-12);
        assert_eq!(out.summary.wasted_capacity, 1);
        assert_eq!(out.summary.cross_shard_ratio, 0.0);
    }

    #[test]
    fn perfectly_spread_workload_runs_in_one_round() {
        let (k, c) = (4u32, 5usize);
        let mut txs = Vec::new();
        for s in 0..k {
            for a in accounts_on(s, k, c) {
                txs.push(Transaction::new(format!("t{}", txs.len()), txs.len() as u64, [a], 1));
            }
        }
        let config = SimConfig {
            shards: k,
            capacity: c as u64,
            policy: PolicyKind::Hash,
            ..SimConfig::default()
        };
        let out = run(config, &txs).unwrap();
        assert_eq!(out.rounds.len(), 1);
        assert_eq!(out.summary.throughput, (k as usize * c) as f64);
        assert_eq!(out.summary.wasted_capacity, 0);
    }

    #[test]
    fn migration_charges_compose() {
        let k = 2;
        let a = accounts_on(0, k, 1)[0];
        let b = accounts_on(1, k, 1)[0];
        let tx = Transaction::new("t", 0, [a, b], 1);
        let plan_for = |sim: &Simulator| {
            let mut plan = TxPlan::new(
                &tx,
                &sim.mapping,
                &sim.cost,
                Some(ShardId(1)),
                vec![],
                vec![MigrationOp {
                    account: a,
                    source: ShardId(0),
                    dest: ShardId(1),
                    cost: 2,
                }],
            );
            plan.recompute(&tx, &sim.mapping, &sim.cost);
            plan
        };
        for (residual_src, residual_dst, expect) in [
            (2, 3, Outcome::Executed),
            (1, 3, Outcome::Deferred),
            (2, 2, Outcome::Deferred),
        ] {
            let txs = [tx.clone()];
            let config = SimConfig {
                shards: k,
                capacity: 10,
                ..SimConfig::default()
            };
            let mut sim = Simulator::new(config, &txs).unwrap();
            sim.mapping.place(a, ShardId(0));
            sim.mapping.place(b, ShardId(1));
            sim.shards[0].charge(10 - residual_src).unwrap();
            sim.shards[1].charge(10 - residual_dst).unwrap();
            let plan = plan_for(&sim);
            assert_eq!(plan.total_charges(), [(ShardId(0), 2), (ShardId(1), 3)].into());
            assert_eq!(sim.try_execute(&tx, &plan), expect);
            if expect == Outcome::Executed {
                assert_eq!(sim.shards[0].residual(), 0);
                assert_eq!(sim.shards[1].residual(), 0);
                assert_eq!(sim.mapping.get(&a), Some(ShardId(1)));
            }
        }
    }

    #[test]
    fn deferred_cross_shard_mutates_nothing() {
        let k = 2;
        let a = accounts_on(0, k, 1)[0];
        let b = accounts_on(1, k, 1)[0];
        let txs = [Transaction::new("t", 0, [a, b], 1)];
        let config = SimConfig {
            shards: k,
            capacity: 3,
            policy: PolicyKind::Hash,
            ..SimConfig::default()
        };
        let mut sim = Simulator::new(config, &txs).unwrap();
        sim.shards[0].charge(2).unwrap();
        let plan = sim.plan(&txs[0]);
        assert_eq!(plan.per_shard_charges, [(ShardId(0), 2), (ShardId(1), 2)].into());
        let (mapping, alignments, shards) = (sim.mapping.clone(), sim.alignments.clone(), sim.shards.clone());
        assert_eq!(sim.try_execute(&txs[0], &plan), Outcome::Deferred);
        assert_eq!(sim.mapping, mapping);
        assert_eq!(sim.alignments, alignments);
        assert_eq!(sim.shards, shards);
    }

    #[test]
    fn migrated_account_keeps_only_the_new_charge() {
        let k = 2;
        let a = accounts_on(0, k, 1)[0];
        let b = accounts_on(1, k, 1)[0];
        let txs = [Transaction::new("t", 0, [a, b], 1)];
        let config = SimConfig {
            shards: k,
            mode: CommitMode::Mutex,
            ..SimConfig::default()
        };
        let mut sim = Simulator::new(config, &txs).unwrap();
        sim.mapping.place(a, ShardId(0));
        sim.mapping.place(b, ShardId(1));
        sim.alignments.add(a, ShardId(0), 50);
        sim.live = vec![9, 1];
        let plan = sim.plan(&txs[0]);
        assert_eq!(plan.migrations.len(), 1);
        assert_eq!(sim.try_execute(&txs[0], &plan), Outcome::Executed);
        // history dropped, only this transaction's charge toward b remains
        let v = sim.alignments.get(&a).unwrap();
        assert_eq!(v.totals(), &[(ShardId(1), 1)].into());
    }

    #[test]
    fn load_view_controls_new_account_placement() {
        let txs: Vec<_> = (0..2).map(|i| Transaction::new(format!("t{i}"), i, [acc(i)], 1)).collect();
        for (view, expected) in [(LoadView::Live, [0, 1]), (LoadView::Beacon, [0, 0])] {
            let config = SimConfig {
                shards: 2,
                load_view: view,
                ..SimConfig::default()
            };
            let out = run(config, &txs).unwrap();
            let placed: Vec<u32> = (0..2).map(|i| out.mapping.get(&acc(i)).unwrap().0).collect();
            assert_eq!(placed, expected, "{view}");
        }
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(matches!(Simulator::new(SimConfig::default(), &[]), Err(Error::EmptyWorkload)));
        assert!(matches!(finalize(&[]), Err(Error::EmptyRun)));
    }

    #[test]
    fn max_rounds_stops_early() {
        let txs: Vec<_> = (0..50).map(|i| Transaction::new(format!("t{i}"), i, [acc(i)], 1)).collect();
        let config = SimConfig {
            max_rounds: Some(3),
            ..single_shard_config()
        };
        let out = run(config, &txs).unwrap();
        assert_eq!(out.summary.rounds, 3);
        assert_eq!(out.summary.executed, 6);
        assert_eq!(out.summary.pending, 3);
    }

    #[test]
    fn oversized_transaction_stalls() {
        let k = 2;
        let a = accounts_on(0, k, 1)[0];
        let b = accounts_on(1, k, 1)[0];
        let txs = [Transaction::new("t", 0, [a, b], 1)];
        let config = SimConfig {
            shards: k,
            capacity: 1,
            window: 3,
            policy: PolicyKind::Hash,
            ..SimConfig::default()
        };
        assert!(matches!(run(config, &txs), Err(Error::Stalled { pending: 1, .. })));
    }
}
