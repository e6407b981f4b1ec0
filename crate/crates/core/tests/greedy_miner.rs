//! A coalition holding one shard refuses every migration out of it. Under
//! the naive fee scheme its share of all fees grows; under the decoupled
//! scheme its expected share does not. Capacity is ample so that intake is
//! driven by arrivals, not by a saturated shard. Runs stop at a fixed
//! horizon so that every epoch is complete; fees are even so that
//! cross-shard splits leave no remainder.

use shardmove::economics::{coins, EpochReport, Payout};
use shardmove::workload::{generate, Generator, SyntheticSpec};
use shardmove::{PolicyKind, ShardId, SimConfig};

const K: u32 = 4;

fn reports(adversary: Option<ShardId>, seed: u64) -> Vec<EpochReport> {
    let txs = generate(&SyntheticSpec::new(Generator::ZipfHotspot { exponent: 1.0 }, 2_000, 30_000, seed).with_fee(60)).unwrap();
    let config = SimConfig {
        shards: K,
        capacity: 2_000,
        mempool_ratio: 0.1,
        policy: PolicyKind::Scheduler,
        economics: true,
        epoch_length: 1,
        seed,
        refuse_outgoing_from: adversary,
        max_rounds: Some(30),
        ..SimConfig::default()
    };
    let out = shardmove::run(config, &txs).unwrap();
    assert!(out.summary.executed < txs.len() as u64, "workload drained before the horizon");
    let reports = out.ledger.unwrap().reports().to_vec();
    assert_eq!(reports.len(), 30);
    assert!(reports.iter().all(|r| r.deposits.iter().all(|d| d.total > 0)));
    reports
}

fn all_fees(reports: &[EpochReport]) -> Payout {
    coins(reports.iter().flat_map(|r| &r.deposits).map(|d| d.total).sum())
}

/// Share of all fees the shard's leaders keep under the naive scheme.
fn naive_share(reports: &[EpochReport], shard: ShardId) -> Payout {
    coins(reports.iter().map(|r| r.deposits[shard.index()].total).sum()) / all_fees(reports)
}

/// Share of all fees whoever serves `shard` expects to cash in.
fn decoupled_share(reports: &[EpochReport], shard: ShardId) -> Payout {
    let expected: Payout = reports
        .iter()
        .flat_map(|r| r.payouts.iter().filter(|p| p.shard == shard).map(|p| &p.expected))
        .sum();
    expected / all_fees(reports)
}

#[test]
fn refusing_outgoing_migrations_pays_only_under_the_naive_scheme() {
    for seed in 0..3 {
        for s in 0..K {
            let shard = ShardId(s);
            let honest = reports(None, seed);
            let greedy = reports(Some(shard), seed);
            let (hn, gn) = (naive_share(&honest, shard), naive_share(&greedy, shard));
            assert!(gn > hn, "seed {seed} shard {s}: naive greedy {gn} <= honest {hn}");
            let (hd, gd) = (decoupled_share(&honest, shard), decoupled_share(&greedy, shard));
            assert!(gd <= hd, "seed {seed} shard {s}: decoupled greedy {gd} > honest {hd}");
            assert_eq!(gd, coins(1) / coins(K as u64));
        }
    }
}
