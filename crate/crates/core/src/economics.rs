//! Epoch-based fee deposits.
//!
//! Fees are locked into a per-shard deposit during an epoch, with the
//! contribution of each leader recorded. At the epoch change miners are
//! shuffled across shards and each one cashes in, from the deposit of the
//! shard it lands in, the fraction it contributed to its previous shard.
//! The naive scheme, where leaders keep fees immediately, is tracked
//! alongside for comparison.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::types::ShardId;

pub type Coins = u64;
/// Exact payout amount. Arbitrary precision: sums over many epochs have
/// denominators that outgrow any fixed-width integer.
pub type Payout = BigRational;

/// A whole number of coins as a payout.
pub fn coins(amount: u64) -> Payout {
    Payout::from_integer(BigInt::from(amount))
}

/// Nearest `f64` to a payout.
pub fn payout_f64(p: &Payout) -> f64 {
    p.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MinerId(pub u32);

impl fmt::Display for MinerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

/// Miner-to-shard assignment for one epoch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochAssignment {
    pub epoch: u64,
    shard_of: Vec<ShardId>,
    k: u32,
    miners_per_shard: u32,
}

impl EpochAssignment {
    /// Epoch 0: miner `i` serves shard `i / miners_per_shard`.
    pub fn initial(k: u32, miners_per_shard: u32) -> Result<Self> {
        if k == 0 || miners_per_shard == 0 {
            return Err(Error::Config("economics needs at least one shard and one miner per shard".into()));
        }
        let shard_of = (0..k * miners_per_shard).map(|m| ShardId(m / miners_per_shard)).collect();
        Ok(EpochAssignment {
            epoch: 0,
            shard_of,
            k,
            miners_per_shard,
        })
    }

    /// An explicit assignment; `shard_of[i]` is the shard of miner `i`.
    /// Every one of the `k` shards must receive the same number of miners.
    pub fn from_shards(epoch: u64, k: u32, shard_of: Vec<ShardId>) -> Result<Self> {
        if k == 0 || shard_of.is_empty() || !shard_of.len().is_multiple_of(k as usize) {
            return Err(Error::Config(format!("{} miners cannot fill {k} equal shard groups", shard_of.len())));
        }
        let miners_per_shard = (shard_of.len() / k as usize) as u32;
        let mut counts = vec![0u32; k as usize];
        for s in &shard_of {
            let slot = counts
                .get_mut(s.index())
                .ok_or_else(|| Error::Config(format!("shard {s} out of range")))?;
            *slot += 1;
        }
        if counts.iter().any(|&c| c != miners_per_shard) {
            return Err(Error::Config(format!("unequal shard groups {counts:?}")));
        }
        Ok(EpochAssignment {
            epoch,
            shard_of,
            k,
            miners_per_shard,
        })
    }

    pub fn shard_count(&self) -> u32 {
        self.k
    }

    pub fn miners_per_shard(&self) -> u32 {
        self.miners_per_shard
    }

    pub fn miner_count(&self) -> u32 {
        self.shard_of.len() as u32
    }

    pub fn miners(&self) -> impl Iterator<Item = MinerId> {
        (0..self.miner_count()).map(MinerId)
    }

    pub fn shard_of(&self, miner: MinerId) -> Option<ShardId> {
        self.shard_of.get(miner.0 as usize).copied()
    }

    /// Miners of `shard` in ascending id order.
    pub fn miners_of(&self, shard: ShardId) -> Vec<MinerId> {
        self.shard_of
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == shard)
            .map(|(m, _)| MinerId(m as u32))
            .collect()
    }
}

/// Round-robin leader of `shard` at `round`.
pub fn rotate_leader(assignment: &EpochAssignment, shard: ShardId, round: u64) -> MinerId {
    let miners = assignment.miners_of(shard);
    miners[(round % miners.len() as u64) as usize]
}

/// Next epoch's assignment: a uniformly random permutation of all miners cut
/// into equal consecutive groups, one per shard.
pub fn shuffle_epoch(prev: &EpochAssignment, seed: u64) -> EpochAssignment {
    let epoch = prev.epoch + 1;
    let mut order: Vec<u32> = (0..prev.miner_count()).collect();
    order.shuffle(&mut rng_for(seed, &format!("economics/shuffle/{epoch}")));
    let mut shard_of = vec![ShardId(0); order.len()];
    for (pos, miner) in order.into_iter().enumerate() {
        shard_of[miner as usize] = ShardId(pos as u32 / prev.miners_per_shard);
    }
    EpochAssignment {
        epoch,
        shard_of,
        k: prev.k,
        miners_per_shard: prev.miners_per_shard,
    }
}

/// Fees locked in one shard during one epoch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShardDeposit {
    pub shard: ShardId,
    pub epoch: u64,
    pub total: Coins,
    pub contributions: BTreeMap<MinerId, Coins>,
}

impl ShardDeposit {
    pub fn new(shard: ShardId, epoch: u64) -> Self {
        ShardDeposit {
            shard,
            epoch,
            total: 0,
            contributions: BTreeMap::new(),
        }
    }

    /// Credits `fee` to `leader`, which must serve this shard in this epoch.
    pub fn record_fee(&mut self, assignment: &EpochAssignment, leader: MinerId, fee: Coins) -> Result<()> {
        if assignment.shard_of(leader) != Some(self.shard) {
            return Err(Error::WrongShard {
                miner: leader.0,
                shard: self.shard,
            });
        }
        if fee > 0 {
            *self.contributions.entry(leader).or_insert(0) += fee;
            self.total += fee;
        }
        Ok(())
    }

    pub fn contribution(&self, miner: MinerId) -> Coins {
        self.contributions.get(&miner).copied().unwrap_or(0)
    }

    /// Share of this deposit contributed by `miner`.
    pub fn fraction(&self, miner: MinerId) -> Payout {
        if self.total == 0 {
            return Payout::zero();
        }
        Payout::new(self.contribution(miner).into(), self.total.into())
    }
}

/// Amount `miner` cashes in at the change from epoch `n` to `n + 1`: its
/// fraction of its epoch-`n` shard deposit, applied to the epoch-`n`
/// deposit of the shard it serves in epoch `n + 1`. A miner without an
/// epoch-`n` shard receives nothing.
pub fn cash_in(
    miner: MinerId,
    prev_deposits: &[ShardDeposit],
    prev_assignment: &EpochAssignment,
    new_assignment: &EpochAssignment,
) -> Payout {
    let (Some(old), Some(new)) = (prev_assignment.shard_of(miner), new_assignment.shard_of(miner)) else {
        log::debug!("{miner} has no shard in epoch {} or {}, pays 0", prev_assignment.epoch, new_assignment.epoch);
        return Payout::zero();
    };
    let deposit_of = |s: ShardId| prev_deposits.iter().find(|d| d.shard == s);
    let fraction = deposit_of(old).map(|d| d.fraction(miner)).unwrap_or_default();
    let pool = deposit_of(new).map(|d| d.total).unwrap_or(0);
    fraction * coins(pool)
}

/// Expected cash-in over a uniform shuffle: every destination shard is
/// equally likely, so the fraction applies to the mean deposit.
pub fn expected_cash_in(miner: MinerId, deposits: &[ShardDeposit], assignment: &EpochAssignment) -> Payout {
    let Some(shard) = assignment.shard_of(miner) else {
        return Payout::zero();
    };
    let fraction = deposits
        .iter()
        .find(|d| d.shard == shard)
        .map(|d| d.fraction(miner))
        .unwrap_or_default();
    let total: BigInt = deposits.iter().map(|d| BigInt::from(d.total)).sum();
    fraction * Payout::new(total, assignment.shard_count().into())
}

/// Splits `fee` equally between `shards`; the remainder goes to the lowest
/// shard id.
pub fn split_fee(fee: Coins, shards: &BTreeSet<ShardId>) -> Vec<(ShardId, Coins)> {
    let n = shards.len() as u64;
    if n == 0 {
        return Vec::new();
    }
    let (share, rest) = (fee / n, fee % n);
    shards
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, share + if i == 0 { rest } else { 0 }))
        .collect()
}

/// Settlement of one epoch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochReport {
    pub epoch: u64,
    pub deposits: Vec<ShardDeposit>,
    /// Per miner: epoch shard, contribution, cash-in.
    pub payouts: Vec<MinerPayout>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinerPayout {
    pub miner: MinerId,
    pub shard: ShardId,
    pub contribution: Coins,
    pub payout: Payout,
    pub expected: Payout,
}

/// Fee ledger driven by the engine.
#[derive(Clone, Debug)]
pub struct EpochLedger {
    epoch_length: u64,
    seed: u64,
    assignment: EpochAssignment,
    deposits: Vec<ShardDeposit>,
    rounds_in_epoch: u64,
    naive: Vec<Coins>,
    decoupled: Vec<Payout>,
    expected: Vec<Payout>,
    reports: Vec<EpochReport>,
}

impl EpochLedger {
    pub fn new(k: u32, miners_per_shard: u32, epoch_length: u64, seed: u64) -> Result<Self> {
        if epoch_length == 0 {
            return Err(Error::Config("epoch length must be positive".into()));
        }
        let assignment = EpochAssignment::initial(k, miners_per_shard)?;
        let miners = assignment.miner_count() as usize;
        Ok(EpochLedger {
            epoch_length,
            seed,
            deposits: fresh_deposits(k, 0),
            assignment,
            rounds_in_epoch: 0,
            naive: vec![0; miners],
            decoupled: vec![Payout::zero(); miners],
            expected: vec![Payout::zero(); miners],
            reports: Vec::new(),
        })
    }

    pub fn assignment(&self) -> &EpochAssignment {
        &self.assignment
    }

    pub fn deposits(&self) -> &[ShardDeposit] {
        &self.deposits
    }

    /// Attributes the fee of a transaction executed at `round` to the
    /// current leaders of its shards.
    pub fn record_tx(&mut self, round: u64, shards: &BTreeSet<ShardId>, fee: Coins) {
        for (shard, amount) in split_fee(fee, shards) {
            let leader = rotate_leader(&self.assignment, shard, round);
            self.deposits[shard.index()]
                .record_fee(&self.assignment, leader, amount)
                .expect("leader comes from the current assignment");
            self.naive[leader.0 as usize] += amount;
        }
    }

    /// Closes `round`; settles the epoch when it is complete.
    pub fn end_round(&mut self) {
        self.rounds_in_epoch += 1;
        if self.rounds_in_epoch == self.epoch_length {
            self.settle();
        }
    }

    /// Settles a partially elapsed epoch at the end of a run.
    pub fn finish(&mut self) {
        if self.rounds_in_epoch > 0 {
            self.settle();
        }
    }

    fn settle(&mut self) {
        let next = shuffle_epoch(&self.assignment, self.seed);
        let payouts: Vec<MinerPayout> = self
            .assignment
            .miners()
            .map(|m| {
                let shard = self.assignment.shard_of(m).expect("assigned");
                MinerPayout {
                    miner: m,
                    shard,
                    contribution: self.deposits[shard.index()].contribution(m),
                    payout: cash_in(m, &self.deposits, &self.assignment, &next),
                    expected: expected_cash_in(m, &self.deposits, &self.assignment),
                }
            })
            .collect();
        for p in &payouts {
            self.decoupled[p.miner.0 as usize] += &p.payout;
            self.expected[p.miner.0 as usize] += &p.expected;
        }
        let deposits = std::mem::replace(&mut self.deposits, fresh_deposits(next.k, next.epoch));
        self.reports.push(EpochReport {
            epoch: self.assignment.epoch,
            deposits,
            payouts,
        });
        self.assignment = next;
        self.rounds_in_epoch = 0;
    }

    pub fn reports(&self) -> &[EpochReport] {
        &self.reports
    }

    /// Fees each miner collected as leader (naive scheme).
    pub fn naive_earnings(&self) -> &[Coins] {
        &self.naive
    }

    /// Cashed-in amounts per miner under the decoupled scheme.
    pub fn decoupled_earnings(&self) -> &[Payout] {
        &self.decoupled
    }

    /// Expected decoupled earnings per miner, averaged over shuffles.
    pub fn expected_earnings(&self) -> &[Payout] {
        &self.expected
    }
}

fn fresh_deposits(k: u32, epoch: u64) -> Vec<ShardDeposit> {
    (0..k).map(|s| ShardDeposit::new(ShardId(s), epoch)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deposit(a: &EpochAssignment, shard: u32, fees: &[(u32, u64)]) -> ShardDeposit {
        let mut d = ShardDeposit::new(ShardId(shard), a.epoch);
        for (m, f) in fees {
            d.record_fee(a, MinerId(*m), *f).unwrap();
        }
        d
    }

    fn moved(prev: &EpochAssignment, moves: &[(u32, u32)]) -> EpochAssignment {
        let mut next = prev.clone();
        next.epoch += 1;
        for (m, s) in moves {
            next.shard_of[*m as usize] = ShardId(*s);
        }
        next
    }

    #[test]
    fn explicit_assignment_validation() {
        let a = EpochAssignment::from_shards(3, 2, vec![ShardId(1), ShardId(0), ShardId(0), ShardId(1)]).unwrap();
        assert_eq!(a.miners_per_shard(), 2);
        assert_eq!(a.miners_of(ShardId(1)), vec![MinerId(0), MinerId(3)]);
        assert!(EpochAssignment::from_shards(0, 2, vec![ShardId(0), ShardId(0)]).is_err());
        assert!(EpochAssignment::from_shards(0, 2, vec![ShardId(0), ShardId(2)]).is_err());
        assert!(EpochAssignment::from_shards(0, 2, vec![ShardId(0)]).is_err());
        assert!(EpochAssignment::from_shards(0, 0, vec![]).is_err());
    }

    #[test]
    fn long_runs_keep_exact_payouts() {
        // coprime deposit totals across many epochs push the common
        // denominator of the running sums far past 128 bits
        let mut ledger = EpochLedger::new(3, 2, 1, 11).unwrap();
        let mut total = 0;
        for round in 0..300u64 {
            let fee = 1 + (round * 7919) % 97;
            total += fee;
            ledger.record_tx(round, &BTreeSet::from([ShardId((round % 3) as u32)]), fee);
            ledger.record_tx(round, &BTreeSet::from([ShardId(((round + 1) % 3) as u32)]), 1);
            total += 1;
            ledger.end_round();
        }
        ledger.finish();
        let expected: Payout = ledger.expected_earnings().iter().sum();
        // two of three shards collect fees each epoch
        assert_eq!(expected, coins(2 * total) / coins(3));
        assert!(ledger.decoupled_earnings().iter().all(|p| payout_f64(p).is_finite()));
    }

    #[test]
    fn record_fee_cases() {
        let a = EpochAssignment::initial(2, 2).unwrap();
        let d = deposit(&a, 0, &[(0, 10)]);
        assert_eq!(d.total, 10);
        assert_eq!(d.contributions, BTreeMap::from([(MinerId(0), 10)]));
        let d = deposit(&a, 0, &[(0, 10), (1, 90)]);
        assert_eq!(d.fraction(MinerId(0)), Payout::new(1.into(), 10.into()));
        assert_eq!(d.fraction(MinerId(1)), Payout::new(9.into(), 10.into()));
        let d = deposit(&a, 0, &[(0, 0)]);
        assert_eq!(d, ShardDeposit::new(ShardId(0), 0));
        let mut d = ShardDeposit::new(ShardId(0), 0);
        assert!(matches!(d.record_fee(&a, MinerId(2), 5), Err(Error::WrongShard { miner: 2, .. })));
    }

    #[test]
    fn leader_rotation() {
        let a = EpochAssignment::initial(2, 3).unwrap();
        let leaders: Vec<_> = (0..6).map(|r| rotate_leader(&a, ShardId(0), r).0).collect();
        assert_eq!(leaders, [0, 1, 2, 0, 1, 2]);
        let single = EpochAssignment::initial(3, 1).unwrap();
        assert!((0..4).all(|r| rotate_leader(&single, ShardId(2), r) == MinerId(2)));
        assert!(EpochAssignment::initial(2, 0).is_err());
    }

    #[test]
    fn shuffle_properties() {
        let a = EpochAssignment::initial(1, 5).unwrap();
        assert!(shuffle_epoch(&a, 3).miners().all(|m| shuffle_epoch(&a, 3).shard_of(m) == Some(ShardId(0))));
        let a = EpochAssignment::initial(4, 3).unwrap();
        let b = shuffle_epoch(&a, 9);
        assert_eq!(b, shuffle_epoch(&a, 9));
        assert_eq!(b.epoch, 1);
        for s in 0..4 {
            assert_eq!(b.miners_of(ShardId(s)).len(), 3);
        }
    }

    #[test]
    fn shuffle_frequency() {
        let mut a = EpochAssignment::initial(4, 2).unwrap();
        let mut counts = [0u32; 4];
        let trials = 10_000;
        for _ in 0..trials {
            a = shuffle_epoch(&a, 17);
            counts[a.shard_of(MinerId(5)).unwrap().index()] += 1;
        }
        for c in counts {
            let f = c as f64 / trials as f64;
            assert!((f - 0.25).abs() <= 0.02, "{counts:?}");
        }
    }

    #[test]
    fn cash_in_worked_example() {
        // shard 0 holds 100 with m0 contributing 10; m0 then serves shard 1
        let a = EpochAssignment::initial(3, 2).unwrap();
        let deposits = [deposit(&a, 0, &[(0, 10), (1, 90)]), deposit(&a, 1, &[(2, 50)]), deposit(&a, 2, &[(4, 50)])];
        let next = moved(&a, &[(0, 1), (2, 0)]);
        assert_eq!(cash_in(MinerId(0), &deposits, &a, &next), coins(5));
        // no contribution, no payout
        assert_eq!(cash_in(MinerId(3), &deposits, &a, &next), coins(0));
    }

    #[test]
    fn single_shard_is_classic_fees() {
        let a = EpochAssignment::initial(1, 3).unwrap();
        let deposits = [deposit(&a, 0, &[(0, 30), (1, 70)])];
        let next = shuffle_epoch(&a, 1);
        assert_eq!(cash_in(MinerId(0), &deposits, &a, &next), coins(30));
        assert_eq!(cash_in(MinerId(1), &deposits, &a, &next), coins(70));
    }

    #[test]
    fn absent_miner_gets_nothing() {
        let a = EpochAssignment::initial(2, 1).unwrap();
        let deposits = [deposit(&a, 0, &[(0, 4)]), deposit(&a, 1, &[(1, 6)])];
        let bigger = EpochAssignment::initial(2, 2).unwrap();
        assert_eq!(cash_in(MinerId(3), &deposits, &a, &bigger), coins(0));
    }

    #[test]
    fn payouts_conserve_deposits_with_equal_shares() {
        // every miner holds 1/2 of its shard, so each landing group sums to 1
        let a = EpochAssignment::initial(3, 2).unwrap();
        let deposits = [
            deposit(&a, 0, &[(0, 5), (1, 5)]),
            deposit(&a, 1, &[(2, 3), (3, 3)]),
            deposit(&a, 2, &[(4, 1), (5, 1)]),
        ];
        for seed in 0..20 {
            let next = shuffle_epoch(&a, seed);
            let paid: Payout = a.miners().map(|m| cash_in(m, &deposits, &a, &next)).sum();
            assert_eq!(paid, coins(18));
        }
    }

    #[test]
    fn expected_payouts_conserve_deposits() {
        let a = EpochAssignment::initial(3, 2).unwrap();
        let deposits = [
            deposit(&a, 0, &[(0, 7), (1, 3)]),
            deposit(&a, 1, &[(2, 11)]),
            deposit(&a, 2, &[(4, 1), (5, 2)]),
        ];
        let expected: Payout = a.miners().map(|m| expected_cash_in(m, &deposits, &a)).sum();
        assert_eq!(expected, coins(24));
        assert_eq!(expected_cash_in(MinerId(2), &deposits, &a), coins(8));
    }

    #[test]
    fn fee_split_remainder_to_lowest() {
        let shards = BTreeSet::from([ShardId(3), ShardId(1), ShardId(2)]);
        assert_eq!(split_fee(10, &shards), vec![(ShardId(1), 4), (ShardId(2), 3), (ShardId(3), 3)]);
        assert_eq!(split_fee(1, &BTreeSet::from([ShardId(0)])), vec![(ShardId(0), 1)]);
    }

    #[test]
    fn ledger_settles_each_epoch() {
        let mut ledger = EpochLedger::new(2, 2, 2, 5).unwrap();
        for round in 0..5 {
            ledger.record_tx(round, &BTreeSet::from([ShardId(0), ShardId(1)]), 4);
            ledger.end_round();
        }
        ledger.finish();
        assert_eq!(ledger.reports().len(), 3);
        assert_eq!(ledger.naive_earnings().iter().sum::<u64>(), 20);
        let cashed: Payout = ledger.decoupled_earnings().iter().sum();
        assert_eq!(cashed, coins(20));
        let expected: Payout = ledger.expected_earnings().iter().sum();
        assert_eq!(expected, coins(20));
    }
}
