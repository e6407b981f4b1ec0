//! Domain types shared by every module: account and shard identifiers,
//! transactions, migrations and the capacity cost model.

use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

/// Block height. One simulated round produces one block per shard.
pub type BlockHeight = u64;

/// Opaque 32-byte account identifier. Identity never changes across
/// migrations; only the mapping service moves it.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AccountId(pub [u8; 32]);

impl AccountId {
    pub const LEN: usize = 32;

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        AccountId(bytes)
    }

    /// Deterministic identifier for the `index`-th synthetic account of a
    /// namespace. Uses SHA-256 so hash placement sees uniformly spread ids.
    pub fn synthetic(namespace: &str, index: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(namespace.as_bytes());
        hasher.update([0u8]);
        hasher.update(index.to_le_bytes());
        AccountId(hasher.finalize().into())
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // short form keeps test failures readable
        write!(f, "AccountId({}…)", &self.to_hex()[..12])
    }
}

/// Error returned when an account identifier is not valid hex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseAccountIdError(pub String);

impl fmt::Display for ParseAccountIdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid account id {:?}", self.0)
    }
}

impl std::error::Error for ParseAccountIdError {}

impl FromStr for AccountId {
    type Err = ParseAccountIdError;

    /// Accepts 1 to 64 hex digits with an optional `0x` prefix. Shorter
    /// identifiers (e.g. 20-byte Ethereum addresses) are left-padded with
    /// zeros to 32 bytes.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix("0x")
            .or_else(|| s.strip_prefix("0X"))
            .unwrap_or(s);
        if digits.is_empty()
            || digits.len() > 64
            || !digits.bytes().all(|b| b.is_ascii_hexdigit())
        {
            return Err(ParseAccountIdError(s.to_string()));
        }
        let mut padded = String::with_capacity(64);
        padded.extend(std::iter::repeat_n('0', 64 - digits.len()));
        padded.push_str(digits);
        let mut out = [0u8; 32];
        hex::decode_to_slice(&padded, &mut out).map_err(|_| ParseAccountIdError(s.to_string()))?;
        Ok(AccountId(out))
    }
}

/// Shard index in `[0, k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShardId(pub u32);

impl ShardId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ShardId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for ShardId {
    fn from(v: u32) -> Self {
        ShardId(v)
    }
}

/// Externally owned account or contract account. Contracts carry a state
/// size that scales their migration cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum AccountKind {
    #[default]
    Eoa,
    Contract {
        size: u64,
    },
}

impl AccountKind {
    pub fn is_contract(self) -> bool {
        matches!(self, AccountKind::Contract { .. })
    }

    /// Size in cost units. EOAs are always 1.
    pub fn size(self) -> u64 {
        match self {
            AccountKind::Eoa => 1,
            AccountKind::Contract { size } => size.max(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Account {
    pub id: AccountId,
    pub kind: AccountKind,
    pub created_at: BlockHeight,
}

impl Account {
    pub fn size(&self) -> u64 {
        self.kind.size()
    }
}

/// The unit of work: an ordered write set plus fee and base cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    pub tx_id: String,
    pub arrival_index: u64,
    pub write_set: Vec<AccountId>,
    /// Parallel to `write_set`.
    pub kinds: Vec<AccountKind>,
    pub fee: u64,
    pub base_cost: u64,
}

impl Transaction {
    /// Builds a transaction of EOAs with base cost 1. Duplicate accounts are
    /// removed, keeping the first occurrence.
    pub fn new(
        tx_id: impl Into<String>,
        arrival_index: u64,
        write_set: impl IntoIterator<Item = AccountId>,
        fee: u64,
    ) -> Self {
        Self::with_kinds(
            tx_id,
            arrival_index,
            write_set.into_iter().map(|a| (a, AccountKind::Eoa)),
            fee,
        )
    }

    pub fn with_kinds(
        tx_id: impl Into<String>,
        arrival_index: u64,
        accounts: impl IntoIterator<Item = (AccountId, AccountKind)>,
        fee: u64,
    ) -> Self {
        let mut write_set: Vec<AccountId> = Vec::new();
        let mut kinds = Vec::new();
        for (id, kind) in accounts {
            if !write_set.contains(&id) {
                write_set.push(id);
                kinds.push(kind);
            }
        }
        Transaction {
            tx_id: tx_id.into(),
            arrival_index,
            write_set,
            kinds,
            fee,
            base_cost: 1,
        }
    }

    pub fn with_base_cost(mut self, base_cost: u64) -> Self {
        self.base_cost = base_cost;
        self
    }

    pub fn kind_of(&self, account: &AccountId) -> AccountKind {
        self.write_set
            .iter()
            .position(|a| a == account)
            .map(|i| self.kinds[i])
            .unwrap_or_default()
    }
}

/// Moves one account between shards. Charged to both source and destination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MigrationOp {
    pub account: AccountId,
    pub source: ShardId,
    pub dest: ShardId,
    pub cost: u64,
}

/// Capacity cost accounting. An intra-shard transaction charges its base cost
/// to its single shard; a cross-shard transaction charges
/// `base_cost * cross_shard_cost` to every involved shard.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CostModel {
    pub cross_shard_cost: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            cross_shard_cost: 2,
        }
    }
}

impl CostModel {
    pub fn new(cross_shard_cost: u64) -> Self {
        CostModel { cross_shard_cost }
    }

    /// Per-shard charge of a transaction touching `shard_count` shards.
    pub fn per_shard_charge(&self, base_cost: u64, shard_count: usize) -> u64 {
        if shard_count <= 1 {
            base_cost
        } else {
            base_cost * self.cross_shard_cost
        }
    }

    pub fn migration_cost(&self, kind: AccountKind) -> u64 {
        self.cross_shard_cost * kind.size()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_pads_short_ids() {
        let a: AccountId = "0x01".parse().unwrap();
        assert_eq!(a.0[31], 1);
        assert!(a.0[..31].iter().all(|&b| b == 0));
        let full = AccountId::synthetic("t", 7);
        assert_eq!(full.to_hex().parse::<AccountId>().unwrap(), full);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!("".parse::<AccountId>().is_err());
        assert!("xyz".parse::<AccountId>().is_err());
        assert!("0".repeat(65).parse::<AccountId>().is_err());
    }

    #[test]
    fn transaction_dedups_write_set() {
        let a = AccountId::synthetic("t", 1);
        let b = AccountId::synthetic("t", 2);
        let tx = Transaction::new("x", 0, [a, b, a], 1);
        assert_eq!(tx.write_set, vec![a, b]);
        assert_eq!(tx.kinds.len(), 2);
    }

    #[test]
    fn cost_model_charges() {
        let c = CostModel::new(2);
        assert_eq!(c.per_shard_charge(1, 1), 1);
        assert_eq!(c.per_shard_charge(1, 2), 2);
        assert_eq!(c.per_shard_charge(3, 3), 6);
        assert_eq!(c.migration_cost(AccountKind::Eoa), 2);
        assert_eq!(c.migration_cost(AccountKind::Contract { size: 5 }), 10);
    }
}
