//! The authoritative account-to-shard assignment.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{AccountId, ShardId};

/// Versioned account → shard map. The version increments on every placement
/// and every migration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MappingService {
    assignment: HashMap<AccountId, ShardId>,
    version: u64,
}

impl MappingService {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, account: &AccountId) -> Option<ShardId> {
        self.assignment.get(account).copied()
    }

    pub fn contains(&self, account: &AccountId) -> bool {
        self.assignment.contains_key(account)
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Assigns a new account. Returns false (and changes nothing) if the
    /// account already has a shard.
    pub fn place(&mut self, account: AccountId, shard: ShardId) -> bool {
        if self.assignment.contains_key(&account) {
            return false;
        }
        self.assignment.insert(account, shard);
        self.version += 1;
        true
    }

    /// Moves an existing account. Returns the previous shard, or `None` if
    /// the account is unknown (in which case nothing changes).
    pub fn migrate(&mut self, account: &AccountId, dest: ShardId) -> Option<ShardId> {
        let slot = self.assignment.get_mut(account)?;
        let prev = std::mem::replace(slot, dest);
        self.version += 1;
        Some(prev)
    }

    /// Shards of every already-assigned account in `write_set`. New accounts
    /// are skipped, so the set is empty iff every account is new.
    pub fn involved_shards(&self, write_set: &[AccountId]) -> BTreeSet<ShardId> {
        write_set.iter().filter_map(|a| self.get(a)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AccountId, &ShardId)> {
        self.assignment.iter()
    }

    /// Accounts per shard, indexed by shard.
    pub fn shard_sizes(&self, k: usize) -> Vec<usize> {
        let mut sizes = vec![0; k];
        for shard in self.assignment.values() {
            if let Some(s) = sizes.get_mut(shard.index()) {
                *s += 1;
            }
        }
        sizes
    }

    /// Writes `account_hex shard` lines sorted by account id.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut rows: Vec<_> = self.assignment.iter().collect();
        rows.sort();
        for (account, shard) in rows {
            writeln!(out, "{account} {shard}")?;
        }
        Ok(())
    }
}

/// Reads an assignment file of `account_hex index` lines. Blank lines and
/// `#` comments are skipped.
pub fn read_assignment_file(path: &Path) -> Result<HashMap<AccountId, u32>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let mut fields = trimmed.split_whitespace();
        let (Some(acc), Some(idx), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err("expected `account_hex index`".into()));
        };
        let account: AccountId = acc.parse().map_err(|e| parse_err(format!("{e}")))?;
        let index: u32 = idx
            .parse()
            .map_err(|_| parse_err(format!("invalid index {idx:?}")))?;
        out.insert(account, index);
    }
    Ok(out)
}
