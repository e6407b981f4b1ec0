//! Line-oriented trace format.
//!
//! ```text
//! block tx_id fee acc1,acc2|CA,acc3|CA:64
//! ```
//!
//! Fields are whitespace separated; accounts are comma separated hex ids with
//! an optional `|CA`, `|CA:<size>` or `|EOA` marker. The fee field may be
//! omitted (`block tx_id accounts`) or given as `-`, in which case it is 1.
//! Blank lines and lines starting with `#` are ignored.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::types::{AccountId, AccountKind, BlockHeight, Transaction};

const DEFAULT_FEE: u64 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub block: BlockHeight,
    pub tx_id: String,
    pub fee: u64,
    /// Deduplicated, first occurrence wins.
    pub accounts: Vec<(AccountId, AccountKind)>,
}

/// Parses one non-comment line. Errors carry no location; callers add it.
pub fn parse_line(line: &str) -> std::result::Result<TraceRecord, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let (block, tx_id, fee, accounts) = match fields.as_slice() {
        [b, id, fee, accs] => (*b, *id, Some(*fee), *accs),
        [b, id, accs] => (*b, *id, None, *accs),
        [_, _] => return Err("empty write set".into()),
        _ => return Err(format!("expected 3 or 4 fields, found {}", fields.len())),
    };
    let block: BlockHeight = block
        .parse()
        .map_err(|_| format!("invalid block height {block:?}"))?;
    let fee = match fee {
        None | Some("-") => DEFAULT_FEE,
        Some(f) => f.parse().map_err(|_| format!("invalid fee {f:?}"))?,
    };
    let mut out: Vec<(AccountId, AccountKind)> = Vec::new();
    for item in accounts.split(',').filter(|s| !s.is_empty()) {
        let (id, kind) = match item.split_once('|') {
            None => (item, AccountKind::Eoa),
            Some((id, marker)) => (id, parse_marker(marker)?),
        };
        let id: AccountId = id.parse().map_err(|e| format!("{e}"))?;
        if !out.iter().any(|(a, _)| *a == id) {
            out.push((id, kind));
        }
    }
    if out.is_empty() {
        return Err("empty write set".into());
    }
    Ok(TraceRecord {
        block,
        tx_id: tx_id.to_string(),
        fee,
        accounts: out,
    })
}

fn parse_marker(marker: &str) -> std::result::Result<AccountKind, String> {
    match marker {
        "EOA" | "eoa" => Ok(AccountKind::Eoa),
        "CA" | "ca" => Ok(AccountKind::Contract { size: 1 }),
        m => {
            let size = m
                .strip_prefix("CA:")
                .or_else(|| m.strip_prefix("ca:"))
                .ok_or_else(|| format!("unknown account marker {m:?}"))?;
            let size: u64 = size
                .parse()
                .map_err(|_| format!("invalid contract size {size:?}"))?;
            if size == 0 {
                return Err("contract size must be positive".into());
            }
            Ok(AccountKind::Contract { size })
        }
    }
}

/// Streams records from a trace file in file order.
pub struct TraceReader<R> {
    path: PathBuf,
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl TraceReader<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(TraceReader::new(path, BufReader::new(file)))
    }
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(path: &Path, reader: R) -> Self {
        TraceReader {
            path: path.to_path_buf(),
            lines: reader.lines(),
            line_no: 0,
        }
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<TraceRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Some(parse_line(trimmed).map_err(|message| {
                if message == "empty write set" {
                    Error::EmptyWriteSet {
                        path: self.path.clone(),
                        line: self.line_no,
                    }
                } else {
                    Error::Parse {
                        path: self.path.clone(),
                        line: self.line_no,
                        message,
                    }
                }
            }));
        }
    }
}

/// Loads a trace in arrival order: records sorted by block, file order
/// within a block, with `arrival_index` assigned `0..n`.
pub fn load_trace(path: &Path) -> Result<Vec<Transaction>> {
    let mut records = TraceReader::open(path)?.collect::<Result<Vec<_>>>()?;
    // stable: keeps file order inside a block
    records.sort_by_key(|r| r.block);
    Ok(records
        .into_iter()
        .enumerate()
        .map(|(i, r)| Transaction::with_kinds(r.tx_id, i as u64, r.accounts, r.fee))
        .collect())
}

/// Writes transactions in the trace format, one block per transaction
/// (block height = arrival index).
pub fn write_trace<W: Write>(txs: &[Transaction], mut out: W) -> std::io::Result<()> {
    for tx in txs {
        write!(out, "{} {} {} ", tx.arrival_index, tx.tx_id, tx.fee)?;
        for (i, (acc, kind)) in tx.write_set.iter().zip(&tx.kinds).enumerate() {
            if i > 0 {
                out.write_all(b",")?;
            }
            match kind {
                AccountKind::Eoa => write!(out, "{acc}")?,
                AccountKind::Contract { size: 1 } => write!(out, "{acc}|CA")?,
                AccountKind::Contract { size } => write!(out, "{acc}|CA:{size}")?,
            }
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}
