//! C ABI over the `shardmove` simulator.
//!
//! Every fallible function returns an [`SpStatus`]; on failure the message is
//! available from [`sp_last_error`] on the same thread. Handles are opaque
//! and released with their `_free` function. No function unwinds across the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use shardmove::engine::{LoadView, SimConfig, SimOutput};
use shardmove::experiment::SyntheticParams;
use shardmove::policy::{hash_place, CommitMode, PolicyKind};
use shardmove::report::{self, SummaryRow};
use shardmove::{workload, AccountId, Error, ShardId, Transaction};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Io = 4,
    Parse = 5,
    Simulation = 6,
    Panic = 7,
}

pub const SP_POLICY_HASH: u32 = 0;
pub const SP_POLICY_PARTITION: u32 = 1;
pub const SP_POLICY_SCHEDULER: u32 = 2;

pub const SP_MODE_2PC: u32 = 0;
pub const SP_MODE_MUTEX: u32 = 1;

pub const SP_LOAD_VIEW_LIVE: u32 = 0;
pub const SP_LOAD_VIEW_BEACON: u32 = 1;

/// Simulation parameters. Start from [`sp_sim_params_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SpSimParams {
    pub shards: u32,
    pub cross_shard_cost: u64,
    pub capacity: u64,
    pub mempool_ratio: f64,
    pub window: u32,
    /// One of the `SP_POLICY_*` constants.
    pub policy: u32,
    /// One of the `SP_MODE_*` constants.
    pub mode: u32,
    pub ca_migration: bool,
    pub economics: bool,
    pub epoch_length: u64,
    pub miners_per_shard: u32,
    pub seed: u64,
    /// 0 runs until the workload drains.
    pub max_rounds: u64,
    /// One of the `SP_LOAD_VIEW_*` constants.
    pub load_view: u32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SpSummary {
    pub rounds: u64,
    pub executed: u64,
    pub cross_shard: u64,
    pub migrations: u64,
    pub throughput: f64,
    pub mean_latency: f64,
    pub wasted_capacity: u64,
    pub cross_shard_ratio: f64,
    pub pending: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SpRoundStats {
    pub round: u64,
    pub executed: u64,
    pub wasted: u64,
    pub cross_shard: u64,
    pub migrations: u64,
}

/// A loaded or generated workload.
pub struct SpWorkload {
    txs: Vec<Transaction>,
}

/// The result of one simulation run.
pub struct SpRun {
    config: SimConfig,
    output: SimOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) | Error::InvalidSpec(_) => SpStatus::Config,
            Error::Io { .. } => SpStatus::Io,
            Error::Parse { .. } | Error::EmptyWriteSet { .. } => SpStatus::Parse,
            Error::Csv(c) if c.is_io_error() => SpStatus::Io,
            _ => SpStatus::Simulation,
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(SpStatus::NullArgument, format!("{name} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {message}"));
            SpStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SpStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(name))
}

fn to_config(p: &SpSimParams) -> Result<SimConfig, Failure> {
    let bad = |what: &str, v: u32| Failure(SpStatus::Config, format!("unknown {what} {v}"));
    let config = SimConfig {
        shards: p.shards,
        cross_shard_cost: p.cross_shard_cost,
        capacity: p.capacity,
        mempool_ratio: p.mempool_ratio,
        window: p.window as usize,
        policy: match p.policy {
            SP_POLICY_HASH => PolicyKind::Hash,
            SP_POLICY_PARTITION => PolicyKind::Partition,
            SP_POLICY_SCHEDULER => PolicyKind::Scheduler,
            v => return Err(bad("policy", v)),
        },
        mode: match p.mode {
            SP_MODE_2PC => CommitMode::TwoPhase,
            SP_MODE_MUTEX => CommitMode::Mutex,
            v => return Err(bad("mode", v)),
        },
        ca_migration: p.ca_migration,
        economics: p.economics,
        epoch_length: p.epoch_length,
        miners_per_shard: p.miners_per_shard,
        seed: p.seed,
        max_rounds: (p.max_rounds > 0).then_some(p.max_rounds),
        refuse_outgoing_from: None,
        load_view: match p.load_view {
            SP_LOAD_VIEW_LIVE => LoadView::Live,
            SP_LOAD_VIEW_BEACON => LoadView::Beacon,
            v => return Err(bad("load view", v)),
        },
    };
    config.validate()?;
    Ok(config)
}

/// Default parameters.
#[no_mangle]
pub extern "C" fn sp_sim_params_default() -> SpSimParams {
    let c = SimConfig::default();
    SpSimParams {
        shards: c.shards,
        cross_shard_cost: c.cross_shard_cost,
        capacity: c.capacity,
        mempool_ratio: c.mempool_ratio,
        window: c.window as u32,
        policy: SP_POLICY_SCHEDULER,
        mode: SP_MODE_2PC,
        ca_migration: c.ca_migration,
        economics: c.economics,
        epoch_length: c.epoch_length,
        miners_per_shard: c.miners_per_shard,
        seed: c.seed,
        max_rounds: 0,
        load_view: SP_LOAD_VIEW_LIVE,
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a trace file.
///
/// # Safety
/// `path` must be NULL or a NUL-terminated string; `out` must be NULL or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sp_workload_load_trace(path: *const c_char, out: *mut *mut SpWorkload) -> SpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        let txs = workload::load_trace(&path)?;
        *out = Box::into_raw(Box::new(SpWorkload { txs }));
        Ok(())
    })
}

/// Generates a named synthetic workload (`zipf`, `communities`, ...) with
/// default generator parameters. `shards` is only read by `all-intra` and
/// `all-cross`.
///
/// # Safety
/// `name` must be NULL or a NUL-terminated string; `out` must be NULL or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sp_workload_generate(
    name: *const c_char,
    accounts: usize,
    txs: usize,
    shards: u32,
    seed: u64,
    out: *mut *mut SpWorkload,
) -> SpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let params = SyntheticParams {
            name: str_arg(name, "name")?.to_string(),
            accounts,
            txs,
            ..SyntheticParams::default()
        };
        let txs = workload::generate(&params.to_spec(shards.max(1), seed)?)?;
        *out = Box::into_raw(Box::new(SpWorkload { txs }));
        Ok(())
    })
}

/// Number of transactions, 0 for NULL.
///
/// # Safety
/// `workload` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sp_workload_len(workload: *const SpWorkload) -> usize {
    workload.as_ref().map_or(0, |w| w.txs.len())
}

/// # Safety
/// `workload` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sp_workload_free(workload: *mut SpWorkload) {
    if !workload.is_null() {
        drop(Box::from_raw(workload));
    }
}

/// Runs a simulation to completion.
///
/// # Safety
/// Pointers must be NULL or valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sp_run(params: *const SpSimParams, workload: *const SpWorkload, out: *mut *mut SpRun) -> SpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let config = to_config(ref_arg(params, "params")?)?;
        let workload = ref_arg(workload, "workload")?;
        let output = shardmove::run(config.clone(), &workload.txs)?;
        *out = Box::into_raw(Box::new(SpRun { config, output }));
        Ok(())
    })
}

/// # Safety
/// `run` must be NULL or a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn sp_run_summary(run: *const SpRun, out: *mut SpSummary) -> SpStatus {
    guard(|| {
        let s = &ref_arg(run, "run")?.output.summary;
        *out_arg(out, "out")? = SpSummary {
            rounds: s.rounds,
            executed: s.executed,
            cross_shard: s.cross_shard,
            migrations: s.migrations,
            throughput: s.throughput,
            mean_latency: s.mean_latency,
            wasted_capacity: s.wasted_capacity,
            cross_shard_ratio: s.cross_shard_ratio,
            pending: s.pending,
        };
        Ok(())
    })
}

/// Number of simulated rounds, 0 for NULL.
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sp_run_round_count(run: *const SpRun) -> usize {
    run.as_ref().map_or(0, |r| r.output.rounds.len())
}

/// Statistics of round `index`.
///
/// # Safety
/// `run` must be NULL or a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn sp_run_round(run: *const SpRun, index: usize, out: *mut SpRoundStats) -> SpStatus {
    guard(|| {
        let rounds = &ref_arg(run, "run")?.output.rounds;
        let out = out_arg(out, "out")?;
        let r = rounds.get(index).ok_or_else(|| {
            Failure(SpStatus::Config, format!("round {index} out of range ({} rounds)", rounds.len()))
        })?;
        *out = SpRoundStats {
            round: r.round,
            executed: r.executed as u64,
            wasted: r.wasted(),
            cross_shard: r.cross_shard,
            migrations: r.migrations,
        };
        Ok(())
    })
}

/// Writes `rounds.csv`, `summary.csv` and, with economics on, `epochs.csv`
/// into `dir` (created if missing).
///
/// # Safety
/// `run` must be NULL or a live handle; `dir` NULL or a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn sp_run_write_csv(run: *const SpRun, dir: *const c_char) -> SpStatus {
    guard(|| {
        let run = ref_arg(run, "run")?;
        let dir = PathBuf::from(str_arg(dir, "dir")?);
        std::fs::create_dir_all(&dir).map_err(|e| Failure(SpStatus::Io, format!("{}: {e}", dir.display())))?;
        let create = |name: &str| {
            let path = dir.join(name);
            std::fs::File::create(&path)
                .map(std::io::BufWriter::new)
                .map_err(|e| Failure(SpStatus::Io, format!("{}: {e}", path.display())))
        };
        report::write_rounds(create("rounds.csv")?, &run.output.rounds)?;
        let row = SummaryRow {
            config: run.config.clone(),
            summary: run.output.summary.clone(),
        };
        report::write_summary(create("summary.csv")?, &[row])?;
        if let Some(ledger) = &run.output.ledger {
            report::write_epochs(create("epochs.csv")?, ledger.reports())?;
        }
        Ok(())
    })
}

/// # Safety
/// `run` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sp_run_free(run: *mut SpRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Hash placement of a 32-byte account id over `k` shards.
///
/// # Safety
/// `id` must be NULL or point to 32 readable bytes; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn sp_hash_place(id: *const u8, k: u32, out: *mut u32) -> SpStatus {
    guard(|| {
        if id.is_null() {
            return Err(null("id"));
        }
        if k == 0 {
            return Err(Failure(SpStatus::Config, "shard count must be positive".into()));
        }
        let out = out_arg(out, "out")?;
        let bytes: [u8; 32] = std::slice::from_raw_parts(id, 32).try_into().expect("32 bytes");
        let ShardId(s) = hash_place(&AccountId(bytes), k);
        *out = s;
        Ok(())
    })
}
