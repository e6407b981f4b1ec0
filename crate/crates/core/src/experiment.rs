//! Experiment orchestration: settings layered from defaults, a key=value
//! file and command-line flags; single runs and one-axis sweeps written out
//! as CSV.

use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::engine::{self, LoadView, SimConfig, SimOutput};
use crate::error::{Error, Result};
use crate::policy::PolicyKind;
use crate::report::{self, SummaryRow, SweepRow};
use crate::seed::derive_seed;
use crate::types::{ShardId, Transaction};
use crate::workload::{self, Generator, SyntheticSpec, DEFAULT_ZIPF_EXPONENT};

/// The single parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Shards,
    CrossCost,
    Capacity,
    MempoolRatio,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Shards => "shards",
            SweepAxis::CrossCost => "cross-cost",
            SweepAxis::Capacity => "capacity",
            SweepAxis::MempoolRatio => "mempool-ratio",
        }
    }

    /// Returns `base` with the axis set to `value`.
    pub fn apply(self, base: &SimConfig, value: f64) -> Result<SimConfig> {
        let mut c = base.clone();
        let integer = || -> Result<u64> {
            if value.fract() != 0.0 || value < 0.0 || value > u32::MAX as f64 {
                return Err(Error::Config(format!("{} takes integer values, got {value}", self.as_str())));
            }
            Ok(value as u64)
        };
        match self {
            SweepAxis::Shards => c.shards = integer()? as u32,
            SweepAxis::CrossCost => c.cross_shard_cost = integer()?,
            SweepAxis::Capacity => c.capacity = integer()?,
            SweepAxis::MempoolRatio => c.mempool_ratio = value,
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "shards" | "k-shards" | "k" => Ok(SweepAxis::Shards),
            "cross-cost" | "c-cross" | "c" => Ok(SweepAxis::CrossCost),
            "capacity" => Ok(SweepAxis::Capacity),
            "mempool-ratio" | "r" => Ok(SweepAxis::MempoolRatio),
            _ => Err(Error::Config(format!(
                "unknown sweep axis {s:?} (expected shards, cross-cost, capacity or mempool-ratio)"
            ))),
        }
    }
}

/// Parameters of the named synthetic generators.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticParams {
    pub name: String,
    pub accounts: usize,
    pub txs: usize,
    pub zipf_exponent: f64,
    pub communities: usize,
    pub p_inter: f64,
    pub account_exponent: Option<f64>,
    pub community_exponent: Option<f64>,
    /// Shard count the all-intra / all-cross generators target; defaults to
    /// the run's shard count.
    pub reference_shards: Option<u32>,
    pub burst_period: usize,
    pub burst_len: usize,
    pub burst_amplitude: f64,
    pub hot_set: usize,
    pub multi_account_prob: f64,
    pub max_write_set: usize,
    pub fee: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            name: "communities".into(),
            accounts: 10_000,
            txs: 100_000,
            zipf_exponent: DEFAULT_ZIPF_EXPONENT,
            communities: 16,
            p_inter: 0.05,
            account_exponent: None,
            community_exponent: None,
            reference_shards: None,
            burst_period: 10_000,
            burst_len: 2_000,
            burst_amplitude: 0.8,
            hot_set: 50,
            multi_account_prob: 0.0,
            max_write_set: 2,
            fee: 1,
        }
    }
}

/// Generator names accepted by `--synthetic`.
pub const SYNTHETIC_NAMES: [&str; 6] = ["all-intra", "all-cross", "zipf", "communities", "communities-zipf", "bursty"];

impl SyntheticParams {
    /// The generator spec for `shards` shards and master seed `seed`.
    pub fn to_spec(&self, shards: u32, seed: u64) -> Result<SyntheticSpec> {
        let reference_shards = self.reference_shards.unwrap_or(shards);
        let generator = match self.name.as_str() {
            "all-intra" => Generator::AllIntra { reference_shards },
            "all-cross" => Generator::AllCross { reference_shards },
            "zipf" => Generator::ZipfHotspot {
                exponent: self.zipf_exponent,
            },
            "communities" => Generator::Communities {
                communities: self.communities,
                p_inter: self.p_inter,
                account_exponent: self.account_exponent,
                community_exponent: self.community_exponent,
            },
            "communities-zipf" => Generator::Communities {
                communities: self.communities,
                p_inter: self.p_inter,
                account_exponent: Some(self.account_exponent.unwrap_or(1.0)),
                community_exponent: Some(self.community_exponent.unwrap_or(1.0)),
            },
            "bursty" => Generator::Bursty {
                exponent: self.account_exponent,
                period: self.burst_period,
                burst_len: self.burst_len,
                amplitude: self.burst_amplitude,
                hot_set: self.hot_set,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown synthetic workload {other:?} (expected one of {})",
                    SYNTHETIC_NAMES.join(", ")
                )))
            }
        };
        Ok(
            SyntheticSpec::new(generator, self.accounts, self.txs, derive_seed(seed, "workload"))
                .with_multi_account(self.multi_account_prob, self.max_write_set)
                .with_fee(self.fee),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorkloadSource {
    Trace(PathBuf),
    Synthetic(SyntheticParams),
}

impl WorkloadSource {
    pub fn load(&self, shards: u32, seed: u64) -> Result<Vec<Transaction>> {
        match self {
            WorkloadSource::Trace(path) => workload::load_trace(path),
            WorkloadSource::Synthetic(params) => workload::generate(&params.to_spec(shards, seed)?),
        }
    }
}

/// Everything an invocation needs.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub base: SimConfig,
    pub workload: WorkloadSource,
    pub sweep: Option<(SweepAxis, Vec<f64>)>,
    pub policies: Vec<PolicyKind>,
    pub out_dir: PathBuf,
}

/// Mutable settings assembled key by key. Keys are the long flag names
/// without dashes prefix, e.g. `cross-cost` (underscores also accepted).
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub config: SimConfig,
    pub trace: Option<PathBuf>,
    pub synthetic: SyntheticParams,
    pub synthetic_set: bool,
    pub out_dir: PathBuf,
    pub axis: Option<SweepAxis>,
    pub values: Vec<f64>,
    pub policies: Vec<PolicyKind>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            config: SimConfig::default(),
            trace: None,
            synthetic: SyntheticParams::default(),
            synthetic_set: false,
            out_dir: PathBuf::from("out"),
            axis: None,
            values: Vec::new(),
            policies: Vec::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "" | "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid value {value:?} for {key}"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl Settings {
    /// Sets one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key_norm = key.trim().replace('_', "-");
        let k = key_norm.as_str();
        let c = &mut self.config;
        let s = &mut self.synthetic;
        match k {
            "policy" => {
                c.policy = value.trim().parse().map_err(Error::Config)?;
            }
            "mode" => c.mode = value.trim().parse().map_err(Error::Config)?,
            "shards" => c.shards = parse(k, value)?,
            "cross-cost" => c.cross_shard_cost = parse(k, value)?,
            "capacity" => c.capacity = parse(k, value)?,
            "mempool-ratio" => c.mempool_ratio = parse(k, value)?,
            "window" => c.window = parse(k, value)?,
            "epoch-length" => c.epoch_length = parse(k, value)?,
            "miners-per-shard" => c.miners_per_shard = parse(k, value)?,
            "seed" => c.seed = parse(k, value)?,
            "max-rounds" => c.max_rounds = Some(parse(k, value)?),
            "economics" => c.economics = parse_bool(k, value)?,
            "ca-migration" => c.ca_migration = parse_bool(k, value)?,
            "load-view" => c.load_view = value.trim().parse::<LoadView>()?,
            "refuse-outgoing-from" => c.refuse_outgoing_from = Some(ShardId(parse(k, value)?)),
            "trace" => self.trace = Some(PathBuf::from(value.trim())),
            "synthetic" => {
                s.name = value.trim().to_string();
                self.synthetic_set = true;
            }
            "out" => self.out_dir = PathBuf::from(value.trim()),
            "axis" => self.axis = Some(value.parse()?),
            "values" => self.values = parse_list(k, value)?,
            "policies" => {
                self.policies = value
                    .split(',')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| p.trim().parse().map_err(Error::Config))
                    .collect::<Result<_>>()?
            }
            "accounts" => s.accounts = parse(k, value)?,
            "txs" => s.txs = parse(k, value)?,
            "zipf-exponent" => s.zipf_exponent = parse(k, value)?,
            "communities" => s.communities = parse(k, value)?,
            "p-inter" => s.p_inter = parse(k, value)?,
            "account-exponent" => s.account_exponent = Some(parse(k, value)?),
            "community-exponent" => s.community_exponent = Some(parse(k, value)?),
            "reference-shards" => s.reference_shards = Some(parse(k, value)?),
            "burst-period" => s.burst_period = parse(k, value)?,
            "burst-len" => s.burst_len = parse(k, value)?,
            "burst-amplitude" => s.burst_amplitude = parse(k, value)?,
            "hot-set" => s.hot_set = parse(k, value)?,
            "multi-account-prob" => s.multi_account_prob = parse(k, value)?,
            "max-write-set" => s.max_write_set = parse(k, value)?,
            "fee" => s.fee = parse(k, value)?,
            _ => return Err(Error::Config(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    /// Applies a key=value file: one setting per line, `#` comments, blank
    /// lines ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected key=value".into(),
            })?;
            self.set(key, value).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn workload(&self) -> Result<WorkloadSource> {
        match (&self.trace, self.synthetic_set) {
            (Some(_), true) => Err(Error::Config("--trace and --synthetic are mutually exclusive".into())),
            (Some(path), false) => Ok(WorkloadSource::Trace(path.clone())),
            (None, true) => Ok(WorkloadSource::Synthetic(self.synthetic.clone())),
            (None, false) => Err(Error::Config("a workload is required: --trace PATH or --synthetic NAME".into())),
        }
    }

    /// A single run: no sweep axis, policy from `config`.
    pub fn single(&self) -> Result<ExperimentSpec> {
        self.config.validate()?;
        Ok(ExperimentSpec {
            base: self.config.clone(),
            workload: self.workload()?,
            sweep: None,
            policies: vec![self.config.policy],
            out_dir: self.out_dir.clone(),
        })
    }

    /// A sweep over one axis; policies default to all three.
    pub fn sweep(&self) -> Result<ExperimentSpec> {
        self.config.validate()?;
        let axis = self.axis.ok_or_else(|| Error::Config("a sweep needs --axis".into()))?;
        if self.values.is_empty() {
            return Err(Error::Config("a sweep needs --values".into()));
        }
        let policies = if self.policies.is_empty() {
            vec![PolicyKind::Hash, PolicyKind::Partition, PolicyKind::Scheduler]
        } else {
            self.policies.clone()
        };
        Ok(ExperimentSpec {
            base: self.config.clone(),
            workload: self.workload()?,
            sweep: Some((axis, self.values.clone())),
            policies,
            out_dir: self.out_dir.clone(),
        })
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_run(dir: &Path, out: &SimOutput) -> Result<()> {
    report::write_rounds(create(&dir.join("rounds.csv"))?, &out.rounds)?;
    if let Some(ledger) = &out.ledger {
        report::write_epochs(create(&dir.join("epochs.csv"))?, ledger.reports())?;
    }
    Ok(())
}

/// Runs one configuration and writes `rounds.csv`, `summary.csv` and, with
/// economics on, `epochs.csv` under `out_dir`.
pub fn run_single(spec: &ExperimentSpec) -> Result<SummaryRow> {
    let workload = spec.workload.load(spec.base.shards, spec.base.seed)?;
    let out = engine::run(spec.base.clone(), &workload)?;
    write_run(&spec.out_dir, &out)?;
    let row = SummaryRow {
        config: spec.base.clone(),
        summary: out.summary,
    };
    report::write_summary(create(&spec.out_dir.join("summary.csv"))?, std::slice::from_ref(&row))?;
    Ok(row)
}

/// Runs every (policy, value) pair in parallel. Writes per-run round files
/// under `runs/<policy>-<axis>-<value>/`, then `sweep.csv` and
/// `summary.csv` in policy-major, value-minor order.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    let (axis, values) = spec
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("no sweep axis given".into()))?;
    let points: Vec<(PolicyKind, f64, SimConfig)> = spec
        .policies
        .iter()
        .flat_map(|&p| values.iter().map(move |&v| (p, v)))
        .map(|(p, v)| {
            let mut c = axis.apply(&spec.base, v)?;
            c.policy = p;
            Ok((p, v, c))
        })
        .collect::<Result<_>>()?;

    // the workload only depends on k through the all-intra/all-cross
    // generators, so load it once unless the shard count is swept
    let shared = if *axis == SweepAxis::Shards {
        None
    } else {
        Some(spec.workload.load(spec.base.shards, spec.base.seed)?)
    };

    let rows = points
        .into_par_iter()
        .map(|(policy, value, config)| {
            let owned;
            let txs = match &shared {
                Some(txs) => txs,
                None => {
                    owned = spec.workload.load(config.shards, config.seed)?;
                    &owned
                }
            };
            let out = engine::run(config.clone(), txs)?;
            let dir = spec
                .out_dir
                .join("runs")
                .join(format!("{policy}-{axis}-{}", report::fmt_g6(value)));
            write_run(&dir, &out)?;
            Ok(SweepRow {
                axis: axis.to_string(),
                value,
                row: SummaryRow {
                    config,
                    summary: out.summary,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    report::write_sweep(create(&spec.out_dir.join("sweep.csv"))?, &rows)?;
    let summaries: Vec<SummaryRow> = rows.iter().map(|r| r.row.clone()).collect();
    report::write_summary(create(&spec.out_dir.join("summary.csv"))?, &summaries)?;
    Ok(rows)
}
