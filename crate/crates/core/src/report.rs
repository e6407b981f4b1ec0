//! CSV output: per-round metrics, run summaries, sweep tables and epoch
//! settlements. Comma separated, header row, LF line endings, decimals with
//! six significant digits.

use std::io::Write;

use crate::economics::{payout_f64, EpochReport};
use crate::engine::{FinalSummary, RoundReport, SimConfig};
use crate::error::Result;

/// Formats like C's `%.6g`.
pub fn fmt_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    // exponent after rounding to 6 significant digits
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

/// `round, processed, wasted, cross_count, migrations, load_0..load_{k-1}`;
/// `load_i` is the capacity spent by shard `i` in that round.
pub fn write_rounds<W: Write>(out: W, rounds: &[RoundReport]) -> Result<()> {
    let mut w = writer(out);
    let k = rounds.first().map_or(0, |r| r.processed_cost.len());
    let mut header: Vec<String> = ["round", "processed", "wasted", "cross_count", "migrations"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..k).map(|i| format!("load_{i}")));
    w.write_record(&header)?;
    for r in rounds {
        let mut row = vec![
            r.round.to_string(),
            r.executed.to_string(),
            r.wasted().to_string(),
            r.cross_shard.to_string(),
            r.migrations.to_string(),
        ];
        row.extend(r.processed_cost.iter().map(u64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// A run's configuration and results as one table row.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub config: SimConfig,
    pub summary: FinalSummary,
}

const CONFIG_COLUMNS: [&str; 8] = [
    "policy",
    "mode",
    "load_view",
    "shards",
    "cross_cost",
    "capacity",
    "mempool_ratio",
    "seed",
];

const METRIC_COLUMNS: [&str; 9] = [
    "rounds",
    "executed",
    "throughput",
    "mean_latency",
    "wasted_capacity",
    "cross_shard_ratio",
    "cross_shard",
    "migrations",
    "pending",
];

fn config_fields(c: &SimConfig) -> Vec<String> {
    vec![
        c.policy.to_string(),
        c.mode.to_string(),
        c.load_view.to_string(),
        c.shards.to_string(),
        c.cross_shard_cost.to_string(),
        c.capacity.to_string(),
        fmt_g6(c.mempool_ratio),
        c.seed.to_string(),
    ]
}

fn metric_fields(s: &FinalSummary) -> Vec<String> {
    vec![
        s.rounds.to_string(),
        s.executed.to_string(),
        fmt_g6(s.throughput),
        fmt_g6(s.mean_latency),
        s.wasted_capacity.to_string(),
        fmt_g6(s.cross_shard_ratio),
        s.cross_shard.to_string(),
        s.migrations.to_string(),
        s.pending.to_string(),
    ]
}

/// One row per run.
pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(CONFIG_COLUMNS.iter().chain(&METRIC_COLUMNS))?;
    for row in rows {
        let mut fields = config_fields(&row.config);
        fields.extend(metric_fields(&row.summary));
        w.write_record(&fields)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Sweep table: one row per (policy, axis value).
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub row: SummaryRow,
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = writer(out);
    let header = ["axis", "value"].iter().chain(&CONFIG_COLUMNS).chain(&METRIC_COLUMNS);
    w.write_record(header)?;
    for r in rows {
        let mut fields = vec![r.axis.clone(), fmt_g6(r.value)];
        fields.extend(config_fields(&r.row.config));
        fields.extend(metric_fields(&r.row.summary));
        w.write_record(&fields)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `epoch, shard, deposit_total, miner, contribution, payout,
/// expected_payout`: one row per miner and epoch, `shard` being the miner's
/// shard during that epoch.
pub fn write_epochs<W: Write>(out: W, epochs: &[EpochReport]) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "epoch",
        "shard",
        "deposit_total",
        "miner",
        "contribution",
        "payout",
        "expected_payout",
    ])?;
    for e in epochs {
        for p in &e.payouts {
            w.write_record([
                e.epoch.to_string(),
                p.shard.to_string(),
                e.deposits[p.shard.index()].total.to_string(),
                p.miner.0.to_string(),
                p.contribution.to_string(),
                fmt_g6(payout_f64(&p.payout)),
                fmt_g6(payout_f64(&p.expected)),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
