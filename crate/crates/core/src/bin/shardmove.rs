use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Arg, ArgAction, ArgMatches, Command};
use log::info;

use shardmove::experiment::{self, Settings, SYNTHETIC_NAMES};
use shardmove::workload;

/// Value-taking settings shared by every subcommand: (flag, value name, help).
const SETTINGS: &[(&str, &str, &str)] = &[
    ("policy", "NAME", "placement policy: hash, partition or scheduler"),
    ("mode", "MODE", "commit mode: 2pc or mutex"),
    ("shards", "N", "number of shards"),
    ("cross-cost", "N", "per-shard cost multiplier of a cross-shard transaction"),
    ("capacity", "N", "capacity units per shard per round"),
    ("mempool-ratio", "F", "mempool size as a multiple of total capacity"),
    ("window", "N", "sliding window length in blocks"),
    ("epoch-length", "N", "rounds per epoch"),
    ("miners-per-shard", "N", "miners assigned to each shard"),
    ("seed", "N", "master seed"),
    ("max-rounds", "N", "stop after N rounds"),
    ("load-view", "VIEW", "loads used for planning: live or beacon"),
    ("refuse-outgoing-from", "SHARD", "shard whose miners veto outgoing migrations"),
    ("trace", "PATH", "trace file"),
    ("synthetic", "NAME", "synthetic workload generator"),
    ("out", "PATH", "output directory (file for generate)"),
    ("accounts", "N", "synthetic: number of accounts"),
    ("txs", "N", "synthetic: number of transactions"),
    ("zipf-exponent", "F", "synthetic: Zipf exponent of the zipf generator"),
    ("communities", "N", "synthetic: number of communities"),
    ("p-inter", "F", "synthetic: probability of an inter-community partner"),
    ("account-exponent", "F", "synthetic: Zipf skew of member choice"),
    ("community-exponent", "F", "synthetic: Zipf skew of community choice"),
    ("reference-shards", "N", "synthetic: shard count targeted by all-intra/all-cross"),
    ("burst-period", "N", "synthetic: transactions per burst period"),
    ("burst-len", "N", "synthetic: burst length in transactions"),
    ("burst-amplitude", "F", "synthetic: probability an endpoint is hot during a burst"),
    ("hot-set", "N", "synthetic: accounts in a burst hot set"),
    ("multi-account-prob", "F", "synthetic: probability of a multi-account transaction"),
    ("max-write-set", "N", "synthetic: largest write set"),
    ("fee", "N", "synthetic: fee per transaction"),
];

const SWITCHES: &[(&str, &str)] = &[
    ("economics", "enable the epoch fee ledger"),
    ("ca-migration", "allow contract accounts to migrate"),
];

fn with_settings(mut cmd: Command) -> Command {
    cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("PATH")
            .help("key=value settings file; flags take precedence"),
    );
    for &(name, value, help) in SETTINGS {
        cmd = cmd.arg(Arg::new(name).long(name).value_name(value).help(help));
    }
    for &(name, help) in SWITCHES {
        cmd = cmd.arg(Arg::new(name).long(name).action(ArgAction::SetTrue).help(help));
    }
    cmd
}

fn cli() -> Command {
    let sweep = Command::new("sweep")
        .about("Vary one parameter over a list of values for several policies")
        .arg(Arg::new("axis").long("axis").value_name("AXIS").help("shards, cross-cost, capacity or mempool-ratio"))
        .arg(Arg::new("values").long("values").value_name("LIST").help("comma-separated axis values"))
        .arg(
            Arg::new("policies")
                .long("policies")
                .value_name("LIST")
                .help("comma-separated policies (default: hash,partition,scheduler)"),
        );
    Command::new("shardmove")
        .about("Account placement and migration simulator for sharded blockchains")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .after_help(format!("Synthetic workloads: {}", SYNTHETIC_NAMES.join(", ")))
        .subcommand(with_settings(Command::new("run").about("Run one simulation")))
        .subcommand(with_settings(sweep))
        .subcommand(with_settings(
            Command::new("generate").about("Write a synthetic workload as a trace file"),
        ))
}

fn settings(m: &ArgMatches) -> Result<Settings> {
    let mut s = Settings::default();
    if let Some(path) = m.get_one::<String>("config") {
        s.apply_file(&PathBuf::from(path))?;
    }
    for &(name, _, _) in SETTINGS.iter().chain(&[("axis", "", ""), ("values", "", ""), ("policies", "", "")]) {
        if let Ok(Some(v)) = m.try_get_one::<String>(name) {
            s.set(name, v).with_context(|| format!("--{name}"))?;
        }
    }
    for &(name, _) in SWITCHES {
        if m.get_flag(name) {
            s.set(name, "true")?;
        }
    }
    Ok(s)
}

fn execute(sub: &str, m: &ArgMatches) -> Result<()> {
    let s = settings(m)?;
    match sub {
        "run" => {
            let spec = s.single()?;
            let row = experiment::run_single(&spec)?;
            let sm = &row.summary;
            info!("wrote {}", spec.out_dir.display());
            println!(
                "{} rounds, {} executed, throughput {:.3}, mean latency {:.3}, cross-shard ratio {:.4}",
                sm.rounds, sm.executed, sm.throughput, sm.mean_latency, sm.cross_shard_ratio
            );
        }
        "sweep" => {
            let spec = s.sweep()?;
            let rows = experiment::run_sweep(&spec)?;
            info!("wrote {}", spec.out_dir.display());
            println!("{} runs written to {}", rows.len(), spec.out_dir.join("sweep.csv").display());
        }
        "generate" => {
            let experiment::WorkloadSource::Synthetic(params) = s.workload()? else {
                anyhow::bail!("generate needs --synthetic NAME");
            };
            let txs = workload::generate(&params.to_spec(s.config.shards, s.config.seed)?)?;
            let file = File::create(&s.out_dir).with_context(|| format!("creating {}", s.out_dir.display()))?;
            workload::write_trace(&txs, BufWriter::new(file))
                .with_context(|| format!("writing {}", s.out_dir.display()))?;
            println!("{} transactions written to {}", txs.len(), s.out_dir.display());
        }
        _ => unreachable!("subcommand_required"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let (sub, m) = matches.subcommand().expect("subcommand_required");
    match execute(sub, m) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
