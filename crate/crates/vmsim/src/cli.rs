//! Experiment driver: load or synthesize workloads, run policy sweeps in
//! parallel, and emit machine-readable results.
//!
//! Verbs: `run` (policy x day sweep from a config file), `compare` (percentage
//! deltas between two policies in a results file), `synth` (write synthetic
//! trace files), `stats` (summarize a trace directory).
//!
//! Exit codes: 0 success, 2 usage or config error, 3 runtime error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::engine;
use crate::error::SimError;
use crate::metrics;
use crate::model::{make_default_datacenter, vm_fleet, PolicyConfig, VmState};
use crate::workload::{self, Trace};

/// Golden header of results.csv; column order is part of the file contract.
pub const RESULTS_HEADER: &str = "policy,day,energy_kwh,slatah,pdm,slav,esv,migrations,seed";

#[derive(Parser)]
#[command(name = "vmsim", about = "Energy-aware VM consolidation simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the policy sweep described by a config file
    Run {
        /// Experiment config file (key = value lines)
        #[arg(long)]
        config: PathBuf,
        /// Output directory for results.csv (default: current directory)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config file seed
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for independent (policy, day) runs
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Also write one migration event log per run
        #[arg(long)]
        event_log: bool,
    },
    /// Compare two policies in an existing results.csv
    Compare {
        /// Path to results.csv
        results: PathBuf,
        /// Baseline policy name, e.g. THR-MMT-0.8
        baseline: String,
        /// Candidate policy name, e.g. THR-MxMT-0.8
        candidate: String,
    },
    /// Generate synthetic trace files
    Synth {
        n_vms: usize,
        /// Target mean CPU utilization, percent
        mean: f64,
        /// Target standard deviation, percent
        stdev: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Directory to write one trace file per VM
        #[arg(long)]
        out: PathBuf,
    },
    /// Print summary statistics of a trace directory
    Stats { trace_dir: PathBuf },
}

/// Errors split by exit code: usage/config problems exit 2, failures during
/// execution exit 3.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(SimError),
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Runtime(e)
    }
}

/// Parsed experiment config.
#[derive(Debug, Clone, PartialEq)]
struct ExperimentConfig {
    hosts: usize,
    /// Synthetic fleet size; mutually exclusive with `trace_dir`.
    vms: Option<usize>,
    trace_dir: Option<PathBuf>,
    steps: usize,
    days: usize,
    mean: f64,
    stdev: f64,
    seed: u64,
    policies: Vec<PolicyConfig>,
    out: Option<PathBuf>,
}

fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "config line {}: expected 'key = value', got '{line}'",
                i + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }

    fn get<T: std::str::FromStr>(
        map: &BTreeMap<String, String>,
        key: &str,
    ) -> Result<Option<T>, CliError> {
        match map.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key '{key}': bad value '{v}'"))),
        }
    }

    let known = [
        "hosts", "vms", "trace_dir", "steps", "days", "mean", "stdev", "seed", "policies", "out",
    ];
    if let Some(k) = map.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(CliError::Usage(format!("unknown config key '{k}'")));
    }

    let hosts = get::<usize>(&map, "hosts")?
        .ok_or_else(|| CliError::Usage("config key 'hosts' is required".into()))?;
    let vms = get::<usize>(&map, "vms")?;
    let trace_dir = map.get("trace_dir").map(PathBuf::from);
    match (&vms, &trace_dir) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "config keys 'vms' and 'trace_dir' are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Usage(
                "config needs either 'vms' (synthetic) or 'trace_dir'".into(),
            ))
        }
        _ => {}
    }

    let policies_raw = map
        .get("policies")
        .ok_or_else(|| CliError::Usage("config key 'policies' is required".into()))?;
    let mut policies = Vec::new();
    for name in policies_raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let p: PolicyConfig = name
            .parse()
            .map_err(|e: SimError| CliError::Usage(e.to_string()))?;
        policies.push(p);
    }
    if policies.is_empty() {
        return Err(CliError::Usage("config key 'policies' lists no policies".into()));
    }

    Ok(ExperimentConfig {
        hosts,
        vms,
        trace_dir,
        steps: get(&map, "steps")?.unwrap_or(288),
        days: get(&map, "days")?.unwrap_or(1),
        mean: get(&map, "mean")?.unwrap_or(12.31),
        stdev: get(&map, "stdev")?.unwrap_or(17.09),
        seed: get(&map, "seed")?.unwrap_or(42),
        policies,
        out: map.get("out").map(PathBuf::from),
    })
}

/// One results.csv data row.
#[derive(Debug, Clone, PartialEq)]
struct ResultRow {
    policy: String,
    day: usize,
    energy_kwh: f64,
    slatah: f64,
    pdm: f64,
    slav: f64,
    esv: f64,
    migrations: usize,
    seed: u64,
}

impl ResultRow {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.policy,
            self.day,
            self.energy_kwh,
            self.slatah,
            self.pdm,
            self.slav,
            self.esv,
            self.migrations,
            self.seed
        )
    }
}

/// Traces for one simulated day; same traces are shared across policies so
/// differences come from the policy alone.
fn traces_for_day(cfg: &ExperimentConfig, day: usize) -> Result<Vec<Trace>, SimError> {
    let day_seed = cfg.seed + day as u64;
    match &cfg.trace_dir {
        Some(dir) => {
            let mut traces = workload::load_trace_dir(dir)?;
            workload::shuffle_traces(&mut traces, day_seed);
            Ok(traces)
        }
        None => workload::synth_traces(cfg.vms.expect("validated"), cfg.mean, cfg.stdev, day_seed),
    }
}

fn run_one(
    cfg: &ExperimentConfig,
    policy: &PolicyConfig,
    day: usize,
    traces: &[Trace],
) -> Result<(ResultRow, engine::RunReport), SimError> {
    let day_seed = cfg.seed + day as u64;
    let hosts = make_default_datacenter(cfg.hosts, day_seed)?;
    let vms: Vec<VmState> = vm_fleet(traces.len()).into_iter().map(VmState::new).collect();
    let report = engine::run(hosts, vms, traces, policy, cfg.steps, day_seed)?;
    let row = ResultRow {
        policy: policy.to_string(),
        day,
        energy_kwh: metrics::energy_total(&report),
        slatah: metrics::slatah(&report),
        pdm: metrics::pdm(&report),
        slav: metrics::slav(&report),
        esv: metrics::esv(&report),
        migrations: metrics::migration_count(&report),
        seed: day_seed,
    };
    Ok((row, report))
}

fn write_results(rows: &[ResultRow], path: &Path) -> Result<(), SimError> {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_event_log(report: &engine::RunReport, path: &Path) -> Result<(), SimError> {
    let mut out = String::from("time,vm,src,dst,duration_s\n");
    for m in &report.migrations {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            m.started_at, m.vm, m.source, m.dest, m.duration
        );
    }
    fs::write(path, out).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_run(
    config_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    parallel: usize,
    event_log: bool,
) -> Result<(), CliError> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", config_path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out_dir = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir).map_err(|source| SimError::Io {
        path: out_dir.clone(),
        source,
    })?;

    // day traces are computed once and shared by every policy
    let mut day_traces = Vec::with_capacity(cfg.days);
    for day in 0..cfg.days {
        day_traces.push(traces_for_day(&cfg, day)?);
    }

    let jobs: Vec<(usize, &PolicyConfig)> = (0..cfg.days)
        .flat_map(|d| cfg.policies.iter().map(move |p| (d, p)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| CliError::Runtime(SimError::Config(format!("thread pool: {e}"))))?;
    let results: Vec<Result<(ResultRow, engine::RunReport), SimError>> = pool.install(|| {
        jobs.par_iter()
            .map(|(day, policy)| run_one(&cfg, policy, *day, &day_traces[*day]))
            .collect()
    });

    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let (row, report) = r?;
        if event_log {
            let name = format!("events_{}_day{}.csv", row.policy, row.day);
            write_event_log(&report, &out_dir.join(name))?;
        }
        rows.push(row);
    }
    // deterministic file regardless of execution order
    rows.sort_by(|a, b| a.policy.cmp(&b.policy).then(a.day.cmp(&b.day)));
    write_results(&rows, &out_dir.join("results.csv"))?;
    println!("wrote {} rows to {}", rows.len(), out_dir.join("results.csv").display());
    Ok(())
}

fn parse_results(path: &Path) -> Result<Vec<ResultRow>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RESULTS_HEADER => {}
        _ => {
            return Err(CliError::Usage(format!(
                "{} is not a results file (bad header)",
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let parse = |j: usize| -> Result<f64, CliError> {
            f[j].parse().map_err(|_| {
                CliError::Usage(format!("{} line {}: bad number '{}'", path.display(), i + 2, f[j]))
            })
        };
        if f.len() != 9 {
            return Err(CliError::Usage(format!(
                "{} line {}: expected 9 fields, got {}",
                path.display(),
                i + 2,
                f.len()
            )));
        }
        rows.push(ResultRow {
            policy: f[0].to_string(),
            day: parse(1)? as usize,
            energy_kwh: parse(2)?,
            slatah: parse(3)?,
            pdm: parse(4)?,
            slav: parse(5)?,
            esv: parse(6)?,
            migrations: parse(7)? as usize,
            seed: parse(8)? as u64,
        });
    }
    Ok(rows)
}

fn pct_delta(baseline: f64, candidate: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        100.0 * (baseline - candidate) / baseline
    }
}

fn cmd_compare(results: &Path, baseline: &str, candidate: &str) -> Result<(), CliError> {
    let rows = parse_results(results)?;
    let pick = |name: &str| -> Result<BTreeMap<usize, &ResultRow>, CliError> {
        let m: BTreeMap<usize, &ResultRow> = rows
            .iter()
            .filter(|r| r.policy == name)
            .map(|r| (r.day, r))
            .collect();
        if m.is_empty() {
            Err(CliError::Usage(format!(
                "policy '{name}' not present in {}",
                results.display()
            )))
        } else {
            Ok(m)
        }
    };
    let base = pick(baseline)?;
    let cand = pick(candidate)?;

    println!("baseline  {baseline}");
    println!("candidate {candidate}");
    println!("day,energy_delta_pct,slatah_delta_pct,migrations_delta_pct");
    let mut sums = [0.0f64; 3];
    let mut n = 0usize;
    for (day, b) in &base {
        let Some(c) = cand.get(day) else { continue };
        let d = [
            pct_delta(b.energy_kwh, c.energy_kwh),
            pct_delta(b.slatah, c.slatah),
            pct_delta(b.migrations as f64, c.migrations as f64),
        ];
        println!("{day},{:.2},{:.2},{:.2}", d[0], d[1], d[2]);
        for (s, v) in sums.iter_mut().zip(d) {
            *s += v;
        }
        n += 1;
    }
    if n == 0 {
        return Err(CliError::Usage(
            "baseline and candidate share no days".into(),
        ));
    }
    let nf = n as f64;
    println!("mean,{:.2},{:.2},{:.2}", sums[0] / nf, sums[1] / nf, sums[2] / nf);
    Ok(())
}

fn cmd_synth(n_vms: usize, mean: f64, stdev: f64, seed: u64, out: &Path) -> Result<(), CliError> {
    let traces = workload::synth_traces(n_vms, mean, stdev, seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    workload::write_trace_dir(&traces, out)?;
    println!("wrote {} trace files to {}", traces.len(), out.display());
    Ok(())
}

fn cmd_stats(trace_dir: &Path) -> Result<(), CliError> {
    let traces = workload::load_trace_dir(trace_dir)?;
    let s = workload::trace_stats(&traces)?;
    println!("traces    {}", traces.len());
    println!("samples   {}", traces.iter().map(|t| t.samples.len()).sum::<usize>());
    println!("mean      {:.2}", s.mean);
    println!("stdev     {:.2}", s.stdev);
    println!("quartile1 {:.2}", s.quartile1);
    println!("median    {:.2}", s.median);
    println!("quartile3 {:.2}", s.quartile3);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            parallel,
            event_log,
        } => cmd_run(&config, out, seed, parallel, event_log),
        Command::Compare {
            results,
            baseline,
            candidate,
        } => cmd_compare(&results, &baseline, &candidate),
        Command::Synth {
            n_vms,
            mean,
            stdev,
            seed,
            out,
        } => cmd_synth(n_vms, mean, stdev, seed, &out),
        Command::Stats { trace_dir } => cmd_stats(&trace_dir),
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            3
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
# sweep
hosts = 6
vms = 8
steps = 12
days = 2
seed = 7
policies = THR-MxMT-0.8, THR-MMT-0.8
";

    #[test]
    fn parses_minimal_config() {
        let cfg = parse_config(GOOD).unwrap();
        assert_eq!(cfg.hosts, 6);
        assert_eq!(cfg.vms, Some(8));
        assert_eq!(cfg.steps, 12);
        assert_eq!(cfg.days, 2);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.policies.len(), 2);
        assert_eq!(cfg.policies[0].to_string(), "THR-MxMT-0.8");
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = parse_config("hosts = 2\nvms = 4\npolicies = MAD-MMT-2.5\n").unwrap();
        assert_eq!(cfg.steps, 288);
        assert_eq!(cfg.days, 1);
        assert_eq!(cfg.seed, 42);
        assert!((cfg.mean - 12.31).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(parse_config("vms = 4\npolicies = THR-MMT-0.8\n").is_err());
        assert!(parse_config("hosts = 2\npolicies = THR-MMT-0.8\n").is_err());
        assert!(parse_config("hosts = 2\nvms = 4\n").is_err());
        assert!(parse_config("hosts = 2\nvms = 4\npolicies = BOGUS\n").is_err());
        assert!(parse_config("hosts = 2\nvms = 4\ntrace_dir = x\npolicies = THR-MMT-0.8\n").is_err());
        assert!(parse_config("hosts = 2\nvms = 4\nsteps = abc\npolicies = THR-MMT-0.8\n").is_err());
        assert!(parse_config("hosts = 2\nvms = 4\nbogus = 1\npolicies = THR-MMT-0.8\n").is_err());
        assert!(parse_config("no equals sign").is_err());
    }

    #[test]
    fn day_traces_shared_and_seeded() {
        let cfg = parse_config(GOOD).unwrap();
        let a = traces_for_day(&cfg, 0).unwrap();
        let b = traces_for_day(&cfg, 0).unwrap();
        assert_eq!(a, b);
        let c = traces_for_day(&cfg, 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sweep_writes_sorted_rows() {
        let cfg = parse_config(GOOD).unwrap();
        let mut rows = Vec::new();
        for day in 0..cfg.days {
            let traces = traces_for_day(&cfg, day).unwrap();
            for p in &cfg.policies {
                rows.push(run_one(&cfg, p, day, &traces).unwrap().0);
            }
        }
        rows.sort_by(|a, b| a.policy.cmp(&b.policy).then(a.day.cmp(&b.day)));
        assert_eq!(rows.len(), 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        write_results(&rows, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(RESULTS_HEADER));
        assert_eq!(lines.count(), 4);

        let parsed = parse_results(&path).unwrap();
        assert_eq!(parsed, rows);
    }

    #[test]
    fn compare_deltas() {
        assert_eq!(pct_delta(100.0, 81.0), 19.0);
        assert_eq!(pct_delta(100.0, 5.0), 95.0);
        assert_eq!(pct_delta(3.0, 3.0), 0.0);
        assert_eq!(pct_delta(0.0, 5.0), 0.0);
    }

    #[test]
    fn results_file_round_trip_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        fs::write(&path, "nope\n").unwrap();
        assert!(parse_results(&path).is_err());
        fs::write(&path, format!("{RESULTS_HEADER}\na,b\n")).unwrap();
        assert!(parse_results(&path).is_err());
    }
}
