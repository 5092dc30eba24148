//! The `sglab` command-line driver: argument and config handling, seeding,
//! worker pools, run records and the acceptance suite.

pub mod acceptance;
pub mod args;
pub mod run;

use std::io::Write;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde::Serialize;
use serde_json::Value;

use args::{Cli, Command, Format};

/// Version tag carried by every run record.
pub const SCHEMA: &str = "sglab.run-record/1";

#[derive(Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub params: Value,
    pub seed: Option<u64>,
    pub format: Format,
    pub output: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub schema: &'static str,
    pub config: RunConfig,
    pub results: Value,
    pub diagnostics: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug)]
pub enum Failure {
    Usage(clap::Error),
    BadConfig(String),
    Module(sglab::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(e) if !e.use_stderr() => 0,
            Failure::Usage(_) | Failure::BadConfig(_) => 2,
            Failure::Module(e) if e.is_diagnostic() => 3,
            Failure::Module(_) => 2,
        }
    }

    fn report(&self) {
        match self {
            Failure::Usage(e) => {
                let _ = e.print();
            }
            Failure::BadConfig(m) => eprintln!("sglab: bad config: {m}"),
            Failure::Module(e) => eprintln!("sglab: error: {e}"),
        }
    }
}

fn env_set(name: &str) -> bool {
    std::env::var(name).map(|v| !v.is_empty() && v != "0" && v != "false").unwrap_or(false)
}

fn flag_value(v: &Value, key: &str) -> Option<String> {
    match v {
        Value::Null | Value::Bool(false) => None,
        Value::Bool(true) => Some(String::new()),
        Value::String(s) => Some(s.clone()),
        Value::Array(items) => {
            let sep = if key == "fs" { ";" } else { "," };
            let parts: Vec<String> = items.iter().filter_map(|x| flag_value(x, key)).collect();
            Some(parts.join(sep))
        }
        other => Some(other.to_string()),
    }
}

/// Appends `--key value` for every entry of the `--config` JSON object whose
/// flag is not already on the command line.
pub fn merge_config(argv: &[String]) -> Result<Vec<String>, Failure> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else { return Ok(argv.to_vec()) };
    let text = std::fs::read_to_string(&path).map_err(|e| Failure::BadConfig(format!("{path}: {e}")))?;
    let map: serde_json::Map<String, Value> =
        serde_json::from_str(&text).map_err(|e| Failure::BadConfig(format!("{path}: {e}")))?;
    let present: Vec<&str> = argv
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a))
        .collect();
    let mut out = argv.to_vec();
    for (key, v) in &map {
        let flag = key.replace('_', "-");
        if flag == "config" || present.contains(&flag.as_str()) {
            continue;
        }
        if let Some(val) = flag_value(v, &flag) {
            out.push(format!("--{flag}"));
            if !matches!(v, Value::Bool(true)) {
                out.push(val);
            }
        }
    }
    Ok(out)
}

pub fn parse<S: AsRef<str>>(argv: &[S]) -> Result<Cli, Failure> {
    let argv: Vec<String> = argv.iter().map(|s| s.as_ref().to_string()).collect();
    Cli::try_parse_from(merge_config(&argv)?).map_err(Failure::Usage)
}

/// `SGLAB_WORKERS`, then `--workers`, then the number of cores.
pub fn resolve_workers(cli: &Cli) -> Result<usize, Failure> {
    let n = match std::env::var("SGLAB_WORKERS") {
        Ok(v) if !v.is_empty() => {
            v.parse::<usize>().map_err(|_| Failure::BadConfig(format!("SGLAB_WORKERS={v} is not a count")))?
        }
        _ => cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
    };
    if n == 0 {
        return Err(Failure::BadConfig("worker count must be positive".into()));
    }
    Ok(n)
}

/// The seed for this run: `--seed`, or for randomized commands outside CI a
/// time-derived seed that is echoed to stderr.
pub fn resolve_seed(cli: &Cli) -> Result<Option<u64>, Failure> {
    if cli.seed.is_some() || !run::is_randomized(&cli.command) {
        return Ok(cli.seed);
    }
    if env_set("CI") || env_set("SGLAB_CI") {
        return Err(Failure::BadConfig("randomized commands need --seed in CI mode".into()));
    }
    let seed = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64);
    eprintln!("sglab: no --seed given; using --seed {seed}");
    Ok(Some(seed))
}

/// Runs a non-acceptance command and returns the bytes it would write.
pub fn output_bytes(cli: &Cli, seed: Option<u64>) -> Result<Vec<u8>, Failure> {
    let start = Instant::now();
    let (command, params) = run::describe(&cli.command);
    let outcome = run::execute(&cli.command, seed.unwrap_or(0)).map_err(Failure::Module)?;
    match cli.format {
        Format::Csv => outcome
            .csv
            .map(String::into_bytes)
            .ok_or_else(|| Failure::BadConfig(format!("`{command}` has no CSV form"))),
        Format::Json => {
            let record = RunRecord {
                schema: SCHEMA,
                config: RunConfig { command, params, seed, format: cli.format, output: cli.out.clone() },
                results: outcome.results,
                diagnostics: outcome.diagnostics,
                wall_time_s: cli.timing.then(|| start.elapsed().as_secs_f64()),
            };
            let mut bytes = serde_json::to_vec_pretty(&record).expect("json");
            bytes.push(b'\n');
            Ok(bytes)
        }
    }
}

/// Parses, seeds and runs a command line in the current thread pool.
pub fn record_bytes<S: AsRef<str>>(argv: &[S]) -> Result<Vec<u8>, Failure> {
    let cli = parse(argv)?;
    let seed = resolve_seed(&cli)?;
    output_bytes(&cli, seed)
}

fn write_out(out: &Option<String>, bytes: &[u8]) -> Result<(), Failure> {
    let res = match out {
        Some(path) => std::fs::write(path, bytes),
        None => std::io::stdout().write_all(bytes),
    };
    res.map_err(|e| Failure::BadConfig(format!("cannot write output: {e}")))
}

fn run_acceptance(cli: &Cli, suite: args::Suite) -> Result<i32, Failure> {
    let mut buffer = Vec::new();
    let to_file = cli.out.is_some();
    let mut emit = |r: &acceptance::CriterionReport| {
        let line = serde_json::to_string(r).expect("json");
        if to_file {
            buffer.extend_from_slice(line.as_bytes());
            buffer.push(b'\n');
        } else {
            println!("{line}");
        }
    };
    let summary = acceptance::run_suite(suite, &mut emit);
    let line = serde_json::to_string(&summary).expect("json");
    if to_file {
        buffer.extend_from_slice(line.as_bytes());
        buffer.push(b'\n');
        write_out(&cli.out, &buffer)?;
    } else {
        println!("{line}");
    }
    Ok(if summary.failed.is_empty() { 0 } else { 3 })
}

fn try_main<S: AsRef<str>>(argv: &[S]) -> Result<i32, Failure> {
    let cli = parse(argv)?;
    if let Command::Acceptance { suite } = cli.command {
        return run_acceptance(&cli, suite);
    }
    let workers = resolve_workers(&cli)?;
    let seed = resolve_seed(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::BadConfig(e.to_string()))?;
    let bytes = pool.install(|| output_bytes(&cli, seed))?;
    write_out(&cli.out, &bytes)?;
    Ok(0)
}

/// Entry point of the binary; returns the process exit code.
pub fn main_entry<S: AsRef<str>>(argv: &[S]) -> i32 {
    match try_main(argv) {
        Ok(code) => code,
        Err(f) => {
            f.report();
            f.exit_code()
        }
    }
}
