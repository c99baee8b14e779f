//! `stm-sim`: command-line front end for the space-time-modulated slab solvers.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::json;
use stm_core::Exec;

use commands::{summary_keys, Outcome, RunError};
use config::{Command, ConfigError, RunSpec};
use output::{num, Sink, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const OUT_ENV: &str = "STM_SIM_OUT";

#[derive(Debug, Parser)]
#[command(name = "stm-sim", version, about = "Space-time-modulated slab: bands, scattering and FDTD")]
pub struct Cli {
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides STM_SIM_OUT and output.dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Maximum worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Recorded in the manifest; no solver draws random numbers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// `--out`, then the environment, then the config file.
pub fn output_root(cli_out: Option<&Path>, env_out: Option<&str>, spec: &RunSpec) -> PathBuf {
    cli_out
        .map(Path::to_path_buf)
        .or_else(|| env_out.filter(|s| !s.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(&spec.output.dir))
}

/// Command named inside the file itself, if any.
fn declared_command(path: &Path) -> Option<String> {
    let text = std::fs::read_to_string(path).ok()?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let v: serde_json::Value = serde_json::from_str(&text).ok()?;
        v.get("config")?.get("command")?.as_str().map(str::to_string)
    } else {
        let t: toml::Table = text.parse().ok()?;
        t.get("command")?.as_str().map(str::to_string)
    }
}

fn write_manifest(
    sink: &mut Sink,
    spec: &RunSpec,
    seed: u64,
    result: &Result<Outcome, RunError>,
) -> Result<(), RunError> {
    sink.text("config.resolved.toml", &spec.to_toml())?;
    let outputs = sink.written.clone();
    let mut m = json!({
        "tool": "stm-sim",
        "version": VERSION,
        "command": spec.command,
        "seed": seed,
        "config": spec,
        "outputs": outputs,
    });
    match result {
        Ok(o) => {
            m["status"] = json!("ok");
            m["summary"] = json!(o.summary.iter().map(|(k, v)| (k.clone(), json!(v))).collect::<serde_json::Map<_, _>>());
            m["warnings"] = json!(o.warnings);
            m["condition_number"] = json!(o.condition);
            m["details"] = o.details.clone();
        }
        Err(e) => {
            m["status"] = json!("error");
            m["error"] = json!(e.to_string());
            m["warnings"] = json!([]);
        }
    }
    sink.json("manifest.json", &m)?;
    Ok(())
}

/// Run one resolved spec into `dir` and write its manifest.
pub fn run_spec(spec: &RunSpec, dir: &Path, seed: u64, jobs: usize) -> Result<Outcome, RunError> {
    let mut sink = Sink::new(dir)?;
    let result = if spec.command == Command::Sweep {
        run_sweep(spec, &mut sink, seed, jobs)
    } else {
        with_pool(jobs, |exec| commands::execute(spec, &mut sink, exec))
    };
    write_manifest(&mut sink, spec, seed, &result)?;
    result
}

/// Run `f` with up to `jobs` threads.
fn with_pool<R: Send>(jobs: usize, f: impl FnOnce(Exec) -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(|| f(Exec::Parallel));
        }
    }
    let _ = jobs;
    f(Exec::Sequential)
}

fn run_sweep(spec: &RunSpec, sink: &mut Sink, seed: u64, jobs: usize) -> Result<Outcome, RunError> {
    let children = spec.children()?;
    let dirs: Vec<PathBuf> = (0..children.len()).map(|i| sink.dir.join(format!("child_{i:03}"))).collect();
    let work: Vec<(usize, &RunSpec)> = children.iter().map(|(_, c)| c).enumerate().collect();
    let results: Vec<Result<Outcome, RunError>> = with_pool(jobs, |exec| {
        stm_core::par::map(exec, &work, |&(i, child)| run_spec(child, &dirs[i], seed, 1))
    });
    let keys = summary_keys(spec.sweep.command);
    let mut header = vec!["index", spec.sweep.parameter.as_str(), "status"];
    header.extend_from_slice(keys);
    let mut table = Table::new(&header);
    let mut warnings = Vec::new();
    let mut failed = 0usize;
    for (i, ((value, _), res)) in children.iter().zip(&results).enumerate() {
        let mut row = vec![i.to_string(), num(*value)];
        match res {
            Ok(o) => {
                row.push("ok".into());
                row.extend(keys.iter().map(|k| {
                    o.summary.iter().find(|(n, _)| n == k).map(|(_, v)| num(*v)).unwrap_or_default()
                }));
                warnings.extend(o.warnings.iter().map(|w| format!("child {i}: {w}")));
            }
            Err(e) => {
                failed += 1;
                row.push("error".into());
                row.extend(keys.iter().map(|_| String::new()));
                warnings.push(format!("child {i}: {e}"));
            }
        }
        table.push(row);
    }
    for i in 0..children.len() {
        sink.written.push(format!("child_{i:03}/manifest.json"));
    }
    sink.csv("sweep.csv", &table)?;
    let summary = vec![
        ("children".to_string(), children.len() as f64),
        ("failed".to_string(), failed as f64),
    ];
    let outcome = Outcome {
        summary,
        warnings,
        condition: None,
        details: json!({ "values": children.iter().map(|(v, _)| *v).collect::<Vec<_>>() }),
    };
    if failed > 0 {
        let first = results.iter().find_map(|r| r.as_ref().err()).map(|e| e.to_string()).unwrap_or_default();
        return Err(RunError::Solver(format!("{failed} of {} sweep points failed; first: {first}", children.len())));
    }
    Ok(outcome)
}

/// Parse, validate and run; returns the process exit code.
pub fn main_with<I, T>(args: I, env_out: Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let mut spec = match config::parse_config(&cli.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            return 1;
        }
    };
    if let Some(declared) = declared_command(&cli.config) {
        if declared != cli.command.name() {
            let e = ConfigError::Invalid {
                key: "command".into(),
                msg: format!("file declares `{declared}` but `{}` was requested", cli.command),
            };
            eprintln!("config error: {e}");
            return 1;
        }
    }
    spec.command = cli.command;
    if let Err(e) = spec.validate() {
        eprintln!("config error: {e}");
        return 1;
    }
    if cli.jobs == Some(0) {
        eprintln!("config error: `--jobs` must be >= 1");
        return 1;
    }
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let dir = output_root(cli.out.as_deref(), env_out.as_deref(), &spec);
    match run_spec(&spec, &dir, cli.seed, jobs) {
        Ok(o) => {
            for w in &o.warnings {
                eprintln!("warning: {w}");
            }
            let line: Vec<String> = o.summary.iter().map(|(k, v)| format!("{k}={v}")).collect();
            println!("{} ok: {} -> {}", spec.command, line.join(" "), dir.display());
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
