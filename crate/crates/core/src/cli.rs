// SPDX-License-Identifier: Apache-2.0

//! Command-line front end.
//!
//! Exit codes: 0 ok, 1 usage error (bad flags, unknown preset), 2 invalid
//! configuration, 3 runtime failure (trace or output IO).

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::engine::{SimError, Simulation};
use crate::metrics::MetricsReport;
use crate::model::ScenarioConfig;
use crate::presets::{preset, PRESET_NAMES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "noc-qos", version, about = "Shared-target interconnect simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a preset or a scenario file and report bandwidth, latency and MIPS.
    Run(RunArgs),
    /// List the built-in presets.
    ListPresets,
    /// Check a scenario without running it.
    Validate(Source),
    /// Print a preset as a scenario file.
    DumpPreset { name: String },
}

#[derive(Debug, Args)]
struct Source {
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a field, e.g. `rng_seed=7` or `initiators.CPU.qos.pos_limit=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Run all presets (in parallel), one report directory each.
    #[arg(long, conflicts_with_all = ["preset", "config"])]
    batch: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Measured cycles after warmup.
    #[arg(long)]
    cycles: Option<u64>,
    #[arg(long)]
    warmup: Option<u64>,
    /// Directory for summary.txt, summary.csv and windows.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress the summary on standard output.
    #[arg(long, short)]
    quiet: bool,
}

/// A failure with its exit code and one-line diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
    fn invalid(message: impl Into<String>) -> Self {
        Self { code: EXIT_INVALID, message: message.into() }
    }
    fn runtime(message: impl Into<String>) -> Self {
        Self { code: EXIT_RUNTIME, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(failures) => {
            for f in &failures {
                eprintln!("error: {f}");
            }
            failures.iter().map(|f| f.code).max().unwrap_or(EXIT_RUNTIME)
        }
    }
}

fn execute(command: Command) -> Result<(), Vec<Failure>> {
    match command {
        Command::ListPresets => {
            for name in PRESET_NAMES {
                let p = preset(name).expect("listed preset exists");
                println!("{name}\t{}", p.scheme);
            }
            Ok(())
        }
        Command::DumpPreset { name } => {
            let cfg = preset(&name).ok_or_else(|| vec![unknown_preset(&name)])?;
            print!("{}", to_toml(&cfg));
            Ok(())
        }
        Command::Validate(source) => {
            let cfg = load(&source).map_err(|f| vec![f])?;
            let violations = cfg.validate();
            if violations.is_empty() {
                println!("{}: ok", cfg.name);
                Ok(())
            } else {
                Err(violations.iter().map(|v| Failure::invalid(v.to_string())).collect())
            }
        }
        Command::Run(args) => run(args),
    }
}

fn run(args: RunArgs) -> Result<(), Vec<Failure>> {
    let configs = if args.batch {
        PRESET_NAMES
            .iter()
            .map(|n| {
                let mut cfg = preset(n).expect("listed preset exists");
                apply_overrides(&mut cfg, &args.source.overrides)?;
                Ok(cfg)
            })
            .collect::<Result<Vec<_>, Failure>>()
            .map_err(|f| vec![f])?
    } else {
        vec![load(&args.source).map_err(|f| vec![f])?]
    };
    let configs: Vec<ScenarioConfig> = configs
        .into_iter()
        .map(|mut cfg| {
            if let Some(seed) = args.seed {
                cfg.rng_seed = seed;
            }
            if let Some(cycles) = args.cycles {
                cfg.sim_cycles = cycles;
            }
            if let Some(warmup) = args.warmup {
                cfg.warmup_cycles = warmup;
            }
            cfg
        })
        .collect();

    let results: Vec<Result<MetricsReport, Vec<Failure>>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|cfg| s.spawn(move || simulate(cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    });

    let mut failures = Vec::new();
    for (cfg, result) in configs.iter().zip(results) {
        match result {
            Ok(report) => {
                if !args.quiet {
                    println!("{}", report.summary_text());
                }
                if let Some(out) = &args.out {
                    let dir = if args.batch { out.join(&cfg.name) } else { out.clone() };
                    if let Err(e) = report.write_dir(&dir) {
                        failures.push(Failure::runtime(format!("cannot write {}: {e}", dir.display())));
                    }
                }
            }
            Err(mut f) => failures.append(&mut f),
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(failures)
    }
}

fn simulate(cfg: &ScenarioConfig) -> Result<MetricsReport, Vec<Failure>> {
    match Simulation::new(cfg.clone()) {
        Ok(sim) => Ok(sim.run()),
        Err(SimError::Invalid(v)) => {
            Err(v.iter().map(|v| Failure::invalid(format!("{}: {v}", cfg.name))).collect())
        }
        Err(e @ SimError::Trace(_)) => Err(vec![Failure::runtime(format!("{}: {e}", cfg.name))]),
    }
}

fn unknown_preset(name: &str) -> Failure {
    Failure::usage(format!("unknown preset `{name}` (available: {})", PRESET_NAMES.join(", ")))
}

fn load(source: &Source) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match (&source.preset, &source.config) {
        (Some(name), None) => preset(name).ok_or_else(|| unknown_preset(name))?,
        (None, Some(path)) => read_config(path)?,
        _ => return Err(Failure::usage("exactly one of --preset, --config or --batch is required")),
    };
    apply_overrides(&mut cfg, &source.overrides)?;
    Ok(cfg)
}

/// Reads a TOML scenario file.
pub fn read_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| {
        let line = e.span().map_or(1, |span| text[..span.start].matches('\n').count() + 1);
        Failure::invalid(format!("{}:{line}: {}", path.display(), e.message().trim_end()))
    })
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, toml::de::Error> {
    toml::from_str(text)
}

pub fn to_toml(cfg: &ScenarioConfig) -> String {
    toml::to_string(cfg).expect("scenario serializes to TOML")
}

/// Applies `key=value` overrides. Keys are dotted paths into the scenario
/// file; inside arrays, an element is addressed by index or by its `name`.
/// Values are parsed as TOML, falling back to a bare string.
pub fn apply_overrides(cfg: &mut ScenarioConfig, overrides: &[String]) -> Result<(), Failure> {
    if overrides.is_empty() {
        return Ok(());
    }
    let mut root = toml::Value::try_from(&*cfg).expect("scenario serializes to TOML");
    for item in overrides {
        let (key, raw) = item.split_once('=').ok_or_else(|| Failure::usage(format!("override `{item}` is not KEY=VALUE")))?;
        let value = parse_value(raw.trim());
        let slot = lookup(&mut root, key.trim())
            .ok_or_else(|| Failure::usage(format!("override key `{}` does not name a field", key.trim())))?;
        *slot = value;
    }
    *cfg = root.try_into().map_err(|e: toml::de::Error| {
        // Missing optional fields are created on demand, so a misspelt key
        // only shows up here.
        let msg = format!("after overrides: {}", e.message());
        if e.message().contains("unknown field") {
            Failure::usage(msg)
        } else {
            Failure::invalid(msg)
        }
    })?;
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Finds the slot for a dotted key, creating the last table entry if absent
/// (optional fields are omitted when serialized).
fn lookup<'a>(mut value: &'a mut toml::Value, key: &str) -> Option<&'a mut toml::Value> {
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        value = match value {
            toml::Value::Table(t) => {
                if last && !t.contains_key(*part) {
                    t.insert((*part).to_string(), toml::Value::Boolean(false));
                }
                t.get_mut(*part)?
            }
            toml::Value::Array(items) => match part.parse::<usize>() {
                Ok(idx) => items.get_mut(idx)?,
                Err(_) => items.iter_mut().find(|v| v.get("name").and_then(|n| n.as_str()) == Some(part))?,
            },
            _ => return None,
        };
    }
    Some(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_by_name_and_index() {
        let mut cfg = preset("qos-high").unwrap();
        apply_overrides(
            &mut cfg,
            &["rng_seed=9".into(), "initiators.CPU.qos.pos_limit=64".into(), "nodes.0.name=\"n1\"".into()],
        )
        .unwrap();
        assert_eq!(cfg.rng_seed, 9);
        assert_eq!(cfg.initiators[0].qos.pos_limit, Some(64.0));
        assert_eq!(cfg.nodes[0].name, "n1");
    }

    #[test]
    fn bad_override_is_usage_error() {
        let mut cfg = preset("qos-low").unwrap();
        assert_eq!(apply_overrides(&mut cfg, &["nope".into()]).unwrap_err().code, EXIT_USAGE);
        assert_eq!(apply_overrides(&mut cfg, &["a.b.c=1".into()]).unwrap_err().code, EXIT_USAGE);
        assert_eq!(apply_overrides(&mut cfg, &["sim_cycles=\"x\"".into()]).unwrap_err().code, EXIT_INVALID);
    }

    #[test]
    fn presets_round_trip_through_toml() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            assert_eq!(parse_config(&to_toml(&cfg)).unwrap(), cfg);
        }
    }
}
