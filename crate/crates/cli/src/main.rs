use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use fairsim_core::engine::{sweep, MetricsLedger};
use fairsim_core::report::{emit_csv, emit_summary, fmt_g6, write_atomic};
use fairsim_core::trajectory::{
    load_csv, synthesize, to_csv_string, Pattern, RolePolicy, Scenario, SchemaOptions,
};
use fairsim_core::{Algorithm, Config, RunSpec};

#[derive(Parser)]
#[command(
    name = "fairsim",
    version,
    about = "Uplink/downlink airtime reservation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more algorithms on a scenario and write reports.
    Run(RunArgs),
    /// Run a grid of loads, seeds and one varied config key.
    Sweep(SweepArgs),
    /// Check a config (and optionally a scenario) without running.
    Validate(ValidateArgs),
    /// Write a synthetic trajectory CSV.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config; defaults are used when absent.
    #[arg(long, env = "FAIRSIM_CONFIG")]
    config: Option<PathBuf>,
    /// Config override as dotted.key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Trajectory CSV.
    #[arg(long, conflicts_with = "synth")]
    scenario: Option<PathBuf>,
    /// Synthesize a scenario with this pattern instead of reading one.
    #[arg(long, value_name = "PATTERN")]
    synth: Option<Pattern>,
    #[arg(long, default_value_t = 4)]
    ucv: usize,
    #[arg(long, default_value_t = 4)]
    dcv: usize,
    /// Simulated seconds; defaults to the whole scenario, or 30 s when synthesizing.
    #[arg(long)]
    seconds: Option<f64>,
    /// Role assignment for CSV tracks without a role column: alternate, both, or UCV:DCV counts.
    #[arg(long, default_value = "alternate", value_parser = parse_roles)]
    roles: RolePolicy,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Comma-separated algorithms: fair, sa_max, sa_min, da_max, da_min.
    #[arg(long, default_value = "fair,sa_max,da_max", value_delimiter = ',')]
    algo: Vec<Algorithm>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value = "constant_speed_ring")]
    pattern: Pattern,
    /// Comma-separated UCV:DCV loads.
    #[arg(long, default_value = "4:4,7:8,10:10", value_delimiter = ',', value_parser = parse_load)]
    loads: Vec<(usize, usize)>,
    /// Comma-separated seeds; each seeds both the scenario and the run.
    #[arg(long, default_value = "1", value_delimiter = ',')]
    seeds: Vec<u64>,
    /// One config key and its values, as dotted.key=v1,v2,...
    #[arg(long, value_name = "KEY=V1,V2")]
    vary: Option<String>,
    #[arg(long, default_value = "fair,sa_max,da_max", value_delimiter = ',')]
    algo: Vec<Algorithm>,
    #[arg(long, default_value_t = 30.0)]
    seconds: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Also parse this trajectory CSV.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    pattern: Pattern,
    #[arg(long)]
    ucv: usize,
    #[arg(long)]
    dcv: usize,
    #[arg(long)]
    seconds: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_roles(s: &str) -> Result<RolePolicy, String> {
    match s {
        "alternate" => Ok(RolePolicy::Alternate),
        "both" => Ok(RolePolicy::AllBoth),
        _ => {
            let (ucv, dcv) = parse_load(s)?;
            Ok(RolePolicy::Counts { ucv, dcv })
        }
    }
}

fn parse_load(s: &str) -> Result<(usize, usize), String> {
    let (u, d) = s
        .split_once(':')
        .ok_or_else(|| format!("expected UCV:DCV, got `{s}`"))?;
    let n = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    Ok((n(u)?, n(d)?))
}

/// Exit 1 for anything the user can fix in their inputs' content, 2 for
/// everything that went wrong while running.
enum Failure {
    Invalid(Vec<String>),
    Runtime(String),
}

impl Failure {
    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load_config(args: &ConfigArgs) -> Result<Config, Failure> {
    let mut cfg = match &args.config {
        Some(path) => Config::load(path).map_err(|e| Failure::Invalid(vec![e.to_string()]))?,
        None => Config::default(),
    };
    for o in &args.overrides {
        cfg.apply_override(o)
            .map_err(|e| Failure::Invalid(vec![e.to_string()]))?;
    }
    let report = cfg.validate();
    if !report.is_valid() {
        return Err(Failure::Invalid(
            report.violations.iter().map(|v| v.to_string()).collect(),
        ));
    }
    Ok(cfg)
}

fn schema(roles: RolePolicy) -> SchemaOptions {
    SchemaOptions {
        role_policy: roles,
        ..SchemaOptions::default()
    }
}

fn load_scenario(args: &ScenarioArgs, seed: u64) -> Result<(Scenario, f64), Failure> {
    let scenario = match (&args.scenario, args.synth) {
        (Some(path), _) => load_csv(path, &schema(args.roles))
            .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?,
        (None, Some(pattern)) => {
            let seconds = args.seconds.unwrap_or(30.0);
            synthesize(pattern.as_str(), args.ucv, args.dcv, seconds, seed)
                .map_err(Failure::runtime)?
        }
        (None, None) => {
            return Err(Failure::Invalid(vec![
                "one of --scenario or --synth is required".into(),
            ]))
        }
    };
    let seconds = args.seconds.unwrap_or_else(|| scenario.duration());
    Ok((scenario, seconds))
}

fn run_all(specs: &[RunSpec]) -> Result<Vec<MetricsLedger>, Failure> {
    sweep(specs)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::runtime)
}

fn print_aggregates(ledgers: &[MetricsLedger]) {
    for l in ledgers {
        let a = &l.aggregates;
        println!(
            "{} ucv={} dcv={} seed={} utilization={} fps_ucv={} fps_dcv={} energy={}",
            l.meta.algorithm,
            l.meta.n_ucv,
            l.meta.n_dcv,
            l.meta.seed,
            fmt_g6(a.mean_channel_utilization),
            fmt_g6(a.avg_fps_ucv),
            fmt_g6(a.avg_fps_dcv),
            fmt_g6(a.lifetime_energy),
        );
    }
}

fn write_reports(ledgers: &[MetricsLedger], out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out)
        .map_err(|e| Failure::runtime(format!("{}: {e}", out.display())))?;
    emit_csv(ledgers, out).map_err(Failure::runtime)?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    let (scenario, seconds) = load_scenario(&args.scenario, args.seed)?;
    let scenario = Arc::new(scenario);
    let mut algorithms = args.algo.clone();
    algorithms.dedup();
    let specs: Vec<RunSpec> = algorithms
        .iter()
        .map(|&a| RunSpec {
            overrides: args.config.overrides.clone(),
            ..RunSpec::new(scenario.clone(), a, cfg.clone(), seconds, args.seed)
        })
        .collect();
    let ledgers = run_all(&specs)?;
    write_reports(&ledgers, &args.out)?;
    let has_fair = algorithms.contains(&Algorithm::Fair);
    if has_fair && algorithms.len() > 1 {
        let summary = emit_summary(&ledgers).map_err(Failure::runtime)?;
        let json = serde_json::to_vec_pretty(&summary).expect("summary serializes");
        write_atomic(&args.out.join("summary.json"), &json).map_err(Failure::runtime)?;
    }
    print_aggregates(&ledgers);
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Failure> {
    let base = load_config(&args.config)?;
    let variants: Vec<(Config, Vec<String>)> = match &args.vary {
        None => vec![(base, args.config.overrides.clone())],
        Some(vary) => {
            let (key, values) = vary
                .split_once('=')
                .ok_or_else(|| Failure::Invalid(vec![format!("bad --vary `{vary}`")]))?;
            let mut out = Vec::new();
            for v in values.split(',') {
                let assignment = format!("{key}={v}");
                let mut cfg = base.clone();
                cfg.apply_override(&assignment)
                    .map_err(|e| Failure::Invalid(vec![e.to_string()]))?;
                let report = cfg.validate();
                if !report.is_valid() {
                    return Err(Failure::Invalid(
                        report.violations.iter().map(|v| v.to_string()).collect(),
                    ));
                }
                let mut overrides = args.config.overrides.clone();
                overrides.push(assignment);
                out.push((cfg, overrides));
            }
            out
        }
    };

    let mut specs = Vec::new();
    for &(ucv, dcv) in &args.loads {
        for &seed in &args.seeds {
            let scenario = Arc::new(
                synthesize(args.pattern.as_str(), ucv, dcv, args.seconds, seed)
                    .map_err(Failure::runtime)?,
            );
            for (cfg, overrides) in &variants {
                for &a in &args.algo {
                    specs.push(RunSpec {
                        overrides: overrides.clone(),
                        ..RunSpec::new(scenario.clone(), a, cfg.clone(), args.seconds, seed)
                    });
                }
            }
        }
    }
    let ledgers = run_all(&specs)?;
    write_reports(&ledgers, &args.out)?;
    print_aggregates(&ledgers);
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    load_config(&args.config)?;
    if let Some(path) = &args.scenario {
        let scenario = load_csv(path, &SchemaOptions::default())
            .map_err(|e| Failure::Invalid(vec![format!("{}: {e}", path.display())]))?;
        eprintln!(
            "scenario ok: {} tracks, {} UCV, {} DCV, {:.1} s",
            scenario.tracks.len(),
            scenario.n_ucv(),
            scenario.n_dcv(),
            scenario.duration()
        );
    }
    eprintln!("config ok");
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), Failure> {
    let scenario = synthesize(
        args.pattern.as_str(),
        args.ucv,
        args.dcv,
        args.seconds,
        args.seed,
    )
    .map_err(Failure::runtime)?;
    write_atomic(&args.out, to_csv_string(&scenario).as_bytes()).map_err(Failure::runtime)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(problems)) => {
            eprintln!("invalid input:");
            for p in problems {
                eprintln!("  {p}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
