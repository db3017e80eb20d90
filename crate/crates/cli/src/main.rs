//! `bass-sim`: generate scenarios, run the allocation simulator, compare
//! policies and re-emit reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use bass_core::metrics::{
    emit_report, load_report_json, write_cdf_csv, PolicySummary, ReportFormat, SummaryReport,
};
use bass_core::sim::{run_simulation, Policy, SimConfig};
use bass_core::topology::{generate_scenario, load_scenario, save_scenario, NetModelParams};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

const RECORDS_FILE: &str = "records.csv";
const REPORT_FILE: &str = "report.json";

#[derive(Parser)]
#[command(
    name = "bass-sim",
    version,
    about = "Bandwidth aggregation server allocation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic scenario file.
    Generate(GenerateArgs),
    /// Simulate one policy and write records.csv and report.json to --out.
    Run(RunArgs),
    /// Simulate several policies on the same seed and print a comparison.
    Compare(CompareArgs),
    /// Re-emit a saved report.json as CSV rows or JSON.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u64).range(1..))]
    clients: u64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    servers: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    origins: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Total capacity of each aggregation server, Mbit/s.
    #[arg(long)]
    server_capacity: Option<f64>,
    /// Path bandwidth at zero distance, Mbit/s.
    #[arg(long)]
    base_path: Option<f64>,
    /// Bandwidth divisor growth per 1000 km.
    #[arg(long)]
    distance_decay: Option<f64>,
    /// Log-space noise on path bandwidths; 0 disables it.
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    wifi_links: Option<usize>,
    #[arg(long)]
    cellular_links: Option<usize>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 48)]
    epochs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Expected new clients per epoch.
    #[arg(long, default_value_t = 2.0)]
    arrival_rate: f64,
    /// Mean session length in epochs (at least 1).
    #[arg(long, default_value_t = 8.0)]
    session_mean: f64,
    /// Candidate servers offered per client.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Minimum R/T for a server to be offered.
    #[arg(long, default_value_t = 0.1)]
    load_threshold: f64,
    /// Unallocatable capacity kept on every server, Mbit/s.
    #[arg(long, default_value_t = 50.0)]
    reserve: f64,
    /// Draw fresh path noise every epoch.
    #[arg(long)]
    remeasure_noise: bool,
    /// Flag clients whose achieved rate falls below this, Mbit/s.
    #[arg(long)]
    throughput_floor: Option<f64>,
    /// Largest batch the exact solver accepts.
    #[arg(long, default_value_t = 12)]
    exact_cap: usize,
}

impl SimArgs {
    fn config(&self, policy: Policy) -> SimConfig {
        SimConfig {
            epochs: self.epochs,
            arrival_rate: self.arrival_rate,
            session_epochs_mean: self.session_mean,
            policy,
            k_candidates: self.k,
            load_threshold: self.load_threshold,
            reserve_mbps: self.reserve,
            seed: self.seed,
            remeasure_noise: self.remeasure_noise,
            realloc_throughput_floor_mbps: self.throughput_floor,
            exact_cap: self.exact_cap,
            ..SimConfig::default()
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value_t = Policy::BassGreedy)]
    policy: Policy,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, value_delimiter = ',', default_value = "bass_greedy,random")]
    policies: Vec<Policy>,
    /// Also write report.json and gamma_cdf_<policy>.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct ReportArgs {
    /// A report.json written by `run` or `compare`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: PathBuf,
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let mut params = NetModelParams::default();
    if let Some(v) = args.server_capacity {
        params.server_capacity_mbps = v;
    }
    if let Some(v) = args.base_path {
        params.base_path_mbps = v;
    }
    if let Some(v) = args.distance_decay {
        params.distance_decay_per_1000km = v;
    }
    if let Some(v) = args.noise_sigma {
        params.noise_sigma = v;
    }
    if let Some(v) = args.wifi_links {
        params.wifi_links_per_client = v;
    }
    if let Some(v) = args.cellular_links {
        params.cellular_links_per_client = v;
    }
    let scenario = generate_scenario(
        args.clients as usize,
        args.servers as usize,
        args.origins as usize,
        &params,
        args.seed,
    )?;
    save_scenario(&scenario, &args.out)?;
    println!(
        "wrote {}: {} clients, {} servers, {} origins, seed {}",
        args.out.display(),
        scenario.clients.len(),
        scenario.agg_servers.len(),
        scenario.origins.len(),
        scenario.seed
    );
    Ok(())
}

fn simulate(sim: &SimArgs, policies: &[Policy]) -> Result<SummaryReport> {
    let scenario = load_scenario(&sim.scenario)?;
    let configs: Vec<SimConfig> = policies.iter().map(|&p| sim.config(p)).collect();
    for c in &configs {
        c.validate()?;
    }
    let runs = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|config| {
                let scenario = &scenario;
                scope.spawn(move || {
                    info!("running {} for {} epochs", config.policy, config.epochs);
                    run_simulation::<f64>(scenario, config)
                        .map(|records| (config.policy, records))
                        .with_context(|| format!("policy {}", config.policy))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SummaryReport::from_runs(&runs))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn table(summaries: &[PolicySummary]) -> String {
    let with_delta = summaries.len() > 1;
    let mut out = format!(
        "{:<12} {:>8} {:>10} {:>12} {:>12} {:>10} {:>10}",
        "policy", "records", "mean_gamma", "median_gamma", "frac_gamma_1", "mean_mult", "max_mult"
    );
    if with_delta {
        out.push_str(&format!(" {:>11}", "delta_gamma"));
    }
    out.push('\n');
    for s in summaries {
        let _ = write!(
            out,
            "{:<12} {:>8} {:>10.4} {:>12.4} {:>12.4} {:>10.3} {:>10.3}",
            s.policy.name(),
            s.client_records,
            s.mean_gamma,
            s.median_gamma,
            s.frac_gamma_one,
            s.multiplier.mean,
            s.multiplier.max
        );
        if with_delta {
            let _ = write!(out, " {:>+11.4}", s.mean_gamma - summaries[0].mean_gamma);
        }
        out.push('\n');
    }
    out
}

fn run(args: &RunArgs) -> Result<()> {
    let report = simulate(&args.sim, &[args.policy])?;
    create_dir(&args.out)?;
    emit_report(&report, ReportFormat::Csv, &args.out.join(RECORDS_FILE))?;
    emit_report(&report, ReportFormat::Json, &args.out.join(REPORT_FILE))?;
    let s = &report.policies[0];
    println!("policy: {}", s.policy);
    println!("epochs: {}", s.epochs);
    println!("client records: {}", s.client_records);
    println!("mean gamma: {:.4}", s.mean_gamma);
    println!("fraction gamma = 1: {:.4}", s.frac_gamma_one);
    println!("mean gain multiplier: {:.3}", s.multiplier.mean);
    println!(
        "wrote {} and {}",
        args.out.join(RECORDS_FILE).display(),
        args.out.join(REPORT_FILE).display()
    );
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<()> {
    let mut policies = Vec::new();
    for p in &args.policies {
        if !policies.contains(p) {
            policies.push(*p);
        }
    }
    let report = simulate(&args.sim, &policies)?;
    print!("{}", table(&report.policies));
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        emit_report(&report, ReportFormat::Json, &dir.join(REPORT_FILE))?;
        for s in &report.policies {
            write_cdf_csv(
                &s.gamma_cdf,
                &dir.join(format!("gamma_cdf_{}.csv", s.policy)),
            )?;
        }
    }
    Ok(())
}

fn report(args: &ReportArgs) -> Result<()> {
    let report = load_report_json(&args.input)?;
    let format = match args.format {
        Format::Csv => ReportFormat::Csv,
        Format::Json => ReportFormat::Json,
    };
    emit_report(&report, format, &args.out)?;
    print!("{}", table(&report.policies));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("BASS_SIM_LOG")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
