//! Library side of the `stem` binary: argument types, overrides and the
//! three commands, each writing its reports into an output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use stem_core::benchmark::{compare, run_baseline, ComparisonReport, Metrics};
use stem_core::scenario::load_config;
use stem_core::verify::{run_verification, Counterexample, DimensionSummary, VerificationReport, VerifyConfig};
use stem_core::{Money, PricingMode, RunOutcome, Scenario, ScenarioConfig, ScenarioError};

pub const SLOT_COLUMNS: [&str; 10] = [
    "slot",
    "cluster",
    "n_active_sellers",
    "n_active_buyers",
    "seller_price",
    "buyer_price",
    "trades",
    "priced_out",
    "budget_surplus",
    "social_welfare",
];

#[derive(Debug, Parser)]
#[command(name = "stem", version, about = "Clustered online double auction for participatory sensing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write per-slot results.
    Run(RunArgs),
    /// Run a scenario next to the unclustered McAfee baseline.
    Bench(RunArgs),
    /// Run the property sweeps and write verify.json.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<PricingMode>,
    /// Number of location clusters.
    #[arg(long)]
    pub k: Option<usize>,
    /// Longest permitted stay, in slots.
    #[arg(long)]
    pub kappa: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_mode(s: &str) -> Result<PricingMode, String> {
    s.parse()
}

impl Overrides {
    pub fn apply(&self, config: &mut ScenarioConfig) {
        if let Some(mode) = self.mode {
            config.mode = mode;
        }
        if let Some(k) = self.k {
            config.clustering.k = k;
        }
        if let Some(kappa) = self.kappa {
            config.horizon.kappa = kappa;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Also check this scenario; its mode and seed drive the sweeps.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Random multi-slot scenarios in the invariant sweep.
    #[arg(long, default_value_t = 1000)]
    pub scenarios: usize,
    /// Single-slot markets in the truthfulness and degeneracy sweeps.
    #[arg(long, default_value_t = 200)]
    pub markets: usize,
    /// Random scenarios in the misreport sweep.
    #[arg(long, default_value_t = 1000)]
    pub deviation_scenarios: usize,
    /// Agents probed per scenario in the misreport sweep.
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
}

/// Engine version as `<crate version> (<git describe>)`.
pub fn engine_version() -> String {
    format!("{} ({})", env!("CARGO_PKG_VERSION"), env!("STEM_GIT_DESCRIBE"))
}

/// Reads a scenario file and applies command-line overrides.
pub fn load_with_overrides(path: &Path, overrides: &Overrides) -> Result<(ScenarioConfig, Scenario), ScenarioError> {
    let mut config = load_config(path)?;
    overrides.apply(&mut config);
    let scenario = config.materialize()?;
    Ok((config, scenario))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SlotRow {
    pub slot: u32,
    pub cluster: usize,
    pub n_active_sellers: usize,
    pub n_active_buyers: usize,
    pub seller_price: Option<Money>,
    pub buyer_price: Option<Money>,
    pub trades: usize,
    pub priced_out: usize,
    pub budget_surplus: Money,
    pub social_welfare: Money,
}

/// One row per cluster-slot; slots without clusters get a single empty row.
pub fn slot_rows(outcome: &RunOutcome) -> Vec<SlotRow> {
    let mut rows = Vec::new();
    for r in &outcome.reports {
        let blank = SlotRow {
            slot: r.slot,
            cluster: 0,
            n_active_sellers: r.n_active_sellers,
            n_active_buyers: r.n_active_buyers,
            seller_price: None,
            buyer_price: None,
            trades: 0,
            priced_out: 0,
            budget_surplus: Money::ZERO,
            social_welfare: Money::ZERO,
        };
        if r.clusters.is_empty() {
            rows.push(blank);
        }
        for c in &r.clusters {
            rows.push(SlotRow {
                cluster: c.cluster,
                seller_price: c.seller_price,
                buyer_price: c.buyer_price,
                trades: c.trades.len(),
                priced_out: c.priced_out.len(),
                budget_surplus: c.budget_surplus,
                social_welfare: c.social_welfare,
                ..blank
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct RunTotals {
    pub slots: u32,
    pub trades: usize,
    pub priced_out: usize,
    pub buyer_payments: Money,
    pub seller_payments: Money,
    pub budget_surplus: Money,
    pub social_welfare: Money,
    pub utility_sum: Money,
}

impl RunTotals {
    pub fn of(outcome: &RunOutcome) -> Self {
        let mut t = RunTotals { slots: outcome.reports.len() as u32, ..Default::default() };
        for r in &outcome.reports {
            t.trades += r.totals.trades;
            t.priced_out += r.clusters.iter().map(|c| c.priced_out.len()).sum::<usize>();
            t.buyer_payments += r.totals.buyer_payments;
            t.seller_payments += r.totals.seller_payments;
            t.budget_surplus += r.totals.budget_surplus;
            t.social_welfare += r.totals.social_welfare;
            t.utility_sum += r.totals.utility_sum;
        }
        t
    }
}

/// The JSON wrapper shared by every report file.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub command: &'static str,
    pub engine_version: String,
    pub config: Option<&'a ScenarioConfig>,
    pub warnings: Vec<String>,
    #[serde(flatten)]
    pub body: T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    fn new(command: &'static str, config: Option<&'a ScenarioConfig>, scenario: Option<&Scenario>, body: T) -> Self {
        let warnings = scenario.map(|s| s.warnings.iter().map(ToString::to_string).collect()).unwrap_or_default();
        Envelope { command, engine_version: engine_version(), config, warnings, body }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

#[derive(Debug, Serialize)]
struct RunBody<'a> {
    totals: &'a RunTotals,
}

/// Runs the horizon and writes `slots.csv` (or `slots.json`) and
/// `summary.json` into `out`.
pub fn cmd_run(config: &ScenarioConfig, out: &Path, format: Format) -> Result<RunTotals> {
    let scenario = config.materialize()?;
    let outcome = scenario.run();
    let rows = slot_rows(&outcome);
    prepare(out)?;
    match format {
        Format::Csv => write_csv(&out.join("slots.csv"), &rows, &SLOT_COLUMNS)?,
        Format::Json => write_json(&out.join("slots.json"), &rows)?,
    }
    let totals = RunTotals::of(&outcome);
    write_json(&out.join("summary.json"), &Envelope::new("run", Some(config), Some(&scenario), RunBody { totals: &totals }))?;
    Ok(totals)
}

pub const BENCH_COLUMNS: [&str; 13] = [
    "slot",
    "stem_trades",
    "baseline_trades",
    "delta_trades",
    "stem_total_surplus",
    "baseline_total_surplus",
    "delta_total_surplus",
    "stem_budget_surplus",
    "baseline_budget_surplus",
    "delta_budget_surplus",
    "stem_mean_winner_utility",
    "baseline_mean_winner_utility",
    "delta_mean_winner_utility",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchRow {
    pub slot: u32,
    pub stem_trades: i64,
    pub baseline_trades: i64,
    pub delta_trades: i64,
    pub stem_total_surplus: Money,
    pub baseline_total_surplus: Money,
    pub delta_total_surplus: Money,
    pub stem_budget_surplus: Money,
    pub baseline_budget_surplus: Money,
    pub delta_budget_surplus: Money,
    pub stem_mean_winner_utility: Money,
    pub baseline_mean_winner_utility: Money,
    pub delta_mean_winner_utility: Money,
}

impl BenchRow {
    fn new(slot: u32, stem: &Metrics, baseline: &Metrics, delta: &Metrics) -> Self {
        BenchRow {
            slot,
            stem_trades: stem.trades,
            baseline_trades: baseline.trades,
            delta_trades: delta.trades,
            stem_total_surplus: stem.total_surplus,
            baseline_total_surplus: baseline.total_surplus,
            delta_total_surplus: delta.total_surplus,
            stem_budget_surplus: stem.budget_surplus,
            baseline_budget_surplus: baseline.budget_surplus,
            delta_budget_surplus: delta.budget_surplus,
            stem_mean_winner_utility: stem.mean_winner_utility,
            baseline_mean_winner_utility: baseline.mean_winner_utility,
            delta_mean_winner_utility: delta.mean_winner_utility,
        }
    }
}

#[derive(Debug, Serialize)]
struct BenchBody<'a> {
    stem: &'a Metrics,
    baseline: &'a Metrics,
    delta: &'a Metrics,
}

/// Writes `bench.csv` (or `bench.json`) with one row per slot, and
/// `summary.json` with horizon totals.
pub fn cmd_bench(config: &ScenarioConfig, out: &Path, format: Format) -> Result<ComparisonReport> {
    let scenario = config.materialize()?;
    let outcome = scenario.run();
    let baseline = run_baseline(&scenario.agents, &scenario.horizon);
    let report = compare(&scenario.agents, &outcome, &baseline);
    let rows: Vec<BenchRow> = report.slots.iter().map(|s| BenchRow::new(s.slot, &s.stem, &s.baseline, &s.delta)).collect();
    prepare(out)?;
    match format {
        Format::Csv => write_csv(&out.join("bench.csv"), &rows, &BENCH_COLUMNS)?,
        Format::Json => write_json(&out.join("bench.json"), &rows)?,
    }
    let body = BenchBody { stem: &report.stem, baseline: &report.baseline, delta: &report.delta };
    write_json(&out.join("summary.json"), &Envelope::new("bench", Some(config), Some(&scenario), body))?;
    Ok(report)
}

#[derive(Debug, Serialize)]
struct VerifyBody<'a> {
    passed: bool,
    degenerate: bool,
    gates: &'a [stem_core::verify::Gate],
    max_gains: BTreeMap<String, Money>,
    max_gains_arrival_anchor: Option<BTreeMap<String, Money>>,
    counterexamples: Vec<&'a Counterexample>,
    report: &'a VerificationReport,
}

/// Runs the sweeps (and the given scenario's checks) and writes
/// `verify.json`. The caller decides the exit status from the report.
pub fn cmd_verify(config: Option<&ScenarioConfig>, verify: &VerifyConfig, out: &Path) -> Result<VerificationReport> {
    let scenario = config.map(ScenarioConfig::materialize).transpose()?;
    let report = run_verification(verify, scenario.as_ref());
    let mut counterexamples = Vec::new();
    let gains = |summaries: &mut dyn Iterator<Item = &'_ DimensionSummary>| -> Result<BTreeMap<String, Money>> {
        let mut max = BTreeMap::new();
        for d in summaries {
            let key = serde_json::to_value(d.dimension)?.as_str().unwrap_or_default().to_string();
            let entry = max.entry(key).or_insert(d.max_gain);
            *entry = (*entry).max(d.max_gain);
        }
        Ok(max)
    };
    let max_gains = gains(
        &mut report.online_deviation.dimensions.iter().chain(report.scenario.iter().flat_map(|s| &s.deviations.dimensions)),
    )?;
    let max_gains_arrival_anchor =
        report.online_deviation_arrival_anchor.as_ref().map(|s| gains(&mut s.dimensions.iter())).transpose()?;
    let all = report
        .online_deviation
        .dimensions
        .iter()
        .chain(report.online_deviation_arrival_anchor.iter().flat_map(|s| &s.dimensions))
        .chain(report.scenario.iter().flat_map(|s| &s.deviations.dimensions));
    for d in all {
        counterexamples.extend(&d.counterexample);
    }
    prepare(out)?;
    let body = VerifyBody {
        passed: report.passed,
        degenerate: report.degenerate,
        gates: &report.gates,
        max_gains,
        max_gains_arrival_anchor,
        counterexamples,
        report: &report,
    };
    write_json(&out.join("verify.json"), &Envelope::new("verify", config, scenario.as_ref(), body))?;
    Ok(report)
}

/// Exit status for a command outcome: 0 success, 1 failed hard gate,
/// 2 bad input.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(args) => {
            let config = config_from(&args.scenario, &args.overrides)?;
            let totals = cmd_run(&config, &args.out, args.format)?;
            println!("{} slots, {} trades, budget surplus {}", totals.slots, totals.trades, totals.budget_surplus);
            Ok(0)
        }
        Command::Bench(args) => {
            let config = config_from(&args.scenario, &args.overrides)?;
            let report = cmd_bench(&config, &args.out, args.format)?;
            println!("trades {} vs baseline {} (delta {})", report.stem.trades, report.baseline.trades, report.delta.trades);
            Ok(0)
        }
        Command::Verify(args) => {
            let config = args.scenario.as_deref().map(|p| config_from(p, &args.overrides)).transpose()?;
            let mut verify = VerifyConfig {
                scenarios: args.scenarios,
                markets: args.markets,
                deviation_scenarios: args.deviation_scenarios,
                samples: args.samples,
                ..VerifyConfig::default()
            };
            if let Some(c) = &config {
                verify.mode = c.mode;
                verify.seed = c.seed;
            }
            if let Some(mode) = args.overrides.mode {
                verify.mode = mode;
            }
            if let Some(seed) = args.overrides.seed {
                verify.seed = seed;
            }
            let report = cmd_verify(config.as_ref(), &verify, &args.out)?;
            for g in &report.gates {
                let verdict = if g.passed { "pass" } else { "FAIL" };
                let kind = if g.hard { "hard" } else { "info" };
                println!("{verdict} [{kind}] {}: {}", g.name, g.detail);
                if !g.passed {
                    println!("    repro seeds: {:?}", g.seeds);
                }
            }
            if report.degenerate {
                println!("degenerate: 0 trades on single-slot markets");
            }
            Ok(if report.passed { 0 } else { 1 })
        }
    }
}

fn config_from(path: &Path, overrides: &Overrides) -> Result<ScenarioConfig> {
    let (config, _) = load_with_overrides(path, overrides).map_err(InputError)?;
    Ok(config)
}

/// Wraps errors caused by the user's input, which exit with status 2.
#[derive(Debug)]
pub struct InputError(pub ScenarioError);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for InputError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        self.0.source()
    }
}
