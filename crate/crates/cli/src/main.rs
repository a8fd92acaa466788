use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use prosumer_storage::config;
use prosumer_storage::cycles::{count_cycles, write_cycles_csv, DamageModel};
use prosumer_storage::fixtures::{self, Archetype};
use prosumer_storage::optimizer::DispatchOptions;
use prosumer_storage::profitability::{
    assess, default_cycle_target, rank_candidates, tune_friction, EvalOptions, PaybackConvention, Priority,
    ProfitabilityReport,
};
use prosumer_storage::report::{self, SweepTable};
use prosumer_storage::timeseries::load_scenario;
use prosumer_storage::{BatterySpec, Error, PpcSchedule, ScenarioSeries, TariffSchedule};

#[derive(Parser)]
#[command(name = "prosumer-storage", version, about = "Battery dispatch and profitability for PV prosumers")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one battery on one scenario and write its dispatch and report.
    Evaluate {
        #[command(flatten)]
        input: ScenarioArg,
        /// Battery name from the catalog, e.g. 1kwh-0.25c.
        #[arg(long)]
        battery: String,
        #[command(flatten)]
        conv: Conventions,
    },
    /// Evaluate every catalog battery on every scenario.
    Sweep {
        /// Scenario CSV files (`timestamp,load_w,pv_w`).
        #[arg(long = "scenario")]
        scenarios: Vec<PathBuf>,
        /// Bundled fixtures (c1..c4, or `all`).
        #[arg(long = "fixture")]
        fixtures: Vec<String>,
        #[arg(long, default_value_t = fixtures::DEFAULT_SEED)]
        seed: u64,
        /// Rank candidates per scenario by payback or per-cycle profit.
        #[arg(long, value_parser = ["payback", "per-cycle"], default_value = "payback")]
        priority: String,
        #[command(flatten)]
        conv: Conventions,
    },
    /// Tune the friction coefficient of one battery to a cycle budget.
    Tune {
        #[command(flatten)]
        input: ScenarioArg,
        #[arg(long)]
        battery: String,
        /// Cycles allowed over the window; defaults to the break-even budget.
        #[arg(long)]
        target: Option<f64>,
        #[command(flatten)]
        conv: Conventions,
    },
    /// Write the four synthetic fixture months and default config files.
    Fixtures {
        #[arg(long, default_value_t = fixtures::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario CSV file.
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    scenario: Option<PathBuf>,
    /// Bundled fixture (c1..c4).
    #[arg(long)]
    fixture: Option<String>,
    #[arg(long, default_value_t = fixtures::DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct Conventions {
    /// Tariff TOML; defaults to the built-in two-period tariff.
    #[arg(long)]
    tariff: Option<PathBuf>,
    /// PPC level table TOML; defaults to the built-in 8-level table.
    #[arg(long)]
    ppc: Option<PathBuf>,
    /// Battery catalog TOML; defaults to the nine built-in candidates.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Sampling interval of the scenario files.
    #[arg(long, default_value_t = 5)]
    step_minutes: u32,
    /// Payback as B_cost / (12 · G_T), treating the window as one month.
    #[arg(long)]
    months_12: bool,
    /// Damage exponent kp in d^kp.
    #[arg(long, default_value_t = 1.0)]
    damage_exp: f64,
    /// Throughput tie-break penalty, EUR/kWh.
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Require the final SoC to be at least the initial SoC.
    #[arg(long)]
    terminal_floor: bool,
    /// PPC level (kVA) held before the battery; defaults to the smallest covering the baseline peak.
    #[arg(long)]
    baseline_kva: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

struct Setup {
    tariff: TariffSchedule,
    ppc: PpcSchedule,
    catalog: Vec<BatterySpec>,
    opts: EvalOptions,
    step_hours: f64,
    /// Canonical text of everything that affects results except the scenario data.
    canonical: String,
}

impl Conventions {
    fn setup(&self) -> anyhow::Result<Setup> {
        if self.step_minutes == 0 {
            bail!("--step-minutes must be positive");
        }
        if !(self.damage_exp >= 1.0) {
            bail!("--damage-exp must be >= 1");
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            bail!("--epsilon must be finite and >= 0");
        }
        let tariff = match &self.tariff {
            Some(p) => config::load_tariff(p)?,
            None => TariffSchedule::default(),
        };
        let ppc = match &self.ppc {
            Some(p) => config::load_ppc(p)?,
            None => PpcSchedule::default(),
        };
        let catalog = match &self.catalog {
            Some(p) => config::load_catalog(p)?,
            None => BatterySpec::default_catalog(),
        };
        let baseline_level = match self.baseline_kva {
            None => None,
            Some(kva) => Some(
                ppc.levels
                    .iter()
                    .position(|l| (l.limit_kva - kva).abs() < 1e-9)
                    .with_context(|| format!("--baseline-kva {kva} is not a level of the PPC table"))?,
            ),
        };
        let opts = EvalOptions {
            damage: DamageModel { exponent: self.damage_exp },
            payback: if self.months_12 { PaybackConvention::TwelveMonths } else { PaybackConvention::CalendarExact },
            dispatch: DispatchOptions {
                epsilon: self.epsilon,
                terminal_soc_floor: self.terminal_floor,
                ..Default::default()
            },
            baseline_level,
        };
        let canonical = format!(
            "tool={}\nstep_minutes={}\nexpb={}\ndamage_exponent={:?}\nepsilon={:?}\nterminal_floor={}\nbaseline_kva={:?}\ntol_feas={:?}\n[tariff]\n{}[ppc]\n{}[catalog]\n{}",
            env!("CARGO_PKG_VERSION"),
            self.step_minutes,
            expb_label(opts.payback),
            self.damage_exp,
            self.epsilon,
            self.terminal_floor,
            self.baseline_kva,
            opts.dispatch.lp.tol_feas,
            config::tariff_to_toml(&tariff),
            config::ppc_to_toml(&ppc),
            config::catalog_to_toml(&catalog),
        );
        Ok(Setup { tariff, ppc, catalog, opts, step_hours: self.step_minutes as f64 / 60.0, canonical })
    }
}

fn expb_label(p: PaybackConvention) -> &'static str {
    match p {
        PaybackConvention::CalendarExact => "calendar-exact (365.25-day year)",
        PaybackConvention::TwelveMonths => "twelve-months (window = one month)",
    }
}

struct Scenario {
    name: String,
    series: ScenarioSeries,
    digest: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn fixture_names(list: &[String]) -> anyhow::Result<Vec<Archetype>> {
    let mut out = Vec::new();
    for name in list {
        if name.eq_ignore_ascii_case("all") {
            out.extend(Archetype::ALL);
        } else {
            out.push(name.parse::<Archetype>()?);
        }
    }
    Ok(out)
}

fn load_input(path: Option<&Path>, fixture: Option<Archetype>, seed: u64, setup: &Setup) -> anyhow::Result<Scenario> {
    let (name, bytes) = match (path, fixture) {
        (Some(p), _) => {
            let bytes = std::fs::read(p).with_context(|| format!("cannot read scenario {}", p.display()))?;
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into());
            (name, bytes)
        }
        (None, Some(a)) => (a.name().to_string(), fixtures::generate(a, seed).to_csv_bytes()),
        (None, None) => bail!("no scenario given"),
    };
    let series =
        load_scenario(bytes.as_slice(), setup.step_hours, &setup.tariff).with_context(|| format!("scenario {name}"))?;
    Ok(Scenario { name, series, digest: hex(&Sha256::digest(&bytes)) })
}

impl ScenarioArg {
    fn load(&self, setup: &Setup) -> anyhow::Result<Scenario> {
        let fixture = self.fixture.as_deref().map(str::parse::<Archetype>).transpose()?;
        load_input(self.scenario.as_deref(), fixture, self.seed, setup)
    }
}

fn header(setup: &Setup, scenarios: &[&Scenario], extra: &[(&str, String)]) -> Vec<(String, String)> {
    let mut hasher = Sha256::new();
    hasher.update(setup.canonical.as_bytes());
    for s in scenarios {
        hasher.update(s.name.as_bytes());
        hasher.update(s.digest.as_bytes());
    }
    let mut h = vec![
        ("tool".to_string(), format!("prosumer-storage {}", env!("CARGO_PKG_VERSION"))),
        ("config_hash".to_string(), hex(&hasher.finalize())),
    ];
    for s in scenarios {
        h.push((
            "scenario".into(),
            format!("{} ({} steps, {:.2} days, sha256 {})", s.name, s.series.len(), s.series.days(), &s.digest[..16]),
        ));
    }
    h.extend([
        ("step_minutes".into(), format!("{}", (setup.step_hours * 60.0).round())),
        ("day_count".into(), "calendar days in the window".into()),
        ("expb".into(), expb_label(setup.opts.payback).into()),
        ("cycle_counter".into(), format!("rainflow, damage d^{}", setup.opts.damage.exponent)),
        ("epsilon".into(), format!("{}", setup.opts.dispatch.epsilon)),
        ("terminal_soc_floor".into(), setup.opts.dispatch.terminal_soc_floor.to_string()),
        ("feasibility_tol".into(), format!("{}", setup.opts.dispatch.lp.tol_feas)),
    ]);
    for (k, v) in extra {
        h.push((k.to_string(), v.clone()));
    }
    h
}

fn find_battery<'a>(setup: &'a Setup, name: &str) -> anyhow::Result<&'a BatterySpec> {
    setup.catalog.iter().find(|b| b.name == name).with_context(|| {
        let names: Vec<&str> = setup.catalog.iter().map(|b| b.name.as_str()).collect();
        format!("unknown battery '{name}' (catalog: {})", names.join(", "))
    })
}

fn create(path: &Path) -> anyhow::Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

fn single_table(s: &Scenario, report: ProfitabilityReport) -> anyhow::Result<SweepTable> {
    Ok(SweepTable {
        scenario: s.name.clone(),
        baseline: s.series.baseline_metrics()?,
        rows: vec![(report.battery.clone(), Ok(report))],
    })
}

fn cmd_evaluate(input: &ScenarioArg, battery: &str, conv: &Conventions) -> anyhow::Result<()> {
    let setup = conv.setup()?;
    let s = input.load(&setup)?;
    let bat = find_battery(&setup, battery)?;
    let (report, sel) = assess(&s.series, bat, &setup.ppc, &setup.opts)?;
    let head = header(
        &setup,
        &[&s],
        &[("battery", bat.name.clone()), ("ppc", format!("{} -> {} kVA", sel.baseline_limit_kva, sel.limit_kva))],
    );
    std::fs::create_dir_all(&conv.out)?;
    let stem = format!("{}_{}", s.name, bat.name);
    report::write_dispatch_csv(
        create(&conv.out.join(format!("{stem}_dispatch.csv")))?,
        &head,
        &s.series,
        &sel.dispatch,
    )?;
    let count = count_cycles(&sel.dispatch.soc_with_initial(bat.b_0), bat.b_rated, &setup.opts.damage);
    write_cycles_csv(&count, &setup.opts.damage, create(&conv.out.join(format!("{stem}_cycles.csv")))?)?;
    let table = single_table(&s, report)?;
    report::write_sweep_csv(
        create(&conv.out.join(format!("{stem}_report.csv")))?,
        &head,
        std::slice::from_ref(&table),
    )?;
    print!("{}", report::format_sweep_table(&table));
    println!("reports written to {}", conv.out.display());
    Ok(())
}

fn cmd_sweep(
    paths: &[PathBuf],
    fixture_list: &[String],
    seed: u64,
    priority: &str,
    conv: &Conventions,
) -> anyhow::Result<()> {
    let setup = conv.setup()?;
    let mut scenarios = Vec::new();
    for p in paths {
        scenarios.push(load_input(Some(p), None, seed, &setup)?);
    }
    for a in fixture_names(fixture_list)? {
        scenarios.push(load_input(None, Some(a), seed, &setup)?);
    }
    if scenarios.is_empty() {
        bail!("give at least one --scenario or --fixture");
    }
    let jobs: Vec<(usize, &BatterySpec)> =
        (0..scenarios.len()).flat_map(|i| setup.catalog.iter().map(move |b| (i, b))).collect();
    let results: Vec<std::result::Result<ProfitabilityReport, String>> = jobs
        .par_iter()
        .map(|&(i, b)| {
            assess(&scenarios[i].series, b, &setup.ppc, &setup.opts).map(|(r, _)| r).map_err(|e| e.to_string())
        })
        .collect();

    let mut tables = Vec::with_capacity(scenarios.len());
    let mut it = jobs.iter().zip(results);
    for s in &scenarios {
        let rows = it.by_ref().take(setup.catalog.len()).map(|((_, b), r)| (b.name.clone(), r)).collect();
        tables.push(SweepTable { scenario: s.name.clone(), baseline: s.series.baseline_metrics()?, rows });
    }
    let refs: Vec<&Scenario> = scenarios.iter().collect();
    let head = header(&setup, &refs, &[("priority", priority.to_string())]);
    std::fs::create_dir_all(&conv.out)?;
    report::write_sweep_csv(create(&conv.out.join("sweep.csv"))?, &head, &tables)?;
    report::write_sweep_text(create(&conv.out.join("sweep.txt"))?, &head, &tables)?;

    let prio = if priority == "per-cycle" { Priority::PerCycle } else { Priority::Payback };
    for t in &tables {
        print!("{}", report::format_sweep_table(t));
        let ok: Vec<ProfitabilityReport> = t.rows.iter().filter_map(|(_, r)| r.as_ref().ok().cloned()).collect();
        match rank_candidates(&ok, prio).first() {
            Some(best) if best.profitable => println!("best by {priority}: {}\n", best.battery),
            _ => println!("no profitable candidate\n"),
        }
    }
    println!("sweep written to {}", conv.out.display());
    Ok(())
}

fn cmd_tune(input: &ScenarioArg, battery: &str, target: Option<f64>, conv: &Conventions) -> anyhow::Result<()> {
    if let Some(t) = target {
        if !(t > 0.0) {
            return Err(UsageError(format!("--target must be positive, got {t}")).into());
        }
    }
    let setup = conv.setup()?;
    let s = input.load(&setup)?;
    let bat = find_battery(&setup, battery)?;
    let target = target.unwrap_or_else(|| default_cycle_target(&s.series, bat, setup.opts.payback));
    let out = tune_friction(&s.series, bat, &setup.ppc, target, &setup.opts)?;
    if !out.tuned {
        println!(
            "{} on {}: {:.2} cycles within the budget of {:.2}; η_fric = 1 (no tuning needed)",
            bat.name, s.name, out.untuned.n_cyc_100, target
        );
        return Ok(());
    }
    let head = header(
        &setup,
        &[&s],
        &[
            ("battery", bat.name.clone()),
            ("target_cycles", format!("{target:.4}")),
            ("eta_fric", format!("{:.6}", out.eta_fric)),
        ],
    );
    std::fs::create_dir_all(&conv.out)?;
    let stem = format!("{}_{}_tuned", s.name, bat.name);
    report::write_dispatch_csv(
        create(&conv.out.join(format!("{stem}_dispatch.csv")))?,
        &head,
        &s.series,
        &out.dispatch,
    )?;
    let table = single_table(&s, out.report.clone())?;
    report::write_sweep_csv(
        create(&conv.out.join(format!("{stem}_report.csv")))?,
        &head,
        std::slice::from_ref(&table),
    )?;

    println!("{} on {} (target {:.2} cycles)", bat.name, s.name, target);
    println!("{:<10}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}", "", "eta_fric", "G_T", "P_cyc", "Cycles", "SS (%)", "ExPB");
    for (label, eta, r) in [("untuned", 1.0, &out.untuned), ("tuned", out.eta_fric, &out.report)] {
        println!(
            "{:<10}{:>10.4}{:>10.2}{:>10.4}{:>10.2}{:>10.2}{:>10.2}",
            label,
            eta,
            r.g_t,
            r.p_cyc,
            r.n_cyc_100,
            100.0 * r.ss,
            r.expb_years
        );
    }
    if let Some(w) = &out.warning {
        println!("warning: {w}");
    }
    Ok(())
}

fn cmd_fixtures(seed: u64, out: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    for a in Archetype::ALL {
        let path = out.join(format!("{}.csv", a.name()));
        fixtures::generate(a, seed).write_csv(create(&path)?)?;
        println!("{}  {}", path.display(), a.description());
    }
    std::fs::write(out.join("tariff.toml"), config::tariff_to_toml(&TariffSchedule::default()))?;
    std::fs::write(out.join("ppc.toml"), config::ppc_to_toml(&PpcSchedule::default()))?;
    std::fs::write(out.join("catalog.toml"), config::catalog_to_toml(&BatterySpec::default_catalog()))?;
    Ok(())
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// 2 for an unreachable peak target, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Infeasible { .. }) | Some(Error::PeakAboveContracts { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Evaluate { input, battery, conv } => cmd_evaluate(input, battery, conv),
        Command::Sweep { scenarios, fixtures, seed, priority, conv } => {
            cmd_sweep(scenarios, fixtures, *seed, priority, conv)
        }
        Command::Tune { input, battery, target, conv } => cmd_tune(input, battery, *target, conv),
        Command::Fixtures { seed, out } => cmd_fixtures(*seed, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
