use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use peakshave::benefits::{
    arbitrage_benefit, eligible_arbitrage_days, monthly_shaves, ArbitrageMode, ArbitragePolicy,
};
use peakshave::costmodel::{size_to_cost, CostAssumptions, TechnologyCatalog, TechnologyId};
use peakshave::dispatch::{max_feasible_shave, required_energy, BessSpec};
use peakshave::emit::{emit_tables, round_usd, EmitFormat};
use peakshave::scenario::run_scenario;
use peakshave::tariff::{bill_month, TariffSpec};
use peakshave::timeseries::{parse_series, split_months, MonthSlice, Unit};
use peakshave::ScenarioConfig;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Peak-shaving benefit-cost toolkit for allocation-tariff utilities.
#[derive(Parser)]
#[command(name = "peakshave", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bill a year of hourly load against hourly prices.
    Bill(BillArgs),
    /// Per-month feasible shave for a battery.
    Shave(ShaveArgs),
    /// Per-month battery energy required for a shave target.
    Size(SizeArgs),
    /// Value the day-ahead arbitrage stream.
    Arbitrage(ArbitrageArgs),
    /// Annualized system cost for a technology and install year.
    Cost(CostArgs),
    /// Run the full scenario pipeline and emit report tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct BillArgs {
    #[arg(long)]
    load: PathBuf,
    #[arg(long)]
    prices: PathBuf,
    #[arg(long)]
    allocation_mw: f64,
    #[arg(long, default_value_t = 4.92)]
    firm_rate: f64,
    #[arg(long, default_value_t = 4.07)]
    demand_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    wheeling_rate: f64,
}

#[derive(Args)]
struct ShaveArgs {
    #[arg(long)]
    load: PathBuf,
    #[arg(long)]
    power_mw: f64,
    #[arg(long)]
    energy_mwh: f64,
    #[arg(long, default_value_t = 1.0)]
    efficiency: f64,
}

#[derive(Args)]
struct SizeArgs {
    #[arg(long)]
    load: PathBuf,
    #[arg(long)]
    shave_mw: f64,
    /// Power rating; defaults to the shave target.
    #[arg(long)]
    power_mw: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    efficiency: f64,
}

#[derive(Args)]
struct ArbitrageArgs {
    #[arg(long)]
    day_ahead: PathBuf,
    #[arg(long)]
    power_mw: f64,
    #[arg(long)]
    energy_mwh: f64,
    #[arg(long, default_value = "conservative-flat")]
    mode: String,
    #[arg(long, default_value_t = 25.0)]
    flat_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    efficiency: f64,
    /// Load series for the eligible-day rule; without it every day in the
    /// price file is eligible.
    #[arg(long)]
    load: Option<PathBuf>,
    /// Eligibility margin below the monthly target peak, MW; defaults to
    /// the power rating.
    #[arg(long)]
    margin_mw: Option<f64>,
}

#[derive(Args)]
struct CostArgs {
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    technology: String,
    #[arg(long)]
    install_year: i32,
    #[arg(long)]
    power_mw: f64,
    #[arg(long)]
    energy_mwh: f64,
    #[arg(long, default_value_t = 0.0)]
    throughput_kwh: f64,
    #[arg(long, default_value_t = 0.2)]
    inverter_margin: f64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output directory, overriding the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_months(path: &Path, unit: Unit) -> Result<Vec<MonthSlice>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let series = parse_series(std::io::BufReader::new(file), unit)
        .with_context(|| format!("parsing {}", path.display()))?;
    let months = split_months(&series).with_context(|| format!("splitting {}", path.display()))?;
    Ok(months)
}

fn run_bill(args: &BillArgs) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let spec = TariffSpec {
        allocation_mw: args.allocation_mw,
        firm_energy_rate_usd_per_mwh: args.firm_rate,
        demand_rate_usd_per_kw_month: args.demand_rate,
        wheeling_demand_rate_usd_per_kw_month: args.wheeling_rate,
    };
    spec.validate()?;
    let loads = read_months(&args.load, Unit::Megawatt)?;
    let prices = read_months(&args.prices, Unit::UsdPerMwh)?;
    writeln!(
        out,
        "year,month,peak_mw,firm_share,firm_mwh,market_mwh,firm_cost_usd,market_cost_usd,demand_usd,wheeling_usd,total_usd"
    )?;
    for load in &loads {
        let price = prices
            .iter()
            .find(|p| (p.year(), p.month()) == (load.year(), load.month()))
            .with_context(|| format!("no price month for {}-{:02}", load.year(), load.month()))?;
        let bill = bill_month(load, price, &spec)?;
        writeln!(
            out,
            "{},{},{:.3},{:.4},{:.2},{:.2},{},{},{},{},{}",
            bill.year,
            bill.month,
            bill.peak_mw,
            bill.firm_share,
            bill.firm_energy_mwh,
            bill.market_energy_mwh,
            round_usd(bill.firm_energy_cost),
            round_usd(bill.market_energy_cost),
            round_usd(bill.demand_charge),
            round_usd(bill.wheeling_demand_charge),
            round_usd(bill.firm_energy_cost)
                + round_usd(bill.market_energy_cost)
                + round_usd(bill.demand_charge)
                + round_usd(bill.wheeling_demand_charge),
        )?;
    }
    Ok(())
}

fn run_shave(args: &ShaveArgs) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let mut bess = BessSpec::new(args.power_mw, args.energy_mwh, "cli");
    bess.round_trip_efficiency = args.efficiency;
    bess.validate()?;
    let loads = read_months(&args.load, Unit::Megawatt)?;
    writeln!(out, "year,month,peak_mw,feasible_shave_mw,achieved_peak_mw")?;
    for load in &loads {
        let peak = load.peak();
        let shave = max_feasible_shave(load, &bess);
        writeln!(
            out,
            "{},{},{:.3},{:.3},{:.3}",
            load.year(),
            load.month(),
            peak,
            shave,
            peak - shave
        )?;
    }
    Ok(())
}

fn run_size(args: &SizeArgs) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let power = args.power_mw.unwrap_or(args.shave_mw);
    let loads = read_months(&args.load, Unit::Megawatt)?;
    writeln!(out, "year,month,shave_mw,required_mwh")?;
    for load in &loads {
        let shave = args.shave_mw.min(load.peak());
        let required = required_energy(load, shave, power, args.efficiency)?;
        writeln!(
            out,
            "{},{},{:.3},{:.2}",
            load.year(),
            load.month(),
            shave,
            required
        )?;
    }
    Ok(())
}

fn run_arbitrage(args: &ArbitrageArgs) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let mode = match args.mode.as_str() {
        "conservative-flat" | "flat" => ArbitrageMode::ConservativeFlat,
        "price-based" => ArbitrageMode::PriceBased,
        other => bail!("unknown mode `{other}` (expected conservative-flat or price-based)"),
    };
    let mut bess = BessSpec::new(args.power_mw, args.energy_mwh, "cli");
    bess.round_trip_efficiency = args.efficiency;
    bess.validate()?;
    let policy = ArbitragePolicy {
        mode,
        flat_rate_usd_per_day_per_mw: args.flat_rate,
        eligible_margin_mw: args.margin_mw,
    };
    let day_ahead = read_months(&args.day_ahead, Unit::UsdPerMwh)?;
    let days = match &args.load {
        Some(path) => {
            let loads = read_months(path, Unit::Megawatt)?;
            let shaves = monthly_shaves(&loads, &bess);
            eligible_arbitrage_days(&loads, &shaves, policy.margin_for(&bess))
        }
        None => {
            let mut days: Vec<chrono::NaiveDate> = day_ahead
                .iter()
                .flat_map(|m| m.points().iter().map(|p| p.timestamp.date()))
                .collect();
            days.dedup();
            days
        }
    };
    let outcome = arbitrage_benefit(Some(&day_ahead), &bess, &policy, &days)?;
    writeln!(out, "eligible_days,usd,cycling_mwh")?;
    writeln!(
        out,
        "{},{},{:.2}",
        days.len(),
        round_usd(outcome.usd),
        outcome.cycling_discharge_mwh
    )?;
    Ok(())
}

fn run_cost(args: &CostArgs) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let catalog = TechnologyCatalog::load(&args.catalog)?;
    let id: TechnologyId = args.technology.parse()?;
    let tech = catalog
        .get(id)
        .with_context(|| format!("technology {id} not present in the catalog"))?;
    let mut bess = BessSpec::new(args.power_mw, args.energy_mwh, &args.technology);
    bess.inverter_margin = args.inverter_margin;
    let cost = size_to_cost(
        &bess,
        tech,
        args.install_year,
        args.throughput_kwh,
        &CostAssumptions::default(),
    )?;
    writeln!(
        out,"technology,install_year,energy_annuity_usd,power_annuity_usd,maintenance_usd,loss_usd,total_usd")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{}",
        id,
        args.install_year,
        round_usd(cost.energy_annuity),
        round_usd(cost.power_annuity),
        round_usd(cost.maintenance),
        round_usd(cost.loss),
        round_usd(cost.energy_annuity)
            + round_usd(cost.power_annuity)
            + round_usd(cost.maintenance)
            + round_usd(cost.loss),
    )?;
    Ok(())
}

fn run_report(args: &ReportArgs) -> i32 {
    let format = match args.format.parse::<EmitFormat>() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let config = match ScenarioConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| config.output_dir.clone());
    let report = match run_scenario(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match emit_tables(&report, format, &out_dir) {
        Ok(paths) => {
            for p in &paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Report(args) => run_report(args),
        Command::Bill(args) => exit_of(run_bill(args)),
        Command::Shave(args) => exit_of(run_shave(args)),
        Command::Size(args) => exit_of(run_size(args)),
        Command::Arbitrage(args) => exit_of(run_arbitrage(args)),
        Command::Cost(args) => exit_of(run_cost(args)),
    };
    std::process::exit(code);
}

fn exit_of(result: Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) => {
            // A reader closing the pipe early (e.g. `| head`) is not a
            // failure of ours.
            let broken_pipe = e
                .downcast_ref::<std::io::Error>()
                .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe);
            if broken_pipe {
                return 0;
            }
            eprintln!("error: {e:#}");
            1
        }
    }
}
