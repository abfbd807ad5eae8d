//! Table emission: one CSV or JSON file per table kind, byte-deterministic.
//!
//! Rounding discipline: currency to whole dollars, energy to 0.01 MWh,
//! power to 1 kW, shares to four decimals. Components are rounded first and
//! totals are sums of the rounded components, so every emitted table
//! reconciles internally even when that diverges from the full-precision
//! sum by a dollar.

use crate::scenario::{CandidateReport, ScenarioError, ScenarioReport};
use serde::Serialize;
use std::fmt::Display;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Csv,
    Json,
}

impl EmitFormat {
    pub fn extension(self) -> &'static str {
        match self {
            EmitFormat::Csv => "csv",
            EmitFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for EmitFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(EmitFormat::Csv),
            "json" => Ok(EmitFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// Whole dollars, half away from zero.
pub fn round_usd(x: f64) -> i64 {
    x.round() as i64
}

/// Energy to 0.01 MWh, as a fixed-decimal string.
pub fn fmt_mwh(x: f64) -> String {
    format!("{x:.2}")
}

/// Power to 1 kW.
pub fn fmt_mw(x: f64) -> String {
    format!("{x:.3}")
}

/// Shares to four decimals.
pub fn fmt_share(x: f64) -> String {
    format!("{x:.4}")
}

/// Prices to cents.
pub fn fmt_price(x: f64) -> String {
    format!("{x:.2}")
}

#[derive(Debug, Serialize)]
struct BillRow {
    candidate: String,
    year: i32,
    month: u32,
    scope: &'static str,
    peak_mw: String,
    firm_share: String,
    firm_mwh: String,
    market_mwh: String,
    firm_cost_usd: i64,
    market_cost_usd: i64,
    demand_usd: i64,
    wheeling_usd: i64,
    total_usd: i64,
}

impl BillRow {
    fn new(candidate: &str, scope: &'static str, bill: &crate::tariff::MonthlyBill) -> Self {
        let firm_cost_usd = round_usd(bill.firm_energy_cost);
        let market_cost_usd = round_usd(bill.market_energy_cost);
        let demand_usd = round_usd(bill.demand_charge);
        let wheeling_usd = round_usd(bill.wheeling_demand_charge);
        BillRow {
            candidate: candidate.to_string(),
            year: bill.year,
            month: bill.month,
            scope,
            peak_mw: fmt_mw(bill.peak_mw),
            firm_share: fmt_share(bill.firm_share),
            firm_mwh: fmt_mwh(bill.firm_energy_mwh),
            market_mwh: fmt_mwh(bill.market_energy_mwh),
            firm_cost_usd,
            market_cost_usd,
            demand_usd,
            wheeling_usd,
            total_usd: firm_cost_usd + market_cost_usd + demand_usd + wheeling_usd,
        }
    }
}

#[derive(Debug, Serialize)]
struct ShiftingTableRow {
    candidate: String,
    year: i32,
    month: u32,
    shave_mw: String,
    firm_mwh: String,
    market_mwh: String,
    benefit_mwh: String,
    bess_energy_mwh: String,
}

#[derive(Debug, Serialize)]
struct RequiredEnergyTableRow {
    candidate: String,
    year: i32,
    month: u32,
    shave_mw: String,
    required_mwh: String,
}

#[derive(Debug, Serialize)]
struct FeasibleShaveTableRow {
    candidate: String,
    year: i32,
    month: u32,
    peak_mw: String,
    feasible_shave_mw: String,
}

#[derive(Debug, Serialize)]
struct BenefitTotalsRow {
    candidate: String,
    allocation_shifting_usd: i64,
    demand_reduction_usd: i64,
    wheeling_reduction_usd: i64,
    arbitrage_usd: i64,
    shifted_mwh: String,
    total_usd: i64,
}

#[derive(Debug, Serialize)]
struct BenefitMonthlyRow {
    candidate: String,
    year: i32,
    month: u32,
    shave_mw: String,
    allocation_shifting_usd: i64,
    demand_reduction_usd: i64,
    wheeling_reduction_usd: i64,
    arbitrage_usd: i64,
    shifted_mwh: String,
    eligible_days: usize,
}

#[derive(Debug, Serialize)]
struct CostTableRow {
    candidate: String,
    technology: String,
    install_year: i32,
    energy_annuity_usd: i64,
    power_annuity_usd: i64,
    maintenance_usd: i64,
    loss_usd: i64,
    total_usd: i64,
}

#[derive(Debug, Serialize)]
struct BreakevenTableRow {
    candidate: String,
    technology: String,
    annual_benefit_usd: i64,
    breakeven_year: Option<i32>,
}

#[derive(Debug, Serialize)]
struct PriceStatTableRow {
    year: i32,
    month: u32,
    mean_price_usd_per_mwh: String,
}

#[derive(Debug, Serialize)]
struct WarningRow {
    context: String,
    message: String,
}

fn write_table<T: Serialize>(
    out_dir: &Path,
    name: &str,
    format: EmitFormat,
    rows: &[T],
) -> Result<PathBuf, ScenarioError> {
    let path = out_dir.join(format!("{name}.{}", format.extension()));
    let context = format!("writing {}", path.display());
    let fail = |e: &dyn Display| ScenarioError::Data {
        context: context.clone(),
        message: e.to_string(),
    };
    match format {
        EmitFormat::Csv => {
            let mut writer = csv::Writer::from_path(&path).map_err(|e| fail(&e))?;
            for row in rows {
                writer.serialize(row).map_err(|e| fail(&e))?;
            }
            writer.flush().map_err(|e| fail(&e))?;
        }
        EmitFormat::Json => {
            let mut file = std::fs::File::create(&path).map_err(|e| fail(&e))?;
            serde_json::to_writer_pretty(&mut file, rows).map_err(|e| fail(&e))?;
            use std::io::Write;
            writeln!(file).map_err(|e| fail(&e))?;
        }
    }
    Ok(path)
}

fn benefit_totals_row(c: &CandidateReport) -> BenefitTotalsRow {
    let allocation = round_usd(c.benefits.allocation_shifting_usd);
    let demand = round_usd(c.benefits.demand_reduction_usd);
    let wheeling = round_usd(c.benefits.wheeling_reduction_usd);
    let arbitrage = round_usd(c.benefits.arbitrage_usd);
    BenefitTotalsRow {
        candidate: c.name.clone(),
        allocation_shifting_usd: allocation,
        demand_reduction_usd: demand,
        wheeling_reduction_usd: wheeling,
        arbitrage_usd: arbitrage,
        shifted_mwh: fmt_mwh(c.benefits.shifted_energy_mwh),
        total_usd: allocation + demand + wheeling + arbitrage,
    }
}

/// Emit every table kind for the report into `out_dir`, returning the
/// written paths in a fixed order.
pub fn emit_tables(
    report: &ScenarioReport,
    format: EmitFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ScenarioError> {
    std::fs::create_dir_all(out_dir).map_err(|e| ScenarioError::Data {
        context: format!("creating {}", out_dir.display()),
        message: e.to_string(),
    })?;

    let mut bills = Vec::new();
    let mut shifting = Vec::new();
    let mut required = Vec::new();
    let mut feasible = Vec::new();
    let mut totals = Vec::new();
    let mut monthly = Vec::new();
    let mut costs = Vec::new();
    let mut breakeven = Vec::new();

    for c in &report.candidates {
        for m in &c.months {
            bills.push(BillRow::new(&c.name, "baseline", &m.baseline));
            bills.push(BillRow::new(&c.name, "shaved", &m.shaved));
        }
        for r in &c.shifting_rows {
            shifting.push(ShiftingTableRow {
                candidate: c.name.clone(),
                year: r.year,
                month: r.month,
                shave_mw: fmt_mw(r.shave_mw),
                firm_mwh: fmt_mwh(r.firm_mwh),
                market_mwh: fmt_mwh(r.market_mwh),
                benefit_mwh: fmt_mwh(r.benefit_mwh),
                bess_energy_mwh: fmt_mwh(r.bess_energy_mwh),
            });
        }
        for r in &c.required_energy_rows {
            required.push(RequiredEnergyTableRow {
                candidate: c.name.clone(),
                year: r.year,
                month: r.month,
                shave_mw: fmt_mw(r.shave_mw),
                required_mwh: fmt_mwh(r.required_mwh),
            });
        }
        for r in &c.feasible_shave_rows {
            feasible.push(FeasibleShaveTableRow {
                candidate: c.name.clone(),
                year: r.year,
                month: r.month,
                peak_mw: fmt_mw(r.peak_mw),
                feasible_shave_mw: fmt_mw(r.feasible_shave_mw),
            });
        }
        totals.push(benefit_totals_row(c));
        for b in &c.benefits.per_month {
            monthly.push(BenefitMonthlyRow {
                candidate: c.name.clone(),
                year: b.year,
                month: b.month,
                shave_mw: fmt_mw(b.applied_shave_mw),
                allocation_shifting_usd: round_usd(b.allocation_shifting_usd),
                demand_reduction_usd: round_usd(b.demand_reduction_usd),
                wheeling_reduction_usd: round_usd(b.wheeling_reduction_usd),
                arbitrage_usd: round_usd(b.arbitrage_usd),
                shifted_mwh: fmt_mwh(b.shifted_mwh),
                eligible_days: b.eligible_days,
            });
        }
        for r in &c.costs {
            let energy = round_usd(r.cost.energy_annuity);
            let power = round_usd(r.cost.power_annuity);
            let maintenance = round_usd(r.cost.maintenance);
            let loss = round_usd(r.cost.loss);
            costs.push(CostTableRow {
                candidate: c.name.clone(),
                technology: r.technology.to_string(),
                install_year: r.install_year,
                energy_annuity_usd: energy,
                power_annuity_usd: power,
                maintenance_usd: maintenance,
                loss_usd: loss,
                total_usd: energy + power + maintenance + loss,
            });
        }
        for r in &c.breakeven {
            breakeven.push(BreakevenTableRow {
                candidate: c.name.clone(),
                technology: r.technology.to_string(),
                annual_benefit_usd: round_usd(r.annual_benefit_usd),
                breakeven_year: r.breakeven_year,
            });
        }
    }

    let stats: Vec<PriceStatTableRow> = report
        .price_stats
        .iter()
        .map(|r| PriceStatTableRow {
            year: r.year,
            month: r.month,
            mean_price_usd_per_mwh: fmt_price(r.mean_price_usd_per_mwh),
        })
        .collect();
    let warning_rows: Vec<WarningRow> = report
        .warnings
        .iter()
        .map(|w| WarningRow {
            context: w.context.clone(),
            message: w.message.clone(),
        })
        .collect();

    Ok(vec![
        write_table(out_dir, "bills", format, &bills)?,
        write_table(out_dir, "shifting", format, &shifting)?,
        write_table(out_dir, "required_energy", format, &required)?,
        write_table(out_dir, "feasible_shave", format, &feasible)?,
        write_table(out_dir, "benefits", format, &totals)?,
        write_table(out_dir, "benefits_monthly", format, &monthly)?,
        write_table(out_dir, "costs", format, &costs)?,
        write_table(out_dir, "breakeven", format, &breakeven)?,
        write_table(out_dir, "price_stats", format, &stats)?,
        write_table(out_dir, "warnings", format, &warning_rows)?,
    ])
}
