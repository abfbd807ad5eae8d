//! Full-study orchestration: bill the year, size and dispatch each
//! candidate battery, quantify the benefit streams, project annualized
//! costs by technology and install year, and find breakeven.
//!
//! The report is deterministic: identical inputs yield an identical
//! structure, and the emitters preserve construction order throughout.

use crate::benefits::{total_benefit, BenefitReport};
use crate::config::{ConfigError, ScenarioConfig};
use crate::costmodel::{breakeven_year, size_to_cost, AnnualCost, TechnologyCatalog, TechnologyId};
use crate::dispatch::{
    clamp_dispatch, max_feasible_shave, required_energy, BessSpec, SHAVE_RESOLUTION_MW,
};
use crate::tariff::{bill_month, bill_month_at_peak, monthly_peak, MonthlyBill};
use crate::timeseries::{
    parse_series, split_months, split_months_lenient, HourlySeries, MonthSlice, SkippedMonth, Unit,
};
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {message}")]
    Data { context: String, message: String },
}

impl ScenarioError {
    pub(crate) fn data(context: impl Into<String>, err: impl Display) -> Self {
        ScenarioError::Data {
            context: context.into(),
            message: err.to_string(),
        }
    }

    /// Process exit code for the `report` subcommand: 1 for configuration
    /// problems, 2 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_) => 1,
            ScenarioError::Data { .. } => 2,
        }
    }
}

/// Monthly mean of an hourly price series, the plot-ready shape of the
/// seasonal price picture.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceStatRow {
    pub year: i32,
    pub month: u32,
    pub mean_price_usd_per_mwh: f64,
}

/// A structured warning surfaced in the report rather than logged.
#[derive(Debug, Clone, PartialEq)]
pub struct Warning {
    pub context: String,
    pub message: String,
}

/// Baseline and shaved billing for one month of one candidate.
#[derive(Debug, Clone)]
pub struct MonthOutcome {
    pub year: i32,
    pub month: u32,
    pub baseline: MonthlyBill,
    pub applied_shave_mw: f64,
    pub shaved: MonthlyBill,
    pub discharge_mwh: f64,
}

/// One line of the energy-shifting table: firm/market split at a shave
/// level, with the battery energy that level demands.
#[derive(Debug, Clone)]
pub struct ShiftingRow {
    pub year: i32,
    pub month: u32,
    pub shave_mw: f64,
    pub firm_mwh: f64,
    pub market_mwh: f64,
    pub benefit_mwh: f64,
    pub bess_energy_mwh: f64,
}

/// Energy required to sustain the candidate's full power rating as a shave.
#[derive(Debug, Clone)]
pub struct RequiredEnergyRow {
    pub year: i32,
    pub month: u32,
    pub shave_mw: f64,
    pub required_mwh: f64,
}

/// The shave each month can actually sustain within the energy rating.
#[derive(Debug, Clone)]
pub struct FeasibleShaveRow {
    pub year: i32,
    pub month: u32,
    pub peak_mw: f64,
    pub feasible_shave_mw: f64,
}

/// Annual cost breakdown for one technology and install year.
#[derive(Debug, Clone)]
pub struct CostRow {
    pub technology: TechnologyId,
    pub install_year: i32,
    pub cost: AnnualCost,
}

#[derive(Debug, Clone)]
pub struct BreakevenRow {
    pub technology: TechnologyId,
    pub annual_benefit_usd: f64,
    pub breakeven_year: Option<i32>,
}

/// Everything computed for one candidate battery.
#[derive(Debug, Clone)]
pub struct CandidateReport {
    pub name: String,
    pub bess: BessSpec,
    pub months: Vec<MonthOutcome>,
    pub shifting_rows: Vec<ShiftingRow>,
    pub required_energy_rows: Vec<RequiredEnergyRow>,
    pub feasible_shave_rows: Vec<FeasibleShaveRow>,
    pub benefits: BenefitReport,
    /// Peak-shave discharge over the year, MWh.
    pub annual_discharge_mwh: f64,
    /// Loss-model throughput: peak-shave discharge plus arbitrage cycling.
    pub annual_throughput_kwh: f64,
    pub costs: Vec<CostRow>,
    pub breakeven: Vec<BreakevenRow>,
}

/// The full study output across candidates.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub utility: String,
    pub price_stats: Vec<PriceStatRow>,
    pub warnings: Vec<Warning>,
    pub candidates: Vec<CandidateReport>,
}

/// Monthly price means over every complete month of the series; incomplete
/// months are skipped and reported, not fabricated.
pub fn price_stats(series: &HourlySeries) -> (Vec<PriceStatRow>, Vec<SkippedMonth>) {
    let (slices, skipped) = split_months_lenient(series);
    let rows = slices
        .iter()
        .map(|s| PriceStatRow {
            year: s.year(),
            month: s.month(),
            mean_price_usd_per_mwh: s.mean(),
        })
        .collect();
    (rows, skipped)
}

fn load_series_file(path: &Path, unit: Unit) -> Result<HourlySeries, ScenarioError> {
    let context = format!("reading {}", path.display());
    let file = std::fs::File::open(path).map_err(|e| ScenarioError::data(&context, e))?;
    parse_series(std::io::BufReader::new(file), unit).map_err(|e| ScenarioError::data(&context, e))
}

/// Run the whole study for one configuration.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioReport, ScenarioError> {
    let load_series = load_series_file(&config.load_csv, Unit::Megawatt)?;
    let rt_prices = load_series_file(&config.realtime_price_csv, Unit::UsdPerMwh)?;
    let day_ahead = config
        .day_ahead_price_csv
        .as_ref()
        .map(|p| load_series_file(p, Unit::UsdPerMwh))
        .transpose()?;

    let load_months = split_months(&load_series)
        .map_err(|e| ScenarioError::data(format!("load {}", config.load_csv.display()), e))?;

    let mut warnings = Vec::new();
    let (stat_rows, skipped) = price_stats(&rt_prices);
    for s in &skipped {
        warnings.push(Warning {
            context: format!("prices {}", config.realtime_price_csv.display()),
            message: format!(
                "skipped incomplete month {}-{:02} ({} missing hours)",
                s.year, s.month, s.missing
            ),
        });
    }

    // Billing needs a complete price month for every load month.
    let (price_slices, _) = split_months_lenient(&rt_prices);
    let price_by_month: BTreeMap<(i32, u32), &MonthSlice> = price_slices
        .iter()
        .map(|s| ((s.year(), s.month()), s))
        .collect();
    let mut aligned_prices = Vec::with_capacity(load_months.len());
    for m in &load_months {
        let slice = price_by_month.get(&(m.year(), m.month())).ok_or_else(|| {
            ScenarioError::data(
                "aligning prices",
                format!(
                    "no complete real-time price month for {}-{:02}",
                    m.year(),
                    m.month()
                ),
            )
        })?;
        aligned_prices.push((*slice).clone());
    }

    let day_ahead_months: Option<Vec<MonthSlice>> = day_ahead.as_ref().map(|series| {
        let (slices, skipped) = split_months_lenient(series);
        for s in &skipped {
            warnings.push(Warning {
                context: "day-ahead prices".to_string(),
                message: format!(
                    "skipped incomplete month {}-{:02} ({} missing hours)",
                    s.year, s.month, s.missing
                ),
            });
        }
        slices
    });
    let day_ahead_mean = day_ahead.as_ref().map(|series| {
        let total: f64 = series.points().iter().map(|p| p.value).sum();
        total / series.len() as f64
    });

    let catalog = TechnologyCatalog::load(&config.catalog_csv)
        .map_err(|e| ScenarioError::data(format!("catalog {}", config.catalog_csv.display()), e))?;
    let assumptions = config.costs.assumptions(day_ahead_mean);

    let mut candidates = Vec::with_capacity(config.candidates.len());
    for candidate in &config.candidates {
        let name = candidate.display_name();
        let tech_id: TechnologyId = candidate
            .technology
            .parse()
            .map_err(|e| ScenarioError::data(format!("candidate `{name}`"), e))?;
        let tech = catalog.get(tech_id).ok_or_else(|| {
            ScenarioError::data(
                format!("candidate `{name}`"),
                format!("technology {tech_id} not present in the catalog"),
            )
        })?;
        let bess = candidate.to_bess(tech.dod);

        let mut months = Vec::with_capacity(load_months.len());
        let mut shifting_rows = Vec::new();
        let mut required_rows = Vec::with_capacity(load_months.len());
        let mut feasible_rows = Vec::with_capacity(load_months.len());
        let mut annual_discharge = 0.0;

        for (load, prices) in load_months.iter().zip(&aligned_prices) {
            let peak = monthly_peak(load);
            let baseline = bill_month(load, prices, &config.tariff)
                .map_err(|e| ScenarioError::data(format!("billing `{name}`"), e))?;

            let shave = max_feasible_shave(load, &bess);
            let full_shave = bess.power_mw.min(peak);
            if shave + SHAVE_RESOLUTION_MW <= full_shave {
                warnings.push(Warning {
                    context: format!("candidate `{name}`"),
                    message: format!(
                        "{}-{:02}: shave derated to {:.3} MW of {:.3} MW by the energy rating",
                        load.year(),
                        load.month(),
                        shave,
                        full_shave
                    ),
                });
            }

            let dispatch = clamp_dispatch(load, peak - shave, &bess);
            annual_discharge += dispatch.discharge_mwh_total;

            let shaved = bill_month_at_peak(load, prices, &config.tariff, peak - shave)
                .map_err(|e| ScenarioError::data(format!("billing `{name}`"), e))?;

            let required_full =
                required_energy(load, full_shave, bess.power_mw, bess.round_trip_efficiency)
                    .map_err(|e| ScenarioError::data(format!("sizing `{name}`"), e))?;
            required_rows.push(RequiredEnergyRow {
                year: load.year(),
                month: load.month(),
                shave_mw: full_shave,
                required_mwh: required_full,
            });
            feasible_rows.push(FeasibleShaveRow {
                year: load.year(),
                month: load.month(),
                peak_mw: peak,
                feasible_shave_mw: shave,
            });

            if peak > config.tariff.allocation_mw {
                let required_applied =
                    required_energy(load, shave, bess.power_mw, bess.round_trip_efficiency)
                        .map_err(|e| ScenarioError::data(format!("sizing `{name}`"), e))?;
                shifting_rows.push(ShiftingRow {
                    year: load.year(),
                    month: load.month(),
                    shave_mw: 0.0,
                    firm_mwh: baseline.firm_energy_mwh,
                    market_mwh: baseline.market_energy_mwh,
                    benefit_mwh: 0.0,
                    bess_energy_mwh: 0.0,
                });
                shifting_rows.push(ShiftingRow {
                    year: load.year(),
                    month: load.month(),
                    shave_mw: shave,
                    firm_mwh: shaved.firm_energy_mwh,
                    market_mwh: shaved.market_energy_mwh,
                    benefit_mwh: shaved.firm_energy_mwh - baseline.firm_energy_mwh,
                    bess_energy_mwh: required_applied,
                });
            }

            months.push(MonthOutcome {
                year: load.year(),
                month: load.month(),
                baseline,
                applied_shave_mw: shave,
                shaved,
                discharge_mwh: dispatch.discharge_mwh_total,
            });
        }

        let benefits = total_benefit(
            &load_months,
            &aligned_prices,
            day_ahead_months.as_deref(),
            &config.tariff,
            &bess,
            &config.arbitrage,
        )
        .map_err(|e| ScenarioError::data(format!("benefits `{name}`"), e))?;

        let throughput_kwh = (annual_discharge + benefits.arbitrage_cycling_mwh) * 1000.0;

        let mut costs = Vec::new();
        let mut breakeven = Vec::new();
        for tech in catalog.technologies() {
            for year in config.install_years.range() {
                let cost = size_to_cost(&bess, tech, year, throughput_kwh, &assumptions)
                    .map_err(|e| ScenarioError::data(format!("costing `{name}`"), e))?;
                costs.push(CostRow {
                    technology: tech.id,
                    install_year: year,
                    cost,
                });
            }
            let be = breakeven_year(
                benefits.total_usd,
                &bess,
                tech,
                config.install_years.range(),
                throughput_kwh,
                &assumptions,
            )
            .map_err(|e| ScenarioError::data(format!("breakeven `{name}`"), e))?;
            breakeven.push(BreakevenRow {
                technology: tech.id,
                annual_benefit_usd: benefits.total_usd,
                breakeven_year: be,
            });
        }

        candidates.push(CandidateReport {
            name,
            bess,
            months,
            shifting_rows,
            required_energy_rows: required_rows,
            feasible_shave_rows: feasible_rows,
            benefits,
            annual_discharge_mwh: annual_discharge,
            annual_throughput_kwh: throughput_kwh,
            costs,
            breakeven,
        });
    }

    Ok(ScenarioReport {
        utility: config.utility.clone(),
        price_stats: stat_rows,
        warnings,
        candidates,
    })
}
