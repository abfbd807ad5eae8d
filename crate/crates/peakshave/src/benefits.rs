//! The three benefit streams of a peak-shaving battery: allocation
//! shifting (more energy billed at the firm rate), demand-charge reduction
//! in months under the allocation, and market-rate purchase optimization
//! (day-ahead arbitrage on days that cannot set the monthly peak).
//!
//! Streams are computed independently and summed; interaction effects such
//! as arbitrage cycling consuming peak-shave headroom are out of scope.

use crate::dispatch::{max_feasible_shave, BessSpec};
use crate::tariff::{bill_month, bill_month_at_peak, monthly_peak, TariffError, TariffSpec};
use crate::timeseries::MonthSlice;
use chrono::{Datelike, NaiveDate};
use serde::Deserialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenefitsError {
    #[error("load and price series cover different months: {detail}")]
    MisalignedYears { detail: String },
    #[error("no day-ahead prices for eligible day {date}")]
    EmptyPriceDay { date: NaiveDate },
    #[error("price-based arbitrage requires a day-ahead price series")]
    MissingDayAheadPrices,
    #[error(transparent)]
    Tariff(#[from] TariffError),
}

/// How the arbitrage stream is valued.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArbitrageMode {
    /// Flat $/day per MW of power rating on every eligible day.
    ConservativeFlat,
    /// One charge hour at the day's minimum price, one discharge hour at
    /// the maximum, profit floored at zero per day.
    PriceBased,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ArbitragePolicy {
    #[serde(default = "ArbitragePolicy::default_mode")]
    pub mode: ArbitrageMode,
    #[serde(default = "ArbitragePolicy::default_flat_rate")]
    pub flat_rate_usd_per_day_per_mw: f64,
    /// A day is eligible when its peak sits at least this far below the
    /// month's shaved target peak. Defaults to the battery power rating.
    #[serde(default)]
    pub eligible_margin_mw: Option<f64>,
}

impl ArbitragePolicy {
    fn default_mode() -> ArbitrageMode {
        ArbitrageMode::ConservativeFlat
    }

    fn default_flat_rate() -> f64 {
        25.0
    }

    pub fn margin_for(&self, bess: &BessSpec) -> f64 {
        self.eligible_margin_mw.unwrap_or(bess.power_mw)
    }
}

impl Default for ArbitragePolicy {
    fn default() -> Self {
        ArbitragePolicy {
            mode: Self::default_mode(),
            flat_rate_usd_per_day_per_mw: Self::default_flat_rate(),
            eligible_margin_mw: None,
        }
    }
}

/// Per-month benefit breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyBenefit {
    pub year: i32,
    pub month: u32,
    pub applied_shave_mw: f64,
    pub allocation_shifting_usd: f64,
    pub demand_reduction_usd: f64,
    pub wheeling_reduction_usd: f64,
    pub arbitrage_usd: f64,
    pub shifted_mwh: f64,
    pub eligible_days: usize,
}

/// Annual benefit totals with the per-month breakdown retained.
#[derive(Debug, Clone, PartialEq)]
pub struct BenefitReport {
    pub allocation_shifting_usd: f64,
    pub demand_reduction_usd: f64,
    pub wheeling_reduction_usd: f64,
    pub arbitrage_usd: f64,
    pub shifted_energy_mwh: f64,
    /// Meter-side energy discharged by arbitrage cycling, MWh; feeds the
    /// cost model's loss throughput.
    pub arbitrage_cycling_mwh: f64,
    pub per_month: Vec<MonthlyBenefit>,
    pub total_usd: f64,
}

impl BenefitReport {
    /// Assemble a report from stream components; the total is always the
    /// sum of the four streams.
    pub fn from_components(
        allocation_shifting_usd: f64,
        demand_reduction_usd: f64,
        wheeling_reduction_usd: f64,
        arbitrage_usd: f64,
        shifted_energy_mwh: f64,
        arbitrage_cycling_mwh: f64,
        per_month: Vec<MonthlyBenefit>,
    ) -> Self {
        BenefitReport {
            allocation_shifting_usd,
            demand_reduction_usd,
            wheeling_reduction_usd,
            arbitrage_usd,
            shifted_energy_mwh,
            arbitrage_cycling_mwh,
            per_month,
            total_usd: allocation_shifting_usd
                + demand_reduction_usd
                + wheeling_reduction_usd
                + arbitrage_usd,
        }
    }
}

fn check_aligned(
    load_year: &[MonthSlice],
    prices_year: &[MonthSlice],
) -> Result<(), BenefitsError> {
    if load_year.len() != prices_year.len() {
        return Err(BenefitsError::MisalignedYears {
            detail: format!(
                "{} load months vs {} price months",
                load_year.len(),
                prices_year.len()
            ),
        });
    }
    for (l, p) in load_year.iter().zip(prices_year) {
        if (l.year(), l.month()) != (p.year(), p.month()) {
            return Err(BenefitsError::MisalignedYears {
                detail: format!(
                    "load {}-{:02} vs prices {}-{:02}",
                    l.year(),
                    l.month(),
                    p.year(),
                    p.month()
                ),
            });
        }
    }
    Ok(())
}

/// The shave each month can sustain with this battery.
pub fn monthly_shaves(load_year: &[MonthSlice], bess: &BessSpec) -> Vec<f64> {
    load_year
        .iter()
        .map(|m| max_feasible_shave(m, bess))
        .collect()
}

/// Allocation-shifting outcome: annual totals plus `(usd, mwh)` per month.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftingOutcome {
    pub usd: f64,
    pub shifted_mwh: f64,
    pub per_month: Vec<(f64, f64)>,
}

/// Allocation-shifting savings: for months whose peak exceeds the
/// allocation, the drop in energy cost from billing the same hourly loads
/// at the shaved peak.
pub fn allocation_shifting_with_shaves(
    load_year: &[MonthSlice],
    prices_year: &[MonthSlice],
    tariff: &TariffSpec,
    shaves: &[f64],
) -> Result<ShiftingOutcome, BenefitsError> {
    check_aligned(load_year, prices_year)?;
    let mut usd_total = 0.0;
    let mut mwh_total = 0.0;
    let mut per_month = Vec::with_capacity(load_year.len());
    for ((load, prices), &shave) in load_year.iter().zip(prices_year).zip(shaves) {
        let peak = monthly_peak(load);
        if peak <= tariff.allocation_mw {
            per_month.push((0.0, 0.0));
            continue;
        }
        let baseline = bill_month(load, prices, tariff)?;
        let shaved = bill_month_at_peak(load, prices, tariff, peak - shave)?;
        let usd = baseline.energy_cost() - shaved.energy_cost();
        let mwh = shaved.firm_energy_mwh - baseline.firm_energy_mwh;
        usd_total += usd;
        mwh_total += mwh;
        per_month.push((usd, mwh));
    }
    Ok(ShiftingOutcome {
        usd: usd_total,
        shifted_mwh: mwh_total,
        per_month,
    })
}

/// See [`allocation_shifting_with_shaves`]; computes the feasible shave per
/// month from the battery spec. Returns `(usd, shifted_mwh)`.
pub fn allocation_shifting_benefit(
    load_year: &[MonthSlice],
    prices_year: &[MonthSlice],
    tariff: &TariffSpec,
    bess: &BessSpec,
) -> Result<(f64, f64), BenefitsError> {
    let shaves = monthly_shaves(load_year, bess);
    let outcome = allocation_shifting_with_shaves(load_year, prices_year, tariff, &shaves)?;
    Ok((outcome.usd, outcome.shifted_mwh))
}

/// Demand-charge savings from shaving, respecting the allocation cap on
/// both sides: months that stay above the allocation even after the shave
/// save nothing.
pub fn demand_reduction_with_shaves(
    load_year: &[MonthSlice],
    tariff: &TariffSpec,
    shaves: &[f64],
) -> (f64, Vec<f64>) {
    let rate = tariff.demand_rate_usd_per_kw_month * 1000.0;
    let mut per_month = Vec::with_capacity(load_year.len());
    let mut total = 0.0;
    for (load, &shave) in load_year.iter().zip(shaves) {
        let peak = monthly_peak(load);
        let shaved_peak = peak - shave;
        let usd = rate * (peak.min(tariff.allocation_mw) - shaved_peak.min(tariff.allocation_mw));
        total += usd;
        per_month.push(usd);
    }
    (total, per_month)
}

pub fn demand_reduction_benefit(
    load_year: &[MonthSlice],
    tariff: &TariffSpec,
    bess: &BessSpec,
) -> f64 {
    let shaves = monthly_shaves(load_year, bess);
    demand_reduction_with_shaves(load_year, tariff, &shaves).0
}

/// Savings on the demand-based wheeling component, which is uncapped by
/// the allocation: every shaved kW counts.
pub fn wheeling_reduction_with_shaves(tariff: &TariffSpec, shaves: &[f64]) -> (f64, Vec<f64>) {
    let rate = tariff.wheeling_demand_rate_usd_per_kw_month * 1000.0;
    let per_month: Vec<f64> = shaves.iter().map(|&s| rate * s).collect();
    (per_month.iter().sum(), per_month)
}

pub fn wheeling_reduction_benefit(
    load_year: &[MonthSlice],
    tariff: &TariffSpec,
    bess: &BessSpec,
) -> f64 {
    let shaves = monthly_shaves(load_year, bess);
    wheeling_reduction_with_shaves(tariff, &shaves).0
}

/// Days on which arbitrage can run without risking a new monthly peak:
/// the day's unshaved peak sits at least `margin_mw` below the month's
/// shaved target peak.
pub fn eligible_arbitrage_days(
    load_year: &[MonthSlice],
    shaves: &[f64],
    margin_mw: f64,
) -> Vec<NaiveDate> {
    let mut days = Vec::new();
    for (load, &shave) in load_year.iter().zip(shaves) {
        let target = monthly_peak(load) - shave;
        let mut daily_peak: BTreeMap<NaiveDate, f64> = BTreeMap::new();
        for p in load.points() {
            let entry = daily_peak.entry(p.timestamp.date()).or_insert(f64::MIN);
            *entry = entry.max(p.value);
        }
        for (date, peak) in daily_peak {
            if target - peak >= margin_mw {
                days.push(date);
            }
        }
    }
    days
}

/// Arbitrage valuation outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ArbitrageOutcome {
    pub usd: f64,
    /// Meter-side discharge from cycling, MWh.
    pub cycling_discharge_mwh: f64,
    /// Dollars attributed to each eligible day, in day order.
    pub per_day: Vec<(NaiveDate, f64)>,
}

/// Value the arbitrage stream over the eligible days.
pub fn arbitrage_benefit(
    day_ahead_prices: Option<&[MonthSlice]>,
    bess: &BessSpec,
    policy: &ArbitragePolicy,
    eligible_days: &[NaiveDate],
) -> Result<ArbitrageOutcome, BenefitsError> {
    match policy.mode {
        ArbitrageMode::ConservativeFlat => {
            let per_day: Vec<(NaiveDate, f64)> = eligible_days
                .iter()
                .map(|&d| (d, policy.flat_rate_usd_per_day_per_mw * bess.power_mw))
                .collect();
            Ok(ArbitrageOutcome {
                usd: per_day.iter().map(|(_, v)| v).sum(),
                // One hour of rated discharge per eligible day.
                cycling_discharge_mwh: bess.power_mw * eligible_days.len() as f64,
                per_day,
            })
        }
        ArbitrageMode::PriceBased => {
            let prices = day_ahead_prices.ok_or(BenefitsError::MissingDayAheadPrices)?;
            let mut by_day: BTreeMap<NaiveDate, (f64, f64)> = BTreeMap::new();
            for slice in prices {
                for p in slice.points() {
                    let entry = by_day
                        .entry(p.timestamp.date())
                        .or_insert((f64::MAX, f64::MIN));
                    entry.0 = entry.0.min(p.value);
                    entry.1 = entry.1.max(p.value);
                }
            }
            let energy = (bess.power_mw * 1.0).min(bess.usable_energy_mwh);
            let eta = bess.round_trip_efficiency;
            let mut per_day = Vec::with_capacity(eligible_days.len());
            let mut usd = 0.0;
            let mut cycling = 0.0;
            for &date in eligible_days {
                let (p_min, p_max) = by_day
                    .get(&date)
                    .copied()
                    .ok_or(BenefitsError::EmptyPriceDay { date })?;
                let profit = (energy * (p_max * eta - p_min)).max(0.0);
                if profit > 0.0 {
                    cycling += energy * eta;
                }
                usd += profit;
                per_day.push((date, profit));
            }
            Ok(ArbitrageOutcome {
                usd,
                cycling_discharge_mwh: cycling,
                per_day,
            })
        }
    }
}

/// All four streams for one battery over one year of months.
pub fn total_benefit(
    load_year: &[MonthSlice],
    prices_year: &[MonthSlice],
    day_ahead_prices: Option<&[MonthSlice]>,
    tariff: &TariffSpec,
    bess: &BessSpec,
    policy: &ArbitragePolicy,
) -> Result<BenefitReport, BenefitsError> {
    check_aligned(load_year, prices_year)?;
    let shaves = monthly_shaves(load_year, bess);
    let shifting = allocation_shifting_with_shaves(load_year, prices_year, tariff, &shaves)?;
    let (demand_usd, demand_by_month) = demand_reduction_with_shaves(load_year, tariff, &shaves);
    let (wheel_usd, wheel_by_month) = wheeling_reduction_with_shaves(tariff, &shaves);
    let days = eligible_arbitrage_days(load_year, &shaves, policy.margin_for(bess));
    let arbitrage = arbitrage_benefit(day_ahead_prices, bess, policy, &days)?;

    let mut arb_by_month: BTreeMap<(i32, u32), (f64, usize)> = BTreeMap::new();
    for (date, usd) in &arbitrage.per_day {
        let entry = arb_by_month.entry((date.year(), date.month())).or_default();
        entry.0 += usd;
        entry.1 += 1;
    }

    let per_month = load_year
        .iter()
        .enumerate()
        .map(|(i, load)| {
            let key = (load.year(), load.month());
            let (arb_usd, arb_days) = arb_by_month.get(&key).copied().unwrap_or((0.0, 0));
            MonthlyBenefit {
                year: load.year(),
                month: load.month(),
                applied_shave_mw: shaves[i],
                allocation_shifting_usd: shifting.per_month[i].0,
                demand_reduction_usd: demand_by_month[i],
                wheeling_reduction_usd: wheel_by_month[i],
                arbitrage_usd: arb_usd,
                shifted_mwh: shifting.per_month[i].1,
                eligible_days: arb_days,
            }
        })
        .collect();

    Ok(BenefitReport::from_components(
        shifting.usd,
        demand_usd,
        wheel_usd,
        arbitrage.usd,
        shifting.shifted_mwh,
        arbitrage.cycling_discharge_mwh,
        per_month,
    ))
}
