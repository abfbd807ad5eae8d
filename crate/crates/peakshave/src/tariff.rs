//! Firm-hydro allocation tariff: load-share split, energy charges, the
//! allocation-capped demand charge, and the demand-based wheeling component.
//!
//! In a month whose peak stays within the allocation, every MWh is billed at
//! the firm rate. Once the peak exceeds the allocation, only the firm load
//! share (allocation / monthly peak) of each hour's energy is billed firm;
//! the remainder is bought at the hourly market price. Lowering the peak
//! therefore shifts market energy onto the firm rate, which is the economic
//! engine the dispatch and benefit modules drive.

use crate::timeseries::MonthSlice;
use serde::Deserialize;
use thiserror::Error;

/// Rates and the firm hydro allocation for one utility.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TariffSpec {
    /// Firm hydro allocation in MW.
    pub allocation_mw: f64,
    /// Firm hydro energy rate in $/MWh.
    #[serde(default = "TariffSpec::default_firm_energy_rate")]
    pub firm_energy_rate_usd_per_mwh: f64,
    /// Demand charge in $/kW-month, applied up to the allocation.
    #[serde(default = "TariffSpec::default_demand_rate")]
    pub demand_rate_usd_per_kw_month: f64,
    /// Demand-based wheeling charge in $/kW-month, uncapped. Zero for
    /// utilities whose wheeling is billed per kWh only.
    #[serde(default)]
    pub wheeling_demand_rate_usd_per_kw_month: f64,
}

impl TariffSpec {
    fn default_firm_energy_rate() -> f64 {
        4.92
    }

    fn default_demand_rate() -> f64 {
        4.07
    }

    pub fn new(allocation_mw: f64) -> Self {
        TariffSpec {
            allocation_mw,
            firm_energy_rate_usd_per_mwh: Self::default_firm_energy_rate(),
            demand_rate_usd_per_kw_month: Self::default_demand_rate(),
            wheeling_demand_rate_usd_per_kw_month: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), TariffError> {
        if self.allocation_mw.is_nan() || self.allocation_mw <= 0.0 {
            return Err(TariffError::InvalidSpec {
                message: format!("allocation_mw must be > 0, got {}", self.allocation_mw),
            });
        }
        for (name, v) in [
            (
                "firm_energy_rate_usd_per_mwh",
                self.firm_energy_rate_usd_per_mwh,
            ),
            (
                "demand_rate_usd_per_kw_month",
                self.demand_rate_usd_per_kw_month,
            ),
            (
                "wheeling_demand_rate_usd_per_kw_month",
                self.wheeling_demand_rate_usd_per_kw_month,
            ),
        ] {
            if v.is_nan() || v < 0.0 {
                return Err(TariffError::InvalidSpec {
                    message: format!("{name} must be >= 0, got {v}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TariffError {
    #[error("invalid tariff: {message}")]
    InvalidSpec { message: String },
    #[error(
        "misaligned series: load covers {load_year}-{load_month:02}, \
         prices cover {price_year}-{price_month:02}"
    )]
    MisalignedSeries {
        load_year: i32,
        load_month: u32,
        price_year: i32,
        price_month: u32,
    },
}

/// Hour-by-hour firm/market split of one month's energy, tagged with the
/// month it was computed from so costing can check price alignment.
#[derive(Debug, Clone)]
pub struct EnergySplit {
    year: i32,
    month: u32,
    pub firm_mwh: Vec<f64>,
    pub market_mwh: Vec<f64>,
}

impl EnergySplit {
    pub fn firm_total(&self) -> f64 {
        self.firm_mwh.iter().sum()
    }

    pub fn market_total(&self) -> f64 {
        self.market_mwh.iter().sum()
    }
}

/// One month's bill under the allocation tariff.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyBill {
    pub year: i32,
    pub month: u32,
    pub peak_mw: f64,
    pub firm_share: f64,
    pub firm_energy_mwh: f64,
    pub market_energy_mwh: f64,
    pub firm_energy_cost: f64,
    pub market_energy_cost: f64,
    pub demand_charge: f64,
    pub wheeling_demand_charge: f64,
    pub total: f64,
}

impl MonthlyBill {
    /// Energy charges only (firm plus market), excluding demand components.
    pub fn energy_cost(&self) -> f64 {
        self.firm_energy_cost + self.market_energy_cost
    }
}

/// Maximum hourly demand of the month in MW.
pub fn monthly_peak(load: &MonthSlice) -> f64 {
    load.peak()
}

/// Fraction of each hour's energy billed at the firm rate: the allocation
/// over the monthly peak, capped at 1. A zero peak is fully firm.
pub fn firm_load_share(peak_mw: f64, allocation_mw: f64) -> f64 {
    debug_assert!(allocation_mw > 0.0 && peak_mw >= 0.0);
    if peak_mw <= allocation_mw {
        1.0
    } else {
        allocation_mw / peak_mw
    }
}

/// Split each hour's energy into firm and market portions at the given
/// share. Market energy is the exact remainder, so firm + market equals the
/// hour's load without rounding drift.
pub fn split_energy(load: &MonthSlice, share: f64) -> EnergySplit {
    debug_assert!(share > 0.0 && share <= 1.0);
    let mut firm = Vec::with_capacity(load.len());
    let mut market = Vec::with_capacity(load.len());
    for v in load.values() {
        let f = v * share;
        firm.push(f);
        market.push(v - f);
    }
    EnergySplit {
        year: load.year(),
        month: load.month(),
        firm_mwh: firm,
        market_mwh: market,
    }
}

/// Cost the split: firm energy at the flat firm rate, market energy at the
/// aligned hourly prices. Returns `(firm_cost, market_cost)`.
pub fn energy_cost(
    split: &EnergySplit,
    prices: &MonthSlice,
    firm_rate_usd_per_mwh: f64,
) -> Result<(f64, f64), TariffError> {
    if (prices.year(), prices.month()) != (split.year, split.month)
        || prices.len() != split.market_mwh.len()
    {
        return Err(TariffError::MisalignedSeries {
            load_year: split.year,
            load_month: split.month,
            price_year: prices.year(),
            price_month: prices.month(),
        });
    }
    let firm_cost = firm_rate_usd_per_mwh * split.firm_total();
    let market_cost = split
        .market_mwh
        .iter()
        .zip(prices.values())
        .map(|(&mwh, price)| mwh * price)
        .sum();
    Ok((firm_cost, market_cost))
}

/// Monthly demand charge: $/kW-month on the peak, capped at the allocation.
/// Demand above the allocation incurs no additional charge.
pub fn demand_charge(peak_mw: f64, spec: &TariffSpec) -> f64 {
    spec.demand_rate_usd_per_kw_month * 1000.0 * peak_mw.min(spec.allocation_mw)
}

/// Demand-based wheeling charge on the full peak, uncapped.
pub fn wheeling_demand_charge(peak_mw: f64, spec: &TariffSpec) -> f64 {
    spec.wheeling_demand_rate_usd_per_kw_month * 1000.0 * peak_mw
}

/// Bill one month of load against aligned hourly prices.
pub fn bill_month(
    load: &MonthSlice,
    prices: &MonthSlice,
    spec: &TariffSpec,
) -> Result<MonthlyBill, TariffError> {
    bill_month_at_peak(load, prices, spec, monthly_peak(load))
}

/// Bill the same hourly loads as if the monthly peak were `billing_peak_mw`.
///
/// This is the allocation-shifting engine: a storage installation that
/// clamps the peak raises the firm load share for every hour of the month,
/// while the hourly energy itself is essentially unchanged. Billing at a
/// reduced peak keeps firm + market exactly equal to the metered energy, so
/// the firm increase from a shave matches the market decrease to the MWh.
pub fn bill_month_at_peak(
    load: &MonthSlice,
    prices: &MonthSlice,
    spec: &TariffSpec,
    billing_peak_mw: f64,
) -> Result<MonthlyBill, TariffError> {
    spec.validate()?;
    let share = firm_load_share(billing_peak_mw, spec.allocation_mw);
    let split = split_energy(load, share);
    let (firm_energy_cost, market_energy_cost) =
        energy_cost(&split, prices, spec.firm_energy_rate_usd_per_mwh)?;
    let demand = demand_charge(billing_peak_mw, spec);
    let wheeling = wheeling_demand_charge(billing_peak_mw, spec);
    Ok(MonthlyBill {
        year: load.year(),
        month: load.month(),
        peak_mw: billing_peak_mw,
        firm_share: share,
        firm_energy_mwh: split.firm_total(),
        market_energy_mwh: split.market_total(),
        firm_energy_cost,
        market_energy_cost,
        demand_charge: demand,
        wheeling_demand_charge: wheeling,
        total: firm_energy_cost + market_energy_cost + demand + wheeling,
    })
}
