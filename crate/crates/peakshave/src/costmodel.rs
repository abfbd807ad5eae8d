//! Annualized storage cost model: annuity-due present-value annualization,
//! a five-technology cost catalog with install-year projection curves, and
//! breakeven determination against an annual benefit.
//!
//! The annualization uses the beginning-of-year (annuity-due) convention:
//! `pv * i / ((1 - (1+i)^-n) * (1+i))`. Maintenance is 1.5% of the capital
//! annuities, and conversion losses are valued per kWh of annual throughput.

use crate::dispatch::BessSpec;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;
use thiserror::Error;

/// Install years every catalog curve must cover.
pub const CURVE_DOMAIN: (i32, i32) = (2018, 2030);

#[derive(Debug, Error)]
pub enum CostError {
    #[error("install year {year} outside curve domain {min}..={max} for {tech}")]
    YearOutsideCurve {
        tech: TechnologyId,
        year: i32,
        min: i32,
        max: i32,
    },
    #[error("catalog row {row}: {message}")]
    CatalogRow { row: usize, message: String },
    #[error("technology {tech} has inconsistent `{field}` across catalog rows")]
    InconsistentTechnology {
        tech: TechnologyId,
        field: &'static str,
    },
    #[error("technology {tech} anchors cover {min}..={max}, need {want_min}..={want_max}")]
    InsufficientCoverage {
        tech: TechnologyId,
        min: i32,
        max: i32,
        want_min: i32,
        want_max: i32,
    },
    #[error("unknown technology `{0}`")]
    UnknownTechnology(String),
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("invalid cost inputs: {message}")]
    InvalidInputs { message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The five battery technologies carried by the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TechnologyId {
    Nmc,
    Lfp,
    NaS,
    Vrla,
    Fla,
}

impl TechnologyId {
    pub const ALL: [TechnologyId; 5] = [
        TechnologyId::Nmc,
        TechnologyId::Lfp,
        TechnologyId::NaS,
        TechnologyId::Vrla,
        TechnologyId::Fla,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TechnologyId::Nmc => "NMC",
            TechnologyId::Lfp => "LFP",
            TechnologyId::NaS => "NaS",
            TechnologyId::Vrla => "VRLA",
            TechnologyId::Fla => "FLA",
        }
    }
}

impl fmt::Display for TechnologyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TechnologyId {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NMC" => Ok(TechnologyId::Nmc),
            "LFP" => Ok(TechnologyId::Lfp),
            "NaS" => Ok(TechnologyId::NaS),
            "VRLA" => Ok(TechnologyId::Vrla),
            "FLA" => Ok(TechnologyId::Fla),
            other => Err(CostError::UnknownTechnology(other.to_string())),
        }
    }
}

/// One technology's parameters and cost projection curve. Costs are
/// piecewise-linear in the install year between the configured anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct Technology {
    pub id: TechnologyId,
    /// (year, $/kWh, $/kW), sorted by year.
    anchors: Vec<(i32, f64, f64)>,
    pub dod: f64,
    pub round_trip_efficiency: f64,
    pub service_life_years: u32,
}

impl Technology {
    fn interpolate(
        &self,
        install_year: i32,
        pick: impl Fn(&(i32, f64, f64)) -> f64,
    ) -> Result<f64, CostError> {
        let (min, max) = (self.anchors[0].0, self.anchors[self.anchors.len() - 1].0);
        if install_year < min || install_year > max {
            return Err(CostError::YearOutsideCurve {
                tech: self.id,
                year: install_year,
                min,
                max,
            });
        }
        let pos = self
            .anchors
            .iter()
            .position(|a| a.0 >= install_year)
            .expect("year bounded by anchors");
        let hi = &self.anchors[pos];
        if hi.0 == install_year {
            return Ok(pick(hi));
        }
        let lo = &self.anchors[pos - 1];
        let t = (install_year - lo.0) as f64 / (hi.0 - lo.0) as f64;
        Ok(pick(lo) + t * (pick(hi) - pick(lo)))
    }

    /// Energy-subsystem cost in $/kWh for the install year.
    pub fn energy_cost_usd_per_kwh(&self, install_year: i32) -> Result<f64, CostError> {
        self.interpolate(install_year, |a| a.1)
    }

    /// Power-conversion cost in $/kW for the install year.
    pub fn power_cost_usd_per_kw(&self, install_year: i32) -> Result<f64, CostError> {
        self.interpolate(install_year, |a| a.2)
    }
}

#[derive(Debug, Deserialize)]
struct CatalogRow {
    id: String,
    year: i32,
    usd_per_kwh: f64,
    usd_per_kw: f64,
    dod: f64,
    efficiency: f64,
    life_years: u32,
}

/// The technology catalog, loaded from CSV and immutable afterwards.
#[derive(Debug, Clone)]
pub struct TechnologyCatalog {
    techs: BTreeMap<TechnologyId, Technology>,
}

impl TechnologyCatalog {
    /// Parse a catalog CSV (`id,year,usd_per_kwh,usd_per_kw,dod,efficiency,
    /// life_years`; extra columns such as `provenance` are ignored). Every
    /// technology must carry consistent parameters across its rows and its
    /// anchors must span the 2018-2030 install-year domain.
    pub fn parse<R: Read>(reader: R) -> Result<Self, CostError> {
        let mut csv_reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let mut grouped: BTreeMap<TechnologyId, Vec<CatalogRow>> = BTreeMap::new();
        for (i, row) in csv_reader.deserialize::<CatalogRow>().enumerate() {
            let row_no = i + 1;
            let row = row.map_err(|e| CostError::CatalogRow {
                row: row_no,
                message: e.to_string(),
            })?;
            let id: TechnologyId = row.id.parse()?;
            if !(row.usd_per_kwh > 0.0 && row.usd_per_kw > 0.0) {
                return Err(CostError::CatalogRow {
                    row: row_no,
                    message: "cost values must be positive".to_string(),
                });
            }
            if !(row.dod > 0.0 && row.dod <= 1.0)
                || !(row.efficiency > 0.0 && row.efficiency <= 1.0)
            {
                return Err(CostError::CatalogRow {
                    row: row_no,
                    message: "dod and efficiency must be in (0, 1]".to_string(),
                });
            }
            if row.life_years < 1 {
                return Err(CostError::CatalogRow {
                    row: row_no,
                    message: "life_years must be >= 1".to_string(),
                });
            }
            grouped.entry(id).or_default().push(row);
        }
        if grouped.is_empty() {
            return Err(CostError::EmptyCatalog);
        }

        let mut techs = BTreeMap::new();
        for (id, mut rows) in grouped {
            rows.sort_by_key(|r| r.year);
            let first = &rows[0];
            let (dod, eff, life) = (first.dod, first.efficiency, first.life_years);
            for r in &rows {
                if r.dod != dod {
                    return Err(CostError::InconsistentTechnology {
                        tech: id,
                        field: "dod",
                    });
                }
                if r.efficiency != eff {
                    return Err(CostError::InconsistentTechnology {
                        tech: id,
                        field: "efficiency",
                    });
                }
                if r.life_years != life {
                    return Err(CostError::InconsistentTechnology {
                        tech: id,
                        field: "life_years",
                    });
                }
            }
            let anchors: Vec<(i32, f64, f64)> = rows
                .iter()
                .map(|r| (r.year, r.usd_per_kwh, r.usd_per_kw))
                .collect();
            for w in anchors.windows(2) {
                if w[1].0 == w[0].0 {
                    return Err(CostError::InconsistentTechnology {
                        tech: id,
                        field: "year (duplicate anchor)",
                    });
                }
            }
            let (min, max) = (anchors[0].0, anchors[anchors.len() - 1].0);
            if min > CURVE_DOMAIN.0 || max < CURVE_DOMAIN.1 {
                return Err(CostError::InsufficientCoverage {
                    tech: id,
                    min,
                    max,
                    want_min: CURVE_DOMAIN.0,
                    want_max: CURVE_DOMAIN.1,
                });
            }
            techs.insert(
                id,
                Technology {
                    id,
                    anchors,
                    dod,
                    round_trip_efficiency: eff,
                    service_life_years: life,
                },
            );
        }
        Ok(TechnologyCatalog { techs })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CostError> {
        Self::parse(std::fs::File::open(path)?)
    }

    pub fn get(&self, id: TechnologyId) -> Option<&Technology> {
        self.techs.get(&id)
    }

    /// Technologies in deterministic (id) order.
    pub fn technologies(&self) -> impl Iterator<Item = &Technology> {
        self.techs.values()
    }
}

/// Economic assumptions shared by every costing call.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct CostAssumptions {
    /// Annual interest rate.
    #[serde(default = "CostAssumptions::default_interest_rate")]
    pub interest_rate: f64,
    /// Maintenance as a fraction of the capital annuities.
    #[serde(default = "CostAssumptions::default_maintenance_fraction")]
    pub maintenance_fraction: f64,
    /// Fraction of throughput lost in conversion.
    #[serde(default = "CostAssumptions::default_loss_fraction")]
    pub loss_fraction: f64,
    /// Valuation of lost energy, $/kWh.
    #[serde(default = "CostAssumptions::default_loss_valuation")]
    pub loss_valuation_usd_per_kwh: f64,
}

impl CostAssumptions {
    fn default_interest_rate() -> f64 {
        0.03
    }

    fn default_maintenance_fraction() -> f64 {
        0.015
    }

    fn default_loss_fraction() -> f64 {
        0.02
    }

    fn default_loss_valuation() -> f64 {
        0.05
    }
}

impl Default for CostAssumptions {
    fn default() -> Self {
        CostAssumptions {
            interest_rate: Self::default_interest_rate(),
            maintenance_fraction: Self::default_maintenance_fraction(),
            loss_fraction: Self::default_loss_fraction(),
            loss_valuation_usd_per_kwh: Self::default_loss_valuation(),
        }
    }
}

/// Fully resolved inputs to one annual-cost evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CostInputs {
    /// Present value of the energy storage subsystem, $.
    pub pv_energy_usd: f64,
    /// Present value of the power conversion subsystem, $.
    pub pv_power_usd: f64,
    pub interest_rate: f64,
    pub life_years: u32,
    pub maintenance_fraction: f64,
    pub loss_fraction: f64,
    pub loss_valuation_usd_per_kwh: f64,
    pub annual_throughput_kwh: f64,
}

impl CostInputs {
    pub fn new(pv_energy_usd: f64, pv_power_usd: f64, life_years: u32) -> Self {
        let a = CostAssumptions::default();
        CostInputs {
            pv_energy_usd,
            pv_power_usd,
            interest_rate: a.interest_rate,
            life_years,
            maintenance_fraction: a.maintenance_fraction,
            loss_fraction: a.loss_fraction,
            loss_valuation_usd_per_kwh: a.loss_valuation_usd_per_kwh,
            annual_throughput_kwh: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        let ok = self.pv_energy_usd >= 0.0
            && self.pv_power_usd >= 0.0
            && self.interest_rate >= 0.0
            && self.life_years >= 1
            && (0.0..1.0).contains(&self.maintenance_fraction)
            && (0.0..1.0).contains(&self.loss_fraction)
            && self.loss_valuation_usd_per_kwh >= 0.0
            && self.annual_throughput_kwh >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(CostError::InvalidInputs {
                message: format!("{self:?}"),
            })
        }
    }
}

/// Annualized present value with beginning-of-year payments:
/// `pv * i / ((1 - (1+i)^-n) * (1+i))`, with the analytic `pv / n` limit at
/// zero interest.
pub fn pv_annual(pv: f64, interest_rate: f64, life_years: u32) -> f64 {
    debug_assert!(pv >= 0.0 && interest_rate >= 0.0 && life_years >= 1);
    let n = life_years as f64;
    if interest_rate == 0.0 {
        return pv / n;
    }
    let one_plus = 1.0 + interest_rate;
    pv * interest_rate / ((1.0 - one_plus.powf(-n)) * one_plus)
}

/// Annual cost with its component breakdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnualCost {
    /// Annualized energy storage subsystem cost.
    pub energy_annuity: f64,
    /// Annualized power conversion subsystem cost.
    pub power_annuity: f64,
    /// Maintenance, a fraction of the two annuities.
    pub maintenance: f64,
    /// Valued conversion losses on the year's throughput.
    pub loss: f64,
    pub total: f64,
}

/// Annual cost: the two capital annuities, maintenance on their sum, and
/// the valued conversion losses.
pub fn annual_cost(inputs: &CostInputs) -> AnnualCost {
    let energy_annuity = pv_annual(
        inputs.pv_energy_usd,
        inputs.interest_rate,
        inputs.life_years,
    );
    let power_annuity = pv_annual(inputs.pv_power_usd, inputs.interest_rate, inputs.life_years);
    let maintenance = inputs.maintenance_fraction * (energy_annuity + power_annuity);
    let loss =
        inputs.loss_fraction * inputs.annual_throughput_kwh * inputs.loss_valuation_usd_per_kwh;
    AnnualCost {
        energy_annuity,
        power_annuity,
        maintenance,
        loss,
        total: energy_annuity + power_annuity + maintenance + loss,
    }
}

/// Cost a battery installation for a given technology and install year.
///
/// The energy subsystem is priced on nameplate energy (usable energy over
/// the technology's depth of discharge); the power conversion system on the
/// recommended inverter rating (power plus the inverter margin).
pub fn size_to_cost(
    bess: &BessSpec,
    tech: &Technology,
    install_year: i32,
    annual_throughput_kwh: f64,
    assumptions: &CostAssumptions,
) -> Result<AnnualCost, CostError> {
    let nameplate_kwh = bess.usable_energy_mwh / tech.dod * 1000.0;
    let inverter_kw = crate::dispatch::recommend_inverter_rating(bess.power_mw, bess) * 1000.0;
    let inputs = CostInputs {
        pv_energy_usd: nameplate_kwh * tech.energy_cost_usd_per_kwh(install_year)?,
        pv_power_usd: inverter_kw * tech.power_cost_usd_per_kw(install_year)?,
        interest_rate: assumptions.interest_rate,
        life_years: tech.service_life_years,
        maintenance_fraction: assumptions.maintenance_fraction,
        loss_fraction: assumptions.loss_fraction,
        loss_valuation_usd_per_kwh: assumptions.loss_valuation_usd_per_kwh,
        annual_throughput_kwh,
    };
    inputs.validate()?;
    Ok(annual_cost(&inputs))
}

/// First install year in the range whose annual cost does not exceed the
/// annual benefit, or `None` if the installation never breaks even.
pub fn breakeven_year(
    annual_benefit_usd: f64,
    bess: &BessSpec,
    tech: &Technology,
    install_years: std::ops::RangeInclusive<i32>,
    annual_throughput_kwh: f64,
    assumptions: &CostAssumptions,
) -> Result<Option<i32>, CostError> {
    for year in install_years {
        let cost = size_to_cost(bess, tech, year, annual_throughput_kwh, assumptions)?;
        if cost.total <= annual_benefit_usd {
            return Ok(Some(year));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const CATALOG: &str = "\
id,year,usd_per_kwh,usd_per_kw,dod,efficiency,life_years
NaS,2018,247.6583,169.5955,0.9,0.80,15
NaS,2020,227.8456,156.0279,0.9,0.80,15
NaS,2025,177.7196,121.7018,0.9,0.80,15
NaS,2030,136.7074,93.6167,0.9,0.80,15
NMC,2018,470.0,180.0,0.9,0.92,10
NMC,2030,230.0,100.0,0.9,0.92,10
";

    fn catalog() -> TechnologyCatalog {
        TechnologyCatalog::parse(CATALOG.as_bytes()).unwrap()
    }

    #[test]
    fn pv_annual_collapses_to_pv_at_one_year() {
        // Annuity-due over a single year returns the present value.
        assert!((pv_annual(1000.0, 0.03, 1) - 1000.0).abs() < 0.005);
    }

    #[test]
    fn pv_annual_zero_interest_is_straight_line() {
        assert_eq!(pv_annual(1000.0, 0.0, 10), 100.0);
    }

    #[test]
    fn pv_annual_ten_year_case() {
        // Independently evaluated: 30 / ((1 - 1.03^-10) * 1.03).
        assert!((pv_annual(1000.0, 0.03, 10) - 113.816025830252).abs() < 1e-9);
        assert!((pv_annual(1000.0, 0.03, 10) - 113.82).abs() < 0.01);
    }

    #[test]
    fn pv_annual_continuous_at_zero_interest() {
        let near = pv_annual(1000.0, 1e-9, 10);
        assert!((near - 100.0).abs() < 1e-6 * 1000.0);
    }

    #[test]
    fn pv_annual_monotone_in_life_and_interest() {
        for n in 1..30u32 {
            assert!(pv_annual(1000.0, 0.03, n + 1) < pv_annual(1000.0, 0.03, n));
        }
        let mut prev = pv_annual(1000.0, 0.001, 10);
        for k in 1..50 {
            let i = 0.001 + k as f64 * 0.005;
            let v = pv_annual(1000.0, i, 10);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn annual_cost_zero_inputs_zero() {
        let inputs = CostInputs::new(0.0, 0.0, 1);
        assert_eq!(annual_cost(&inputs).total, 0.0);
    }

    #[test]
    fn annual_cost_breakdown_matches_hand_values() {
        // One-year, zero-interest inputs inject the annuities directly.
        let mut inputs = CostInputs::new(100.0, 50.0, 1);
        inputs.interest_rate = 0.0;
        let cost = annual_cost(&inputs);
        assert_eq!(cost.energy_annuity, 100.0);
        assert_eq!(cost.power_annuity, 50.0);
        assert_eq!(cost.maintenance, 2.25);
        assert_eq!(cost.loss, 0.0);
        assert_eq!(cost.total, 152.25);

        inputs.annual_throughput_kwh = 100_000.0;
        let cost = annual_cost(&inputs);
        assert_eq!(cost.loss, 100.0);
        assert_eq!(cost.total, 252.25);
    }

    #[test]
    fn annual_cost_linear_in_capital() {
        let a = annual_cost(&CostInputs::new(1000.0, 400.0, 12));
        let b = annual_cost(&CostInputs::new(2000.0, 800.0, 12));
        let capital_a = a.energy_annuity + a.power_annuity + a.maintenance;
        let capital_b = b.energy_annuity + b.power_annuity + b.maintenance;
        assert!((capital_b - 2.0 * capital_a).abs() <= 1e-9 * capital_b);
        let sum = a.energy_annuity + a.power_annuity + a.maintenance + a.loss;
        assert!((a.total - sum).abs() <= 1e-9 * sum.max(1.0));
    }

    #[test]
    fn size_to_cost_zero_battery_is_free() {
        let cat = catalog();
        let tech = cat.get(TechnologyId::NaS).unwrap();
        let bess = BessSpec::new(0.0, 0.0, "NaS");
        let cost = size_to_cost(&bess, tech, 2020, 0.0, &CostAssumptions::default()).unwrap();
        assert_eq!(cost.total, 0.0);
    }

    #[test]
    fn nas_2020_reproduces_calibrated_system_costs() {
        let cat = catalog();
        let tech = cat.get(TechnologyId::NaS).unwrap();
        // 0.5 MW / 0.75 MWh unit.
        let small = BessSpec::new(0.5, 0.75, "NaS");
        let cost = size_to_cost(&small, tech, 2020, 0.0, &CostAssumptions::default()).unwrap();
        assert!((cost.total - 23_401.0).abs() < 1.0, "got {}", cost.total);
        // 1.0 MW / 4.5 MWh unit.
        let large = BessSpec::new(1.0, 4.5, "NaS");
        let cost = size_to_cost(&large, tech, 2020, 0.0, &CostAssumptions::default()).unwrap();
        assert!((cost.total - 109_495.0).abs() < 1.0, "got {}", cost.total);
    }

    #[test]
    fn curve_interpolates_between_anchors_and_rejects_outside() {
        let cat = catalog();
        let tech = cat.get(TechnologyId::NaS).unwrap();
        let e2018 = tech.energy_cost_usd_per_kwh(2018).unwrap();
        let e2019 = tech.energy_cost_usd_per_kwh(2019).unwrap();
        let e2020 = tech.energy_cost_usd_per_kwh(2020).unwrap();
        assert_abs_diff_eq!(e2019, 0.5 * (e2018 + e2020), epsilon = 1e-9);
        assert!(matches!(
            tech.energy_cost_usd_per_kwh(2031),
            Err(CostError::YearOutsideCurve { .. })
        ));
    }

    #[test]
    fn breakeven_cases() {
        let cat = catalog();
        let tech = cat.get(TechnologyId::NaS).unwrap();
        let bess = BessSpec::new(0.5, 0.75, "NaS");
        let assumptions = CostAssumptions::default();
        // Zero benefit never breaks even against positive costs.
        assert_eq!(
            breakeven_year(0.0, &bess, tech, 2018..=2030, 0.0, &assumptions).unwrap(),
            None
        );
        // The calibrated small unit breaks even at or before 2020.
        let year = breakeven_year(36_247.0, &bess, tech, 2018..=2030, 0.0, &assumptions)
            .unwrap()
            .expect("should break even");
        assert!(year <= 2020);
        // Monotone in the benefit: more benefit never delays breakeven.
        let mut prev: Option<i32> = None;
        for benefit in [0.0, 10_000.0, 20_000.0, 25_000.0, 40_000.0] {
            let y = breakeven_year(benefit, &bess, tech, 2018..=2030, 0.0, &assumptions).unwrap();
            if let (Some(p), Some(c)) = (prev, y) {
                assert!(c <= p);
            }
            if prev.is_some() {
                assert!(y.is_some());
            }
            if y.is_some() {
                prev = y;
            }
        }
    }

    #[test]
    fn catalog_validation_errors() {
        let bad_dod = "id,year,usd_per_kwh,usd_per_kw,dod,efficiency,life_years\nNaS,2018,100,50,1.5,0.8,15\n";
        assert!(matches!(
            TechnologyCatalog::parse(bad_dod.as_bytes()),
            Err(CostError::CatalogRow { row: 1, .. })
        ));

        let inconsistent = "id,year,usd_per_kwh,usd_per_kw,dod,efficiency,life_years\n\
                            NaS,2018,100,50,0.9,0.8,15\nNaS,2030,90,45,0.8,0.8,15\n";
        assert!(matches!(
            TechnologyCatalog::parse(inconsistent.as_bytes()),
            Err(CostError::InconsistentTechnology { field: "dod", .. })
        ));

        let short = "id,year,usd_per_kwh,usd_per_kw,dod,efficiency,life_years\n\
                     NaS,2019,100,50,0.9,0.8,15\nNaS,2030,90,45,0.9,0.8,15\n";
        assert!(matches!(
            TechnologyCatalog::parse(short.as_bytes()),
            Err(CostError::InsufficientCoverage { .. })
        ));

        assert!(matches!(
            TechnologyCatalog::parse(
                "id,year,usd_per_kwh,usd_per_kw,dod,efficiency,life_years\n".as_bytes()
            ),
            Err(CostError::EmptyCatalog)
        ));
    }
}
