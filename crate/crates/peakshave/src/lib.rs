//! Simulation and benefit-cost engine for battery peak shaving at municipal
//! utilities billed under a firm-hydro allocation tariff.
//!
//! The pipeline: ingest hourly load and price series ([`timeseries`]), bill
//! each month under the allocation tariff ([`tariff`]), simulate peak-clamp
//! dispatch and size the storage ([`dispatch`]), quantify the benefit
//! streams ([`benefits`]), annualize system costs and find breakeven
//! ([`costmodel`]), and orchestrate a whole study with table emission
//! ([`scenario`], [`emit`], [`config`]).

pub mod benefits;
pub mod config;
pub mod costmodel;
pub mod dispatch;
pub mod emit;
pub mod scenario;
pub mod tariff;
pub mod timeseries;

pub use benefits::{ArbitragePolicy, BenefitReport};
pub use config::ScenarioConfig;
pub use costmodel::{TechnologyCatalog, TechnologyId};
pub use dispatch::{BessSpec, DispatchResult};
pub use scenario::{run_scenario, ScenarioReport};
pub use tariff::{MonthlyBill, TariffSpec};
pub use timeseries::{HourlySeries, MonthSlice, Unit};
