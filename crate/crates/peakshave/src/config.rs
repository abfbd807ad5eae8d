//! Scenario configuration: a single TOML file naming the input series, the
//! tariff, the candidate batteries, and the economic assumptions. Every key
//! either has a documented default or is required; nothing is read from the
//! environment.

use crate::benefits::ArbitragePolicy;
use crate::costmodel::CostAssumptions;
use crate::dispatch::BessSpec;
use crate::tariff::TariffSpec;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("config: {message}")]
    Invalid { message: String },
    #[error("config references missing file: {path}")]
    MissingFile { path: PathBuf },
}

/// How conversion losses are valued in the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossValuationMode {
    /// Fixed $/kWh.
    Flat,
    /// Mean of the scenario's day-ahead hourly prices.
    DayAheadAverage,
}

/// Economic assumptions section, all defaulted.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default)]
pub struct CostSection {
    pub interest_rate: f64,
    pub maintenance_fraction: f64,
    pub loss_fraction: f64,
    pub loss_valuation: LossValuationMode,
    pub loss_valuation_usd_per_kwh: f64,
}

impl Default for CostSection {
    fn default() -> Self {
        let a = CostAssumptions::default();
        CostSection {
            interest_rate: a.interest_rate,
            maintenance_fraction: a.maintenance_fraction,
            loss_fraction: a.loss_fraction,
            loss_valuation: LossValuationMode::Flat,
            loss_valuation_usd_per_kwh: a.loss_valuation_usd_per_kwh,
        }
    }
}

impl CostSection {
    /// Resolve to concrete assumptions; `day_ahead_mean_usd_per_mwh` is
    /// required when the day-ahead valuation mode is selected.
    pub fn assumptions(&self, day_ahead_mean_usd_per_mwh: Option<f64>) -> CostAssumptions {
        let valuation = match self.loss_valuation {
            LossValuationMode::Flat => self.loss_valuation_usd_per_kwh,
            LossValuationMode::DayAheadAverage => {
                day_ahead_mean_usd_per_mwh.expect("day-ahead mean required") / 1000.0
            }
        };
        CostAssumptions {
            interest_rate: self.interest_rate,
            maintenance_fraction: self.maintenance_fraction,
            loss_fraction: self.loss_fraction,
            loss_valuation_usd_per_kwh: valuation,
        }
    }
}

/// Install-year range for the cost projection, defaulting to 2018-2030.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(default)]
pub struct InstallYears {
    pub start: i32,
    pub end: i32,
}

impl Default for InstallYears {
    fn default() -> Self {
        InstallYears {
            start: 2018,
            end: 2030,
        }
    }
}

impl InstallYears {
    pub fn range(&self) -> std::ops::RangeInclusive<i32> {
        self.start..=self.end
    }
}

/// One battery candidate. Depth of discharge defaults to the catalog value
/// for the named technology; the simulation efficiency defaults to 1.0
/// (losses are carried by the cost model).
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CandidateConfig {
    pub name: Option<String>,
    pub power_mw: f64,
    pub usable_energy_mwh: f64,
    pub technology: String,
    pub dod: Option<f64>,
    pub round_trip_efficiency: Option<f64>,
    pub inverter_margin: Option<f64>,
}

impl CandidateConfig {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            format!(
                "{:.1}MW-{:.2}MWh-{}",
                self.power_mw, self.usable_energy_mwh, self.technology
            )
        })
    }

    /// Build the battery spec, filling the depth of discharge from the
    /// catalog when not given explicitly.
    pub fn to_bess(&self, catalog_dod: f64) -> BessSpec {
        let mut bess = BessSpec::new(self.power_mw, self.usable_energy_mwh, &self.technology);
        bess.dod = self.dod.unwrap_or(catalog_dod);
        if let Some(eta) = self.round_trip_efficiency {
            bess.round_trip_efficiency = eta;
        }
        if let Some(margin) = self.inverter_margin {
            bess.inverter_margin = margin;
        }
        bess
    }
}

/// A full scenario: inputs, tariff, candidates, and assumptions.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ScenarioConfig {
    pub utility: String,
    pub load_csv: PathBuf,
    pub realtime_price_csv: PathBuf,
    pub day_ahead_price_csv: Option<PathBuf>,
    pub catalog_csv: PathBuf,
    #[serde(default = "ScenarioConfig::default_output_dir")]
    pub output_dir: PathBuf,
    pub tariff: TariffSpec,
    #[serde(default)]
    pub arbitrage: ArbitragePolicy,
    #[serde(default)]
    pub costs: CostSection,
    #[serde(default)]
    pub install_years: InstallYears,
    #[serde(default, rename = "candidate")]
    pub candidates: Vec<CandidateConfig>,
}

impl ScenarioConfig {
    fn default_output_dir() -> PathBuf {
        PathBuf::from("out")
    }

    /// Load and validate a config file. Relative paths inside the file are
    /// resolved against the file's own directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: ScenarioConfig =
            toml::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.load_csv = resolve(base, &config.load_csv);
        config.realtime_price_csv = resolve(base, &config.realtime_price_csv);
        config.day_ahead_price_csv = config
            .day_ahead_price_csv
            .as_ref()
            .map(|p| resolve(base, p));
        config.catalog_csv = resolve(base, &config.catalog_csv);
        config.output_dir = resolve(base, &config.output_dir);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.candidates.is_empty() {
            return Err(ConfigError::Invalid {
                message: "at least one [[candidate]] is required".to_string(),
            });
        }
        self.tariff.validate().map_err(|e| ConfigError::Invalid {
            message: e.to_string(),
        })?;
        for c in &self.candidates {
            let probe = c.to_bess(c.dod.unwrap_or(1.0));
            probe.validate().map_err(|e| ConfigError::Invalid {
                message: format!("candidate `{}`: {e}", c.display_name()),
            })?;
        }
        if self.install_years.start > self.install_years.end {
            return Err(ConfigError::Invalid {
                message: format!(
                    "install_years start {} after end {}",
                    self.install_years.start, self.install_years.end
                ),
            });
        }
        let flat_rate = self.arbitrage.flat_rate_usd_per_day_per_mw;
        if flat_rate.is_nan() || flat_rate < 0.0 {
            return Err(ConfigError::Invalid {
                message: "arbitrage.flat_rate_usd_per_day_per_mw must be >= 0".to_string(),
            });
        }
        if self.costs.loss_valuation == LossValuationMode::DayAheadAverage
            && self.day_ahead_price_csv.is_none()
        {
            return Err(ConfigError::Invalid {
                message: "loss_valuation = day_ahead_average requires day_ahead_price_csv"
                    .to_string(),
            });
        }
        for path in [&self.load_csv, &self.realtime_price_csv, &self.catalog_csv]
            .into_iter()
            .chain(self.day_ahead_price_csv.as_ref())
        {
            if !path.is_file() {
                return Err(ConfigError::MissingFile { path: path.clone() });
            }
        }
        Ok(())
    }
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &Path, name: &str, contents: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    fn minimal_inputs(dir: &Path) {
        write_file(dir, "load.csv", "timestamp,load_mw\n2018-01-01T00:00,1.0\n");
        write_file(
            dir,
            "prices.csv",
            "timestamp,price_usd_per_mwh\n2018-01-01T00:00,30.0\n",
        );
        write_file(
            dir,
            "catalog.csv",
            "id,year,usd_per_kwh,usd_per_kw,dod,efficiency,life_years\nNaS,2018,100,50,0.9,0.8,15\nNaS,2030,60,30,0.9,0.8,15\n",
        );
    }

    const MINIMAL: &str = r#"
utility = "Test MED"
load_csv = "load.csv"
realtime_price_csv = "prices.csv"
catalog_csv = "catalog.csv"

[tariff]
allocation_mw = 18.845

[[candidate]]
power_mw = 0.5
usable_energy_mwh = 0.83
technology = "NaS"
"#;

    #[test]
    fn minimal_config_gets_documented_defaults() {
        let dir = tempfile::tempdir().unwrap();
        minimal_inputs(dir.path());
        let path = write_file(dir.path(), "scenario.toml", MINIMAL);
        let config = ScenarioConfig::load(&path).unwrap();
        assert_eq!(config.tariff.firm_energy_rate_usd_per_mwh, 4.92);
        assert_eq!(config.tariff.demand_rate_usd_per_kw_month, 4.07);
        assert_eq!(config.tariff.wheeling_demand_rate_usd_per_kw_month, 0.0);
        assert_eq!(config.arbitrage.flat_rate_usd_per_day_per_mw, 25.0);
        assert_eq!(config.costs.interest_rate, 0.03);
        assert_eq!(
            config.install_years,
            InstallYears {
                start: 2018,
                end: 2030
            }
        );
        assert!(config.load_csv.is_absolute() || config.load_csv.starts_with(dir.path()));
    }

    #[test]
    fn empty_candidate_list_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        minimal_inputs(dir.path());
        let no_candidates = MINIMAL
            .replace("[[candidate]]", "[[ignored]]")
            .replace("power_mw = 0.5", "x = 0.5")
            .replace("usable_energy_mwh = 0.83", "y = 0.83")
            .replace("technology = \"NaS\"", "z = \"NaS\"");
        let path = write_file(dir.path(), "scenario.toml", &no_candidates);
        let err = ScenarioConfig::load(&path).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { .. }), "{err}");
    }

    #[test]
    fn missing_referenced_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        minimal_inputs(dir.path());
        std::fs::remove_file(dir.path().join("prices.csv")).unwrap();
        let path = write_file(dir.path(), "scenario.toml", MINIMAL);
        assert!(matches!(
            ScenarioConfig::load(&path),
            Err(ConfigError::MissingFile { .. })
        ));
    }

    #[test]
    fn day_ahead_valuation_requires_day_ahead_file() {
        let dir = tempfile::tempdir().unwrap();
        minimal_inputs(dir.path());
        let with_mode = format!("{MINIMAL}\n[costs]\nloss_valuation = \"day_ahead_average\"\n");
        let path = write_file(dir.path(), "scenario.toml", &with_mode);
        assert!(matches!(
            ScenarioConfig::load(&path),
            Err(ConfigError::Invalid { .. })
        ));
    }
}
