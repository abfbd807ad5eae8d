//! End-to-end scenario pipeline checks against a hand-computed oracle on a
//! three-month toy fixture, plus emission format equivalence, table
//! reconciliation, and CLI exit codes.

use peakshave::config::ScenarioConfig;
use peakshave::emit::{emit_tables, EmitFormat};
use peakshave::scenario::run_scenario;
use peakshave::timeseries::hours_in_month;
use std::fs;
use std::path::{Path, PathBuf};

const ALLOCATION: f64 = 18.0;
const FIRM_RATE: f64 = 4.92;
const DEMAND_RATE: f64 = 4.07;
const WHEELING_RATE: f64 = 1.5;

/// (base load, spike, spike hour, flat price) per month.
const MONTHS: [(u32, f64, f64, usize, f64); 3] = [
    (1, 10.0, 22.0, 420, 30.0),
    (2, 9.0, 16.0, 300, 25.0),
    (3, 8.0, 12.0, 500, 20.0),
];

fn write_toy_fixture(dir: &Path) -> PathBuf {
    let mut load = String::from("timestamp,load_mw\n");
    let mut prices = String::from("timestamp,price_usd_per_mwh\n");
    for &(month, base, spike, spike_hour, price) in &MONTHS {
        let hours = hours_in_month(2018, month).unwrap();
        for h in 0..hours {
            let day = h / 24 + 1;
            let hod = h % 24;
            let value = if h == spike_hour { spike } else { base };
            load.push_str(&format!("2018-{month:02}-{day:02}T{hod:02}:00,{value}\n"));
            prices.push_str(&format!("2018-{month:02}-{day:02}T{hod:02}:00,{price}\n"));
        }
    }
    fs::write(dir.join("load.csv"), load).unwrap();
    fs::write(dir.join("prices.csv"), prices).unwrap();

    let catalog_src = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/catalog.csv");
    fs::copy(catalog_src, dir.join("catalog.csv")).unwrap();

    let config = format!(
        r#"
utility = "Toyville MED"
load_csv = "load.csv"
realtime_price_csv = "prices.csv"
catalog_csv = "catalog.csv"

[tariff]
allocation_mw = {ALLOCATION}
firm_energy_rate_usd_per_mwh = {FIRM_RATE}
demand_rate_usd_per_kw_month = {DEMAND_RATE}
wheeling_demand_rate_usd_per_kw_month = {WHEELING_RATE}

[[candidate]]
name = "A"
power_mw = 0.5
usable_energy_mwh = 1.0
technology = "NaS"

[[candidate]]
name = "B"
power_mw = 1.0
usable_energy_mwh = 2.0
technology = "NaS"
"#
    );
    let path = dir.join("scenario.toml");
    fs::write(&path, config).unwrap();
    path
}

fn rel_close(actual: f64, expected: f64, context: &str) {
    let tolerance = 1e-9 * expected.abs().max(1.0);
    assert!(
        (actual - expected).abs() <= tolerance,
        "{context}: {actual} vs expected {expected}"
    );
}

#[test]
fn toy_scenario_matches_spreadsheet_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_toy_fixture(dir.path());
    let config = ScenarioConfig::load(&config_path).unwrap();
    let report = run_scenario(&config).unwrap();

    assert_eq!(report.candidates.len(), 2);
    assert_eq!(report.candidates[0].name, "A");
    assert_eq!(report.candidates[1].name, "B");
    let a = &report.candidates[0];

    // Spreadsheet oracle for candidate A (0.5 MW, ample energy for the
    // one-hour spikes). Recomputed here from first principles.
    let shave = 0.5;
    let mut oracle_alloc = 0.0;
    let mut oracle_shifted = 0.0;
    let mut oracle_demand = 0.0;
    let mut oracle_wheeling = 0.0;
    let mut oracle_days = 0usize;

    for (i, &(month, base, spike, _, price)) in MONTHS.iter().enumerate() {
        let hours = hours_in_month(2018, month).unwrap() as f64;
        let days = hours / 24.0;
        let total = (hours - 1.0) * base + spike;
        let peak = spike;

        // Baseline bill oracle.
        let share = (ALLOCATION / peak).min(1.0);
        let firm = total * share;
        let market = total - firm;
        let firm_cost = FIRM_RATE * firm;
        let market_cost = price * market;
        let demand = DEMAND_RATE * 1000.0 * peak.min(ALLOCATION);
        let wheeling = WHEELING_RATE * 1000.0 * peak;

        let bill = &a.months[i].baseline;
        rel_close(bill.peak_mw, peak, "baseline peak");
        rel_close(bill.firm_share, share, "baseline share");
        rel_close(bill.firm_energy_mwh, firm, "baseline firm MWh");
        rel_close(bill.market_energy_mwh, market, "baseline market MWh");
        rel_close(bill.firm_energy_cost, firm_cost, "baseline firm cost");
        rel_close(bill.market_energy_cost, market_cost, "baseline market cost");
        rel_close(bill.demand_charge, demand, "baseline demand");
        rel_close(bill.wheeling_demand_charge, wheeling, "baseline wheeling");
        rel_close(
            bill.total,
            firm_cost + market_cost + demand + wheeling,
            "baseline total",
        );

        // Shaved bill oracle at peak - 0.5.
        let shaved_peak = peak - shave;
        let share2 = (ALLOCATION / shaved_peak).min(1.0);
        let firm2 = total * share2;
        let market2 = total - firm2;
        let shaved = &a.months[i].shaved;
        rel_close(shaved.peak_mw, shaved_peak, "shaved peak");
        rel_close(shaved.firm_energy_mwh, firm2, "shaved firm MWh");
        rel_close(
            shaved.demand_charge,
            DEMAND_RATE * 1000.0 * shaved_peak.min(ALLOCATION),
            "shaved demand",
        );
        rel_close(a.months[i].applied_shave_mw, shave, "applied shave");

        // A shave moves energy between the firm and market buckets without
        // creating or destroying any.
        let firm_gain = shaved.firm_energy_mwh - bill.firm_energy_mwh;
        let market_drop = bill.market_energy_mwh - shaved.market_energy_mwh;
        assert!(
            (firm_gain - market_drop).abs() <= 1e-9 * total,
            "shift not conservative: +{firm_gain} vs -{market_drop}"
        );

        oracle_alloc += (firm_cost + market_cost) - (FIRM_RATE * firm2 + price * market2);
        oracle_shifted += firm2 - firm;
        oracle_demand +=
            DEMAND_RATE * 1000.0 * (peak.min(ALLOCATION) - shaved_peak.min(ALLOCATION));
        oracle_wheeling += WHEELING_RATE * 1000.0 * shave;

        // Eligible arbitrage days: every day except the spike day, whose
        // peak sits above target - margin.
        let target = peak - shave;
        if target - base >= shave {
            oracle_days += days as usize - 1;
        }

        // Single one-hour spike: required energy equals the shave.
        rel_close(a.required_energy_rows[i].required_mwh, shave, "required");
        rel_close(
            a.feasible_shave_rows[i].feasible_shave_mw,
            shave,
            "feasible",
        );
    }

    let oracle_arbitrage = 25.0 * 0.5 * oracle_days as f64;
    rel_close(
        a.benefits.allocation_shifting_usd,
        oracle_alloc,
        "allocation stream",
    );
    rel_close(a.benefits.shifted_energy_mwh, oracle_shifted, "shifted MWh");
    rel_close(
        a.benefits.demand_reduction_usd,
        oracle_demand,
        "demand stream",
    );
    rel_close(
        a.benefits.wheeling_reduction_usd,
        oracle_wheeling,
        "wheeling stream",
    );
    rel_close(
        a.benefits.arbitrage_usd,
        oracle_arbitrage,
        "arbitrage stream",
    );
    rel_close(
        a.benefits.total_usd,
        oracle_alloc + oracle_demand + oracle_wheeling + oracle_arbitrage,
        "total benefit",
    );

    // Throughput: one 0.5 MWh discharge per month plus one hour of rated
    // cycling per eligible day.
    let oracle_throughput = (3.0 * shave + 0.5 * oracle_days as f64) * 1000.0;
    rel_close(a.annual_throughput_kwh, oracle_throughput, "throughput");

    // Shifting table: only January exceeds the allocation; its shaved row
    // reconciles with the benefit report.
    assert_eq!(a.shifting_rows.len(), 2);
    assert_eq!(a.shifting_rows[0].shave_mw, 0.0);
    rel_close(a.shifting_rows[1].shave_mw, shave, "shifting shave");
    rel_close(
        a.shifting_rows[1].benefit_mwh,
        a.benefits.shifted_energy_mwh,
        "cross-table shifted MWh",
    );

    // Cost rows: every catalog technology for every install year, and the
    // NaS 2020 row matches an independent annuity computation.
    assert_eq!(a.costs.len(), 5 * 13);
    let annuity = |pv: f64| pv * 0.03 / ((1.0 - 1.03_f64.powi(-15)) * 1.03);
    let nas_2020 = a
        .costs
        .iter()
        .find(|r| r.technology == peakshave::TechnologyId::NaS && r.install_year == 2020)
        .unwrap();
    let energy_annuity = annuity(1.0 / 0.9 * 1000.0 * 227.8456);
    let power_annuity = annuity(0.5 * 1.2 * 1000.0 * 156.0279);
    let loss = 0.02 * oracle_throughput * 0.05;
    let oracle_total = 1.015 * (energy_annuity + power_annuity) + loss;
    rel_close(
        nas_2020.cost.energy_annuity,
        energy_annuity,
        "NaS energy annuity",
    );
    rel_close(
        nas_2020.cost.power_annuity,
        power_annuity,
        "NaS power annuity",
    );
    rel_close(nas_2020.cost.loss, loss, "NaS loss");
    rel_close(nas_2020.cost.total, oracle_total, "NaS 2020 total");

    // Breakeven oracle: scan the already-verified cost rows.
    let benefit = a.benefits.total_usd;
    for row in &a.breakeven {
        let oracle_year = a
            .costs
            .iter()
            .filter(|r| r.technology == row.technology && r.cost.total <= benefit)
            .map(|r| r.install_year)
            .min();
        assert_eq!(row.breakeven_year, oracle_year, "{}", row.technology);
    }

    // Price statistics: one row per month at the flat fixture price.
    assert_eq!(report.price_stats.len(), 3);
    for (row, &(month, _, _, _, price)) in report.price_stats.iter().zip(&MONTHS) {
        assert_eq!((row.year, row.month), (2018, month));
        rel_close(row.mean_price_usd_per_mwh, price, "price stat");
    }
}

fn csv_cells(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (headers, rows)
}

fn json_as_cell(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::Null => String::new(),
        serde_json::Value::Number(n) => n.to_string(),
        serde_json::Value::String(s) => s.clone(),
        other => panic!("unexpected JSON cell {other:?}"),
    }
}

#[test]
fn csv_and_json_emissions_carry_identical_values() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_toy_fixture(dir.path());
    let config = ScenarioConfig::load(&config_path).unwrap();
    let report = run_scenario(&config).unwrap();

    let csv_dir = dir.path().join("csv");
    let json_dir = dir.path().join("json");
    let csv_paths = emit_tables(&report, EmitFormat::Csv, &csv_dir).unwrap();
    let json_paths = emit_tables(&report, EmitFormat::Json, &json_dir).unwrap();
    assert_eq!(csv_paths.len(), json_paths.len());

    for (csv_path, json_path) in csv_paths.iter().zip(&json_paths) {
        let (headers, rows) = csv_cells(csv_path);
        let json: Vec<serde_json::Map<String, serde_json::Value>> =
            serde_json::from_reader(fs::File::open(json_path).unwrap()).unwrap();
        assert_eq!(rows.len(), json.len(), "{csv_path:?} row count");
        for (row, object) in rows.iter().zip(&json) {
            assert_eq!(object.len(), headers.len());
            for (header, cell) in headers.iter().zip(row) {
                let json_cell = json_as_cell(&object[header]);
                assert_eq!(&json_cell, cell, "{csv_path:?} column {header}");
            }
        }
    }
}

#[test]
fn emitted_totals_reconcile_with_components() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_toy_fixture(dir.path());
    let config = ScenarioConfig::load(&config_path).unwrap();
    let report = run_scenario(&config).unwrap();
    let out = dir.path().join("out");
    emit_tables(&report, EmitFormat::Csv, &out).unwrap();

    let sum_columns = |path: &Path, components: &[&str], total: &str| {
        let (headers, rows) = csv_cells(path);
        let index = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .unwrap_or_else(|| panic!("{path:?} lacks column {name}"))
        };
        for row in rows {
            let sum: i64 = components
                .iter()
                .map(|c| row[index(c)].parse::<i64>().unwrap())
                .sum();
            let stated: i64 = row[index(total)].parse().unwrap();
            assert_eq!(sum, stated, "{path:?}");
        }
    };

    sum_columns(
        &out.join("bills.csv"),
        &[
            "firm_cost_usd",
            "market_cost_usd",
            "demand_usd",
            "wheeling_usd",
        ],
        "total_usd",
    );
    sum_columns(
        &out.join("benefits.csv"),
        &[
            "allocation_shifting_usd",
            "demand_reduction_usd",
            "wheeling_reduction_usd",
            "arbitrage_usd",
        ],
        "total_usd",
    );
    sum_columns(
        &out.join("costs.csv"),
        &[
            "energy_annuity_usd",
            "power_annuity_usd",
            "maintenance_usd",
            "loss_usd",
        ],
        "total_usd",
    );
}

#[test]
fn incomplete_price_month_becomes_warning_not_error() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = write_toy_fixture(dir.path());
    // Append a partial April to the price file only.
    let prices_path = dir.path().join("prices.csv");
    let mut prices = fs::read_to_string(&prices_path).unwrap();
    for h in 0..10 {
        prices.push_str(&format!("2018-04-01T{h:02}:00,40.0\n"));
    }
    fs::write(&prices_path, prices).unwrap();

    let config = ScenarioConfig::load(&config_path).unwrap();
    let report = run_scenario(&config).unwrap();
    assert_eq!(report.price_stats.len(), 3, "April must be skipped");
    assert!(
        report
            .warnings
            .iter()
            .any(|w| w.message.contains("2018-04") && w.message.contains("710 missing")),
        "warnings: {:?}",
        report.warnings
    );
}

#[test]
fn report_exit_codes_distinguish_config_and_data_errors() {
    let bin = env!("CARGO_BIN_EXE_peakshave");
    let run = |config: &Path| {
        std::process::Command::new(bin)
            .args(["report", "--config"])
            .arg(config)
            .arg("--out")
            .arg(config.parent().unwrap().join("out"))
            .output()
            .unwrap()
    };

    // Missing config file: config error.
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(run(&missing).status.code(), Some(1));

    // Config referencing a missing input: config error.
    let config_path = write_toy_fixture(dir.path());
    fs::remove_file(dir.path().join("prices.csv")).unwrap();
    assert_eq!(run(&config_path).status.code(), Some(1));

    // Malformed data inside a referenced file: data error.
    let dir2 = tempfile::tempdir().unwrap();
    let config_path = write_toy_fixture(dir2.path());
    let load_path = dir2.path().join("load.csv");
    let mut text = fs::read_to_string(&load_path).unwrap();
    text = text.replacen("10", "-10", 1);
    fs::write(&load_path, text).unwrap();
    let output = run(&config_path);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("negative load"));

    // Healthy fixture: success.
    let dir3 = tempfile::tempdir().unwrap();
    let config_path = write_toy_fixture(dir3.path());
    assert_eq!(run(&config_path).status.code(), Some(0));
}
