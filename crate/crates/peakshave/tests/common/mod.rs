//! Shared test fixtures and independent oracles.
//!
//! Every oracle here is a separate implementation path from the library:
//! the greedy dispatch oracle tracks state of charge directly, sizing is
//! bisection over capacity, and the shave search is an exhaustive grid
//! scan. They exist to catch algebra mistakes in the engine, so they must
//! not call into the code they check.

use chrono::NaiveDate;
use peakshave::timeseries::{hours_in_month, MonthSlice, TimePoint};
use rand::Rng;

pub fn month_slice(year: i32, month: u32, f: impl Fn(usize) -> f64) -> MonthSlice {
    let hours = hours_in_month(year, month).unwrap();
    let start = NaiveDate::from_ymd_opt(year, month, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let points = (0..hours)
        .map(|h| TimePoint {
            timestamp: start + chrono::Duration::hours(h as i64),
            value: f(h),
        })
        .collect();
    MonthSlice::new(year, month, points).unwrap()
}

/// A complete calendar month of uniform random loads.
pub fn random_month<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> MonthSlice {
    let year = rng.gen_range(2015..=2022);
    let month = rng.gen_range(1..=12);
    let values: Vec<f64> = (0..hours_in_month(year, month).unwrap())
        .map(|_| rng.gen_range(lo..hi))
        .collect();
    month_slice(year, month, |h| values[h])
}

/// Random hourly window of up to `max_hours` (not calendar-aligned).
pub fn random_window<R: Rng>(rng: &mut R, max_hours: usize, lo: f64, hi: f64) -> Vec<f64> {
    let n = rng.gen_range(4..=max_hours);
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub struct OracleTrace {
    pub discharge: Vec<f64>,
    pub charge: Vec<f64>,
    pub shaved: Vec<f64>,
    pub soc: Vec<f64>,
    pub feasible: bool,
}

/// Independent greedy clamp oracle, tracking state of charge directly.
pub fn greedy_clamp_oracle(
    loads: &[f64],
    target: f64,
    power: f64,
    eta: f64,
    capacity: f64,
) -> OracleTrace {
    let mut soc = capacity;
    let mut feasible = true;
    let mut discharge = Vec::with_capacity(loads.len());
    let mut charge = Vec::with_capacity(loads.len());
    let mut shaved = Vec::with_capacity(loads.len());
    let mut soc_trace = Vec::with_capacity(loads.len());
    for &load in loads {
        let mut d = 0.0;
        let mut c = 0.0;
        if load > target {
            let want = load - target;
            d = want.min(power).min(soc);
            soc -= d;
            if want - d > 1e-9 {
                feasible = false;
            }
        } else if load < target {
            let room = capacity - soc;
            c = power.min(target - load).min(room / eta);
            soc = (soc + c * eta).min(capacity);
        }
        discharge.push(d);
        charge.push(c);
        shaved.push(load - d + c);
        soc_trace.push(soc);
    }
    OracleTrace {
        discharge,
        charge,
        shaved,
        soc: soc_trace,
        feasible,
    }
}

/// Smallest usable capacity that makes the clamp feasible, by bisection.
pub fn bisection_capacity_oracle(loads: &[f64], shave: f64, power: f64, eta: f64) -> f64 {
    let peak = loads.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let target = peak - shave;
    let feasible = |cap: f64| greedy_clamp_oracle(loads, target, power, eta, cap).feasible;
    if feasible(0.0) {
        return 0.0;
    }
    let mut hi = 1.0;
    while !feasible(hi) {
        hi *= 2.0;
        assert!(hi < 1e9, "oracle failed to bracket capacity");
    }
    let mut lo = 0.0;
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Largest feasible shave by exhaustive 1 kW grid scan, endpoint included.
pub fn grid_search_shave_oracle(loads: &[f64], power: f64, usable: f64, eta: f64) -> f64 {
    let peak = loads.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s_max = power.min(peak);
    if s_max <= 0.0 {
        return 0.0;
    }
    let feasible =
        |shave: f64| greedy_clamp_oracle(loads, peak - shave, power, eta, usable).feasible;
    if feasible(s_max) {
        return s_max;
    }
    let mut k = (s_max / 1e-3).floor() as i64;
    while k > 0 {
        let s = k as f64 * 1e-3;
        if feasible(s) {
            return s;
        }
        k -= 1;
    }
    0.0
}
