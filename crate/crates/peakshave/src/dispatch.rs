//! Peak-clamp battery dispatch over a billing month.
//!
//! The reference policy: whenever the metered load rises above the target
//! peak, discharge just enough to clamp it there (limited by the power
//! rating and remaining energy); whenever the load sits below the target,
//! recharge toward full as fast as the power rating and the target headroom
//! allow. The battery starts each month full and months are independent.
//!
//! Losses are applied on charge (the store gains `charge x eta_rt`);
//! discharge is 1:1 at the meter. The efficiency knob defaults to 1.0 here
//! because conversion losses are monetized in the cost model rather than
//! double-counted in the simulation.

use crate::timeseries::MonthSlice;
use serde::Deserialize;
use thiserror::Error;

/// Feasibility slack on the clamp: an hour counts as clamped when the
/// shaved load is within this of the target.
pub const CLAMP_TOLERANCE_MW: f64 = 1e-9;

/// Resolution of the feasible-shave search: 1 kW.
pub const SHAVE_RESOLUTION_MW: f64 = 1e-3;

/// Battery system parameters as seen at the meter.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct BessSpec {
    /// Discharge and charge limit at the meter, MW.
    pub power_mw: f64,
    /// Usable energy, MWh (nameplate x depth of discharge).
    pub usable_energy_mwh: f64,
    /// Depth of discharge, (0, 1].
    #[serde(default = "BessSpec::default_dod")]
    pub dod: f64,
    /// Round-trip efficiency, (0, 1]. Defaults to 1.0; see module docs.
    #[serde(default = "BessSpec::default_round_trip_efficiency")]
    pub round_trip_efficiency: f64,
    /// Inverter apparent-power margin over the shave target (0.2 = 20%).
    #[serde(default = "BessSpec::default_inverter_margin")]
    pub inverter_margin: f64,
    /// Technology identifier, matched against the cost catalog.
    pub technology: String,
}

impl BessSpec {
    fn default_dod() -> f64 {
        1.0
    }

    fn default_round_trip_efficiency() -> f64 {
        1.0
    }

    fn default_inverter_margin() -> f64 {
        0.2
    }

    pub fn new(power_mw: f64, usable_energy_mwh: f64, technology: &str) -> Self {
        BessSpec {
            power_mw,
            usable_energy_mwh,
            dod: Self::default_dod(),
            round_trip_efficiency: Self::default_round_trip_efficiency(),
            inverter_margin: Self::default_inverter_margin(),
            technology: technology.to_string(),
        }
    }

    /// Nameplate energy implied by the usable rating and depth of discharge.
    pub fn nameplate_energy_mwh(&self) -> f64 {
        self.usable_energy_mwh / self.dod
    }

    pub fn validate(&self) -> Result<(), DispatchError> {
        let ok = self.power_mw > 0.0
            && self.usable_energy_mwh >= 0.0
            && self.dod > 0.0
            && self.dod <= 1.0
            && self.round_trip_efficiency > 0.0
            && self.round_trip_efficiency <= 1.0
            && self.inverter_margin >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(DispatchError::InvalidSpec {
                message: format!("{self:?}"),
            })
        }
    }
}

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("invalid BESS spec: {message}")]
    InvalidSpec { message: String },
    #[error("shave {shave_mw} MW exceeds the monthly peak {peak_mw} MW")]
    ShaveExceedsPeak { shave_mw: f64, peak_mw: f64 },
    #[error("power rating {power_mw} MW is below the requested shave {shave_mw} MW")]
    PowerBelowShave { power_mw: f64, shave_mw: f64 },
}

/// Raw hour-by-hour traces from one clamp simulation.
#[derive(Debug, Clone)]
pub struct HourlyDispatch {
    /// Meter-side discharge per hour, MWh.
    pub discharge_mwh: Vec<f64>,
    /// Meter-side charge per hour, MWh.
    pub charge_mwh: Vec<f64>,
    /// Load after battery action, MW.
    pub shaved_mw: Vec<f64>,
    /// Cumulative drain from full after each hour, MWh.
    pub drain_mwh: Vec<f64>,
    /// Peak of the cumulative drain: the smallest usable rating that would
    /// have sustained this trace.
    pub peak_drain_mwh: f64,
    /// Every over-target hour was fully clamped.
    pub feasible: bool,
    pub achieved_peak_mw: f64,
}

/// Clamp simulation over an arbitrary hourly window.
///
/// `usable_mwh = None` removes the energy bound: discharge is limited only
/// by the power rating, and charging is still capped at "full" (the battery
/// starts full, so it can never hold more than it has drained). The peak
/// drain of such a run is the energy rating required to clamp the window.
pub fn clamp_dispatch_hours(
    load_mw: &[f64],
    target_mw: f64,
    power_mw: f64,
    eta_rt: f64,
    usable_mwh: Option<f64>,
) -> HourlyDispatch {
    let n = load_mw.len();
    let mut discharge = Vec::with_capacity(n);
    let mut charge = Vec::with_capacity(n);
    let mut shaved = Vec::with_capacity(n);
    let mut drain_trace = Vec::with_capacity(n);

    let mut drain = 0.0_f64; // MWh below full
    let mut peak_drain = 0.0_f64;
    let mut feasible = true;
    let mut achieved_peak = f64::NEG_INFINITY;

    for &load in load_mw {
        let mut d = 0.0;
        let mut c = 0.0;
        if load > target_mw {
            let deficit = load - target_mw;
            let soc_limit = match usable_mwh {
                Some(cap) => (cap - drain).max(0.0),
                None => f64::INFINITY,
            };
            d = deficit.min(power_mw).min(soc_limit);
            drain += d;
            if deficit - d > CLAMP_TOLERANCE_MW {
                feasible = false;
            }
        } else if load < target_mw {
            // Recharge toward full, never pushing the meter above target.
            let headroom_mwh = drain; // energy missing from full
            c = power_mw.min(target_mw - load).min(headroom_mwh / eta_rt);
            // (drain/eta)*eta can land one ulp above drain; keep the
            // drain-from-full non-negative.
            drain = (drain - c * eta_rt).max(0.0);
        }
        let after = load - d + c;
        achieved_peak = achieved_peak.max(after);
        peak_drain = peak_drain.max(drain);
        discharge.push(d);
        charge.push(c);
        shaved.push(after);
        drain_trace.push(drain);
    }

    HourlyDispatch {
        discharge_mwh: discharge,
        charge_mwh: charge,
        shaved_mw: shaved,
        drain_mwh: drain_trace,
        peak_drain_mwh: peak_drain.max(0.0),
        feasible,
        achieved_peak_mw: achieved_peak,
    }
}

/// Result of clamping one billing month with a concrete battery.
#[derive(Debug, Clone)]
pub struct DispatchResult {
    /// Metered load after battery action.
    pub shaved_load: MonthSlice,
    /// Usable energy remaining after each hour, MWh.
    pub soc_trace: Vec<f64>,
    pub discharge_mwh_total: f64,
    pub charge_mwh_total: f64,
    /// Peak cumulative deficit of the run: the smallest usable rating that
    /// makes this month feasible at this target.
    pub required_energy_mwh: f64,
    pub feasible: bool,
    pub achieved_peak_mw: f64,
}

/// Simulate the clamp policy for one month. Infeasibility (an over-target
/// hour the battery could not fully clamp) is a result state, not an error.
pub fn clamp_dispatch(load: &MonthSlice, target_peak_mw: f64, spec: &BessSpec) -> DispatchResult {
    let loads: Vec<f64> = load.values().collect();
    let run = clamp_dispatch_hours(
        &loads,
        target_peak_mw,
        spec.power_mw,
        spec.round_trip_efficiency,
        Some(spec.usable_energy_mwh),
    );
    let soc_trace = run
        .drain_mwh
        .iter()
        .map(|d| spec.usable_energy_mwh - d)
        .collect();
    DispatchResult {
        shaved_load: load.with_values(&run.shaved_mw),
        soc_trace,
        discharge_mwh_total: run.discharge_mwh.iter().sum(),
        charge_mwh_total: run.charge_mwh.iter().sum(),
        required_energy_mwh: run.peak_drain_mwh,
        feasible: run.feasible,
        achieved_peak_mw: run.achieved_peak_mw,
    }
}

/// Smallest usable energy rating that clamps the month at
/// `peak - shave_mw`, obtained from an energy-unbounded run.
pub fn required_energy(
    load: &MonthSlice,
    shave_mw: f64,
    power_mw: f64,
    eta_rt: f64,
) -> Result<f64, DispatchError> {
    let loads: Vec<f64> = load.values().collect();
    required_energy_hours(&loads, shave_mw, power_mw, eta_rt)
}

/// [`required_energy`] over a bare hourly window.
pub fn required_energy_hours(
    load_mw: &[f64],
    shave_mw: f64,
    power_mw: f64,
    eta_rt: f64,
) -> Result<f64, DispatchError> {
    let peak = load_mw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if shave_mw.is_nan() || shave_mw < 0.0 || shave_mw > peak {
        return Err(DispatchError::ShaveExceedsPeak {
            shave_mw,
            peak_mw: peak,
        });
    }
    if power_mw < shave_mw {
        return Err(DispatchError::PowerBelowShave { power_mw, shave_mw });
    }
    let run = clamp_dispatch_hours(load_mw, peak - shave_mw, power_mw, eta_rt, None);
    Ok(run.peak_drain_mwh)
}

/// Largest shave (MW) the battery can sustain over the month, searched to
/// 1 kW resolution with round-down on ambiguity.
///
/// The endpoint `min(power, peak)` is tested exactly first, so an
/// unconstrained battery reports its full power rating rather than a
/// grid-rounded value.
pub fn max_feasible_shave(load: &MonthSlice, spec: &BessSpec) -> f64 {
    let loads: Vec<f64> = load.values().collect();
    max_feasible_shave_hours(
        &loads,
        spec.power_mw,
        spec.usable_energy_mwh,
        spec.round_trip_efficiency,
    )
}

/// [`max_feasible_shave`] over a bare hourly window.
pub fn max_feasible_shave_hours(
    load_mw: &[f64],
    power_mw: f64,
    usable_mwh: f64,
    eta_rt: f64,
) -> f64 {
    let peak = load_mw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s_max = power_mw.min(peak);
    if s_max <= 0.0 {
        return 0.0;
    }
    let feasible = |shave: f64| {
        clamp_dispatch_hours(load_mw, peak - shave, power_mw, eta_rt, Some(usable_mwh)).feasible
    };
    if feasible(s_max) {
        return s_max;
    }
    // Bisect on the 1 kW grid: lo feasible, hi infeasible.
    let mut lo_kw = 0u64; // shave of 0 leaves no hour above target
    let mut hi_kw = (s_max / SHAVE_RESOLUTION_MW).floor() as u64;
    if hi_kw > 0 && !feasible(hi_kw as f64 * SHAVE_RESOLUTION_MW) {
        while hi_kw - lo_kw > 1 {
            let mid = lo_kw + (hi_kw - lo_kw) / 2;
            if feasible(mid as f64 * SHAVE_RESOLUTION_MW) {
                lo_kw = mid;
            } else {
                hi_kw = mid;
            }
        }
        lo_kw as f64 * SHAVE_RESOLUTION_MW
    } else {
        hi_kw as f64 * SHAVE_RESOLUTION_MW
    }
}

/// Inverter apparent-power rating recommended for a shave target: the
/// demand reduction plus the configured margin for forecast error, losses,
/// and reactive support.
pub fn recommend_inverter_rating(shave_mw: f64, spec: &BessSpec) -> f64 {
    shave_mw * (1.0 + spec.inverter_margin)
}
