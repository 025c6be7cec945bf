//! Domain types shared by every planner: stations, travel times, bus runs,
//! pod routes, the discrete time grid and cost rates.
//!
//! Times are integer seconds. Money is an integer count of cost units, where
//! one unit is 1/60 of a micro-currency unit: a rate quoted per minute in
//! micro-currency is then exactly the same integer per second in units, so
//! every charge in the objective is computed without rounding.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PlanError, Result};

pub type Seconds = i64;

/// Integer money, 1 unit = 1/60 micro-currency.
pub type Cost = i64;

pub const UNITS_PER_MICRO: i64 = 60;
pub const UNITS_PER_CURRENCY: i64 = 60_000_000;

/// Converts a whole-currency amount (e.g. 13.7 USD) to cost units.
pub fn currency_to_units(amount: f64) -> Cost {
    (amount * 1e6).round() as i64 * UNITS_PER_MICRO
}

/// Converts a per-minute currency rate to a per-second rate in cost units.
pub fn per_minute_rate(per_minute: f64) -> Cost {
    (per_minute * 1e6).round() as i64
}

pub fn units_to_currency(units: Cost) -> f64 {
    units as f64 / UNITS_PER_CURRENCY as f64
}

pub fn units_to_micro(units: Cost) -> f64 {
    units as f64 / UNITS_PER_MICRO as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationId(pub usize);

impl StationId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: StationId,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
}

/// Square matrix of continuous travel seconds, `tau[from][to]`. Not assumed
/// symmetric.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TravelTimeMatrix(pub Vec<Vec<Seconds>>);

impl TravelTimeMatrix {
    pub fn get(&self, from: StationId, to: StationId) -> Seconds {
        self.0[from.0][to.0]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest off-diagonal entry, 0 for fewer than two stations.
    pub fn max_entry(&self) -> Seconds {
        self.0.iter().flatten().copied().max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stop {
    pub station: StationId,
    pub arrival_s: Seconds,
    pub demand_pods: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusRun {
    pub id: String,
    pub stops: Vec<Stop>,
}

impl BusRun {
    pub fn demands(&self) -> Vec<u32> {
        self.stops.iter().map(|s| s.demand_pods).collect()
    }
}

/// The complete problem input. Serialized as the canonical instance JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub stations: Vec<Station>,
    pub travel: TravelTimeMatrix,
    pub runs: Vec<BusRun>,
    pub horizon_s: Seconds,
}

impl Instance {
    pub fn station_count(&self) -> usize {
        self.stations.len()
    }

    pub fn tau(&self, from: StationId, to: StationId) -> Seconds {
        self.travel.get(from, to)
    }

    pub fn latest_arrival(&self) -> Seconds {
        self.runs
            .iter()
            .flat_map(|r| r.stops.iter().map(|s| s.arrival_s))
            .max()
            .unwrap_or(0)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PlanError::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json_string()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| PlanError::io(path, e))
    }

    /// Loads and rejects instances with any invariant violation.
    pub fn load_valid(path: &Path) -> Result<Self> {
        let inst = Self::load(path)?;
        inst.ensure_valid()?;
        Ok(inst)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let violations = validate_instance(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(PlanError::InvalidInstance(violations))
        }
    }
}

/// Smallest multiple of 60 s covering `latest_end`, plus one 60 s step. 60 s
/// is the coarsest resolution in use, so the result is a multiple of every
/// finer step that divides 60.
pub fn default_horizon(latest_end: Seconds) -> Seconds {
    ceil_to(latest_end.max(0), 60) + 60
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub subject: String,
    pub rule: String,
}

impl Violation {
    pub fn new(subject: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.rule)
    }
}

pub fn validate_instance(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = inst.stations.len();

    let mut labels = HashSet::new();
    for (i, st) in inst.stations.iter().enumerate() {
        if st.id.0 != i {
            out.push(Violation::new(
                format!("station {}", st.label),
                format!("id {} is not dense (expected {i})", st.id.0),
            ));
        }
        if !labels.insert(st.label.as_str()) {
            out.push(Violation::new(
                format!("station {}", st.label),
                "duplicate label",
            ));
        }
    }

    if inst.travel.len() != n || inst.travel.0.iter().any(|row| row.len() != n) {
        out.push(Violation::new(
            "travel",
            format!("matrix must be {n}x{n}"),
        ));
    } else {
        for (a, row) in inst.travel.0.iter().enumerate() {
            for (b, &tau) in row.iter().enumerate() {
                if a == b && tau != 0 {
                    out.push(Violation::new(
                        format!("travel[{a}][{b}]"),
                        "diagonal entry must be 0",
                    ));
                } else if a != b && tau <= 0 {
                    out.push(Violation::new(
                        format!("travel[{a}][{b}]"),
                        "off-diagonal entry must be positive",
                    ));
                }
            }
        }
    }

    if inst.horizon_s <= 0 {
        out.push(Violation::new("horizon", "must be positive"));
    }

    let mut run_ids = HashSet::new();
    for run in &inst.runs {
        let subject = format!("run {}", run.id);
        if !run_ids.insert(run.id.as_str()) {
            out.push(Violation::new(&subject, "duplicate run id"));
        }
        if run.stops.is_empty() {
            out.push(Violation::new(&subject, "run has no stops"));
            continue;
        }
        for (k, stop) in run.stops.iter().enumerate() {
            if stop.station.0 >= n {
                out.push(Violation::new(
                    &subject,
                    format!("stop {k} references unknown station {}", stop.station.0),
                ));
            }
            if stop.arrival_s < 0 || stop.arrival_s > inst.horizon_s {
                out.push(Violation::new(
                    &subject,
                    format!(
                        "stop {k} arrival {} s outside [0, {}]",
                        stop.arrival_s, inst.horizon_s
                    ),
                ));
            }
        }
        if run
            .stops
            .windows(2)
            .any(|w| w[1].arrival_s <= w[0].arrival_s)
        {
            out.push(Violation::new(
                &subject,
                "arrival times must be strictly increasing",
            ));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub station: StationId,
    pub time_s: Seconds,
}

/// One pod's contiguous in-service segment of a bus run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PodRoute {
    /// Index of the run in `Instance::runs`.
    pub run: usize,
    pub run_id: String,
    /// Extraction order within the run.
    pub seq: usize,
    pub visits: Vec<Visit>,
}

impl PodRoute {
    pub fn label(&self) -> String {
        format!("{}#{}", self.run_id, self.seq)
    }

    pub fn start_station(&self) -> StationId {
        self.visits[0].station
    }

    pub fn end_station(&self) -> StationId {
        self.visits[self.visits.len() - 1].station
    }

    pub fn start_time(&self) -> Seconds {
        self.visits[0].time_s
    }

    /// A single-stop route holds its pod for one second so that its snapped
    /// window never collapses to a point; a point window would let the route
    /// be served by its own release.
    pub fn end_time(&self) -> Seconds {
        match self.visits.len() {
            1 => self.visits[0].time_s + 1,
            n => self.visits[n - 1].time_s,
        }
    }
}

pub fn floor_to(t: Seconds, dt: Seconds) -> Seconds {
    t.div_euclid(dt) * dt
}

pub fn ceil_to(t: Seconds, dt: Seconds) -> Seconds {
    -((-t).div_euclid(dt)) * dt
}

/// Uniform discretization of `[0, horizon]` into steps of `dt` seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: Seconds,
    pub horizon: Seconds,
}

impl TimeGrid {
    pub fn new(dt: Seconds, horizon: Seconds) -> Result<Self> {
        if dt <= 0 {
            return Err(PlanError::Validation(format!("dt must be positive, got {dt}")));
        }
        if horizon <= 0 || horizon % dt != 0 {
            return Err(PlanError::Validation(format!(
                "horizon {horizon} s is not a positive multiple of dt={dt}"
            )));
        }
        Ok(Self { dt, horizon })
    }

    /// Grid over the instance horizon, rounded up to a multiple of `dt`.
    pub fn for_instance(inst: &Instance, dt: Seconds) -> Result<Self> {
        if dt <= 0 {
            return Err(PlanError::Validation(format!("dt must be positive, got {dt}")));
        }
        Self::new(dt, ceil_to(inst.horizon_s.max(dt), dt))
    }

    /// Number of grid points, `horizon / dt + 1`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt) as usize + 1
    }

    /// Same horizon, finer step. Used by the interval fallback ladder; the
    /// horizon is kept even when `dt` does not divide it since interval
    /// windows are snapped independently of the horizon.
    pub fn with_dt(&self, dt: Seconds) -> Self {
        Self {
            dt,
            horizon: self.horizon,
        }
    }

    /// Resolutions tried, coarsest first, when a transition that is feasible
    /// in continuous time does not fit on the grid: `dt`, successive halvings
    /// down to 5 s, then 1 s (exact for integer-second data).
    pub fn fallback_ladder(&self) -> Vec<Seconds> {
        let mut ladder = vec![self.dt];
        let mut d = self.dt / 2;
        while d >= 5 {
            ladder.push(d);
            d /= 2;
        }
        if *ladder.last().unwrap() != 1 {
            ladder.push(1);
        }
        ladder
    }
}

/// Maps a route's continuous service span onto the grid:
/// `(floor(start/dt)*dt, ceil(end/dt)*dt)`.
pub fn snap_window(route: &PodRoute, grid: &TimeGrid) -> Result<(Seconds, Seconds)> {
    let lo = floor_to(route.start_time(), grid.dt);
    let hi = ceil_to(route.end_time(), grid.dt);
    if route.start_time() < 0 || hi > grid.horizon {
        return Err(PlanError::WindowOutsideHorizon {
            route: route.label(),
            lo,
            hi,
            horizon: grid.horizon,
        });
    }
    Ok((lo, hi))
}

/// Travel time rounded up to a whole number of steps.
pub fn effective_travel_time(tau: Seconds, grid: &TimeGrid) -> Result<Seconds> {
    if tau < 0 {
        return Err(PlanError::Validation(format!(
            "travel time must be non-negative, got {tau}"
        )));
    }
    Ok(ceil_to(tau, grid.dt))
}

/// Cost rates. Fleet is per pod per service day; move and park rates are per
/// second, in cost units.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostConfig {
    pub fleet: Cost,
    pub move_rate: Cost,
    pub park_rate: Vec<Cost>,
}

impl CostConfig {
    /// `fleet` in currency per pod-day, rates in currency per minute.
    pub fn from_currency(fleet: f64, move_per_minute: f64, park_per_minute: &[f64]) -> Result<Self> {
        if fleet < 0.0 || move_per_minute < 0.0 || park_per_minute.iter().any(|&p| p < 0.0) {
            return Err(PlanError::Config("cost rates must be non-negative".into()));
        }
        Ok(Self {
            fleet: currency_to_units(fleet),
            move_rate: per_minute_rate(move_per_minute),
            park_rate: park_per_minute.iter().map(|&p| per_minute_rate(p)).collect(),
        })
    }

    pub fn uniform(fleet: f64, move_per_minute: f64, park_per_minute: f64, stations: usize) -> Result<Self> {
        Self::from_currency(fleet, move_per_minute, &vec![park_per_minute; stations])
    }

    pub fn check_covers(&self, stations: usize) -> Result<()> {
        if self.park_rate.len() != stations {
            return Err(PlanError::Config(format!(
                "parking rates cover {} stations, instance has {stations}",
                self.park_rate.len()
            )));
        }
        if self.fleet < 0 || self.move_rate < 0 || self.park_rate.iter().any(|&p| p < 0) {
            return Err(PlanError::Config("cost rates must be non-negative".into()));
        }
        Ok(())
    }

    pub fn park(&self, station: StationId, seconds: Seconds) -> Cost {
        self.park_rate[station.0] * seconds
    }

    pub fn movement(&self, seconds: Seconds) -> Cost {
        self.move_rate * seconds
    }
}
