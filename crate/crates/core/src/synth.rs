//! Seeded synthetic schedules for property tests and scaling benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decompose::decompose_instance;
use crate::error::{PlanError, Result};
use crate::model::{BusRun, Instance, Seconds, Station, StationId, Stop, TravelTimeMatrix};

/// 15 mph in metres per second.
pub const BUS_SPEED_MPS: f64 = 15.0 * 1609.344 / 3600.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    pub stations: usize,
    pub runs: usize,
    /// Multiple of 60 s.
    pub horizon_s: Seconds,
    pub demand_max: u32,
    pub stops_min: usize,
    pub stops_max: usize,
    /// Side of the square service area in metres.
    pub area_m: f64,
}

impl SynthParams {
    pub fn new(seed: u64, stations: usize, runs: usize, horizon_s: Seconds) -> Self {
        Self {
            seed,
            stations,
            runs,
            horizon_s,
            demand_max: 3,
            stops_min: 2.min(stations),
            stops_max: 6.min(stations),
            area_m: 4000.0,
        }
    }
}

/// Travel seconds between planar points at bus speed, rounded up and at
/// least 1 s off the diagonal. Rounding up keeps the triangle inequality.
pub fn planar_travel(points: &[(f64, f64)], speed_mps: f64) -> TravelTimeMatrix {
    TravelTimeMatrix(
        points
            .iter()
            .enumerate()
            .map(|(i, a)| {
                points
                    .iter()
                    .enumerate()
                    .map(|(j, b)| {
                        if i == j {
                            0
                        } else {
                            let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
                            ((d / speed_mps).ceil() as Seconds).max(1)
                        }
                    })
                    .collect()
            })
            .collect(),
    )
}

/// Runs visit distinct stations in random order, start uniformly in time
/// and drive at bus speed with up to a minute of dwell between stops. Every
/// arrival is strictly before the horizon.
pub fn gen_instance(p: &SynthParams) -> Result<Instance> {
    if p.stations == 0 {
        return Err(PlanError::Validation("at least one station is required".into()));
    }
    if p.stops_min == 0 || p.stops_min > p.stops_max {
        return Err(PlanError::Validation(format!(
            "stops per run range [{}, {}] is empty",
            p.stops_min, p.stops_max
        )));
    }
    if p.stops_max > p.stations {
        return Err(PlanError::Validation(format!(
            "runs of up to {} stops need that many distinct stations, only {} exist",
            p.stops_max, p.stations
        )));
    }
    if p.horizon_s <= 0 || p.horizon_s % 60 != 0 {
        return Err(PlanError::Validation(format!("horizon {} s is not a positive multiple of 60", p.horizon_s)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let points: Vec<(f64, f64)> = (0..p.stations)
        .map(|_| (rng.gen_range(0.0..p.area_m), rng.gen_range(0.0..p.area_m)))
        .collect();
    let travel = planar_travel(&points, BUS_SPEED_MPS);
    let all: Vec<usize> = (0..p.stations).collect();

    let mut runs = Vec::with_capacity(p.runs);
    for i in 0..p.runs {
        let k = rng.gen_range(p.stops_min..=p.stops_max);
        let seq: Vec<usize> = all.choose_multiple(&mut rng, k).copied().collect();
        let mut offsets = vec![0 as Seconds];
        for w in seq.windows(2) {
            let last = *offsets.last().unwrap();
            offsets.push(last + travel.0[w[0]][w[1]] + rng.gen_range(0..=60));
        }
        let duration = *offsets.last().unwrap();
        if duration >= p.horizon_s {
            return Err(PlanError::Validation(format!(
                "a {k}-stop run lasts {duration} s, longer than the horizon"
            )));
        }
        // the last stop stays strictly inside the horizon
        let start = rng.gen_range(0..p.horizon_s - duration);
        runs.push(BusRun {
            id: format!("run{i}"),
            stops: seq
                .iter()
                .zip(&offsets)
                .map(|(&s, &o)| Stop {
                    station: StationId(s),
                    arrival_s: start + o,
                    demand_pods: rng.gen_range(0..=p.demand_max),
                })
                .collect(),
        });
    }
    Ok(Instance {
        stations: (0..p.stations)
            .map(|i| Station { id: StationId(i), label: format!("st{i}"), lat: None, lon: None })
            .collect(),
        travel,
        runs,
        horizon_s: p.horizon_s,
    })
}

/// Instance small enough for the exhaustive schedule oracle: at most 3
/// stations, 1 to 4 routes, horizon of `steps` grid steps of `dt`. Stop
/// times are arbitrary seconds so boundary gaps are exercised.
pub fn gen_tiny_instance(seed: u64, dt: Seconds, steps: i64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = dt * steps;
    loop {
        let n = rng.gen_range(1..=3usize);
        let scale = 1.5 * dt as f64;
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen_range(0.0..scale), rng.gen_range(0.0..scale)))
            .collect();
        let travel = planar_travel(&points, 1.0);
        let runs: Vec<BusRun> = (0..rng.gen_range(1..=3usize))
            .map(|i| {
                let k = rng.gen_range(1..=n.min(2));
                let mut seq: Vec<usize> = (0..n).collect();
                seq.shuffle(&mut rng);
                let mut t = rng.gen_range(0..horizon / 2);
                let stops = seq[..k]
                    .iter()
                    .enumerate()
                    .map(|(j, &s)| {
                        if j > 0 {
                            t += rng.gen_range(1..=dt * 2);
                        }
                        Stop { station: StationId(s), arrival_s: t.min(horizon - 1), demand_pods: rng.gen_range(0..=2) }
                    })
                    .collect();
                BusRun { id: format!("r{i}"), stops }
            })
            .collect();
        let inst = Instance {
            stations: (0..n)
                .map(|i| Station { id: StationId(i), label: format!("t{i}"), lat: None, lon: None })
                .collect(),
            travel,
            runs,
            horizon_s: horizon,
        };
        let routes = decompose_instance(&inst).len();
        if (1..=4).contains(&routes) && inst.ensure_valid().is_ok() {
            return inst;
        }
    }
}
