//! Scaling benchmark over generated instances.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{PlanError, Result};
use crate::model::{Instance, Seconds};
use crate::scenario::{fit_power_law, run_method, Method, PowerFit, RunConfig, Scenario};
use crate::synth::{gen_instance, SynthParams};

pub const THREADS_ENV: &str = "PODPLAN_THREADS";

/// Pool bounded by `PODPLAN_THREADS`, or rayon's default when unset.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| PlanError::Config(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| PlanError::Config(format!("worker pool: {e}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// `size` stations, three runs per station over a four-hour horizon.
    Scaling,
    /// `size` runs over 10 stations and a two-hour horizon.
    Runs,
}

impl std::str::FromStr for Family {
    type Err = PlanError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaling" => Ok(Family::Scaling),
            "runs" => Ok(Family::Runs),
            _ => Err(PlanError::Config(format!("unknown family {s:?}, expected scaling or runs"))),
        }
    }
}

pub fn family_instance(family: Family, size: usize, seed: u64) -> Result<Instance> {
    let mut p = match family {
        Family::Scaling => SynthParams::new(seed, size, 3 * size, 4 * 3600),
        Family::Runs => SynthParams::new(seed, 10, size, 2 * 3600),
    };
    p.area_m = 1000.0 * (p.stations as f64).sqrt();
    p.demand_max = 2;
    gen_instance(&p)
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub family: Family,
    pub sizes: Vec<usize>,
    pub methods: Vec<Method>,
    pub scenario: Scenario,
    pub dt: Seconds,
    pub cap_nodes: Option<usize>,
    pub seed: u64,
    /// Each cell runs this many times; the fastest wall time is kept.
    pub repeat: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub size: usize,
    pub method: Method,
    pub stations: usize,
    pub runs: usize,
    pub routes: usize,
    pub dt: Seconds,
    pub nodes: usize,
    pub edges: usize,
    pub fleet: usize,
    pub objective_micro: f64,
    pub wall_ms: f64,
    pub peak_rss_kb: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitRow {
    pub method: Method,
    pub metric: &'static str,
    pub fit: PowerFit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    /// Ordered by size, then method.
    pub rows: Vec<BenchRow>,
    pub fits: Vec<FitRow>,
}

fn cell(cfg: &BenchConfig, size: usize, method: Method) -> Result<BenchRow> {
    let inst = family_instance(cfg.family, size, cfg.seed)?;
    let rc = RunConfig { scenario: cfg.scenario, method, dt: cfg.dt, cap_nodes: cfg.cap_nodes, seed: cfg.seed };
    let mut best = run_method(&inst, &format!("{size}"), &rc)?.report;
    for _ in 1..cfg.repeat.max(1) {
        let r = run_method(&inst, &format!("{size}"), &rc)?.report;
        if r.wall_ms < best.wall_ms {
            best.wall_ms = r.wall_ms;
        }
        best.peak_rss_kb = best.peak_rss_kb.max(r.peak_rss_kb);
    }
    Ok(BenchRow {
        size,
        method,
        stations: inst.station_count(),
        runs: inst.runs.len(),
        routes: best.routes,
        dt: cfg.dt,
        nodes: best.nodes,
        edges: best.edges,
        fleet: best.fleet,
        objective_micro: best.objective_micro(),
        wall_ms: best.wall_ms,
        peak_rss_kb: best.peak_rss_kb,
    })
}

/// Runs every (size, method) cell in `pool` and fits wall time and peak
/// memory against edge count per method.
pub fn run_bench(cfg: &BenchConfig, pool: &rayon::ThreadPool) -> Result<BenchResult> {
    let cells: Vec<(usize, Method)> =
        cfg.sizes.iter().flat_map(|&s| cfg.methods.iter().map(move |&m| (s, m))).collect();
    let mut rows = pool.install(|| {
        cells.par_iter().map(|&(s, m)| cell(cfg, s, m)).collect::<Result<Vec<_>>>()
    })?;
    rows.sort_by_key(|r| (r.size, r.method));

    let mut by_method: BTreeMap<Method, Vec<&BenchRow>> = BTreeMap::new();
    for r in &rows {
        by_method.entry(r.method).or_default().push(r);
    }
    let mut fits = Vec::new();
    for (method, rs) in by_method {
        let time: Vec<(f64, f64)> = rs.iter().map(|r| (r.edges as f64, r.wall_ms)).collect();
        if let Ok(fit) = fit_power_law(&time) {
            fits.push(FitRow { method, metric: "wall_ms", fit });
        }
        let mem: Option<Vec<(f64, f64)>> =
            rs.iter().map(|r| r.peak_rss_kb.map(|k| (r.edges as f64, k as f64))).collect();
        if let Some(Ok(fit)) = mem.map(|m| fit_power_law(&m)) {
            fits.push(FitRow { method, metric: "peak_rss_kb", fit });
        }
    }
    Ok(BenchResult { rows, fits })
}
