//! Cost scenarios, single method runs with audit, method comparison,
//! interval statistics and power-law fits.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{PlanError, Result};
use crate::flow::plan_integrated;
use crate::hierarchical::{plan_hierarchical, CapPolicy, HierarchicalOptions, IntervalOutcome};
use crate::itinerary::PodItinerary;
use crate::model::{units_to_micro, Cost, CostConfig, Instance, Seconds, TimeGrid};
use crate::oracle::audit;
use crate::tsn::Category;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Scenario {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4, Scenario::S5];

    pub fn notes(self) -> &'static str {
        match self {
            Scenario::S1 => "baseline, all costs",
            Scenario::S2 => "fleet only",
            Scenario::S3 => "no fleet charge",
            Scenario::S4 => "free movement",
            Scenario::S5 => "per-station parking prices",
        }
    }

    /// Fleet per pod-day and rates per minute, in currency. S5 draws each
    /// station's parking price from 0.01..=0.08 with a generator keyed by
    /// `(seed, station)`, so adding stations leaves existing prices alone.
    pub fn costs(self, stations: usize, seed: u64) -> Result<CostConfig> {
        match self {
            Scenario::S1 => CostConfig::uniform(13.7, 0.03, 0.03, stations),
            Scenario::S2 => CostConfig::uniform(13.7, 0.0, 0.0, stations),
            Scenario::S3 => CostConfig::uniform(0.0, 0.03, 0.03, stations),
            Scenario::S4 => CostConfig::uniform(13.7, 0.0, 0.03, stations),
            Scenario::S5 => {
                let parks: Vec<f64> = (0..stations).map(|s| station_price(seed, s)).collect();
                CostConfig::from_currency(13.7, 0.03, &parks)
            }
        }
    }
}

fn station_price(seed: u64, station: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(station as u64);
    rng.gen_range(1..=8) as f64 / 100.0
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Scenario {
    type Err = PlanError;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| PlanError::Config(format!("unknown scenario {s:?}, expected S1..S5")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Method {
    Integrated,
    Hierarchical,
    HierarchicalCapped,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Integrated => "integrated",
            Method::Hierarchical => "hierarchical",
            Method::HierarchicalCapped => "hierarchical-capped",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = PlanError;
    fn from_str(s: &str) -> Result<Self> {
        [Method::Integrated, Method::Hierarchical, Method::HierarchicalCapped]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| PlanError::Config(format!("unknown method {s:?}")))
    }
}

/// Duration statistics of one interval category, in hours.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntervalStats {
    pub category: Category,
    pub count: usize,
    pub mean_h: f64,
    /// Sample standard deviation; `None` below two intervals.
    pub std_h: Option<f64>,
    pub min_h: f64,
    pub q25_h: f64,
    pub q50_h: f64,
    pub q75_h: f64,
    pub max_h: f64,
}

/// Linear interpolation between order statistics at `q * (n - 1)`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn describe(category: Category, hours: &[f64]) -> Option<IntervalStats> {
    if hours.is_empty() {
        return None;
    }
    let mut v = hours.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.len() > 1).then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    Some(IntervalStats {
        category,
        count: v.len(),
        mean_h: mean,
        std_h: std,
        min_h: v[0],
        q25_h: quantile(&v, 0.25),
        q50_h: quantile(&v, 0.5),
        q75_h: quantile(&v, 0.75),
        max_h: v[v.len() - 1],
    })
}

/// Window lengths per category.
pub fn interval_stats(outcomes: &[IntervalOutcome]) -> Vec<IntervalStats> {
    [Category::Unassigned, Category::Between, Category::Terminal]
        .into_iter()
        .filter_map(|c| {
            let hours: Vec<f64> = outcomes
                .iter()
                .filter(|o| o.problem.category == c)
                .map(|o| (o.window.1 - o.window.0) as f64 / 3600.0)
                .collect();
            describe(c, &hours)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub instance: String,
    pub scenario: Scenario,
    pub method: Method,
    pub dt: Seconds,
    pub objective: Cost,
    pub fleet: usize,
    pub routes: usize,
    /// Integrated: time-space network nodes. Hierarchical: routes.
    pub nodes: usize,
    /// Integrated: time-space network arcs. Hierarchical: compatibility edges.
    pub edges: usize,
    pub intervals: usize,
    pub subintervals: usize,
    pub violations: usize,
    pub wall_ms: f64,
    /// Peak resident set around the solve; process-wide and approximate.
    pub peak_rss_kb: Option<u64>,
    pub interval_stats: Vec<IntervalStats>,
}

impl RunReport {
    pub fn objective_micro(&self) -> f64 {
        units_to_micro(self.objective)
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub itineraries: Vec<PodItinerary>,
    pub intervals: Vec<IntervalOutcome>,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub method: Method,
    pub dt: Seconds,
    /// Node cap for the capped method.
    pub cap_nodes: Option<usize>,
    pub seed: u64,
}

/// Resets the kernel's high-water mark so the next reading covers only
/// what follows. Linux only; elsewhere memory is not reported.
fn reset_peak_rss() -> bool {
    std::fs::write("/proc/self/clear_refs", "5").is_ok()
}

fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

/// Solves, audits and reports. A plan with violations is an error: no
/// report is returned for it.
pub fn run_method(inst: &Instance, instance_id: &str, cfg: &RunConfig) -> Result<RunOutcome> {
    inst.ensure_valid()?;
    let costs = cfg.scenario.costs(inst.station_count(), cfg.seed)?;
    let grid = TimeGrid::for_instance(inst, cfg.dt)?;
    let tracked = reset_peak_rss();
    let started = Instant::now();
    let (routes, itineraries, objective, nodes, edges, intervals) = match cfg.method {
        Method::Integrated => {
            let p = plan_integrated(inst, &grid, &costs)?;
            (p.routes, p.itineraries, p.objective, p.nodes, p.arcs, Vec::new())
        }
        Method::Hierarchical | Method::HierarchicalCapped => {
            let cap = match cfg.method {
                Method::HierarchicalCapped => Some(CapPolicy {
                    max_nodes: cfg
                        .cap_nodes
                        .ok_or_else(|| PlanError::Config("the capped method needs a node cap".into()))?,
                }),
                _ => None,
            };
            let opts = HierarchicalOptions { cap, matching_seed: None };
            let p = plan_hierarchical(inst, &grid, &costs, &opts)?;
            let n = p.routes.len();
            (p.routes, p.itineraries, p.objective, n, p.dag_edges, p.intervals)
        }
    };
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    let peak_rss_kb = if tracked { peak_rss_kb() } else { None };

    let report_audit = audit(&itineraries, inst, &routes, &grid, &costs, objective);
    if !report_audit.is_clean() {
        let first = report_audit.violations.first().map(ToString::to_string).unwrap_or_else(|| {
            format!("objective {} recomputes to {}", report_audit.claimed, report_audit.recomputed)
        });
        return Err(PlanError::Contract(format!(
            "{} plan failed the audit ({} violations): {first}",
            cfg.method,
            report_audit.violations.len()
        )));
    }
    let report = RunReport {
        instance: instance_id.to_string(),
        scenario: cfg.scenario,
        method: cfg.method,
        dt: cfg.dt,
        objective,
        fleet: itineraries.len(),
        routes: routes.len(),
        nodes,
        edges,
        intervals: intervals.len(),
        subintervals: intervals.iter().map(|o| o.subintervals).sum(),
        violations: 0,
        wall_ms,
        peak_rss_kb,
        interval_stats: interval_stats(&intervals),
    };
    Ok(RunOutcome { report, itineraries, intervals })
}

/// Steps of the integrated method in the comparison tables.
pub const COMPARE_DTS: [Seconds; 4] = [5, 15, 30, 60];
/// Step of the hierarchical method in the comparison tables.
pub const HIERARCHICAL_DT: Seconds = 30;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub report: RunReport,
    /// Strictly lowest objective of its scenario; ties flag nothing.
    pub best: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// `(integrated fleet - hierarchical fleet) / hierarchical fleet` per
    /// integrated step, S2 only.
    pub s2_fleet_error: Vec<(Seconds, f64)>,
}

pub fn compare_methods(
    inst: &Instance,
    instance_id: &str,
    scenarios: &[Scenario],
    dts: &[Seconds],
    hierarchical_dt: Seconds,
    seed: u64,
) -> Result<Comparison> {
    let mut rows = Vec::new();
    let mut s2_fleet_error = Vec::new();
    for &scenario in scenarios {
        let mut reports = Vec::new();
        for &dt in dts {
            let cfg = RunConfig { scenario, method: Method::Integrated, dt, cap_nodes: None, seed };
            reports.push(run_method(inst, instance_id, &cfg)?.report);
        }
        let cfg = RunConfig { scenario, method: Method::Hierarchical, dt: hierarchical_dt, cap_nodes: None, seed };
        let hier = run_method(inst, instance_id, &cfg)?.report;
        if scenario == Scenario::S2 && hier.fleet > 0 {
            for r in &reports {
                s2_fleet_error.push((r.dt, (r.fleet as f64 - hier.fleet as f64) / hier.fleet as f64));
            }
        }
        reports.push(hier);
        let min = reports.iter().map(|r| r.objective).min().unwrap_or(0);
        let unique = reports.iter().filter(|r| r.objective == min).count() == 1;
        rows.extend(reports.into_iter().map(|r| ComparisonRow { best: unique && r.objective == min, report: r }));
    }
    Ok(Comparison { rows, s2_fleet_error })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least squares of `ln y` on `ln x`: `y = e^intercept * x^exponent`.
/// A constant series fits exactly with exponent 0.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerFit> {
    if points.len() < 3 {
        return Err(PlanError::Validation(format!("a power-law fit needs at least 3 points, got {}", points.len())));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(PlanError::Validation("power-law fit needs positive finite values".into()));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(PlanError::Validation("power-law fit needs at least two distinct x values".into()));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let r2 = if syy <= f64::EPSILON * n { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(PowerFit { exponent, intercept, r2, points: points.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{currency_to_units, per_minute_rate};

    #[test]
    fn scenario_rates() {
        let s1 = Scenario::S1.costs(3, 0).unwrap();
        assert_eq!(s1.fleet, currency_to_units(13.7));
        assert_eq!(s1.move_rate, per_minute_rate(0.03));
        let s2 = Scenario::S2.costs(3, 0).unwrap();
        assert_eq!((s2.move_rate, s2.park_rate.clone()), (0, vec![0; 3]));
        assert_eq!(Scenario::S3.costs(1, 0).unwrap().fleet, 0);
        let s4 = Scenario::S4.costs(2, 0).unwrap();
        assert_eq!((s4.move_rate, s4.park_rate[1]), (0, per_minute_rate(0.03)));
    }

    #[test]
    fn s5_prices_are_stable_per_station() {
        let small = Scenario::S5.costs(5, 42).unwrap();
        let large = Scenario::S5.costs(40, 42).unwrap();
        assert_eq!(small.park_rate[..], large.park_rate[..5]);
        let allowed: Vec<Cost> = (1..=8).map(|c| per_minute_rate(c as f64 / 100.0)).collect();
        assert!(large.park_rate.iter().all(|p| allowed.contains(p)));
        // 40 draws from 8 prices are not all equal
        assert!(large.park_rate.iter().any(|&p| p != large.park_rate[0]));
        assert_ne!(Scenario::S5.costs(40, 43).unwrap(), large);
    }

    #[test]
    fn names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.to_string().parse::<Scenario>().unwrap(), s);
        }
        assert_eq!("s3".parse::<Scenario>().unwrap(), Scenario::S3);
        assert_eq!("hierarchical-capped".parse::<Method>().unwrap(), Method::HierarchicalCapped);
        assert!("S6".parse::<Scenario>().is_err());
    }

    #[test]
    fn exact_square_fits() {
        let pts: Vec<(f64, f64)> = (1..=6).map(|x| (x as f64, (x * x) as f64)).collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-12);
        assert!(f.intercept.abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_metric_has_zero_exponent() {
        let f = fit_power_law(&[(1.0, 5.0), (10.0, 5.0), (100.0, 5.0)]).unwrap();
        assert!(f.exponent.abs() < 1e-12);
        assert!((f.intercept - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 0.0), (3.0, 3.0)]).is_err());
        assert!(fit_power_law(&[(-1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let s = describe(Category::Between, &[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.min_h, s.max_h, s.mean_h), (1.0, 4.0, 2.5));
        assert_eq!((s.q25_h, s.q50_h, s.q75_h), (1.75, 2.5, 3.25));
        // sample variance of 1..4 is 5/3
        assert!((s.std_h.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(describe(Category::Terminal, &[2.0]).unwrap().std_h, None);
        assert!(describe(Category::Terminal, &[]).is_none());
    }

    #[test]
    fn fig4_runs_are_audited() {
        let inst = fixtures::fig4_instance();
        for method in [Method::Integrated, Method::Hierarchical, Method::HierarchicalCapped] {
            let cfg = RunConfig { scenario: Scenario::S1, method, dt: 60, cap_nodes: Some(40), seed: 0 };
            let out = run_method(&inst, "fig4", &cfg).unwrap();
            assert_eq!(out.report.fleet, 2);
            assert_eq!(out.report.violations, 0);
            assert_eq!(out.report.routes, 3);
        }
        let cfg = RunConfig { scenario: Scenario::S1, method: Method::HierarchicalCapped, dt: 60, cap_nodes: None, seed: 0 };
        assert!(matches!(run_method(&inst, "fig4", &cfg), Err(PlanError::Config(_))));
    }

    #[test]
    fn comparison_flags_strict_minimum() {
        let inst = fixtures::fig1_instance();
        let cmp = compare_methods(&inst, "fig1", &[Scenario::S1, Scenario::S2], &COMPARE_DTS, HIERARCHICAL_DT, 0).unwrap();
        assert_eq!(cmp.rows.len(), 10);
        for sc in [Scenario::S1, Scenario::S2] {
            let rows: Vec<&ComparisonRow> = cmp.rows.iter().filter(|r| r.report.scenario == sc).collect();
            let min = rows.iter().map(|r| r.report.objective).min().unwrap();
            let at_min = rows.iter().filter(|r| r.report.objective == min).count();
            assert_eq!(rows.iter().filter(|r| r.best).count(), usize::from(at_min == 1));
        }
        assert_eq!(cmp.s2_fleet_error.len(), 4);
        assert!(cmp.s2_fleet_error.iter().all(|&(_, e)| e >= 0.0));
    }
}
