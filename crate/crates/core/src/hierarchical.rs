//! Hierarchical planner: minimum fleet from the route compatibility graph,
//! then each pod's idle intervals routed by small unit-flow problems.

use rayon::prelude::*;
use serde::Serialize;

use crate::decompose::decompose_instance;
use crate::error::{PlanError, Result};
use crate::flow::{solve_min_cost_circulation, standby_actions, trace_paths};
use crate::itinerary::{Action, PodItinerary};
use crate::matching::{
    build_compatibility_dag, max_matching, max_matching_permuted, reconstruct_chains, AssignmentChain,
};
use crate::model::{ceil_to, floor_to, Cost, CostConfig, Instance, PodRoute, Seconds, StationId, TimeGrid};
use crate::tsn::{
    build_interval_network, interval_node_count, ArcKind, Category, IntervalSpec, NodeKind, Origin, Target,
    TimeSpaceNetwork,
};

/// One idle interval of one pod. `release` is the route the pod has just
/// finished, `request` the route it must be ready for next.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalProblem {
    pub pod: usize,
    pub category: Category,
    pub release: Option<usize>,
    pub request: Option<usize>,
}

impl IntervalProblem {
    /// Grid-aligned window at resolution `dt`.
    pub fn window(&self, routes: &[PodRoute], dt: Seconds, horizon: Seconds) -> (Seconds, Seconds) {
        let start = self.release.map_or(0, |r| ceil_to(routes[r].end_time(), dt));
        let end = self.request.map_or(horizon, |r| floor_to(routes[r].start_time(), dt));
        (start, end)
    }
}

/// Upper bound on the node count of every sub-network built for one
/// interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CapPolicy {
    pub max_nodes: usize,
}

impl CapPolicy {
    /// Two standby steps per station plus Source, Sink and both endpoints.
    pub fn minimum(stations: usize) -> usize {
        2 * stations + 4
    }

    pub fn check(&self, stations: usize) -> Result<()> {
        if self.max_nodes < Self::minimum(stations) {
            return Err(PlanError::Config(format!(
                "node cap {} is below the smallest viable interval network ({} nodes for {stations} stations)",
                self.max_nodes,
                Self::minimum(stations)
            )));
        }
        Ok(())
    }
}

/// Intervals of every pod in chain order: the lead-in before the first
/// route, one between each consecutive pair, and the tail after the last.
/// Empty lead-in and tail windows are omitted.
pub fn plan_intervals(chains: &[AssignmentChain], routes: &[PodRoute], grid: &TimeGrid) -> Vec<IntervalProblem> {
    let mut out = Vec::new();
    for (pod, chain) in chains.iter().enumerate() {
        let (Some(&first), Some(&last)) = (chain.first(), chain.last()) else {
            continue;
        };
        if floor_to(routes[first].start_time(), grid.dt) > 0 {
            out.push(IntervalProblem { pod, category: Category::Unassigned, release: None, request: Some(first) });
        }
        for w in chain.windows(2) {
            out.push(IntervalProblem { pod, category: Category::Between, release: Some(w[0]), request: Some(w[1]) });
        }
        if ceil_to(routes[last].end_time(), grid.dt) < grid.horizon {
            out.push(IntervalProblem { pod, category: Category::Terminal, release: Some(last), request: None });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalOutcome {
    pub problem: IntervalProblem,
    /// Resolution the interval was solved at.
    pub dt: Seconds,
    pub window: (Seconds, Seconds),
    /// Park and move cost inside the window.
    pub routing_cost: Cost,
    /// Sum of the sub-network optima, including fleet and gap arcs.
    pub network_cost: Cost,
    pub subintervals: usize,
    pub max_nodes: usize,
    pub actions: Vec<Action>,
}

fn gap_at_release(route: &PodRoute, dt: Seconds, costs: &CostConfig) -> Cost {
    costs.park(route.end_station(), ceil_to(route.end_time(), dt) - route.end_time())
}

fn gap_at_request(route: &PodRoute, dt: Seconds, costs: &CostConfig) -> Cost {
    costs.park(route.start_station(), route.start_time() - floor_to(route.start_time(), dt))
}

fn origin_for(p: &IntervalProblem, routes: &[PodRoute], dt: Seconds, costs: &CostConfig) -> Origin {
    match p.release {
        Some(r) => Origin::Released {
            route: r,
            label: routes[r].label(),
            station: routes[r].end_station(),
            gap: gap_at_release(&routes[r], dt, costs),
        },
        None => Origin::Fleet,
    }
}

fn target_for(p: &IntervalProblem, routes: &[PodRoute], dt: Seconds, costs: &CostConfig) -> Target {
    match p.request {
        Some(r) => Target::Requested {
            route: r,
            label: routes[r].label(),
            station: routes[r].start_station(),
            gap: gap_at_request(&routes[r], dt, costs),
        },
        None => Target::AnyStation { allowed: None },
    }
}

/// Solved unit path of one (sub-)network.
struct PieceResult {
    actions: Vec<Action>,
    routing_cost: Cost,
    network_cost: Cost,
    end_station: StationId,
    nodes: usize,
}

fn solve_piece(net: &TimeSpaceNetwork) -> Result<PieceResult> {
    let sol = solve_min_cost_circulation(net)?;
    let paths = trace_paths(net, &sol)?;
    let [path] = paths.as_slice() else {
        return Err(PlanError::Contract(format!("interval network carries {} units", paths.len())));
    };
    let actions = standby_actions(net, path);
    let routing_cost: Cost = actions.iter().map(Action::cost).sum();
    let endpoint_cost: Cost = path
        .iter()
        .map(|&a| &net.arcs[a])
        .filter(|a| !matches!(a.kind, ArcKind::Park | ArcKind::Move))
        .map(|a| a.cost)
        .sum();
    if routing_cost + endpoint_cost != sol.objective {
        return Err(PlanError::Contract("interval path cost differs from flow objective".into()));
    }
    // the last standby node on the path is where the pod stands at the end
    let end_station = path
        .iter()
        .rev()
        .flat_map(|&a| [net.arcs[a].to, net.arcs[a].from])
        .find_map(|v| match net.nodes[v as usize].kind {
            NodeKind::Standby { station, .. } => Some(station),
            _ => None,
        })
        .ok_or_else(|| PlanError::Contract("interval path never touches a standby node".into()))?;
    Ok(PieceResult { actions, routing_cost, network_cost: sol.objective, end_station, nodes: net.node_count() })
}

/// Fewest steps needed between each station pair at resolution `dt`,
/// allowing intermediate stops.
fn hop_steps(inst: &Instance, dt: Seconds) -> Vec<Vec<i64>> {
    let n = inst.station_count();
    let mut h: Vec<Vec<i64>> = (0..n)
        .map(|a| (0..n).map(|b| ceil_to(inst.travel.0[a][b], dt) / dt).collect())
        .collect();
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                h[a][b] = h[a][b].min(h[a][k] + h[k][b]);
            }
        }
    }
    h
}

fn pieces(total_steps: i64, max_steps: i64) -> Vec<i64> {
    let count = (total_steps + max_steps - 1) / max_steps;
    let (base, extra) = (total_steps / count, total_steps % count);
    (0..count).map(|i| base + i64::from(i < extra)).collect()
}

/// Solves one interval at one resolution, splitting it into sequential
/// pieces when the whole window would exceed the cap. Moves never cross a
/// piece boundary; each non-final piece may only end at stations from which
/// the rest of the chain stays feasible.
fn solve_at(
    p: &IntervalProblem,
    inst: &Instance,
    routes: &[PodRoute],
    costs: &CostConfig,
    horizon: Seconds,
    dt: Seconds,
    cap: Option<CapPolicy>,
) -> Result<IntervalOutcome> {
    let window = p.window(routes, dt, horizon);
    let infeasible = |reason: String| PlanError::InfeasibleInterval {
        pod: p.pod,
        category: p.category.to_string(),
        dt,
        reason,
    };
    if window.0 > window.1 {
        return Err(infeasible(format!("snapped window [{}, {}] is inverted", window.0, window.1)));
    }
    let origin = origin_for(p, routes, dt, costs);
    let target = target_for(p, routes, dt, costs);
    let stations = inst.station_count();
    let total_steps = (window.1 - window.0) / dt;
    let full_nodes = interval_node_count(&origin, &target, stations, total_steps as usize + 1);

    let fits = cap.is_none_or(|c| full_nodes <= c.max_nodes);
    if fits {
        let spec = IntervalSpec { category: p.category, window, origin, target };
        let net = build_interval_network(&spec, &inst.travel, costs, dt)?;
        let piece = solve_piece(&net).map_err(|e| match e {
            PlanError::InfeasibleRoute { route } => infeasible(format!("{route} unreachable in window")),
            other => other,
        })?;
        return Ok(IntervalOutcome {
            problem: p.clone(),
            dt,
            window,
            routing_cost: piece.routing_cost,
            network_cost: piece.network_cost,
            subintervals: 1,
            max_nodes: piece.nodes,
            actions: piece.actions,
        });
    }

    let cap = cap.expect("uncapped intervals always fit");
    // 2 + S * (steps + 1) + 2 endpoint nodes per piece
    let max_steps = ((cap.max_nodes - 4) / stations) as i64 - 1;
    let lens = pieces(total_steps, max_steps);
    let hops = hop_steps(inst, dt);

    // allowed[k]: stations where piece k may start
    let mut allowed = vec![vec![false; stations]; lens.len() + 1];
    match &target {
        Target::Requested { station, .. } => allowed[lens.len()][station.0] = true,
        Target::AnyStation { .. } => allowed[lens.len()].iter_mut().for_each(|a| *a = true),
    }
    for k in (0..lens.len()).rev() {
        for s in 0..stations {
            allowed[k][s] = (0..stations).any(|s2| allowed[k + 1][s2] && hops[s][s2] <= lens[k]);
        }
    }
    let entry_ok = match &origin {
        Origin::Released { station, .. } | Origin::At { station } => allowed[0][station.0],
        Origin::Fleet => allowed[0].iter().any(|&a| a),
    };
    if !entry_ok {
        return Err(infeasible(format!(
            "{} pieces of at most {max_steps} steps cannot reach the target without crossing a boundary",
            lens.len()
        )));
    }

    let mut actions = Vec::new();
    let (mut routing_cost, mut network_cost, mut max_nodes) = (0, 0, 0);
    let mut t0 = window.0;
    let mut here: Option<StationId> = None;
    for (k, &len) in lens.iter().enumerate() {
        let t1 = t0 + len * dt;
        let last = k + 1 == lens.len();
        let piece_origin = match here {
            None => origin.clone(),
            Some(station) => Origin::At { station },
        };
        let piece_target = if last {
            target.clone()
        } else {
            Target::AnyStation { allowed: Some(allowed[k + 1].clone()) }
        };
        let spec = IntervalSpec { category: p.category, window: (t0, t1), origin: piece_origin, target: piece_target };
        let net = build_interval_network(&spec, &inst.travel, costs, dt)?;
        let piece = solve_piece(&net).map_err(|e| match e {
            PlanError::InfeasibleRoute { .. } => infeasible(format!("piece {k} of {} has no path", lens.len())),
            other => other,
        })?;
        routing_cost += piece.routing_cost;
        network_cost += piece.network_cost;
        max_nodes = max_nodes.max(piece.nodes);
        actions.extend(piece.actions);
        here = Some(piece.end_station);
        t0 = t1;
    }
    Ok(IntervalOutcome {
        problem: p.clone(),
        dt,
        window,
        routing_cost,
        network_cost,
        subintervals: lens.len(),
        max_nodes,
        actions,
    })
}

/// Unit-flow optimum of one interval. A Between interval that does not fit
/// the grid is retried at each finer resolution of the fallback ladder;
/// the last rung (1 s) is exact for integer-second data.
pub fn solve_interval(
    p: &IntervalProblem,
    inst: &Instance,
    routes: &[PodRoute],
    costs: &CostConfig,
    grid: &TimeGrid,
    cap: Option<CapPolicy>,
) -> Result<IntervalOutcome> {
    if let Some(c) = cap {
        c.check(inst.station_count())?;
    }
    let rungs = match p.category {
        Category::Between => grid.fallback_ladder(),
        _ => vec![grid.dt],
    };
    let mut last_err = None;
    for dt in rungs {
        match solve_at(p, inst, routes, costs, grid.horizon, dt, cap) {
            Ok(out) => return Ok(out),
            Err(e) if e.is_infeasible() => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    let err = last_err.expect("ladder is never empty");
    // feasible without the cap means the cap is what broke it
    if cap.is_some() && solve_interval(p, inst, routes, costs, grid, None).is_ok() {
        return Err(PlanError::Config(format!(
            "node cap {} splits pod {}'s {} interval into pieces too short to travel between stations",
            cap.unwrap().max_nodes,
            p.pod,
            p.category
        )));
    }
    Err(err)
}

/// Stitches chains, interval routings and serve actions into itineraries.
/// A route's boundary gap is charged at the resolution of the interval next
/// to it, or at the base resolution when there is none.
pub fn assemble(
    chains: &[AssignmentChain],
    outcomes: &[IntervalOutcome],
    routes: &[PodRoute],
    costs: &CostConfig,
    grid: &TimeGrid,
) -> Result<(Vec<PodItinerary>, Cost)> {
    let mut by_pod: Vec<Vec<&IntervalOutcome>> = vec![Vec::new(); chains.len()];
    for o in outcomes {
        by_pod[o.problem.pod].push(o);
    }
    let mut itins = Vec::with_capacity(chains.len());
    for (pod, chain) in chains.iter().enumerate() {
        let find = |cat: Category, release: Option<usize>, request: Option<usize>| {
            by_pod[pod]
                .iter()
                .find(|o| o.problem.category == cat && o.problem.release == release && o.problem.request == request)
                .copied()
        };
        let mut it = PodItinerary { pod, fleet_cost: costs.fleet, actions: Vec::new() };
        let lead = find(Category::Unassigned, None, chain.first().copied());
        if let Some(o) = lead {
            o.actions.iter().cloned().for_each(|a| it.push(a));
        }
        let mut before = lead;
        for (i, &r) in chain.iter().enumerate() {
            let after = match chain.get(i + 1) {
                Some(&nx) => find(Category::Between, Some(r), Some(nx)),
                None => find(Category::Terminal, Some(r), None),
            };
            let expected = i + 1 < chain.len();
            if expected && after.is_none() {
                return Err(PlanError::Contract(format!("pod {pod} misses an interval after route {r}")));
            }
            let d_in = before.map_or(grid.dt, |o| o.dt);
            let d_out = after.map_or(grid.dt, |o| o.dt);
            let route = &routes[r];
            it.push(Action::Serve {
                route: r,
                label: route.label(),
                from: route.start_station(),
                to: route.end_station(),
                start_s: floor_to(route.start_time(), d_in),
                end_s: ceil_to(route.end_time(), d_out),
                cost: gap_at_request(route, d_in, costs) + gap_at_release(route, d_out, costs),
            });
            if let Some(o) = after {
                o.actions.iter().cloned().for_each(|a| it.push(a));
            }
            before = after;
        }
        itins.push(it);
    }
    let objective = itins.iter().map(PodItinerary::total_cost).sum();
    Ok((itins, objective))
}

#[derive(Clone, Debug, Default)]
pub struct HierarchicalOptions {
    pub cap: Option<CapPolicy>,
    /// Seed for choosing among maximum matchings; `None` scans routes in
    /// index order.
    pub matching_seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct HierarchicalPlan {
    pub routes: Vec<PodRoute>,
    pub chains: Vec<AssignmentChain>,
    pub dag_edges: usize,
    pub matching_size: usize,
    pub fleet: usize,
    pub intervals: Vec<IntervalOutcome>,
    pub itineraries: Vec<PodItinerary>,
    pub objective: Cost,
}

pub fn plan_hierarchical(
    inst: &Instance,
    grid: &TimeGrid,
    costs: &CostConfig,
    opts: &HierarchicalOptions,
) -> Result<HierarchicalPlan> {
    inst.ensure_valid()?;
    costs.check_covers(inst.station_count())?;
    if let Some(c) = opts.cap {
        c.check(inst.station_count())?;
    }
    let routes = decompose_instance(inst);
    for r in &routes {
        crate::model::snap_window(r, grid)?;
    }
    let dag = build_compatibility_dag(&routes, &inst.travel)?;
    let matching = match opts.matching_seed {
        Some(seed) => max_matching_permuted(&dag, seed),
        None => max_matching(&dag),
    };
    let chains = reconstruct_chains(&matching, &routes);
    let problems = plan_intervals(&chains, &routes, grid);
    let intervals = problems
        .par_iter()
        .map(|p| solve_interval(p, inst, &routes, costs, grid, opts.cap))
        .collect::<Result<Vec<_>>>()?;
    let (itineraries, objective) = assemble(&chains, &intervals, &routes, costs, grid)?;
    Ok(HierarchicalPlan {
        dag_edges: dag.edge_count(),
        matching_size: matching.size(),
        fleet: chains.len(),
        routes,
        chains,
        intervals,
        itineraries,
        objective,
    })
}

#[derive(Serialize)]
struct IntervalRow {
    pod: usize,
    category: String,
    window_start_s: Seconds,
    window_end_s: Seconds,
    dt_s: Seconds,
    cost_micro: String,
    subintervals: usize,
    max_nodes: usize,
}

/// Per-interval cost breakdown.
pub fn write_interval_csv<W: std::io::Write>(outcomes: &[IntervalOutcome], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for o in outcomes {
        w.serialize(IntervalRow {
            pod: o.problem.pod,
            category: o.problem.category.to_string(),
            window_start_s: o.window.0,
            window_end_s: o.window.1,
            dt_s: o.dt,
            cost_micro: format!("{:.3}", crate::model::units_to_micro(o.routing_cost)),
            subintervals: o.subintervals,
            max_nodes: o.max_nodes,
        })?;
    }
    w.flush().map_err(|e| PlanError::io("<interval csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{BusRun, Station, Stop, TravelTimeMatrix, Visit};
    use crate::oracle::audit;

    fn s1(n: usize) -> CostConfig {
        CostConfig::uniform(13.7, 0.03, 0.03, n).unwrap()
    }

    fn route(station_in: usize, t0: Seconds, station_out: usize, t1: Seconds) -> PodRoute {
        PodRoute {
            run: 0,
            run_id: "x".into(),
            seq: 0,
            visits: vec![
                Visit { station: StationId(station_in), time_s: t0 },
                Visit { station: StationId(station_out), time_s: t1 },
            ],
        }
    }

    #[test]
    fn full_horizon_chain_has_no_intervals() {
        let routes = vec![route(0, 0, 1, 600)];
        let grid = TimeGrid::new(60, 600).unwrap();
        assert!(plan_intervals(&[vec![0]], &routes, &grid).is_empty());
    }

    #[test]
    fn interval_counting() {
        let routes = vec![route(0, 60, 1, 120), route(1, 180, 0, 240), route(0, 300, 1, 360)];
        let grid = TimeGrid::new(60, 600).unwrap();
        let cats: Vec<Category> = plan_intervals(&[vec![0, 1, 2]], &routes, &grid).iter().map(|p| p.category).collect();
        assert_eq!(cats, vec![Category::Unassigned, Category::Between, Category::Between, Category::Terminal]);
    }

    #[test]
    fn same_station_gap_parks() {
        let inst = fixtures::fig4_instance();
        let routes = vec![route(0, 0, 1, 120), route(1, 240, 2, 420)];
        let grid = TimeGrid::new(60, 600).unwrap();
        let costs = s1(3);
        let p = IntervalProblem { pod: 0, category: Category::Between, release: Some(0), request: Some(1) };
        let out = solve_interval(&p, &inst, &routes, &costs, &grid, None).unwrap();
        assert_eq!(out.routing_cost, costs.park(StationId(1), 120));
        assert_eq!(out.actions.len(), 1);
    }

    #[test]
    fn zero_length_window_is_free() {
        let inst = fixtures::fig4_instance();
        let routes = vec![route(0, 0, 1, 120), route(1, 120, 2, 420)];
        let grid = TimeGrid::new(60, 600).unwrap();
        let p = IntervalProblem { pod: 0, category: Category::Between, release: Some(0), request: Some(1) };
        let out = solve_interval(&p, &inst, &routes, &s1(3), &grid, None).unwrap();
        assert_eq!((out.routing_cost, out.actions.len()), (0, 0));
    }

    #[test]
    fn exact_slack_move() {
        let inst = fixtures::fig4_instance();
        let routes = vec![route(1, 0, 0, 60), route(1, 180, 2, 420)];
        let grid = TimeGrid::new(60, 600).unwrap();
        let costs = s1(3);
        let p = IntervalProblem { pod: 0, category: Category::Between, release: Some(0), request: Some(1) };
        let out = solve_interval(&p, &inst, &routes, &costs, &grid, None).unwrap();
        assert_eq!(out.routing_cost, costs.movement(120));
    }

    #[test]
    fn coarse_grid_falls_back_to_finer_step() {
        // 120 s of travel in a 130 s gap fits continuously but not on a 60 s grid
        let inst = fixtures::fig4_instance();
        let routes = vec![route(1, 0, 0, 70), route(1, 200, 2, 420)];
        let grid = TimeGrid::new(60, 600).unwrap();
        let p = IntervalProblem { pod: 0, category: Category::Between, release: Some(0), request: Some(1) };
        let out = solve_interval(&p, &inst, &routes, &s1(3), &grid, None).unwrap();
        assert!(out.dt < 60);
        assert!(out.window.1 - out.window.0 >= 120);
    }

    #[test]
    fn fig4_plan_is_clean() {
        let inst = fixtures::fig4_instance();
        let grid = TimeGrid::new(30, 600).unwrap();
        let costs = s1(3);
        let plan = plan_hierarchical(&inst, &grid, &costs, &HierarchicalOptions::default()).unwrap();
        assert_eq!(plan.fleet, 2);
        let rep = audit(&plan.itineraries, &inst, &plan.routes, &grid, &costs, plan.objective);
        assert!(rep.is_clean(), "{rep:?}");
        assert_eq!(plan.objective, crate::model::currency_to_units(27.64));
    }

    #[test]
    fn fleet_only_objective_is_fleet_times_rate() {
        let inst = fixtures::fig1_instance();
        let grid = TimeGrid::for_instance(&inst, 30).unwrap();
        let costs = CostConfig::uniform(13.7, 0.0, 0.0, 7).unwrap();
        let plan = plan_hierarchical(&inst, &grid, &costs, &HierarchicalOptions::default()).unwrap();
        assert_eq!(plan.fleet, 6);
        assert_eq!(plan.objective, 6 * costs.fleet);
    }

    #[test]
    fn cap_below_minimum_is_rejected() {
        let inst = fixtures::fig4_instance();
        let grid = TimeGrid::new(30, 600).unwrap();
        let opts = HierarchicalOptions { cap: Some(CapPolicy { max_nodes: 9 }), matching_seed: None };
        assert!(matches!(plan_hierarchical(&inst, &grid, &s1(3), &opts), Err(PlanError::Config(_))));
    }

    #[test]
    fn capped_matches_uncapped_with_large_cap_and_dominates_otherwise() {
        let inst = fixtures::fig1_instance();
        let grid = TimeGrid::for_instance(&inst, 30).unwrap();
        let costs = CostConfig::from_currency(13.7, 0.03, &[0.08, 0.01, 0.05, 0.02, 0.07, 0.03, 0.04]).unwrap();
        let base = plan_hierarchical(&inst, &grid, &costs, &HierarchicalOptions::default()).unwrap();
        let big = HierarchicalOptions { cap: Some(CapPolicy { max_nodes: 100_000 }), matching_seed: None };
        let same = plan_hierarchical(&inst, &grid, &costs, &big).unwrap();
        assert_eq!(same.objective, base.objective);
        assert_eq!(same.itineraries, base.itineraries);

        let tight = HierarchicalOptions { cap: Some(CapPolicy { max_nodes: 7 * 12 + 4 }), matching_seed: None };
        let capped = plan_hierarchical(&inst, &grid, &costs, &tight).unwrap();
        assert!(capped.objective >= base.objective);
        assert!(capped.intervals.iter().any(|o| o.subintervals >= 2));
        assert!(capped.intervals.iter().all(|o| o.max_nodes <= 7 * 12 + 4));
        let rep = audit(&capped.itineraries, &inst, &capped.routes, &grid, &costs, capped.objective);
        assert!(rep.is_clean(), "{rep:?}");
    }

    #[test]
    fn uniform_prices_make_capping_free() {
        let inst = fixtures::fig1_instance();
        let grid = TimeGrid::for_instance(&inst, 30).unwrap();
        let costs = s1(7);
        let base = plan_hierarchical(&inst, &grid, &costs, &HierarchicalOptions::default()).unwrap();
        let tight = HierarchicalOptions { cap: Some(CapPolicy { max_nodes: 7 * 12 + 4 }), matching_seed: None };
        let capped = plan_hierarchical(&inst, &grid, &costs, &tight).unwrap();
        assert_eq!(capped.objective, base.objective);
    }

    #[test]
    fn too_tight_cap_is_a_configuration_error() {
        // the only useful move takes 9 steps; pieces of one step cannot make it
        let inst = Instance {
            stations: (0..2).map(|i| Station { id: StationId(i), label: format!("{i}"), lat: None, lon: None }).collect(),
            travel: TravelTimeMatrix(vec![vec![0, 540], vec![540, 0]]),
            runs: vec![
                BusRun { id: "a".into(), stops: vec![Stop { station: StationId(0), arrival_s: 0, demand_pods: 1 }] },
                BusRun { id: "b".into(), stops: vec![Stop { station: StationId(1), arrival_s: 600, demand_pods: 1 }] },
            ],
            horizon_s: 660,
        };
        let grid = TimeGrid::new(60, 660).unwrap();
        let opts = HierarchicalOptions { cap: Some(CapPolicy { max_nodes: CapPolicy::minimum(2) }), matching_seed: None };
        let err = plan_hierarchical(&inst, &grid, &s1(2), &opts).unwrap_err();
        assert!(matches!(err, PlanError::Config(_)), "{err}");
    }
}
