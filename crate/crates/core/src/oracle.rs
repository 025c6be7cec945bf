//! Exhaustive reference solvers and the itinerary audit. Nothing here calls
//! the network builders, the flow solver or the matcher.

use std::collections::HashMap;

use crate::error::{PlanError, Result};
use crate::itinerary::{action_cost, check_constraints, Action, PodItinerary};
use crate::model::{Cost, CostConfig, Instance, PodRoute, Seconds, StationId, TimeGrid, Violation};

pub const MAX_COVER_VERTICES: usize = 12;
pub const MAX_SCHEDULE_ROUTES: usize = 4;
pub const MAX_SCHEDULE_STATIONS: usize = 3;
pub const MAX_SCHEDULE_STEPS: i64 = 12;

/// Fewest contiguous routes covering a demand vector, by memoized search
/// over every way of cutting routes. The first stop with remaining demand
/// must start a route; every admissible end for it is tried.
pub fn brute_force_route_cover(demands: &[u32]) -> Result<usize> {
    if demands.len() > 10 || demands.iter().any(|&d| d > 8) {
        return Err(PlanError::OracleLimit(format!("demand vector {demands:?} too large")));
    }
    fn go(rem: &mut Vec<u32>, memo: &mut HashMap<Vec<u32>, usize>) -> usize {
        let Some(first) = rem.iter().position(|&d| d > 0) else {
            return 0;
        };
        if let Some(&v) = memo.get(rem.as_slice()) {
            return v;
        }
        let mut best = usize::MAX;
        let mut end = first;
        while end < rem.len() && rem[end] > 0 {
            for d in &mut rem[first..=end] {
                *d -= 1;
            }
            best = best.min(1 + go(rem, memo));
            for d in &mut rem[first..=end] {
                *d += 1;
            }
            end += 1;
        }
        memo.insert(rem.clone(), best);
        best
    }
    Ok(go(&mut demands.to_vec(), &mut HashMap::new()))
}

/// Minimum vertex-disjoint path cover of a DAG given as successor lists, by
/// exhaustive choice of at most one successor per vertex with every vertex
/// chosen at most once.
pub fn brute_force_path_cover(succ: &[Vec<u32>]) -> Result<usize> {
    let n = succ.len();
    if n > MAX_COVER_VERTICES {
        return Err(PlanError::OracleLimit(format!("{n} vertices exceed {MAX_COVER_VERTICES}")));
    }
    // depth-first cycle check, colors 0 = new, 1 = open, 2 = closed
    fn cyclic(v: usize, succ: &[Vec<u32>], color: &mut [u8]) -> bool {
        color[v] = 1;
        for &w in &succ[v] {
            let w = w as usize;
            if color[w] == 1 || (color[w] == 0 && cyclic(w, succ, color)) {
                return true;
            }
        }
        color[v] = 2;
        false
    }
    let mut color = vec![0u8; n];
    if (0..n).any(|v| color[v] == 0 && cyclic(v, succ, &mut color)) {
        return Err(PlanError::OracleLimit("graph has a cycle".into()));
    }
    fn go(v: usize, succ: &[Vec<u32>], taken: &mut [bool], chosen: usize, best: &mut usize) {
        let n = succ.len();
        if v == n {
            *best = (*best).max(chosen);
            return;
        }
        // every remaining vertex adds at most one edge
        if chosen + (n - v) <= *best {
            return;
        }
        for &w in &succ[v] {
            let w = w as usize;
            if !taken[w] {
                taken[w] = true;
                go(v + 1, succ, taken, chosen + 1, best);
                taken[w] = false;
            }
        }
        go(v + 1, succ, taken, chosen, best);
    }
    let mut best = 0;
    go(0, succ, &mut vec![false; n], 0, &mut best);
    Ok(n - best)
}

/// How the schedule oracle decides that one route may follow another.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reachability {
    /// On the given grid: snapped windows and rounded-up travel times.
    Discretized,
    /// In continuous time, with intervals costed on a 1 s grid.
    Continuous,
}

/// Cheapest park/move sequence on a `d`-second grid from one of `sources`
/// (station, entry cost) at `t0` to `target` at `t1`, or to any station
/// when `target` is `None`. Returns the final station too.
fn interval_dp(
    inst: &Instance,
    costs: &CostConfig,
    d: Seconds,
    t0: Seconds,
    t1: Seconds,
    sources: &[(usize, Cost)],
    target: Option<usize>,
) -> Option<(Cost, usize, Vec<Action>)> {
    if t1 < t0 {
        return None;
    }
    let n = inst.station_count();
    let steps = ((t1 - t0) / d) as usize;
    const NONE: Cost = Cost::MAX;
    let mut cost = vec![vec![NONE; n]; steps + 1];
    // predecessor (step, station)
    let mut pred = vec![vec![(usize::MAX, usize::MAX); n]; steps + 1];
    for &(s, c) in sources {
        if c < cost[0][s] {
            cost[0][s] = c;
        }
    }
    for k in 0..steps {
        for s in 0..n {
            let c = cost[k][s];
            if c == NONE {
                continue;
            }
            let park = c + costs.park_rate[s] * d;
            if park < cost[k + 1][s] {
                cost[k + 1][s] = park;
                pred[k + 1][s] = (k, s);
            }
            for s2 in 0..n {
                if s2 == s {
                    continue;
                }
                let tau = inst.travel.0[s][s2];
                let hop = (tau + d - 1) / d;
                let k2 = k + hop as usize;
                if k2 > steps {
                    continue;
                }
                let mv = c + costs.move_rate * hop * d;
                if mv < cost[k2][s2] {
                    cost[k2][s2] = mv;
                    pred[k2][s2] = (k, s);
                }
            }
        }
    }
    let end = match target {
        Some(s) => s,
        None => (0..n).min_by_key(|&s| (cost[steps][s], s))?,
    };
    if cost[steps][end] == NONE {
        return None;
    }
    let mut actions = Vec::new();
    let (mut k, mut s) = (steps, end);
    while k > 0 {
        let (pk, ps) = pred[k][s];
        let (a, b) = (t0 + pk as Seconds * d, t0 + k as Seconds * d);
        if ps == s {
            actions.push(Action::Park { station: StationId(s), start_s: a, end_s: b, cost: costs.park_rate[s] * (b - a) });
        } else {
            actions.push(Action::Move { from: StationId(ps), to: StationId(s), start_s: a, end_s: b, cost: costs.move_rate * (b - a) });
        }
        k = pk;
        s = ps;
    }
    actions.reverse();
    Some((cost[steps][end], end, actions))
}

fn floor_div(t: Seconds, d: Seconds) -> Seconds {
    t.div_euclid(d) * d
}

fn ceil_div(t: Seconds, d: Seconds) -> Seconds {
    -(-t).div_euclid(d) * d
}

/// Cost and witness of one pod serving `chain` in order, or `None` when the
/// chain is not feasible under `mode`.
fn chain_cost(
    inst: &Instance,
    routes: &[PodRoute],
    chain: &[usize],
    grid: &TimeGrid,
    costs: &CostConfig,
    mode: Reachability,
) -> Option<(Cost, Vec<Action>)> {
    let d = match mode {
        Reachability::Discretized => grid.dt,
        Reachability::Continuous => 1,
    };
    if mode == Reachability::Continuous {
        for w in chain.windows(2) {
            let (a, b) = (&routes[w[0]], &routes[w[1]]);
            if inst.travel.0[a.end_station().0][b.start_station().0] > b.start_time() - a.end_time() {
                return None;
            }
        }
    }
    let mut actions = Vec::new();
    let first = &routes[chain[0]];
    let lo = floor_div(first.start_time(), d);
    let all: Vec<(usize, Cost)> = (0..inst.station_count()).map(|s| (s, 0)).collect();
    let (mut total, _, acts) = interval_dp(inst, costs, d, 0, lo, &all, Some(first.start_station().0))?;
    total += costs.fleet;
    actions.extend(acts);
    for (i, &r) in chain.iter().enumerate() {
        let route = &routes[r];
        let lo = floor_div(route.start_time(), d);
        let hi = ceil_div(route.end_time(), d);
        let gap = costs.park_rate[route.start_station().0] * (route.start_time() - lo)
            + costs.park_rate[route.end_station().0] * (hi - route.end_time());
        total += gap;
        actions.push(Action::Serve {
            route: r,
            label: route.label(),
            from: route.start_station(),
            to: route.end_station(),
            start_s: lo,
            end_s: hi,
            cost: gap,
        });
        let (until, target) = match chain.get(i + 1) {
            Some(&nx) => (floor_div(routes[nx].start_time(), d), Some(routes[nx].start_station().0)),
            None => (grid.horizon, None),
        };
        let (c, _, acts) = interval_dp(inst, costs, d, hi, until, &[(route.end_station().0, 0)], target)?;
        total += c;
        actions.extend(acts);
    }
    Some((total, actions))
}

/// Exact optimum of the whole model on a tiny instance: every partition of
/// the routes into ordered chains, each chain costed by exhaustive dynamic
/// programming over (station, step) states.
pub fn brute_force_schedule(
    inst: &Instance,
    routes: &[PodRoute],
    grid: &TimeGrid,
    costs: &CostConfig,
    mode: Reachability,
) -> Result<(Cost, Vec<PodItinerary>)> {
    if routes.len() > MAX_SCHEDULE_ROUTES
        || inst.station_count() > MAX_SCHEDULE_STATIONS
        || grid.horizon / grid.dt > MAX_SCHEDULE_STEPS
    {
        return Err(PlanError::OracleLimit(format!(
            "{} routes, {} stations, {} steps exceed {MAX_SCHEDULE_ROUTES}/{MAX_SCHEDULE_STATIONS}/{MAX_SCHEDULE_STEPS}",
            routes.len(),
            inst.station_count(),
            grid.horizon / grid.dt
        )));
    }
    if routes.iter().any(|r| ceil_div(r.end_time(), grid.dt) > grid.horizon || r.start_time() < 0) {
        return Err(PlanError::Validation("route window outside horizon".into()));
    }

    let mut memo: HashMap<Vec<usize>, Option<(Cost, Vec<Action>)>> = HashMap::new();
    let mut best: Option<(Cost, Vec<Vec<usize>>)> = None;
    let mut chains: Vec<Vec<usize>> = Vec::new();

    fn enumerate(
        next: usize,
        chains: &mut Vec<Vec<usize>>,
        eval: &mut dyn FnMut(&[Vec<usize>]),
        n: usize,
    ) {
        if next == n {
            eval(chains);
            return;
        }
        for c in 0..chains.len() {
            for pos in 0..=chains[c].len() {
                chains[c].insert(pos, next);
                enumerate(next + 1, chains, eval, n);
                chains[c].remove(pos);
            }
        }
        chains.push(vec![next]);
        enumerate(next + 1, chains, eval, n);
        chains.pop();
    }

    let mut eval = |part: &[Vec<usize>]| {
        let mut total = 0;
        for chain in part {
            let entry = memo
                .entry(chain.clone())
                .or_insert_with(|| chain_cost(inst, routes, chain, grid, costs, mode));
            match entry {
                Some((c, _)) => total += *c,
                None => return,
            }
        }
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, part.to_vec()));
        }
    };
    enumerate(0, &mut chains, &mut eval, routes.len());

    let Some((objective, part)) = best else {
        return Err(PlanError::InfeasibleRoute { route: "no feasible chain partition".into() });
    };
    let itins = part
        .iter()
        .enumerate()
        .map(|(pod, chain)| {
            let (_, actions) = chain_cost(inst, routes, chain, grid, costs, mode).expect("memoized chain is feasible");
            let mut it = PodItinerary { pod, fleet_cost: costs.fleet, actions: Vec::new() };
            for a in actions {
                it.push(a);
            }
            it
        })
        .collect();
    Ok((objective, itins))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditReport {
    pub violations: Vec<Violation>,
    /// Objective recomputed from raw rates: one fleet charge per itinerary
    /// plus every action's cost.
    pub recomputed: Cost,
    pub claimed: Cost,
}

impl AuditReport {
    pub fn objective_matches(&self) -> bool {
        self.recomputed == self.claimed
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.objective_matches()
    }
}

/// Constraint check plus an independent recomputation of every cost.
pub fn audit(
    itins: &[PodItinerary],
    inst: &Instance,
    routes: &[PodRoute],
    grid: &TimeGrid,
    costs: &CostConfig,
    claimed: Cost,
) -> AuditReport {
    let mut violations = check_constraints(itins, inst, routes, grid);
    let mut recomputed = 0;
    for it in itins {
        if it.fleet_cost != costs.fleet {
            violations.push(Violation::new(
                format!("pod {}", it.pod),
                format!("fleet charge {} differs from rate {}", it.fleet_cost, costs.fleet),
            ));
        }
        recomputed += costs.fleet;
        for a in &it.actions {
            if let Action::Serve { route, .. } = a {
                if *route >= routes.len() {
                    continue;
                }
            }
            let c = action_cost(a, routes, costs);
            if c != a.cost() {
                violations.push(Violation::new(
                    format!("pod {}", it.pod),
                    format!("{} at {} s claims cost {}, rates give {c}", a.kind(), a.start_s(), a.cost()),
                ));
            }
            recomputed += c;
        }
    }
    AuditReport { violations, recomputed, claimed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::decompose_instance;
    use crate::fixtures;
    use crate::model::{BusRun, Station, Stop, TravelTimeMatrix};

    #[test]
    fn route_cover_examples() {
        assert_eq!(brute_force_route_cover(&[3, 3, 2, 2]).unwrap(), 3);
        assert_eq!(brute_force_route_cover(&[1, 0, 2, 2, 0, 1]).unwrap(), 4);
        assert_eq!(brute_force_route_cover(&[1, 0, 2]).unwrap(), 3);
        assert_eq!(brute_force_route_cover(&[]).unwrap(), 0);
        assert!(brute_force_route_cover(&[9]).is_err());
    }

    #[test]
    fn path_cover_examples() {
        // A, B -> C -> D, E -> F -> G
        let (a, b, c, d, e, f, g) = (0u32, 1, 2, 3, 4, 5, 6);
        let mut succ = vec![vec![]; 7];
        succ[a as usize] = vec![c];
        succ[b as usize] = vec![c];
        succ[c as usize] = vec![d];
        succ[e as usize] = vec![f];
        succ[f as usize] = vec![g];
        succ[d as usize] = vec![];
        assert_eq!(brute_force_path_cover(&succ).unwrap(), 3);
        assert_eq!(brute_force_path_cover(&vec![vec![]; 4]).unwrap(), 4);
        assert_eq!(brute_force_path_cover(&[vec![1], vec![2], vec![]]).unwrap(), 1);
        assert!(brute_force_path_cover(&vec![vec![]; 13]).is_err());
        assert!(brute_force_path_cover(&[vec![1], vec![0]]).is_err());
    }

    fn single(horizon: Seconds, arrival: Seconds) -> Instance {
        Instance {
            stations: vec![Station { id: StationId(0), label: "a".into(), lat: None, lon: None }],
            travel: TravelTimeMatrix(vec![vec![0]]),
            runs: vec![BusRun { id: "x".into(), stops: vec![Stop { station: StationId(0), arrival_s: arrival, demand_pods: 1 }] }],
            horizon_s: horizon,
        }
    }

    #[test]
    fn one_route_one_station() {
        let inst = single(180, 70);
        let routes = decompose_instance(&inst);
        let grid = TimeGrid::new(60, 180).unwrap();
        let costs = CostConfig::uniform(13.7, 0.03, 0.03, 1).unwrap();
        let (obj, itins) = brute_force_schedule(&inst, &routes, &grid, &costs, Reachability::Discretized).unwrap();
        // gaps of 10 s and 49 s, 120 s of standby before and after
        assert_eq!(obj, costs.fleet + costs.park(StationId(0), 179));
        assert_eq!(itins.len(), 1);
        let rep = audit(&itins, &inst, &routes, &grid, &costs, obj);
        assert!(rep.is_clean(), "{rep:?}");
    }

    #[test]
    fn fig4_under_fleet_only_costs() {
        let inst = fixtures::fig4_instance();
        let routes = decompose_instance(&inst);
        let grid = TimeGrid::new(60, 600).unwrap();
        let costs = CostConfig::uniform(13.7, 0.0, 0.0, 3).unwrap();
        let (obj, itins) = brute_force_schedule(&inst, &routes, &grid, &costs, Reachability::Discretized).unwrap();
        assert_eq!(obj, 2 * costs.fleet);
        assert_eq!(itins.len(), 2);
    }

    #[test]
    fn fig4_under_all_costs() {
        let inst = fixtures::fig4_instance();
        let routes = decompose_instance(&inst);
        let grid = TimeGrid::new(60, 600).unwrap();
        let costs = CostConfig::uniform(13.7, 0.03, 0.03, 3).unwrap();
        for mode in [Reachability::Discretized, Reachability::Continuous] {
            let (obj, itins) = brute_force_schedule(&inst, &routes, &grid, &costs, mode).unwrap();
            assert_eq!(obj, crate::model::currency_to_units(27.64));
            assert!(audit(&itins, &inst, &routes, &grid, &costs, obj).is_clean());
        }
    }

    #[test]
    fn incompatible_pair_needs_two_pods() {
        let mut inst = fixtures::fig4_instance();
        inst.runs = vec![
            BusRun { id: "p".into(), stops: vec![Stop { station: StationId(0), arrival_s: 0, demand_pods: 1 }, Stop { station: StationId(2), arrival_s: 300, demand_pods: 1 }] },
            BusRun { id: "q".into(), stops: vec![Stop { station: StationId(0), arrival_s: 360, demand_pods: 1 }, Stop { station: StationId(1), arrival_s: 480, demand_pods: 1 }] },
        ];
        let routes = decompose_instance(&inst);
        let grid = TimeGrid::new(60, 600).unwrap();
        let costs = CostConfig::uniform(13.7, 0.03, 0.03, 3).unwrap();
        let (obj, itins) = brute_force_schedule(&inst, &routes, &grid, &costs, Reachability::Discretized).unwrap();
        assert_eq!(itins.len(), 2);
        // pod 1 parks at s3 from 300 s; pod 2 waits at s1 and ends at s2
        let idle = 300 + 360 + 120;
        assert_eq!(obj, 2 * costs.fleet + costs.park(StationId(0), idle));
    }

    #[test]
    fn oracle_refuses_large_inputs() {
        let inst = fixtures::fig1_instance();
        let routes = decompose_instance(&inst);
        let grid = TimeGrid::for_instance(&inst, 60).unwrap();
        let costs = CostConfig::uniform(13.7, 0.03, 0.03, 7).unwrap();
        assert!(matches!(
            brute_force_schedule(&inst, &routes, &grid, &costs, Reachability::Discretized),
            Err(PlanError::OracleLimit(_))
        ));
    }

    #[test]
    fn audit_flags_mutations() {
        let inst = fixtures::fig4_instance();
        let routes = decompose_instance(&inst);
        let grid = TimeGrid::new(60, 600).unwrap();
        let costs = CostConfig::uniform(13.7, 0.03, 0.03, 3).unwrap();
        let (obj, itins) = brute_force_schedule(&inst, &routes, &grid, &costs, Reachability::Discretized).unwrap();

        let rep = audit(&itins, &inst, &routes, &grid, &costs, obj + costs.fleet * 2);
        assert!(rep.violations.is_empty());
        assert!(!rep.objective_matches());

        let mut dropped = itins.clone();
        let (p, i) = dropped
            .iter()
            .enumerate()
            .find_map(|(p, it)| it.actions.iter().position(|a| a.kind() == "move").map(|i| (p, i)))
            .unwrap();
        dropped[p].actions.remove(i);
        assert!(!audit(&dropped, &inst, &routes, &grid, &costs, obj).violations.is_empty());
    }
}
