//! Reduced time-space networks.
//!
//! Nodes are numbered deterministically: Source = 0, Sink = 1, then Standby
//! nodes row-major by station and step, then Requesters, then Releasers in
//! route order. Middle vertices of in-service routes are never materialized:
//! a route is a Requester and a Releaser with no arc between them.

use std::fmt;
use std::io::{self, Write};

use serde::Serialize;

use crate::error::{PlanError, Result};
use crate::model::{
    effective_travel_time, snap_window, Cost, CostConfig, Instance, PodRoute, Seconds, StationId,
    TimeGrid, TravelTimeMatrix,
};

pub const SOURCE: u32 = 0;
pub const SINK: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Source,
    Sink,
    Standby { station: StationId, time_s: Seconds },
    Requester { route: usize },
    Releaser { route: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TsnNode {
    pub kind: NodeKind,
    pub supply: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcKind {
    ReleaserToStandby,
    StandbyToRequester,
    Move,
    Park,
    SourceToStandby,
    StandbyToSink,
    SinkToSource,
}

impl fmt::Display for ArcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ArcKind::ReleaserToStandby => "releaser_to_standby",
            ArcKind::StandbyToRequester => "standby_to_requester",
            ArcKind::Move => "move",
            ArcKind::Park => "park",
            ArcKind::SourceToStandby => "source_to_standby",
            ArcKind::StandbyToSink => "standby_to_sink",
            ArcKind::SinkToSource => "sink_to_source",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TsnArc {
    pub from: u32,
    pub to: u32,
    pub kind: ArcKind,
    pub cost: Cost,
    pub capacity: i64,
}

/// Route endpoint node with the label used in error reports.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Endpoint {
    pub route: usize,
    pub label: String,
    pub node: u32,
}

#[derive(Clone, Debug)]
pub struct TimeSpaceNetwork {
    pub dt: Seconds,
    /// First and last standby time, both multiples of `dt`.
    pub window: (Seconds, Seconds),
    pub stations: usize,
    pub nodes: Vec<TsnNode>,
    pub arcs: Vec<TsnArc>,
    pub requesters: Vec<Endpoint>,
    pub releasers: Vec<Endpoint>,
    /// Full-horizon network: pods may be created at Source and the flow is
    /// closed by the Sink-to-Source arc.
    pub circulation: bool,
}

impl TimeSpaceNetwork {
    pub fn standby_steps(&self) -> usize {
        ((self.window.1 - self.window.0) / self.dt) as usize + 1
    }

    pub fn standby_node(&self, station: StationId, time_s: Seconds) -> u32 {
        debug_assert!(time_s >= self.window.0 && time_s <= self.window.1);
        let step = ((time_s - self.window.0) / self.dt) as usize;
        (2 + station.0 * self.standby_steps() + step) as u32
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn total_supply(&self) -> i64 {
        self.nodes.iter().map(|n| n.supply).sum()
    }

    pub fn sink_to_source_arc(&self) -> Option<usize> {
        self.arcs.iter().position(|a| a.kind == ArcKind::SinkToSource)
    }

    /// Plain-text arc list, one `from to cost capacity kind` line per arc.
    pub fn dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        for a in &self.arcs {
            writeln!(out, "{} {} {} {} {}", a.from, a.to, a.cost, a.capacity, a.kind)?;
        }
        Ok(())
    }
}

/// Closed-form node count and arc upper bound of the reduced full-horizon
/// network: `2|R| + |S||T| + 2` nodes and `2|S| + |S|^2 (|T|-1) + 2|R| + 1`
/// arcs. Move arcs that would arrive after the horizon are dropped, so the
/// arc figure is only an upper bound.
pub fn count_formulas(stations: usize, steps: usize, routes: usize) -> (usize, usize) {
    let nodes = 2 * routes + stations * steps + 2;
    let arcs = 2 * stations + stations * stations * steps.saturating_sub(1) + 2 * routes + 1;
    (nodes, arcs)
}

struct Builder {
    dt: Seconds,
    window: (Seconds, Seconds),
    stations: usize,
    nodes: Vec<TsnNode>,
    arcs: Vec<TsnArc>,
}

impl Builder {
    fn new(stations: usize, dt: Seconds, window: (Seconds, Seconds)) -> Self {
        let steps = ((window.1 - window.0) / dt) as usize + 1;
        let mut nodes = Vec::with_capacity(2 + stations * steps);
        nodes.push(TsnNode { kind: NodeKind::Source, supply: 0 });
        nodes.push(TsnNode { kind: NodeKind::Sink, supply: 0 });
        for s in 0..stations {
            for k in 0..steps {
                nodes.push(TsnNode {
                    kind: NodeKind::Standby {
                        station: StationId(s),
                        time_s: window.0 + k as Seconds * dt,
                    },
                    supply: 0,
                });
            }
        }
        Self { dt, window, stations, nodes, arcs: Vec::new() }
    }

    fn steps(&self) -> usize {
        ((self.window.1 - self.window.0) / self.dt) as usize + 1
    }

    fn standby(&self, s: usize, time_s: Seconds) -> u32 {
        (2 + s * self.steps() + ((time_s - self.window.0) / self.dt) as usize) as u32
    }

    fn add_node(&mut self, kind: NodeKind, supply: i64) -> u32 {
        self.nodes.push(TsnNode { kind, supply });
        (self.nodes.len() - 1) as u32
    }

    fn arc(&mut self, from: u32, to: u32, kind: ArcKind, cost: Cost, capacity: i64) {
        self.arcs.push(TsnArc { from, to, kind, cost, capacity });
    }

    /// Park and Move arcs over the standby layer. Moves arriving after the
    /// window end are dropped.
    fn standby_layer(&mut self, travel: &TravelTimeMatrix, costs: &CostConfig, capacity: i64) {
        let steps = self.steps();
        let grid = TimeGrid { dt: self.dt, horizon: self.window.1 };
        let eff: Vec<Vec<Seconds>> = (0..self.stations)
            .map(|a| {
                (0..self.stations)
                    .map(|b| effective_travel_time(travel.0[a][b], &grid).unwrap_or(Seconds::MAX))
                    .collect()
            })
            .collect();
        for s in 0..self.stations {
            let park = costs.park(StationId(s), self.dt);
            for k in 0..steps.saturating_sub(1) {
                let t = self.window.0 + k as Seconds * self.dt;
                let here = self.standby(s, t);
                self.arc(here, here + 1, ArcKind::Park, park, capacity);
                for s2 in 0..self.stations {
                    if s2 == s {
                        continue;
                    }
                    let arrive = t + eff[s][s2];
                    if arrive > self.window.1 {
                        continue;
                    }
                    let there = self.standby(s2, arrive);
                    self.arc(here, there, ArcKind::Move, costs.movement(eff[s][s2]), capacity);
                }
            }
        }
    }

    fn finish(self, requesters: Vec<Endpoint>, releasers: Vec<Endpoint>, circulation: bool) -> TimeSpaceNetwork {
        TimeSpaceNetwork {
            dt: self.dt,
            window: self.window,
            stations: self.stations,
            nodes: self.nodes,
            arcs: self.arcs,
            requesters,
            releasers,
            circulation,
        }
    }
}

/// Discretization-gap parking charged between a route's snapped start and
/// its continuous start, and between its continuous end and snapped end.
pub fn gap_charges(route: &PodRoute, lo: Seconds, hi: Seconds, costs: &CostConfig) -> (Cost, Cost) {
    (
        costs.park(route.start_station(), route.start_time() - lo),
        costs.park(route.end_station(), hi - route.end_time()),
    )
}

/// Full-horizon network for the integrated method.
pub fn build_integrated_network(
    inst: &Instance,
    routes: &[PodRoute],
    grid: &TimeGrid,
    costs: &CostConfig,
) -> Result<TimeSpaceNetwork> {
    costs.check_covers(inst.station_count())?;
    let windows = routes
        .iter()
        .map(|r| snap_window(r, grid))
        .collect::<Result<Vec<_>>>()?;
    let n_routes = routes.len();
    let cap = n_routes as i64;
    let stations = inst.station_count();

    let mut b = Builder::new(stations, grid.dt, (0, grid.horizon));
    for s in 0..stations {
        let node = b.standby(s, 0);
        b.arc(SOURCE, node, ArcKind::SourceToStandby, costs.fleet, cap);
    }
    b.standby_layer(&inst.travel, costs, cap);
    for s in 0..stations {
        let node = b.standby(s, grid.horizon);
        b.arc(node, SINK, ArcKind::StandbyToSink, 0, cap);
    }
    b.arc(SINK, SOURCE, ArcKind::SinkToSource, 0, cap);

    let mut requesters = Vec::with_capacity(n_routes);
    for (i, r) in routes.iter().enumerate() {
        let node = b.add_node(NodeKind::Requester { route: i }, -1);
        requesters.push(Endpoint { route: i, label: r.label(), node });
    }
    let mut releasers = Vec::with_capacity(n_routes);
    for (i, r) in routes.iter().enumerate() {
        let node = b.add_node(NodeKind::Releaser { route: i }, 1);
        releasers.push(Endpoint { route: i, label: r.label(), node });
    }
    for (i, r) in routes.iter().enumerate() {
        let (lo, hi) = windows[i];
        let (start_gap, end_gap) = gap_charges(r, lo, hi, costs);
        let standby_in = b.standby(r.start_station().0, lo);
        b.arc(standby_in, requesters[i].node, ArcKind::StandbyToRequester, start_gap, 1);
        let standby_out = b.standby(r.end_station().0, hi);
        b.arc(releasers[i].node, standby_out, ArcKind::ReleaserToStandby, end_gap, 1);
    }
    Ok(b.finish(requesters, releasers, true))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Category {
    /// Pod exists but has not served anything yet.
    Unassigned,
    /// Pod between two consecutive routes of its chain.
    Between,
    /// Pod after its last route until the end of the service day.
    Terminal,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Unassigned => "unassigned",
            Category::Between => "between",
            Category::Terminal => "terminal",
        })
    }
}

/// Where the unit of flow enters an interval network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    /// New pod at any station at the window start, paying the fleet charge.
    Fleet,
    /// Released by `route` at `station` at the window start; `gap` is the
    /// end-of-route discretization charge.
    Released { route: usize, label: String, station: StationId, gap: Cost },
    /// Pod already parked at `station` (continuation of a capped interval).
    At { station: StationId },
}

/// Where the unit of flow leaves an interval network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    /// Requested by `route` at `station` at the window end.
    Requested { route: usize, label: String, station: StationId, gap: Cost },
    /// Any station at the window end; `allowed` restricts the stations.
    AnyStation { allowed: Option<Vec<bool>> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalSpec {
    pub category: Category,
    pub window: (Seconds, Seconds),
    pub origin: Origin,
    pub target: Target,
}

/// Local network for one interval of one pod. Carries exactly one unit of
/// flow. Only an `Origin::Fleet` network charges the fleet cost.
pub fn build_interval_network(
    spec: &IntervalSpec,
    travel: &TravelTimeMatrix,
    costs: &CostConfig,
    dt: Seconds,
) -> Result<TimeSpaceNetwork> {
    let (start, end) = spec.window;
    if dt <= 0 || start % dt != 0 || end % dt != 0 {
        return Err(PlanError::Validation(format!(
            "interval window [{start}, {end}] is not aligned to dt={dt}"
        )));
    }
    if start > end {
        return Err(PlanError::InfeasibleInterval {
            pod: usize::MAX,
            category: spec.category.to_string(),
            dt,
            reason: format!("window [{start}, {end}] is inverted"),
        });
    }
    let stations = travel.len();
    costs.check_covers(stations)?;
    let mut b = Builder::new(stations, dt, spec.window);
    let mut requesters = Vec::new();
    let mut releasers = Vec::new();

    match &spec.origin {
        Origin::Fleet => {
            b.nodes[SOURCE as usize].supply = 1;
            for s in 0..stations {
                let node = b.standby(s, start);
                b.arc(SOURCE, node, ArcKind::SourceToStandby, costs.fleet, 1);
            }
        }
        Origin::At { station } => {
            b.nodes[SOURCE as usize].supply = 1;
            let node = b.standby(station.0, start);
            b.arc(SOURCE, node, ArcKind::SourceToStandby, 0, 1);
        }
        Origin::Released { .. } => {}
    }

    b.standby_layer(travel, costs, 1);

    if let Target::AnyStation { allowed } = &spec.target {
        b.nodes[SINK as usize].supply = -1;
        for s in 0..stations {
            if allowed.as_ref().is_some_and(|a| !a[s]) {
                continue;
            }
            let node = b.standby(s, end);
            b.arc(node, SINK, ArcKind::StandbyToSink, 0, 1);
        }
    }
    if let Target::Requested { route, label, station, gap } = &spec.target {
        let node = b.add_node(NodeKind::Requester { route: *route }, -1);
        let standby = b.standby(station.0, end);
        b.arc(standby, node, ArcKind::StandbyToRequester, *gap, 1);
        requesters.push(Endpoint { route: *route, label: label.clone(), node });
    }
    if let Origin::Released { route, label, station, gap } = &spec.origin {
        let node = b.add_node(NodeKind::Releaser { route: *route }, 1);
        let standby = b.standby(station.0, start);
        b.arc(node, standby, ArcKind::ReleaserToStandby, *gap, 1);
        releasers.push(Endpoint { route: *route, label: label.clone(), node });
    }
    Ok(b.finish(requesters, releasers, false))
}

/// Number of nodes `build_interval_network` creates for a window of
/// `steps` standby steps.
pub fn interval_node_count(spec_origin: &Origin, spec_target: &Target, stations: usize, steps: usize) -> usize {
    2 + stations * steps
        + usize::from(matches!(spec_target, Target::Requested { .. }))
        + usize::from(matches!(spec_origin, Origin::Released { .. }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::decompose_instance;
    use crate::fixtures;
    use crate::flow::solve_min_cost_circulation;
    use crate::model::{Station, Visit};

    fn one_station_instance(horizon: Seconds) -> Instance {
        Instance {
            stations: vec![Station { id: StationId(0), label: "a".into(), lat: None, lon: None }],
            travel: TravelTimeMatrix(vec![vec![0]]),
            runs: vec![],
            horizon_s: horizon,
        }
    }

    fn two_station_instance(tau: Seconds, horizon: Seconds) -> Instance {
        Instance {
            stations: vec![
                Station { id: StationId(0), label: "a".into(), lat: None, lon: None },
                Station { id: StationId(1), label: "b".into(), lat: None, lon: None },
            ],
            travel: TravelTimeMatrix(vec![vec![0, tau], vec![tau, 0]]),
            runs: vec![],
            horizon_s: horizon,
        }
    }

    fn s1(stations: usize) -> CostConfig {
        CostConfig::uniform(13.7, 0.03, 0.03, stations).unwrap()
    }

    #[test]
    fn fig4_network_shape() {
        let inst = fixtures::fig4_instance();
        let routes = decompose_instance(&inst);
        let grid = TimeGrid::new(60, 600).unwrap();
        let net = build_integrated_network(&inst, &routes, &grid, &s1(3)).unwrap();
        let count = |pred: fn(&NodeKind) -> bool| net.nodes.iter().filter(|n| pred(&n.kind)).count();
        assert_eq!(count(|k| matches!(k, NodeKind::Requester { .. })), 3);
        assert_eq!(count(|k| matches!(k, NodeKind::Releaser { .. })), 3);
        assert_eq!(count(|k| matches!(k, NodeKind::Standby { .. })), 33);
        assert_eq!(net.node_count(), 41);
        let (nodes, bound) = count_formulas(3, 11, 3);
        assert_eq!(nodes, net.node_count());
        assert!(net.arc_count() <= bound);
        assert_eq!(net.total_supply(), 0);
    }

    #[test]
    fn count_formula_examples() {
        assert_eq!(count_formulas(3, 11, 3).0, 41);
        assert_eq!(count_formulas(1, 2, 0), (4, 4));
        assert_eq!(count_formulas(2, 3, 1), (10, 15));
    }

    #[test]
    fn empty_single_station_network() {
        let inst = one_station_instance(60);
        let grid = TimeGrid::new(60, 60).unwrap();
        let net = build_integrated_network(&inst, &[], &grid, &s1(1)).unwrap();
        assert_eq!(net.node_count(), 4);
        let kinds: Vec<ArcKind> = net.arcs.iter().map(|a| a.kind).collect();
        assert_eq!(
            kinds,
            vec![ArcKind::SourceToStandby, ArcKind::Park, ArcKind::StandbyToSink, ArcKind::SinkToSource]
        );
    }

    #[test]
    fn moves_truncated_at_horizon() {
        let grid = TimeGrid::new(60, 600).unwrap();
        let moves = |tau| {
            let inst = two_station_instance(tau, 600);
            build_integrated_network(&inst, &[], &grid, &s1(2))
                .unwrap()
                .arcs
                .iter()
                .filter(|a| a.kind == ArcKind::Move)
                .count()
        };
        assert_eq!(moves(601), 0);
        // departing at t=0 lands exactly on the horizon
        assert_eq!(moves(600), 2);
        assert_eq!(moves(60), 20);
    }

    #[test]
    fn move_arcs_span_effective_travel_time() {
        let inst = fixtures::fig4_instance();
        let routes = decompose_instance(&inst);
        for dt in [30, 60] {
            let grid = TimeGrid::new(dt, 600).unwrap();
            let net = build_integrated_network(&inst, &routes, &grid, &s1(3)).unwrap();
            for a in net.arcs.iter().filter(|a| a.kind == ArcKind::Move) {
                let (NodeKind::Standby { station: s, time_s: t0 }, NodeKind::Standby { station: s2, time_s: t1 }) =
                    (net.nodes[a.from as usize].kind, net.nodes[a.to as usize].kind)
                else {
                    panic!("move arc between non-standby nodes");
                };
                assert_ne!(s, s2);
                assert_eq!(t1 - t0, effective_travel_time(inst.tau(s, s2), &grid).unwrap());
                assert!(t1 <= grid.horizon);
            }
        }
    }

    #[test]
    fn endpoint_arcs_are_unique() {
        let inst = fixtures::fig1_instance();
        let routes = decompose_instance(&inst);
        let grid = TimeGrid::for_instance(&inst, 30).unwrap();
        let net = build_integrated_network(&inst, &routes, &grid, &s1(7)).unwrap();
        for e in &net.requesters {
            let into: Vec<_> = net.arcs.iter().filter(|a| a.to == e.node).collect();
            assert_eq!(into.len(), 1);
            assert_eq!(into[0].kind, ArcKind::StandbyToRequester);
            assert!(net.arcs.iter().all(|a| a.from != e.node));
        }
        for e in &net.releasers {
            let out: Vec<_> = net.arcs.iter().filter(|a| a.from == e.node).collect();
            assert_eq!(out.len(), 1);
            assert_eq!(out[0].kind, ArcKind::ReleaserToStandby);
        }
    }

    #[test]
    fn dump_numbers_source_and_sink_first() {
        let inst = one_station_instance(60);
        let grid = TimeGrid::new(60, 60).unwrap();
        let net = build_integrated_network(&inst, &[], &grid, &s1(1)).unwrap();
        let mut buf = Vec::new();
        net.dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), format!("0 2 {} 0 source_to_standby", s1(1).fleet));
        assert_eq!(text.lines().last().unwrap(), "1 0 0 0 sink_to_source");
    }

    fn single_path_cost(spec: &IntervalSpec, travel: &TravelTimeMatrix, costs: &CostConfig, dt: Seconds) -> Cost {
        let net = build_interval_network(spec, travel, costs, dt).unwrap();
        assert_eq!(net.total_supply(), 0);
        solve_min_cost_circulation(&net).unwrap().objective
    }

    #[test]
    fn between_interval_with_exact_slack_moves_once() {
        let inst = fixtures::fig4_instance();
        let costs = s1(3);
        let spec = IntervalSpec {
            category: Category::Between,
            window: (0, 120),
            origin: Origin::Released { route: 0, label: "x".into(), station: StationId(0), gap: 0 },
            target: Target::Requested { route: 1, label: "y".into(), station: StationId(1), gap: 0 },
        };
        assert_eq!(single_path_cost(&spec, &inst.travel, &costs, 60), costs.movement(120));
    }

    #[test]
    fn terminal_interval_parks_when_moving_is_dearer() {
        let inst = two_station_instance(60, 120);
        // park at 0.01/min, move at 0.05/min
        let costs = CostConfig::from_currency(13.7, 0.05, &[0.01, 0.01]).unwrap();
        let spec = IntervalSpec {
            category: Category::Terminal,
            window: (0, 120),
            origin: Origin::Released { route: 0, label: "x".into(), station: StationId(0), gap: 0 },
            target: Target::AnyStation { allowed: None },
        };
        // enumeration over {park,park}, {move}, {park,move}, {move,park}: two parks win
        let park_twice = 2 * costs.park(StationId(0), 60);
        let options = [
            park_twice,
            costs.movement(60) + costs.park(StationId(1), 60),
            costs.park(StationId(0), 60) + costs.movement(60),
        ];
        assert_eq!(*options.iter().min().unwrap(), park_twice);
        assert_eq!(single_path_cost(&spec, &inst.travel, &costs, 60), park_twice);
    }

    #[test]
    fn unassigned_interval_sources_at_request_station() {
        let inst = two_station_instance(120, 120);
        let costs = CostConfig::from_currency(13.7, 0.03, &[0.03, 0.05]).unwrap();
        let spec = IntervalSpec {
            category: Category::Unassigned,
            window: (0, 60),
            origin: Origin::Fleet,
            target: Target::Requested { route: 0, label: "r".into(), station: StationId(0), gap: 0 },
        };
        // station 1 cannot reach station 0 within one step, so the pod starts at 0
        let expected = costs.fleet + costs.park(StationId(0), 60);
        assert_eq!(single_path_cost(&spec, &inst.travel, &costs, 60), expected);
    }

    #[test]
    fn interval_node_count_matches_builder() {
        let inst = fixtures::fig4_instance();
        let costs = s1(3);
        let origin = Origin::Released { route: 0, label: "x".into(), station: StationId(0), gap: 0 };
        let target = Target::Requested { route: 1, label: "y".into(), station: StationId(1), gap: 0 };
        let spec = IntervalSpec { category: Category::Between, window: (60, 300), origin, target };
        let net = build_interval_network(&spec, &inst.travel, &costs, 30).unwrap();
        assert_eq!(net.node_count(), interval_node_count(&spec.origin, &spec.target, 3, 9));
    }

    #[test]
    fn inverted_window_is_infeasible() {
        let inst = fixtures::fig4_instance();
        let spec = IntervalSpec {
            category: Category::Between,
            window: (120, 60),
            origin: Origin::At { station: StationId(0) },
            target: Target::AnyStation { allowed: None },
        };
        let err = build_interval_network(&spec, &inst.travel, &s1(3), 60).unwrap_err();
        assert!(err.is_infeasible());
    }

    /// Network with explicit middle vertices: Requester -> Middle.. ->
    /// Releaser, each chain arc carrying exactly one unit (lower bound =
    /// capacity = 1). Lower bounds are removed by the textbook substitution
    /// (shift supplies, capacity minus lower bound) before solving.
    fn unreduced_cost(inst: &Instance, routes: &[PodRoute], grid: &TimeGrid, costs: &CostConfig) -> Cost {
        let mut net = build_integrated_network(inst, routes, grid, costs).unwrap();
        for r in &mut net.nodes {
            if matches!(r.kind, NodeKind::Requester { .. } | NodeKind::Releaser { .. }) {
                r.supply = 0;
            }
        }
        for (i, route) in routes.iter().enumerate() {
            let req = net.requesters[i].node;
            let rel = net.releasers[i].node;
            let mut prev = req;
            let mut chain = Vec::new();
            for v in &route.visits[1..route.visits.len().saturating_sub(1).max(1)] {
                if route.visits.len() <= 2 {
                    break;
                }
                net.nodes.push(TsnNode {
                    kind: NodeKind::Standby { station: v.station, time_s: v.time_s },
                    supply: 0,
                });
                let mid = (net.nodes.len() - 1) as u32;
                chain.push((prev, mid));
                prev = mid;
            }
            chain.push((prev, rel));
            for (a, b) in chain {
                // lower bound 1, capacity 1 -> capacity 0 and shifted supplies
                net.arcs.push(TsnArc { from: a, to: b, kind: ArcKind::Park, cost: 0, capacity: 0 });
                net.nodes[a as usize].supply -= 1;
                net.nodes[b as usize].supply += 1;
            }
        }
        solve_min_cost_circulation(&net).unwrap().objective
    }

    #[test]
    fn middle_vertex_elision_preserves_cost() {
        let inst = fixtures::fig4_instance();
        let routes = decompose_instance(&inst);
        for dt in [30, 60] {
            let grid = TimeGrid::new(dt, 600).unwrap();
            for costs in [s1(3), CostConfig::from_currency(13.7, 0.03, &[0.01, 0.08, 0.04]).unwrap()] {
                let reduced = build_integrated_network(&inst, &routes, &grid, &costs).unwrap();
                let reduced = solve_min_cost_circulation(&reduced).unwrap().objective;
                assert_eq!(reduced, unreduced_cost(&inst, &routes, &grid, &costs));
            }
        }
    }

    #[test]
    fn coarse_arcs_embed_into_fine_grid() {
        // With park rate <= move rate, a coarse move can be replayed on the
        // fine grid as a shorter move plus parking at no higher cost.
        let inst = fixtures::fig4_instance();
        let costs = s1(3);
        let coarse = TimeGrid::new(60, 600).unwrap();
        let fine = TimeGrid::new(30, 600).unwrap();
        let net = build_integrated_network(&inst, &[], &coarse, &costs).unwrap();
        for a in net.arcs.iter().filter(|a| a.kind == ArcKind::Move) {
            let (NodeKind::Standby { station: s, .. }, NodeKind::Standby { station: s2, .. }) =
                (net.nodes[a.from as usize].kind, net.nodes[a.to as usize].kind)
            else {
                unreachable!()
            };
            let fine_move = effective_travel_time(inst.tau(s, s2), &fine).unwrap();
            let coarse_move = effective_travel_time(inst.tau(s, s2), &coarse).unwrap();
            let replay = costs.movement(fine_move) + costs.park(s2, coarse_move - fine_move);
            assert!(replay <= a.cost);
        }
    }

    #[test]
    fn single_stop_route_keeps_distinct_endpoints() {
        let mut inst = one_station_instance(120);
        inst.runs.push(crate::model::BusRun {
            id: "x".into(),
            stops: vec![crate::model::Stop { station: StationId(0), arrival_s: 60, demand_pods: 1 }],
        });
        let routes = decompose_instance(&inst);
        assert_eq!(routes[0].visits, vec![Visit { station: StationId(0), time_s: 60 }]);
        let grid = TimeGrid::new(60, 120).unwrap();
        let net = build_integrated_network(&inst, &routes, &grid, &s1(1)).unwrap();
        assert_ne!(net.requesters[0].node, net.releasers[0].node);
    }
}
