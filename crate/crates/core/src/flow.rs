//! Min-cost flow on time-space networks and extraction of pod itineraries
//! from the optimal flow.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use crate::error::{PlanError, Result};
use crate::itinerary::{Action, PodItinerary};
use crate::decompose::decompose_instance;
use crate::model::{Cost, CostConfig, Instance, PodRoute, TimeGrid};
use crate::tsn::{build_integrated_network, ArcKind, NodeKind, TimeSpaceNetwork, SOURCE};

const INF: Cost = Cost::MAX / 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowSolution {
    /// Flow on each network arc, indexed like `TimeSpaceNetwork::arcs`.
    pub flow: Vec<i64>,
    pub objective: Cost,
    /// Flow on the Sink-to-Source arc, or the Source outflow when the
    /// network has no such arc.
    pub fleet: i64,
}

/// Residual graph in compressed adjacency form. Edge `2i` is the forward
/// copy of input arc `i`, `2i + 1` its reverse.
struct Residual {
    n: usize,
    head: Vec<u32>,
    start: Vec<usize>,
    order: Vec<u32>,
    cap: Vec<i64>,
    cost: Vec<Cost>,
}

impl Residual {
    fn new(n: usize, arcs: &[(u32, u32, i64, Cost)]) -> Self {
        let m = arcs.len() * 2;
        let mut head = Vec::with_capacity(m);
        let mut tail = Vec::with_capacity(m);
        let mut cap = Vec::with_capacity(m);
        let mut cost = Vec::with_capacity(m);
        for &(u, v, c, w) in arcs {
            head.extend([v, u]);
            tail.extend([u, v]);
            cap.extend([c, 0]);
            cost.extend([w, -w]);
        }
        let mut start = vec![0usize; n + 1];
        for &t in &tail {
            start[t as usize + 1] += 1;
        }
        for i in 0..n {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut order = vec![0u32; m];
        for (e, &t) in tail.iter().enumerate() {
            order[fill[t as usize]] = e as u32;
            fill[t as usize] += 1;
        }
        Self { n, head, start, order, cap, cost }
    }

    fn edges(&self, u: usize) -> &[u32] {
        &self.order[self.start[u]..self.start[u + 1]]
    }
}

/// Primal-dual successive shortest paths: Dijkstra on reduced costs finds
/// the current shortest distance, then a blocking flow saturates every
/// shortest augmenting path at once. Arc costs must be non-negative.
fn min_cost_flow(res: &mut Residual, s: usize, t: usize, limit: i64) -> (i64, Cost) {
    let n = res.n;
    let mut pot = vec![0 as Cost; n];
    let mut dist = vec![INF; n];
    let mut done = vec![false; n];
    let mut level = vec![u32::MAX; n];
    let mut iter = vec![0usize; n];
    let mut heap = BinaryHeap::new();
    let mut flow = 0i64;
    let mut total: Cost = 0;

    while flow < limit {
        dist.fill(INF);
        done.fill(false);
        dist[s] = 0;
        heap.clear();
        heap.push(Reverse((0 as Cost, s as u32)));
        while let Some(Reverse((d, u))) = heap.pop() {
            let u = u as usize;
            if done[u] {
                continue;
            }
            done[u] = true;
            if u == t {
                break;
            }
            for &e in res.edges(u) {
                let e = e as usize;
                if res.cap[e] <= 0 {
                    continue;
                }
                let v = res.head[e] as usize;
                let nd = d + res.cost[e] + pot[u] - pot[v];
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Reverse((nd, v as u32)));
                }
            }
        }
        if !done[t] {
            break;
        }
        let dt = dist[t];
        for v in 0..n {
            pot[v] += if done[v] { dist[v] } else { dt };
        }

        // Blocking flow over zero-reduced-cost arcs.
        level.fill(u32::MAX);
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in res.edges(u) {
                let e = e as usize;
                let v = res.head[e] as usize;
                if res.cap[e] > 0 && level[v] == u32::MAX && res.cost[e] + pot[u] - pot[v] == 0 {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if level[t] == u32::MAX {
            break;
        }
        iter.fill(0);
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        while flow < limit {
            if u == t {
                let mut push = limit - flow;
                for &e in &path {
                    push = push.min(res.cap[e]);
                }
                for &e in &path {
                    res.cap[e] -= push;
                    res.cap[e ^ 1] += push;
                    total += push * res.cost[e];
                }
                flow += push;
                path.clear();
                u = s;
                continue;
            }
            let edges = res.edges(u);
            let mut advanced = false;
            while iter[u] < edges.len() {
                let e = edges[iter[u]] as usize;
                let v = res.head[e] as usize;
                if res.cap[e] > 0 && level[v] == level[u] + 1 && res.cost[e] + pot[u] - pot[v] == 0 {
                    path.push(e);
                    u = v;
                    advanced = true;
                    break;
                }
                iter[u] += 1;
            }
            if !advanced {
                if u == s {
                    break;
                }
                level[u] = u32::MAX;
                let e = path.pop().unwrap();
                u = res.head[e ^ 1] as usize;
                iter[u] += 1;
            }
        }
    }
    (flow, total)
}

/// Optimal integral flow meeting every node supply. Infeasibility names the
/// first route whose Requester cannot be reached.
pub fn solve_min_cost_circulation(net: &TimeSpaceNetwork) -> Result<FlowSolution> {
    if net.total_supply() != 0 {
        return Err(PlanError::Contract(format!(
            "supplies sum to {}, expected 0",
            net.total_supply()
        )));
    }
    if let Some(a) = net.arcs.iter().find(|a| a.capacity < 0 || a.cost < 0) {
        return Err(PlanError::Contract(format!(
            "arc {} -> {} has negative capacity or cost",
            a.from, a.to
        )));
    }
    let n = net.node_count();
    let (ss, tt) = (n, n + 1);
    let mut arcs: Vec<(u32, u32, i64, Cost)> =
        net.arcs.iter().map(|a| (a.from, a.to, a.capacity, a.cost)).collect();
    let mut demand_arcs = Vec::new();
    let mut limit = 0i64;
    for (i, node) in net.nodes.iter().enumerate() {
        if node.supply > 0 {
            arcs.push((ss as u32, i as u32, node.supply, 0));
            limit += node.supply;
        } else if node.supply < 0 {
            demand_arcs.push((arcs.len(), i));
            arcs.push((i as u32, tt as u32, -node.supply, 0));
        }
    }
    let mut res = Residual::new(n + 2, &arcs);
    let (pushed, objective) = min_cost_flow(&mut res, ss, tt, limit);
    if pushed < limit {
        let unmet = demand_arcs
            .iter()
            .find(|&&(a, _)| res.cap[2 * a] > 0)
            .map(|&(_, node)| node);
        let route = match unmet.map(|v| net.nodes[v].kind) {
            Some(NodeKind::Requester { route }) => net
                .requesters
                .iter()
                .find(|e| e.route == route)
                .map(|e| e.label.clone())
                .unwrap_or_else(|| format!("route {route}")),
            Some(NodeKind::Sink) => "end-of-window sink".to_string(),
            _ => "unknown".to_string(),
        };
        return Err(PlanError::InfeasibleRoute { route });
    }
    let flow: Vec<i64> = (0..net.arcs.len()).map(|i| res.cap[2 * i + 1]).collect();
    let fleet = match net.sink_to_source_arc() {
        Some(i) => flow[i],
        None => net
            .arcs
            .iter()
            .zip(&flow)
            .filter(|(a, _)| a.from == SOURCE)
            .map(|(_, f)| f)
            .sum(),
    };
    Ok(FlowSolution { flow, objective, fleet })
}

/// One unit-flow walk: the arcs it uses, in order. A walk passing through a
/// route (Requester then Releaser of the same route in this network) lists
/// the StandbyToRequester arc immediately followed by the ReleaserToStandby
/// arc.
pub type FlowPath = Vec<usize>;

/// Splits an integral flow into unit walks. Walks start at Source (one per
/// unit of its outflow) and at Releasers whose Requester is not in the
/// network; they end at Sink or at a Requester whose Releaser is not in the
/// network. Outgoing arcs are taken in arc-id order.
pub fn trace_paths(net: &TimeSpaceNetwork, sol: &FlowSolution) -> Result<Vec<FlowPath>> {
    if sol.flow.len() != net.arcs.len() {
        return Err(PlanError::Contract("flow vector does not match arc count".into()));
    }
    let n = net.node_count();
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, a) in net.arcs.iter().enumerate() {
        if sol.flow[i] < 0 || sol.flow[i] > a.capacity {
            return Err(PlanError::Contract(format!("arc {i} flow {} out of bounds", sol.flow[i])));
        }
        if sol.flow[i] > 0 && a.kind != ArcKind::SinkToSource {
            out[a.from as usize].push(i);
        }
    }
    let mut rem = sol.flow.clone();
    let mut ptr = vec![0usize; n];
    let releaser_of: HashMap<usize, u32> = net.releasers.iter().map(|e| (e.route, e.node)).collect();
    let requested: HashMap<usize, u32> = net.requesters.iter().map(|e| (e.route, e.node)).collect();

    let mut starts: Vec<u32> = Vec::new();
    let source_out: i64 = out[SOURCE as usize].iter().map(|&i| rem[i]).sum();
    starts.extend(std::iter::repeat(SOURCE).take(source_out as usize));
    for e in &net.releasers {
        if !requested.contains_key(&e.route) {
            starts.push(e.node);
        }
    }

    let mut paths = Vec::with_capacity(starts.len());
    for start in starts {
        let mut path = Vec::new();
        let mut u = start as usize;
        loop {
            if let NodeKind::Requester { route } = net.nodes[u].kind {
                match releaser_of.get(&route) {
                    Some(&rel) => {
                        u = rel as usize;
                        continue;
                    }
                    None => break,
                }
            }
            if net.nodes[u].kind == NodeKind::Sink {
                break;
            }
            while ptr[u] < out[u].len() && rem[out[u][ptr[u]]] == 0 {
                ptr[u] += 1;
            }
            let Some(&a) = out[u].get(ptr[u]) else {
                return Err(PlanError::Contract(format!("flow is unbalanced at node {u}")));
            };
            rem[a] -= 1;
            path.push(a);
            u = net.arcs[a].to as usize;
        }
        paths.push(path);
    }
    if let Some(i) = (0..rem.len()).find(|&i| rem[i] != 0 && net.arcs[i].kind != ArcKind::SinkToSource) {
        return Err(PlanError::Contract(format!("arc {i} keeps flow after decomposition")));
    }
    Ok(paths)
}

/// Turns the standby part of a walk into Park and Move actions. Consecutive
/// parks at one station are merged. Endpoint and Source/Sink arcs are
/// skipped.
pub fn standby_actions(net: &TimeSpaceNetwork, arcs: &[usize]) -> Vec<Action> {
    let mut actions: Vec<Action> = Vec::new();
    for &i in arcs {
        let a = &net.arcs[i];
        let (NodeKind::Standby { station: s, time_s: t0 }, NodeKind::Standby { station: s2, time_s: t1 }) =
            (net.nodes[a.from as usize].kind, net.nodes[a.to as usize].kind)
        else {
            continue;
        };
        match a.kind {
            ArcKind::Park => {
                if let Some(Action::Park { station, end_s, cost, .. }) = actions.last_mut() {
                    if *station == s && *end_s == t0 {
                        *end_s = t1;
                        *cost += a.cost;
                        continue;
                    }
                }
                actions.push(Action::Park { station: s, start_s: t0, end_s: t1, cost: a.cost });
            }
            ArcKind::Move => actions.push(Action::Move { from: s, to: s2, start_s: t0, end_s: t1, cost: a.cost }),
            _ => {}
        }
    }
    actions
}

fn standby_time(net: &TimeSpaceNetwork, node: u32) -> i64 {
    match net.nodes[node as usize].kind {
        NodeKind::Standby { time_s, .. } => time_s,
        _ => unreachable!("endpoint arcs always touch a standby node"),
    }
}

/// Itineraries of a full-horizon network, one per unit of fleet flow.
pub fn decompose_flow(net: &TimeSpaceNetwork, sol: &FlowSolution, routes: &[PodRoute]) -> Result<Vec<PodItinerary>> {
    let paths = trace_paths(net, sol)?;
    let mut itins = Vec::with_capacity(paths.len());
    for (pod, path) in paths.iter().enumerate() {
        let mut actions = Vec::new();
        let mut fleet_cost = 0;
        let mut pending: Vec<usize> = Vec::new();
        let mut k = 0;
        while k < path.len() {
            let a = &net.arcs[path[k]];
            match a.kind {
                ArcKind::SourceToStandby => fleet_cost += a.cost,
                ArcKind::StandbyToRequester => {
                    actions.extend(standby_actions(net, &pending));
                    pending.clear();
                    let rel = net.arcs.get(path.get(k + 1).copied().unwrap_or(usize::MAX));
                    let Some(rel) = rel.filter(|r| r.kind == ArcKind::ReleaserToStandby) else {
                        return Err(PlanError::Contract("requester without matching release".into()));
                    };
                    let NodeKind::Requester { route } = net.nodes[a.to as usize].kind else {
                        unreachable!()
                    };
                    let r = &routes[route];
                    actions.push(Action::Serve {
                        route,
                        label: r.label(),
                        from: r.start_station(),
                        to: r.end_station(),
                        start_s: standby_time(net, a.from),
                        end_s: standby_time(net, rel.to),
                        cost: a.cost + rel.cost,
                    });
                    k += 2;
                    continue;
                }
                _ => pending.push(path[k]),
            }
            k += 1;
        }
        actions.extend(standby_actions(net, &pending));
        itins.push(PodItinerary { pod, fleet_cost, actions });
    }
    let total: Cost = itins.iter().map(|i| i.total_cost()).sum();
    if total != sol.objective {
        return Err(PlanError::Contract(format!(
            "itinerary costs sum to {total}, flow objective is {}",
            sol.objective
        )));
    }
    Ok(itins)
}

#[derive(Clone, Debug)]
pub struct IntegratedPlan {
    pub routes: Vec<PodRoute>,
    pub nodes: usize,
    pub arcs: usize,
    pub fleet: usize,
    pub itineraries: Vec<PodItinerary>,
    pub objective: Cost,
}

/// Decompose, build the full-horizon network on `grid`, solve and extract
/// itineraries.
pub fn plan_integrated(inst: &Instance, grid: &TimeGrid, costs: &CostConfig) -> Result<IntegratedPlan> {
    inst.ensure_valid()?;
    let routes = decompose_instance(inst);
    let net = build_integrated_network(inst, &routes, grid, costs)?;
    let sol = solve_min_cost_circulation(&net)?;
    let itineraries = decompose_flow(&net, &sol, &routes)?;
    Ok(IntegratedPlan {
        nodes: net.node_count(),
        arcs: net.arc_count(),
        fleet: itineraries.len(),
        objective: sol.objective,
        routes,
        itineraries,
    })
}
