//! Pod itineraries, the constraint checker and itinerary export.

use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{PlanError, Result};
use crate::model::{
    ceil_to, floor_to, units_to_micro, Cost, CostConfig, Instance, PodRoute, Seconds, StationId,
    TimeGrid, Violation,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    /// In service on `route`; `start_s`/`end_s` are the snapped window and
    /// `cost` is the discretization-gap parking at both ends.
    Serve {
        route: usize,
        label: String,
        from: StationId,
        to: StationId,
        start_s: Seconds,
        end_s: Seconds,
        cost: Cost,
    },
    Park { station: StationId, start_s: Seconds, end_s: Seconds, cost: Cost },
    Move { from: StationId, to: StationId, start_s: Seconds, end_s: Seconds, cost: Cost },
}

impl Action {
    pub fn kind(&self) -> &'static str {
        match self {
            Action::Serve { .. } => "serve",
            Action::Park { .. } => "park",
            Action::Move { .. } => "move",
        }
    }

    pub fn start_s(&self) -> Seconds {
        match *self {
            Action::Serve { start_s, .. } | Action::Park { start_s, .. } | Action::Move { start_s, .. } => start_s,
        }
    }

    pub fn end_s(&self) -> Seconds {
        match *self {
            Action::Serve { end_s, .. } | Action::Park { end_s, .. } | Action::Move { end_s, .. } => end_s,
        }
    }

    pub fn cost(&self) -> Cost {
        match *self {
            Action::Serve { cost, .. } | Action::Park { cost, .. } | Action::Move { cost, .. } => cost,
        }
    }

    pub fn from_station(&self) -> StationId {
        match *self {
            Action::Serve { from, .. } | Action::Move { from, .. } => from,
            Action::Park { station, .. } => station,
        }
    }

    pub fn to_station(&self) -> StationId {
        match *self {
            Action::Serve { to, .. } | Action::Move { to, .. } => to,
            Action::Park { station, .. } => station,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PodItinerary {
    pub pod: usize,
    pub fleet_cost: Cost,
    pub actions: Vec<Action>,
}

impl PodItinerary {
    pub fn total_cost(&self) -> Cost {
        self.fleet_cost + self.actions.iter().map(Action::cost).sum::<Cost>()
    }

    pub fn served_routes(&self) -> Vec<usize> {
        self.actions
            .iter()
            .filter_map(|a| match a {
                Action::Serve { route, .. } => Some(*route),
                _ => None,
            })
            .collect()
    }

    /// Appends an action, merging it into a preceding park at the same
    /// station.
    pub fn push(&mut self, action: Action) {
        if let (Some(Action::Park { station, end_s, cost, .. }), Action::Park { station: s2, start_s: t0, end_s: t1, cost: c }) =
            (self.actions.last_mut(), &action)
        {
            if station == s2 && end_s == t0 {
                *end_s = *t1;
                *cost += c;
                return;
            }
        }
        self.actions.push(action);
    }
}

/// Checks the timeline of every pod against the model constraints: route
/// assignment exactness, one activity at a time over the whole horizon, and
/// transition feasibility. Serve windows and move durations may use any
/// resolution of the grid's fallback ladder.
pub fn check_constraints(itins: &[PodItinerary], inst: &Instance, routes: &[PodRoute], grid: &TimeGrid) -> Vec<Violation> {
    let ladder = grid.fallback_ladder();
    let mut out = Vec::new();
    let mut served: HashMap<usize, usize> = HashMap::new();

    for it in itins {
        let pod = format!("pod {}", it.pod);
        let Some(first) = it.actions.first() else {
            out.push(Violation::new(&pod, "itinerary has no actions"));
            continue;
        };
        if first.start_s() != 0 {
            out.push(Violation::new(&pod, format!("first action starts at {} s, not 0", first.start_s())));
        }
        let last = it.actions.last().unwrap();
        if last.end_s() != grid.horizon {
            out.push(Violation::new(
                &pod,
                format!("last action ends at {} s, not the horizon {} s", last.end_s(), grid.horizon),
            ));
        }
        for w in it.actions.windows(2) {
            if w[0].end_s() != w[1].start_s() {
                out.push(Violation::new(
                    &pod,
                    format!("{} ends at {} s but {} starts at {} s", w[0].kind(), w[0].end_s(), w[1].kind(), w[1].start_s()),
                ));
            }
            if w[0].to_station() != w[1].from_station() {
                out.push(Violation::new(
                    &pod,
                    format!(
                        "at {} s pod is at {} but next {} departs from {}",
                        w[1].start_s(),
                        w[0].to_station(),
                        w[1].kind(),
                        w[1].from_station()
                    ),
                ));
            }
        }
        for a in &it.actions {
            if a.end_s() < a.start_s() {
                out.push(Violation::new(&pod, format!("{} at {} s has negative duration", a.kind(), a.start_s())));
            }
            match a {
                Action::Serve { route, from, to, start_s, end_s, .. } => {
                    let Some(r) = routes.get(*route) else {
                        out.push(Violation::new(&pod, format!("serves unknown route {route}")));
                        continue;
                    };
                    *served.entry(*route).or_default() += 1;
                    if *from != r.start_station() || *to != r.end_station() {
                        out.push(Violation::new(&pod, format!("serve of {} uses wrong stations", r.label())));
                    }
                    if !ladder.iter().any(|&d| floor_to(r.start_time(), d) == *start_s) {
                        out.push(Violation::new(&pod, format!("serve of {} starts at {start_s} s off every grid", r.label())));
                    }
                    if !ladder.iter().any(|&d| ceil_to(r.end_time(), d) == *end_s) {
                        out.push(Violation::new(&pod, format!("serve of {} ends at {end_s} s off every grid", r.label())));
                    }
                }
                Action::Move { from, to, start_s, end_s, .. } => {
                    if from == to {
                        out.push(Violation::new(&pod, format!("move at {start_s} s does not change station")));
                    } else if from.0 >= inst.station_count() || to.0 >= inst.station_count() {
                        out.push(Violation::new(&pod, format!("move at {start_s} s uses unknown station")));
                    } else {
                        let tau = inst.tau(*from, *to);
                        if !ladder.iter().any(|&d| ceil_to(tau, d) == end_s - start_s) {
                            out.push(Violation::new(
                                &pod,
                                format!("move {from}->{to} at {start_s} s takes {} s, travel time is {tau} s", end_s - start_s),
                            ));
                        }
                    }
                }
                Action::Park { start_s, end_s, .. } => {
                    if end_s <= start_s {
                        out.push(Violation::new(&pod, format!("park at {start_s} s is empty")));
                    }
                }
            }
        }
    }
    for (i, r) in routes.iter().enumerate() {
        match served.get(&i).copied().unwrap_or(0) {
            1 => {}
            0 => out.push(Violation::new(format!("route {}", r.label()), "not served by any pod")),
            k => out.push(Violation::new(format!("route {}", r.label()), format!("served by {k} pods"))),
        }
    }
    out
}

/// Cost of an action recomputed from the raw rates.
pub fn action_cost(a: &Action, routes: &[PodRoute], costs: &CostConfig) -> Cost {
    match a {
        Action::Serve { route, start_s, end_s, .. } => {
            let r = &routes[*route];
            costs.park(r.start_station(), r.start_time() - start_s) + costs.park(r.end_station(), end_s - r.end_time())
        }
        Action::Park { station, start_s, end_s, .. } => costs.park(*station, end_s - start_s),
        Action::Move { start_s, end_s, .. } => costs.movement(end_s - start_s),
    }
}

#[derive(Serialize)]
struct ActionRecord<'a> {
    #[serde(rename = "type")]
    kind: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    route: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    station: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    from: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    to: Option<usize>,
    start_s: Seconds,
    end_s: Seconds,
    cost_micro: f64,
}

#[derive(Serialize)]
struct ItineraryRecord<'a> {
    pod: usize,
    fleet_cost_micro: f64,
    total_cost_micro: f64,
    actions: Vec<ActionRecord<'a>>,
}

fn record(a: &Action) -> ActionRecord<'_> {
    let (route, station, from, to) = match a {
        Action::Serve { label, from, to, .. } => (Some(label.as_str()), None, Some(from.0), Some(to.0)),
        Action::Park { station, .. } => (None, Some(station.0), None, None),
        Action::Move { from, to, .. } => (None, None, Some(from.0), Some(to.0)),
    };
    ActionRecord {
        kind: a.kind(),
        route,
        station,
        from,
        to,
        start_s: a.start_s(),
        end_s: a.end_s(),
        cost_micro: units_to_micro(a.cost()),
    }
}

pub fn itineraries_to_json(itins: &[PodItinerary]) -> Result<String> {
    let records: Vec<ItineraryRecord> = itins
        .iter()
        .map(|it| ItineraryRecord {
            pod: it.pod,
            fleet_cost_micro: units_to_micro(it.fleet_cost),
            total_cost_micro: units_to_micro(it.total_cost()),
            actions: it.actions.iter().map(record).collect(),
        })
        .collect();
    Ok(serde_json::to_string_pretty(&records)?)
}

/// Per-pod summary: pod, routes served, action counts, moving and parked
/// seconds, total cost.
pub fn write_itinerary_csv<W: Write>(itins: &[PodItinerary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pod", "routes", "serves", "moves", "parks", "move_s", "park_s", "cost_micro"])?;
    for it in itins {
        let count = |k| it.actions.iter().filter(|a| a.kind() == k).count();
        let secs = |k| -> Seconds {
            it.actions.iter().filter(|a| a.kind() == k).map(|a| a.end_s() - a.start_s()).sum()
        };
        let labels: Vec<&str> = it
            .actions
            .iter()
            .filter_map(|a| match a {
                Action::Serve { label, .. } => Some(label.as_str()),
                _ => None,
            })
            .collect();
        w.write_record([
            it.pod.to_string(),
            labels.join(" "),
            count("serve").to_string(),
            count("move").to_string(),
            count("park").to_string(),
            secs("move").to_string(),
            secs("park").to_string(),
            format!("{:.3}", units_to_micro(it.total_cost())),
        ])?;
    }
    w.flush().map_err(|e| PlanError::io("<itinerary csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::decompose_instance;
    use crate::fixtures;
    use crate::flow::{decompose_flow, solve_min_cost_circulation};
    use crate::tsn::build_integrated_network;

    fn fig4_plan() -> (Instance, Vec<PodRoute>, TimeGrid, Vec<PodItinerary>) {
        let inst = fixtures::fig4_instance();
        let routes = decompose_instance(&inst);
        let grid = TimeGrid::new(60, 600).unwrap();
        let costs = CostConfig::uniform(13.7, 0.03, 0.03, 3).unwrap();
        let net = build_integrated_network(&inst, &routes, &grid, &costs).unwrap();
        let sol = solve_min_cost_circulation(&net).unwrap();
        let itins = decompose_flow(&net, &sol, &routes).unwrap();
        (inst, routes, grid, itins)
    }

    #[test]
    fn solver_output_is_clean() {
        let (inst, routes, grid, itins) = fig4_plan();
        assert_eq!(check_constraints(&itins, &inst, &routes, &grid), vec![]);
    }

    #[test]
    fn teleport_is_caught() {
        let (inst, routes, grid, mut itins) = fig4_plan();
        let (p, i) = itins
            .iter()
            .enumerate()
            .find_map(|(p, it)| {
                (1..it.actions.len()).find(|&i| it.actions[i].kind() == "park").map(|i| (p, i))
            })
            .unwrap();
        if let Action::Park { station, .. } = &mut itins[p].actions[i] {
            *station = StationId((station.0 + 1) % 3);
        }
        let v = check_constraints(&itins, &inst, &routes, &grid);
        assert!(v.iter().any(|v| v.rule.contains("departs from")), "{v:?}");
    }

    #[test]
    fn double_service_is_one_violation() {
        let (inst, routes, grid, mut itins) = fig4_plan();
        let copy = PodItinerary { pod: 99, ..itins[0].clone() };
        itins.push(copy);
        let v = check_constraints(&itins, &inst, &routes, &grid);
        let doubled: Vec<_> = v.iter().filter(|v| v.rule.contains("served by 2")).collect();
        assert!(!doubled.is_empty());
        assert_eq!(v.len(), doubled.len());
    }

    #[test]
    fn json_export_has_action_fields() {
        let (_, _, _, itins) = fig4_plan();
        let text = itineraries_to_json(&itins).unwrap();
        for key in ["\"type\"", "\"start_s\"", "\"end_s\"", "\"cost_micro\"", "\"serve\""] {
            assert!(text.contains(key), "missing {key}");
        }
        let mut buf = Vec::new();
        write_itinerary_csv(&itins, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }

    #[test]
    fn push_merges_adjacent_parks() {
        let mut it = PodItinerary { pod: 0, fleet_cost: 0, actions: vec![] };
        it.push(Action::Park { station: StationId(1), start_s: 0, end_s: 30, cost: 3 });
        it.push(Action::Park { station: StationId(1), start_s: 30, end_s: 90, cost: 6 });
        assert_eq!(it.actions, vec![Action::Park { station: StationId(1), start_s: 0, end_s: 90, cost: 9 }]);
    }
}
