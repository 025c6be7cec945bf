//! In-service routing: split each bus run's per-stop pod demand into the
//! fewest contiguous pod routes.

use crate::model::{BusRun, Instance, PodRoute, Visit};

/// Greedy decomposition of one run. Repeatedly starts a route at the first
/// stop with remaining demand and extends it through every following stop
/// that still has demand, then decrements all covered stops.
///
/// Route ids are `(run, extraction order)`, so the output is reproducible.
pub fn decompose_bus_run(run_index: usize, run: &BusRun) -> Vec<PodRoute> {
    let mut remaining = run.demands();
    let mut routes = Vec::new();
    let mut first = 0;
    loop {
        while first < remaining.len() && remaining[first] == 0 {
            first += 1;
        }
        if first == remaining.len() {
            break;
        }
        let mut last = first;
        while last + 1 < remaining.len() && remaining[last + 1] > 0 {
            last += 1;
        }
        let visits = run.stops[first..=last]
            .iter()
            .map(|s| Visit {
                station: s.station,
                time_s: s.arrival_s,
            })
            .collect();
        for d in &mut remaining[first..=last] {
            *d -= 1;
        }
        routes.push(PodRoute {
            run: run_index,
            run_id: run.id.clone(),
            seq: routes.len(),
            visits,
        });
    }
    routes
}

/// All pod routes of an instance, runs in instance order.
pub fn decompose_instance(inst: &Instance) -> Vec<PodRoute> {
    inst.runs
        .iter()
        .enumerate()
        .flat_map(|(i, run)| decompose_bus_run(i, run))
        .collect()
}

/// Closed-form minimum number of routes: every route starts where demand
/// rises, so the count is the sum of positive increments of the demand
/// sequence (with an implicit zero before the first stop).
pub fn min_route_count_oracle(demands: &[u32]) -> usize {
    let mut prev = 0u32;
    let mut total = 0usize;
    for &d in demands {
        if d > prev {
            total += (d - prev) as usize;
        }
        prev = d;
    }
    total
}
