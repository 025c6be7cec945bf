//! Minimum fleet size as a minimum disjoint path cover of the route
//! compatibility DAG, solved through maximum bipartite matching.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{PlanError, Result};
use crate::model::{PodRoute, TravelTimeMatrix};

/// `succ[r]` lists the routes a pod can serve right after `r`, sorted by
/// start time then route index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompatibilityDag {
    pub succ: Vec<Vec<u32>>,
}

impl CompatibilityDag {
    pub fn vertex_count(&self) -> usize {
        self.succ.len()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.succ[a].contains(&(b as u32))
    }

    /// Kahn's algorithm; `None` if a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.succ.len();
        let mut indeg = vec![0usize; n];
        for s in &self.succ {
            for &b in s {
                indeg[b as usize] += 1;
            }
        }
        let mut stack: Vec<usize> = (0..n).rev().filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = stack.pop() {
            order.push(v);
            for &b in &self.succ[v] {
                indeg[b as usize] -= 1;
                if indeg[b as usize] == 0 {
                    stack.push(b as usize);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// Continuous-time compatibility: `b` can follow `a` when the pod can drive
/// from `a`'s last station to `b`'s first station within the slack.
pub fn compatible(a: &PodRoute, b: &PodRoute, travel: &TravelTimeMatrix) -> bool {
    travel.get(a.end_station(), b.start_station()) <= b.start_time() - a.end_time()
}

pub fn build_compatibility_dag(routes: &[PodRoute], travel: &TravelTimeMatrix) -> Result<CompatibilityDag> {
    let mut by_start: Vec<u32> = (0..routes.len() as u32).collect();
    by_start.sort_by_key(|&i| (routes[i as usize].start_time(), i));
    let succ: Vec<Vec<u32>> = (0..routes.len())
        .into_par_iter()
        .map(|a| {
            let ra = &routes[a];
            // successors must start no earlier than this route ends
            let from = by_start.partition_point(|&i| routes[i as usize].start_time() < ra.end_time());
            by_start[from..]
                .iter()
                .copied()
                .filter(|&b| compatible(ra, &routes[b as usize], travel))
                .collect()
        })
        .collect();
    let dag = CompatibilityDag { succ };
    if dag.topological_order().is_none() {
        return Err(PlanError::Contract("compatibility graph has a cycle".into()));
    }
    Ok(dag)
}

/// `next[a] = Some(b)` pairs route `a`'s release with route `b`'s request.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    pub next: Vec<Option<usize>>,
    pub prev: Vec<Option<usize>>,
}

impl Matching {
    pub fn size(&self) -> usize {
        self.next.iter().filter(|m| m.is_some()).count()
    }

    pub fn fleet_size(&self) -> usize {
        self.next.len() - self.size()
    }
}

/// Hopcroft-Karp over releaser (left) and requester (right) copies of the
/// routes. Left vertices are scanned in index order and their candidates
/// in the DAG's start-time order.
pub fn max_matching(dag: &CompatibilityDag) -> Matching {
    let order: Vec<usize> = (0..dag.vertex_count()).collect();
    hopcroft_karp(&dag.succ, &order)
}

/// Same optimum size with a seed-dependent choice among maximum matchings.
pub fn max_matching_permuted(dag: &CompatibilityDag, seed: u64) -> Matching {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..dag.vertex_count()).collect();
    order.shuffle(&mut rng);
    let mut succ = dag.succ.clone();
    for s in &mut succ {
        s.shuffle(&mut rng);
    }
    hopcroft_karp(&succ, &order)
}

fn hopcroft_karp(adj: &[Vec<u32>], order: &[usize]) -> Matching {
    const INF: u32 = u32::MAX;
    let n = adj.len();
    let mut match_l: Vec<Option<usize>> = vec![None; n];
    let mut match_r: Vec<Option<usize>> = vec![None; n];
    let mut dist = vec![INF; n];
    let mut it = vec![0usize; n];
    let mut queue = std::collections::VecDeque::new();
    loop {
        queue.clear();
        for &u in order {
            if match_l[u].is_none() {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = INF;
            }
        }
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                match match_r[w as usize] {
                    None => found = true,
                    Some(x) if dist[x] == INF => {
                        dist[x] = dist[u] + 1;
                        queue.push_back(x);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        it.fill(0);
        let mut stack = Vec::new();
        for &u in order {
            if match_l[u].is_some() {
                continue;
            }
            stack.clear();
            stack.push(u);
            while let Some(&v) = stack.last() {
                if it[v] == adj[v].len() {
                    dist[v] = INF;
                    stack.pop();
                    if let Some(&p) = stack.last() {
                        it[p] += 1;
                    }
                    continue;
                }
                let w = adj[v][it[v]] as usize;
                match match_r[w] {
                    None => {
                        for &x in &stack {
                            let wx = adj[x][it[x]] as usize;
                            match_l[x] = Some(wx);
                            match_r[wx] = Some(x);
                        }
                        break;
                    }
                    Some(x) if dist[x] != INF && dist[x] == dist[v] + 1 => stack.push(x),
                    _ => it[v] += 1,
                }
            }
        }
    }
    Matching { next: match_l, prev: match_r }
}

/// Ordered routes served by one pod.
pub type AssignmentChain = Vec<usize>;

/// Follows matched pairs from every unmatched requester. Chains are sorted
/// by the start time of their first route.
pub fn reconstruct_chains(matching: &Matching, routes: &[PodRoute]) -> Vec<AssignmentChain> {
    let mut chains: Vec<AssignmentChain> = (0..routes.len())
        .filter(|&r| matching.prev[r].is_none())
        .map(|head| {
            let mut chain = vec![head];
            let mut cur = head;
            while let Some(nx) = matching.next[cur] {
                chain.push(nx);
                cur = nx;
            }
            chain
        })
        .collect();
    chains.sort_by_key(|c| (routes[c[0]].start_time(), c[0]));
    chains
}

#[derive(Serialize)]
pub struct ChainSummary {
    pub routes: usize,
    pub matching: usize,
    pub fleet: usize,
    pub chains: Vec<Vec<String>>,
}

pub fn chain_summary(chains: &[AssignmentChain], routes: &[PodRoute]) -> ChainSummary {
    ChainSummary {
        routes: routes.len(),
        matching: routes.len() - chains.len(),
        fleet: chains.len(),
        chains: chains
            .iter()
            .map(|c| c.iter().map(|&r| routes[r].label()).collect())
            .collect(),
    }
}
