// Copyright 2026 The idrsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Shared fixtures and independent oracles for the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use idrsim::bgp::{RouteAdvert, RouteSource};
use idrsim::collector::{count_loops, fib_walk, valley_free_violations};
use idrsim::harness::{ScenarioSpec, SweepSpec};
use idrsim::sdn::{transform, AsTopologyGraph, Egress, SwitchGraph, Vertex, Weighting};
use idrsim::sim::{EngineConfig, RunStatus, ScenarioAction, Simulation};
use idrsim::time::SimTime;
use idrsim::topo::{Asn, Link, Prefix, Relationship, Topology};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn load_scenario(name: &str) -> ScenarioSpec {
    ScenarioSpec::load(&scenarios_dir().join(format!("{name}.json"))).expect("shipped scenario loads").0
}

pub fn load_sweep(name: &str) -> SweepSpec {
    SweepSpec::load(&scenarios_dir().join(format!("{name}.json"))).expect("shipped sweep loads").0
}

/// A random controller graph built through `transform`, with at most 8 vertices.
pub fn random_as_graph(seed: u64) -> AsTopologyGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(1..=4u32);
    let members: Vec<Asn> = (1..=k).map(Asn).collect();
    let externals: Vec<Asn> = (10..10 + rng.gen_range(1..=3u32)).map(Asn).collect();
    let mut t = Topology::new();
    for a in members.iter().chain(&externals) {
        t.add_node(*a);
    }
    for (i, a) in members.iter().enumerate() {
        for b in &members[i + 1..] {
            if rng.gen_bool(0.5) {
                let link = Link { relationship: Relationship::FullTransit, latency: SimTime::from_millis(rng.gen_range(1..30)) };
                t.add_link(*a, *b, link).unwrap();
            }
        }
    }
    let mut sessions = Vec::new();
    for m in &members {
        for x in &externals {
            if rng.gen_bool(0.6) {
                t.add_link(*m, *x, Link::new(Relationship::FullTransit)).unwrap();
                sessions.push((*m, *x));
            }
        }
    }
    let t = t.declare_cluster(members.iter().copied()).unwrap();
    let sg = SwitchGraph::build(&t, 0).unwrap();
    let prefix = Prefix(0);
    let origin = Asn(99);
    let mut routes = Vec::new();
    for &(m, x) in &sessions {
        if !rng.gen_bool(0.7) {
            continue;
        }
        let mut pool: Vec<Asn> =
            externals.iter().chain(&members).copied().chain((20..24).map(Asn)).filter(|a| *a != x).collect();
        pool.shuffle(&mut rng);
        let mid = rng.gen_range(0..=3usize);
        let mut as_path = vec![x];
        as_path.extend(pool.into_iter().take(mid));
        as_path.push(origin);
        routes.push((m, RouteAdvert { prefix, as_path, next_hop: x, learned_from: RouteSource::Transit }));
    }
    let originating = if rng.gen_bool(0.3) { members.choose(&mut rng).copied() } else { None };
    let weighting = if rng.gen_bool(0.3) { Weighting::Latency } else { Weighting::HopCount };
    loop {
        let g = transform(&sg, prefix, &routes, originating, weighting);
        if g.vertices.len() <= 8 {
            return g;
        }
        routes.pop();
    }
}

/// Brute force: every simple vertex path from each member to the destination whose
/// AS-level sequence repeats no AS, minimised by (weight, AS path).
pub fn brute_force_paths(g: &AsTopologyGraph) -> BTreeMap<Asn, Option<(Egress, Vec<Asn>, u64)>> {
    let dest = g.vertices.iter().position(|v| matches!(v, Vertex::Destination)).unwrap();
    let label = |v: usize| -> Vec<Asn> {
        match &g.vertices[v] {
            Vertex::Member { asn } => vec![*asn],
            Vertex::External { as_path, .. } => as_path.clone(),
            Vertex::Destination => vec![],
        }
    };
    let mut out = BTreeMap::new();
    for (start, v) in g.vertices.iter().enumerate() {
        let Vertex::Member { asn } = v else { continue };
        let mut best: Option<(u64, Vec<Asn>, usize)> = None;
        let mut stack = vec![(vec![start], 0u64)];
        while let Some((walk, w)) = stack.pop() {
            let last = *walk.last().unwrap();
            if last == dest {
                let as_path: Vec<Asn> = walk.iter().flat_map(|&v| label(v)).collect();
                let distinct: BTreeSet<Asn> = as_path.iter().copied().collect();
                if distinct.len() != as_path.len() {
                    continue;
                }
                let cand = (w, as_path, walk[1]);
                if best.as_ref().is_none_or(|b| (cand.0, &cand.1) < (b.0, &b.1)) {
                    best = Some(cand);
                }
                continue;
            }
            for e in g.edges.iter().filter(|e| e.from == last) {
                if !walk.contains(&e.to) {
                    let mut next = walk.clone();
                    next.push(e.to);
                    stack.push((next, w + e.weight));
                }
            }
        }
        let route = best.map(|(w, path, next)| {
            let egress = match &g.vertices[next] {
                Vertex::Member { asn } => Egress::Member(*asn),
                Vertex::External { neighbor, .. } => Egress::External(*neighbor),
                Vertex::Destination => Egress::Local,
            };
            (egress, path, w)
        });
        out.insert(*asn, route);
    }
    out
}

/// Random tiered topology with only customer-provider and peer links: a full peer
/// mesh at the top, every lower AS buying transit from one or two ASes one tier up.
pub fn gao_rexford_topology(seed: u64, cluster_fraction: f64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tiers = [rng.gen_range(2..=3usize), rng.gen_range(2..=4), rng.gen_range(2..=5)];
    let mut t = Topology::new();
    let mut layers: Vec<Vec<Asn>> = Vec::new();
    let mut next = 1;
    for size in tiers {
        let layer: Vec<Asn> = (next..next + size as u32).map(Asn).collect();
        next += size as u32;
        for a in &layer {
            t.add_node(*a);
        }
        layers.push(layer);
    }
    for (i, a) in layers[0].iter().enumerate() {
        for b in &layers[0][i + 1..] {
            t.add_link(*a, *b, Link::new(Relationship::PeerToPeer)).unwrap();
        }
    }
    for l in 1..layers.len() {
        for c in layers[l].clone() {
            let mut ups = layers[l - 1].clone();
            ups.shuffle(&mut rng);
            for p in ups.into_iter().take(rng.gen_range(1..=2)) {
                t.add_link(p, c, Link::new(Relationship::CustomerToProvider { customer: c })).unwrap();
            }
        }
        for (i, a) in layers[l].iter().enumerate() {
            for b in &layers[l][i + 1..] {
                if rng.gen_bool(0.3) {
                    t.add_link(*a, *b, Link::new(Relationship::PeerToPeer)).unwrap();
                }
            }
        }
    }
    let nodes: Vec<Asn> = t.nodes().collect();
    let stubs = layers.last().unwrap().clone();
    let origins: Vec<Asn> = stubs.iter().take(2).copied().collect();
    let t = t.assign_prefixes(&origins).unwrap();
    let members = idrsim::harness::select_members(&nodes, cluster_fraction, seed);
    t.declare_cluster(members).unwrap()
}

/// Random scenario on a small FullTransit clique with a random cluster: announcements
/// of every prefix, then a mix of withdrawals, re-announcements and link flaps.
pub fn random_scenario(seed: u64) -> (Topology, Vec<ScenarioAction>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=7usize);
    let mut t = Topology::clique(n, idrsim::topo::RelationshipKind::FullTransit).unwrap();
    let nodes: Vec<Asn> = t.nodes().collect();
    let keys: Vec<_> = t.links().map(|(k, _)| k).collect();
    for k in &keys {
        t.set_latency(k.low(), k.high(), SimTime::from_millis(rng.gen_range(1..40))).unwrap();
    }
    let origins: Vec<Asn> = (0..rng.gen_range(1..=2)).map(|_| *nodes.choose(&mut rng).unwrap()).collect();
    let f = [0.0, 0.3, 0.5, 0.7, 1.0][rng.gen_range(0..5)];
    let members = idrsim::harness::select_members(&nodes, f, seed);
    let t = t.assign_prefixes(&origins).unwrap().declare_cluster(members).unwrap();
    let mut actions = Vec::new();
    let mut at = SimTime::ZERO;
    let mut live: BTreeSet<Prefix> = BTreeSet::new();
    for (p, o) in t.originations() {
        actions.push(ScenarioAction::announce(at, o, p));
        live.insert(p);
    }
    let mut failed = Vec::new();
    for _ in 0..rng.gen_range(1..=4) {
        at += SimTime::from_millis(rng.gen_range(0..4000));
        match rng.gen_range(0..4) {
            0 | 1 => {
                let (p, o) = t.originations().collect::<Vec<_>>()[rng.gen_range(0..origins.len())];
                if live.remove(&p) {
                    actions.push(ScenarioAction::withdraw(at, o, p));
                } else {
                    live.insert(p);
                    actions.push(ScenarioAction::announce(at, o, p));
                }
            }
            2 => {
                let k = keys[rng.gen_range(0..keys.len())];
                if !failed.contains(&k) && failed.len() + 1 < n - 1 {
                    failed.push(k);
                    actions.push(ScenarioAction::link_fail(at, k.low(), k.high()));
                }
            }
            _ => {
                if let Some(k) = failed.pop() {
                    actions.push(ScenarioAction::link_restore(at, k.low(), k.high()));
                }
            }
        }
    }
    (t, actions)
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct Safety {
    pub loops: usize,
    pub valley_violations: usize,
    pub self_paths: usize,
    pub converged: bool,
}

impl Safety {
    pub fn ok(&self) -> bool {
        self.converged && self.loops == 0 && self.valley_violations == 0 && self.self_paths == 0
    }
}

/// Runs a scenario to quiescence and checks forwarding loops at every quiescent point
/// before an injection and at the end, valley-freedom of every sent Update, and that no stored path names its
/// owner.
pub fn check_safety(t: &Topology, actions: &[ScenarioAction], seed: u64, config: EngineConfig) -> Safety {
    let mut sim = Simulation::new(t, config, seed).unwrap();
    sim.schedule(actions).unwrap();
    let mut s = Safety::default();
    let mut checkpoints: Vec<SimTime> = actions.iter().map(|a| a.at).collect();
    checkpoints.dedup();
    let mut status = RunStatus::Converged { at: SimTime::ZERO };
    for (i, _) in checkpoints.iter().enumerate() {
        if i + 1 < checkpoints.len() {
            let before = SimTime::from_micros(checkpoints[i + 1].as_micros() - 1);
            sim.advance_until(before).unwrap();
        } else {
            status = sim.run_to_quiescence().unwrap();
        }
        if sim.quiescent() {
            let state = sim.forwarding_state();
            s.loops += t.prefixes().map(|p| count_loops(&fib_walk(&state, p))).sum::<usize>();
        }
        s.self_paths += stored_self_paths(&sim);
    }
    s.converged = status.converged() || actions.is_empty();
    let policy_only = t.links().all(|(_, l)| !matches!(l.relationship, Relationship::FullTransit));
    if policy_only {
        s.valley_violations = valley_free_violations(sim.log().records(), t);
    }
    s
}

pub fn stored_self_paths(sim: &Simulation) -> usize {
    let mut bad = 0;
    for r in sim.routers() {
        let me = r.asn();
        bad += r.rib().adj_in.values().filter(|a| a.as_path.contains(&me)).count();
        bad += r.rib().loc.values().filter(|a| a.learned_from != RouteSource::Local && a.as_path.contains(&me)).count();
    }
    for c in sim.controllers() {
        bad += c.adj_in().filter(|(m, a)| a.as_path.contains(m)).count();
        for &m in c.switch_graph().members() {
            for p in sim.topology().prefixes() {
                if let Some(route) = c.member_route(m, p) {
                    bad += usize::from(route.as_path[1..].contains(&m));
                }
            }
        }
    }
    bad
}
