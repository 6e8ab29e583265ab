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

//! Switch graph, the per-prefix AS topology graph built from it, and the shortest-path
//! computation run on the latter.
//!
//! The AS topology graph has one vertex per cluster member, one vertex per admissible
//! external route (a route some border member learned from a legacy neighbor) and a
//! virtual destination `D`. Edges:
//!
//! * member to member for every switch-graph edge, both directions, weight 1;
//! * border member to each of its external-route vertices, weight = AS path length;
//! * external-route vertex to `D`, weight 0;
//! * originating member to `D`, weight 0, when the cluster itself originates the prefix.
//!
//! An external route is admissible at border `b` only if its AS path names no member of
//! `b`'s connected component. Routes naming members of other components are kept: they
//! are how disjoint sub-clusters reach each other over legacy paths. The members they
//! name are recorded as banned for that vertex; since a component can only reach its own
//! border vertices, a banned member can never select the route.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::SdnError;
use crate::bgp::RouteAdvert;
use crate::time::SimTime;
use crate::topo::{role_from, Asn, Link, LinkKey, PeerRole, Prefix, Topology, DEFAULT_LATENCY};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    /// What the external neighbor is to the member.
    pub role: PeerRole,
    pub latency: SimTime,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwitchGraph {
    nodes: BTreeSet<Asn>,
    edges: BTreeMap<LinkKey, Link>,
    /// `(member, external neighbor)`.
    border_sessions: BTreeMap<(Asn, Asn), Session>,
}

impl SwitchGraph {
    /// Switch graph of cluster `cluster` of `topology`.
    pub fn build(topology: &Topology, cluster: usize) -> Result<Self, SdnError> {
        let members = topology
            .clusters()
            .get(cluster)
            .filter(|c| !c.is_empty())
            .ok_or_else(|| SdnError::InvalidArgument(format!("no cluster #{cluster} declared")))?;
        let mut edges = BTreeMap::new();
        let mut border_sessions = BTreeMap::new();
        for (k, link) in topology.links() {
            match (members.contains(&k.low()), members.contains(&k.high())) {
                (true, true) => {
                    edges.insert(k, *link);
                }
                (true, false) | (false, true) => {
                    let (m, ext) = if members.contains(&k.low()) { (k.low(), k.high()) } else { (k.high(), k.low()) };
                    let role = role_from(link.relationship, m);
                    border_sessions.insert((m, ext), Session { role, latency: link.latency });
                }
                (false, false) => {}
            }
        }
        Ok(SwitchGraph { nodes: members.clone(), edges, border_sessions })
    }

    pub fn members(&self) -> &BTreeSet<Asn> {
        &self.nodes
    }

    pub fn is_member(&self, asn: Asn) -> bool {
        self.nodes.contains(&asn)
    }

    pub fn edges(&self) -> impl Iterator<Item = (LinkKey, &Link)> + '_ {
        self.edges.iter().map(|(k, l)| (*k, l))
    }

    pub fn has_edge(&self, a: Asn, b: Asn) -> bool {
        self.edges.contains_key(&LinkKey::new(a, b))
    }

    pub fn border_sessions(&self) -> &BTreeMap<(Asn, Asn), Session> {
        &self.border_sessions
    }

    pub fn session(&self, member: Asn, ext: Asn) -> Option<&Session> {
        self.border_sessions.get(&(member, ext))
    }

    /// Role of `neighbor` seen from member `me`, over either an internal edge or a session.
    pub fn role_of(&self, me: Asn, neighbor: Asn) -> Option<PeerRole> {
        if let Some(link) = self.edges.get(&LinkKey::new(me, neighbor)) {
            return Some(role_from(link.relationship, me));
        }
        self.border_sessions.get(&(me, neighbor)).map(|s| s.role)
    }

    pub fn internal_neighbors(&self, m: Asn) -> impl Iterator<Item = Asn> + '_ {
        self.edges.keys().filter_map(move |k| k.other(m))
    }

    pub fn remove_edge(&mut self, a: Asn, b: Asn) -> Option<Link> {
        self.edges.remove(&LinkKey::new(a, b))
    }

    pub fn insert_edge(&mut self, a: Asn, b: Asn, link: Link) {
        self.edges.insert(LinkKey::new(a, b), link);
    }

    pub fn remove_session(&mut self, member: Asn, ext: Asn) -> Option<Session> {
        self.border_sessions.remove(&(member, ext))
    }

    pub fn insert_session(&mut self, member: Asn, ext: Asn, session: Session) {
        self.border_sessions.insert((member, ext), session);
    }

    /// Connected components (sub-clusters), each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<BTreeSet<Asn>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &start in &self.nodes {
            if seen.contains(&start) {
                continue;
            }
            let mut comp = BTreeSet::from([start]);
            let mut queue = VecDeque::from([start]);
            seen.insert(start);
            while let Some(x) = queue.pop_front() {
                for y in self.internal_neighbors(x) {
                    if seen.insert(y) {
                        comp.insert(y);
                        queue.push_back(y);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    pub fn component_index(&self) -> BTreeMap<Asn, usize> {
        self.components()
            .into_iter()
            .enumerate()
            .flat_map(|(i, c)| c.into_iter().map(move |m| (m, i)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Internal hop = 1, external tail = its AS path length.
    #[default]
    HopCount,
    /// Internal hop = link latency in microseconds; external tails cost the default link
    /// latency per AS hop.
    Latency,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Vertex {
    Member { asn: Asn },
    External { border: Asn, neighbor: Asn, as_path: Vec<Asn> },
    Destination,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsTopologyGraph {
    pub prefix: Prefix,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    /// External-route vertex index to the other-component members its path names.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub banned: BTreeMap<usize, BTreeSet<Asn>>,
}

impl AsTopologyGraph {
    pub fn destination(&self) -> usize {
        self.vertices
            .iter()
            .position(|v| matches!(v, Vertex::Destination))
            .expect("graph always has a destination vertex")
    }

    pub fn member_vertices(&self) -> impl Iterator<Item = (usize, Asn)> + '_ {
        self.vertices.iter().enumerate().filter_map(|(i, v)| match v {
            Vertex::Member { asn } => Some((i, *asn)),
            _ => None,
        })
    }

    pub fn external_count(&self) -> usize {
        self.vertices.iter().filter(|v| matches!(v, Vertex::External { .. })).count()
    }

    /// AS-level contribution of a vertex to a path through it.
    pub fn label(&self, v: usize) -> &[Asn] {
        match &self.vertices[v] {
            Vertex::Member { asn } => std::slice::from_ref(asn),
            Vertex::External { as_path, .. } => as_path,
            Vertex::Destination => &[],
        }
    }
}

/// Whether an external route learned at `border` may enter the graph.
pub fn admissible(route: &RouteAdvert, border: Asn, components: &BTreeMap<Asn, usize>) -> bool {
    let Some(&home) = components.get(&border) else {
        return false;
    };
    !route.as_path.iter().any(|a| components.get(a) == Some(&home))
}

/// Builds the AS topology graph of `prefix`.
///
/// `external_routes` pairs each route with the border member that learned it.
pub fn transform(
    sg: &SwitchGraph,
    prefix: Prefix,
    external_routes: &[(Asn, RouteAdvert)],
    originating_member: Option<Asn>,
    weighting: Weighting,
) -> AsTopologyGraph {
    let components = sg.component_index();
    let mut vertices: Vec<Vertex> = sg.members().iter().map(|&asn| Vertex::Member { asn }).collect();
    let index: BTreeMap<Asn, usize> = sg.members().iter().enumerate().map(|(i, a)| (*a, i)).collect();
    let mut edges = Vec::new();
    let mut banned = BTreeMap::new();

    for (k, link) in sg.edges() {
        let w = match weighting {
            Weighting::HopCount => 1,
            Weighting::Latency => link.latency.as_micros().max(1),
        };
        let (a, b) = (index[&k.low()], index[&k.high()]);
        edges.push(Edge { from: a, to: b, weight: w });
        edges.push(Edge { from: b, to: a, weight: w });
    }

    let mut ext_vertices = Vec::new();
    for (border, route) in external_routes {
        if route.prefix != prefix || !sg.is_member(*border) || !admissible(route, *border, &components) {
            continue;
        }
        let v = vertices.len() + ext_vertices.len();
        let hops = route.as_path.len() as u64;
        let w = match weighting {
            Weighting::HopCount => hops,
            Weighting::Latency => hops * DEFAULT_LATENCY.as_micros(),
        };
        edges.push(Edge { from: index[border], to: v, weight: w });
        let named: BTreeSet<Asn> = route.as_path.iter().copied().filter(|a| sg.is_member(*a)).collect();
        if !named.is_empty() {
            banned.insert(v, named);
        }
        ext_vertices.push(Vertex::External { border: *border, neighbor: route.next_hop, as_path: route.as_path.clone() });
    }
    let dest = vertices.len() + ext_vertices.len();
    for i in 0..ext_vertices.len() {
        edges.push(Edge { from: vertices.len() + i, to: dest, weight: 0 });
    }
    vertices.extend(ext_vertices);
    vertices.push(Vertex::Destination);
    if let Some(o) = originating_member.and_then(|o| index.get(&o)) {
        edges.push(Edge { from: *o, to: dest, weight: 0 });
    }
    AsTopologyGraph { prefix, vertices, edges, banned }
}

/// Where a member forwards traffic for a prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "asn", rename_all = "snake_case")]
pub enum Egress {
    Member(Asn),
    External(Asn),
    Local,
}

impl Egress {
    pub fn next_hop(self) -> Option<Asn> {
        match self {
            Egress::Member(a) | Egress::External(a) => Some(a),
            Egress::Local => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberRoute {
    pub egress: Egress,
    /// Starts with the member itself; member hops, then the external tail.
    pub as_path: Vec<Asn>,
    pub weight: u64,
}

/// Per-member shortest path to the destination; ties go to the lexicographically
/// smallest full AS path. Unreachable members map to `None`.
pub fn compute_paths(g: &AsTopologyGraph) -> BTreeMap<Asn, Option<MemberRoute>> {
    let n = g.vertices.len();
    let dest = g.destination();
    // reversed adjacency: incoming[v] = (u, w) for every edge u -> v
    let mut incoming: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
    for e in &g.edges {
        incoming[e.to].push((e.from, e.weight));
    }

    #[derive(Clone)]
    struct Label {
        dist: u64,
        path: Vec<Asn>,
        next: usize,
    }
    let mut best: Vec<Option<Label>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[dest] = Some(Label { dist: 0, path: Vec::new(), next: dest });
    heap.push(Reverse((0u64, Vec::<Asn>::new(), dest)));

    while let Some(Reverse((dist, path, v))) = heap.pop() {
        if done[v] {
            continue;
        }
        match &best[v] {
            Some(l) if l.dist == dist && l.path == path => {}
            _ => continue,
        }
        done[v] = true;
        for &(u, w) in &incoming[v] {
            if done[u] {
                continue;
            }
            let mut cand_path = g.label(u).to_vec();
            if let Some(Vertex::Member { asn }) = g.vertices.get(u) {
                if path.contains(asn) {
                    continue;
                }
            }
            cand_path.extend_from_slice(&path);
            let cand = (dist + w, cand_path);
            let better = match &best[u] {
                None => true,
                Some(l) => (cand.0, &cand.1) < (l.dist, &l.path),
            };
            if better {
                best[u] = Some(Label { dist: cand.0, path: cand.1.clone(), next: v });
                heap.push(Reverse((cand.0, cand.1, u)));
            }
        }
    }

    g.member_vertices()
        .map(|(i, asn)| {
            let route = best[i].as_ref().map(|l| {
                let egress = match &g.vertices[l.next] {
                    Vertex::Member { asn } => Egress::Member(*asn),
                    Vertex::External { neighbor, .. } => Egress::External(*neighbor),
                    Vertex::Destination => Egress::Local,
                };
                debug_assert!(
                    g.banned.get(&l.next).is_none_or(|b| !b.contains(&asn)),
                    "{asn} selected a route naming itself"
                );
                MemberRoute { egress, as_path: l.path.clone(), weight: l.dist }
            });
            (asn, route)
        })
        .collect()
}
