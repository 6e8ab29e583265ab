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

//! Centralized inter-domain controller and the cluster BGP speaker in front of it.
//!
//! Legacy neighbors talk BGP to border members; the speaker hands every message to the
//! [`Controller`], which stores it, marks the prefix dirty and arms a batching timer.
//! When the timer fires, every dirty prefix is recomputed from scratch: graph
//! transformation, Dijkstra, flow-table install and re-announcement to legacy
//! neighbors. Installation across all members happens at one simulated instant.

mod graph;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::{
    admissible, compute_paths, transform, AsTopologyGraph, Edge, Egress, MemberRoute, Session, SwitchGraph,
    Vertex, Weighting,
};

use crate::bgp::{exportable, BgpMessage, MessageKind, RouteAdvert, RouteSource};
use crate::time::SimTime;
use crate::topo::{Asn, Link, Prefix};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SdnError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FibDelta {
    pub member: Asn,
    pub prefix: Prefix,
    pub old: Option<Egress>,
    pub new: Option<Egress>,
}

/// Per-member forwarding rules compiled from controller paths.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FlowTable {
    entries: BTreeMap<Asn, BTreeMap<Prefix, Egress>>,
}

impl FlowTable {
    pub fn egress(&self, member: Asn, prefix: Prefix) -> Option<Egress> {
        self.entries.get(&member)?.get(&prefix).copied()
    }

    pub fn entries(&self, prefix: Prefix) -> BTreeMap<Asn, Egress> {
        self.entries
            .iter()
            .filter_map(|(m, t)| t.get(&prefix).map(|e| (*m, *e)))
            .collect()
    }

    /// Replaces every member's entry for `prefix` and reports what changed.
    pub fn install(&mut self, prefix: Prefix, paths: &BTreeMap<Asn, Option<MemberRoute>>) -> Vec<FibDelta> {
        let mut deltas = Vec::new();
        for (member, route) in paths {
            let new = route.as_ref().map(|r| r.egress);
            let table = self.entries.entry(*member).or_default();
            let old = match new {
                Some(e) => table.insert(prefix, e),
                None => table.remove(&prefix),
            };
            if old != new {
                deltas.push(FibDelta { member: *member, prefix, old, new });
            }
        }
        deltas
    }

    /// Members' egress choices for `prefix` never cycle among members.
    pub fn is_acyclic(&self, prefix: Prefix) -> bool {
        let entries = self.entries(prefix);
        entries.keys().all(|&start| {
            let mut seen = BTreeSet::new();
            let mut at = start;
            loop {
                if !seen.insert(at) {
                    return false;
                }
                match entries.get(&at) {
                    Some(Egress::Member(next)) => at = *next,
                    _ => return true,
                }
            }
        })
    }
}

/// Class a member's route is exported under: local for the originating member,
/// otherwise the relationship to the next AS on its path.
fn route_source(sg: &SwitchGraph, member: Asn, as_path: &[Asn]) -> Option<RouteSource> {
    match as_path.get(1) {
        None => Some(RouteSource::Local),
        Some(next) => sg.role_of(member, *next).map(RouteSource::from),
    }
}

/// What the cluster should currently announce on session `(member, ext)`.
fn session_route(sg: &SwitchGraph, member: Asn, ext: Asn, route: Option<&MemberRoute>) -> Option<Vec<Asn>> {
    let route = route?;
    let session = sg.session(member, ext)?;
    if route.as_path.contains(&ext) {
        return None;
    }
    let source = route_source(sg, member, &route.as_path)?;
    exportable(source, session.role).then(|| route.as_path.clone())
}

/// Announcements for one prefix, as deltas against `prev_emitted` (keyed by session).
pub fn emit_announcements(
    sg: &SwitchGraph,
    prefix: Prefix,
    paths: &BTreeMap<Asn, Option<MemberRoute>>,
    prev_emitted: &BTreeMap<(Asn, Asn), Vec<Asn>>,
) -> Vec<BgpMessage> {
    let mut out = Vec::new();
    for &(member, ext) in sg.border_sessions().keys() {
        let want = session_route(sg, member, ext, paths.get(&member).and_then(|r| r.as_ref()));
        let prev = prev_emitted.get(&(member, ext));
        match (want, prev) {
            (Some(p), Some(q)) if p == *q => {}
            (Some(p), _) => out.push(BgpMessage::update(member, ext, prefix, p)),
            (None, Some(_)) => out.push(BgpMessage::withdraw(member, ext, prefix)),
            (None, None) => {}
        }
    }
    // sessions that were torn down since the last emission are gone from prev_emitted
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecomputeQueue {
    pub dirty: BTreeSet<Prefix>,
    pub deadline: Option<SimTime>,
}

impl RecomputeQueue {
    /// Marks `prefix` dirty; returns the deadline if this call armed the timer.
    pub fn mark(&mut self, prefix: Prefix, now: SimTime, delay: SimTime) -> Option<SimTime> {
        self.dirty.insert(prefix);
        if self.deadline.is_some() {
            return None;
        }
        let at = now + delay;
        self.deadline = Some(at);
        Some(at)
    }

    pub fn is_idle(&self) -> bool {
        self.deadline.is_none() && self.dirty.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    /// Batching window between the first dirty mark and recomputation.
    pub recompute_delay: SimTime,
    pub weighting: Weighting,
    /// Delay between computing paths and their installation / announcement.
    pub install_latency: SimTime,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            recompute_delay: SimTime::from_secs_f64(0.2),
            weighting: Weighting::HopCount,
            install_latency: SimTime::ZERO,
        }
    }
}

/// Output of one recomputation, ready to be installed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecomputePlan {
    pub computed_at: SimTime,
    pub paths: Vec<(Prefix, BTreeMap<Asn, Option<MemberRoute>>)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemberRouteChange {
    pub member: Asn,
    pub prefix: Prefix,
    pub old: Option<Vec<Asn>>,
    pub new: Option<Vec<Asn>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ControllerOutput {
    pub fib_deltas: Vec<FibDelta>,
    pub route_changes: Vec<MemberRouteChange>,
    pub messages: Vec<BgpMessage>,
}

#[derive(Clone, Debug)]
pub struct Controller {
    sg: SwitchGraph,
    config: ControllerConfig,
    /// `(prefix, member, external neighbor)`.
    adj_in: BTreeMap<(Prefix, Asn, Asn), RouteAdvert>,
    originated: BTreeMap<Prefix, Asn>,
    flow: FlowTable,
    routes: BTreeMap<Prefix, BTreeMap<Asn, MemberRoute>>,
    emitted: BTreeMap<Prefix, BTreeMap<(Asn, Asn), Vec<Asn>>>,
    queue: RecomputeQueue,
    recomputations: u64,
}

impl Controller {
    pub fn new(sg: SwitchGraph, config: ControllerConfig) -> Self {
        Controller {
            sg,
            config,
            adj_in: BTreeMap::new(),
            originated: BTreeMap::new(),
            flow: FlowTable::default(),
            routes: BTreeMap::new(),
            emitted: BTreeMap::new(),
            queue: RecomputeQueue::default(),
            recomputations: 0,
        }
    }

    pub fn switch_graph(&self) -> &SwitchGraph {
        &self.sg
    }

    pub fn flow_table(&self) -> &FlowTable {
        &self.flow
    }

    pub fn queue(&self) -> &RecomputeQueue {
        &self.queue
    }

    pub fn recomputations(&self) -> u64 {
        self.recomputations
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn is_member(&self, asn: Asn) -> bool {
        self.sg.is_member(asn)
    }

    pub fn member_route(&self, member: Asn, prefix: Prefix) -> Option<&MemberRoute> {
        self.routes.get(&prefix)?.get(&member)
    }

    pub fn adj_in(&self) -> impl Iterator<Item = (Asn, &RouteAdvert)> + '_ {
        self.adj_in.iter().map(|((_, m, _), r)| (*m, r))
    }

    fn mark(&mut self, prefix: Prefix, now: SimTime) -> Option<SimTime> {
        self.queue.mark(prefix, now, self.config.recompute_delay)
    }

    fn known_prefixes(&self) -> BTreeSet<Prefix> {
        self.adj_in
            .keys()
            .map(|(p, _, _)| *p)
            .chain(self.originated.keys().copied())
            .chain(self.routes.keys().copied())
            .collect()
    }

    /// BGP input from a legacy neighbor on a border session. Returns the recomputation
    /// deadline if this message armed it.
    pub fn handle_external(&mut self, msg: &BgpMessage, now: SimTime) -> Result<Option<SimTime>, SdnError> {
        let (member, ext) = (msg.receiver, msg.sender);
        let Some(session) = self.sg.session(member, ext).copied() else {
            return Err(SdnError::Protocol(format!("no border session {member}-{ext}")));
        };
        let key = (msg.prefix, member, ext);
        match &msg.kind {
            MessageKind::Update { as_path } if !as_path.is_empty() && !as_path.contains(&member) => {
                let route = RouteAdvert {
                    prefix: msg.prefix,
                    as_path: as_path.clone(),
                    next_hop: ext,
                    learned_from: session.role.into(),
                };
                self.adj_in.insert(key, route);
            }
            MessageKind::Update { as_path } if as_path.is_empty() => {
                return Err(SdnError::Protocol(format!("empty AS path from {ext}")));
            }
            _ => {
                self.adj_in.remove(&key);
            }
        }
        Ok(self.mark(msg.prefix, now))
    }

    pub fn originate(&mut self, member: Asn, prefix: Prefix, now: SimTime) -> Result<Option<SimTime>, SdnError> {
        if !self.sg.is_member(member) {
            return Err(SdnError::InvalidArgument(format!("{member} is not a cluster member")));
        }
        if self.originated.get(&prefix) == Some(&member) {
            return Ok(None);
        }
        self.originated.insert(prefix, member);
        Ok(self.mark(prefix, now))
    }

    pub fn withdraw_origin(&mut self, member: Asn, prefix: Prefix, now: SimTime) -> Result<Option<SimTime>, SdnError> {
        if self.originated.get(&prefix) != Some(&member) {
            return Err(SdnError::InvalidArgument(format!("{member} never originated {prefix}")));
        }
        self.originated.remove(&prefix);
        Ok(self.mark(prefix, now))
    }

    pub fn originates(&self, prefix: Prefix) -> Option<Asn> {
        self.originated.get(&prefix).copied()
    }

    pub fn session_down(&mut self, member: Asn, ext: Asn, now: SimTime) -> Option<SimTime> {
        self.sg.remove_session(member, ext)?;
        let affected: BTreeSet<Prefix> = self
            .adj_in
            .keys()
            .filter(|(_, m, e)| *m == member && *e == ext)
            .map(|(p, _, _)| *p)
            .collect();
        self.adj_in.retain(|(_, m, e), _| !(*m == member && *e == ext));
        for table in self.emitted.values_mut() {
            table.remove(&(member, ext));
        }
        let mut armed = None;
        for p in affected {
            armed = armed.or(self.mark(p, now));
        }
        armed
    }

    pub fn session_up(&mut self, member: Asn, ext: Asn, session: Session, now: SimTime) -> Option<SimTime> {
        self.sg.insert_session(member, ext, session);
        self.mark_all(now)
    }

    pub fn internal_link_down(&mut self, a: Asn, b: Asn, now: SimTime) -> Option<SimTime> {
        self.sg.remove_edge(a, b)?;
        self.mark_all(now)
    }

    pub fn internal_link_up(&mut self, a: Asn, b: Asn, link: Link, now: SimTime) -> Option<SimTime> {
        self.sg.insert_edge(a, b, link);
        self.mark_all(now)
    }

    fn mark_all(&mut self, now: SimTime) -> Option<SimTime> {
        let mut armed = None;
        for p in self.known_prefixes() {
            armed = armed.or(self.mark(p, now));
        }
        armed
    }

    /// AS topology graph of `prefix` from current controller state.
    pub fn as_graph(&self, prefix: Prefix) -> AsTopologyGraph {
        let routes: Vec<(Asn, RouteAdvert)> = self
            .adj_in
            .range((prefix, Asn(0), Asn(0))..=(prefix, Asn(u32::MAX), Asn(u32::MAX)))
            .map(|((_, m, _), r)| (*m, r.clone()))
            .collect();
        transform(&self.sg, prefix, &routes, self.originated.get(&prefix).copied(), self.config.weighting)
    }

    /// Fires the batching timer. Stale deadlines are ignored.
    pub fn recompute(&mut self, now: SimTime) -> Option<RecomputePlan> {
        if self.queue.deadline != Some(now) {
            return None;
        }
        self.queue.deadline = None;
        let dirty = std::mem::take(&mut self.queue.dirty);
        self.recomputations += 1;
        let paths = dirty.into_iter().map(|p| (p, compute_paths(&self.as_graph(p)))).collect();
        Some(RecomputePlan { computed_at: now, paths })
    }

    /// Installs a plan on every member at once and relays the result to legacy neighbors.
    pub fn apply(&mut self, plan: RecomputePlan) -> ControllerOutput {
        let mut out = ControllerOutput::default();
        for (prefix, paths) in plan.paths {
            out.fib_deltas.extend(self.flow.install(prefix, &paths));
            debug_assert!(self.flow.is_acyclic(prefix));

            let current = self.routes.entry(prefix).or_default();
            for (member, route) in &paths {
                let old = current.get(member).map(|r| r.as_path.clone());
                let new = route.as_ref().map(|r| r.as_path.clone());
                if old != new {
                    out.route_changes.push(MemberRouteChange { member: *member, prefix, old, new });
                }
                match route {
                    Some(r) => current.insert(*member, r.clone()),
                    None => current.remove(member),
                };
            }
            if current.is_empty() {
                self.routes.remove(&prefix);
            }

            let prev = self.emitted.entry(prefix).or_default();
            let messages = emit_announcements(&self.sg, prefix, &paths, prev);
            for m in &messages {
                match m.as_path() {
                    Some(p) => prev.insert((m.sender, m.receiver), p.to_vec()),
                    None => prev.remove(&(m.sender, m.receiver)),
                };
            }
            if prev.is_empty() {
                self.emitted.remove(&prefix);
            }
            out.messages.extend(messages);
        }
        out
    }

    pub fn dump(&self) -> ControllerDump {
        let prefixes = self
            .known_prefixes()
            .into_iter()
            .map(|p| {
                let dump = PrefixDump {
                    graph: self.as_graph(p),
                    flow_table: self.flow.entries(p),
                    routes: self.routes.get(&p).cloned().unwrap_or_default(),
                };
                (p.to_string(), dump)
            })
            .collect();
        ControllerDump {
            members: self.sg.members().iter().copied().collect(),
            components: self.sg.components().into_iter().map(|c| c.into_iter().collect()).collect(),
            prefixes,
        }
    }
}

/// JSON-serializable snapshot of controller state.
#[derive(Clone, Debug, Serialize)]
pub struct ControllerDump {
    pub members: Vec<Asn>,
    pub components: Vec<Vec<Asn>>,
    pub prefixes: BTreeMap<String, PrefixDump>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PrefixDump {
    pub graph: AsTopologyGraph,
    pub flow_table: BTreeMap<Asn, Egress>,
    pub routes: BTreeMap<Asn, MemberRoute>,
}
