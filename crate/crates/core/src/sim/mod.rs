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

//! Deterministic discrete-event engine.
//!
//! One [`Simulation`] is one single-threaded run. Events pop in `(time, seq)` order and
//! the only randomness is MRAI jitter, drawn from per-router streams of the run seed, so
//! equal `(topology, scenario, seed)` triples give byte-identical logs.
//!
//! A message sent at `t` over a link of latency `l` is delivered at `t + l` and
//! processed by the receiver at `t + l + processing_delay`.

mod queue;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use queue::EventQueue;

use crate::bgp::{BgpConfig, BgpMessage, BgpRouter, RouterOutput};
use crate::collector::{Collector, ForwardingState, Hop, RecordKind};
use crate::sdn::{Controller, ControllerConfig, ControllerOutput, Egress, RecomputePlan, Session, SwitchGraph};
use crate::time::SimTime;
use crate::topo::{Asn, Link, LinkKey, Prefix, Topology};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("invalid argument: {}", .0.join("; "))]
    InvalidArgument(Vec<String>),
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActionKind {
    Announce { asn: Asn, prefix: Prefix },
    Withdraw { asn: Asn, prefix: Prefix },
    LinkFail { a: Asn, b: Asn },
    LinkRestore { a: Asn, b: Asn },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScenarioAction {
    #[serde(rename = "at_us")]
    pub at: SimTime,
    #[serde(flatten)]
    pub kind: ActionKind,
}

impl ScenarioAction {
    pub fn announce(at: SimTime, asn: Asn, prefix: Prefix) -> Self {
        ScenarioAction { at, kind: ActionKind::Announce { asn, prefix } }
    }

    pub fn withdraw(at: SimTime, asn: Asn, prefix: Prefix) -> Self {
        ScenarioAction { at, kind: ActionKind::Withdraw { asn, prefix } }
    }

    pub fn link_fail(at: SimTime, a: Asn, b: Asn) -> Self {
        ScenarioAction { at, kind: ActionKind::LinkFail { a, b } }
    }

    pub fn link_restore(at: SimTime, a: Asn, b: Asn) -> Self {
        ScenarioAction { at, kind: ActionKind::LinkRestore { a, b } }
    }

    pub fn prefix(&self) -> Option<Prefix> {
        match self.kind {
            ActionKind::Announce { prefix, .. } | ActionKind::Withdraw { prefix, .. } => Some(prefix),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub max_time: SimTime,
    pub max_events: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_time: SimTime::from_secs_f64(3600.0), max_events: 20_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub bgp: BgpConfig,
    pub controller: ControllerConfig,
    pub processing_delay: SimTime,
    pub limits: Limits,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            bgp: BgpConfig::default(),
            controller: ControllerConfig::default(),
            processing_delay: SimTime::from_millis(1),
            limits: Limits::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Converged { at: SimTime },
    Timeout { at: SimTime },
}

impl RunStatus {
    pub fn converged(self) -> bool {
        matches!(self, RunStatus::Converged { .. })
    }

    pub fn at(self) -> SimTime {
        match self {
            RunStatus::Converged { at } | RunStatus::Timeout { at } => at,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub log: Collector,
    pub status: RunStatus,
    /// `after[i]` is the forwarding state once action `i` settled: taken right before
    /// action `i + 1` is injected, or at the end of the run for the last action.
    pub after: Vec<ForwardingState>,
}

#[derive(Debug)]
enum Event {
    Deliver { msg: BgpMessage, epoch: u64, sent_at: SimTime },
    Process { msg: BgpMessage, epoch: u64 },
    MraiExpiry { asn: Asn, neighbor: Asn },
    ControllerRecompute { cluster: usize },
    ControllerInstall { cluster: usize, plan: RecomputePlan },
    Inject { index: usize },
}

/// Checks that every action refers to existing topology elements in a consistent order.
pub fn validate_scenario(topology: &Topology, actions: &[ScenarioAction]) -> Result<(), SimError> {
    let mut problems = Vec::new();
    let mut up: BTreeSet<LinkKey> = topology.links().map(|(k, _)| k).collect();
    let mut announced: BTreeSet<Prefix> = BTreeSet::new();
    let mut last = SimTime::ZERO;
    for (i, a) in actions.iter().enumerate() {
        if a.at < last {
            problems.push(format!("action #{i} is earlier than the one before it"));
        }
        last = last.max(a.at);
        match a.kind {
            ActionKind::Announce { asn, prefix } => {
                if !topology.contains(asn) {
                    problems.push(format!("action #{i}: unknown {asn}"));
                } else if topology.origin_of(prefix) != Some(asn) {
                    problems.push(format!("action #{i}: {prefix} is not assigned to {asn}"));
                } else {
                    announced.insert(prefix);
                }
            }
            ActionKind::Withdraw { asn, prefix } => {
                if topology.origin_of(prefix) != Some(asn) || !announced.remove(&prefix) {
                    problems.push(format!("action #{i}: {asn} is not announcing {prefix}"));
                }
            }
            ActionKind::LinkFail { a: x, b: y } => {
                if !up.remove(&LinkKey::new(x, y)) {
                    problems.push(format!("action #{i}: no live link {x}-{y}"));
                }
            }
            ActionKind::LinkRestore { a: x, b: y } => {
                let k = LinkKey::new(x, y);
                if topology.link(x, y).is_none() || up.contains(&k) {
                    problems.push(format!("action #{i}: link {x}-{y} is not failed"));
                } else {
                    up.insert(k);
                }
            }
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(SimError::InvalidArgument(problems))
    }
}

pub struct Simulation {
    topology: Topology,
    config: EngineConfig,
    routers: BTreeMap<Asn, BgpRouter>,
    controllers: Vec<Controller>,
    member_of: BTreeMap<Asn, usize>,
    queue: EventQueue<Event>,
    now: SimTime,
    log: Collector,
    in_flight: usize,
    pending_installs: usize,
    epochs: BTreeMap<LinkKey, u64>,
    failed: BTreeMap<LinkKey, Link>,
    actions: Vec<ScenarioAction>,
    injected: usize,
    after: Vec<ForwardingState>,
    events: u64,
}

impl Simulation {
    pub fn new(topology: &Topology, config: EngineConfig, seed: u64) -> Result<Self, SimError> {
        topology.validate().map_err(|e| SimError::InvalidArgument(vec![e.to_string()]))?;
        let mut member_of = BTreeMap::new();
        let mut controllers = Vec::new();
        for (i, members) in topology.clusters().iter().enumerate() {
            let sg = SwitchGraph::build(topology, i).map_err(|e| SimError::InvalidArgument(vec![e.to_string()]))?;
            controllers.push(Controller::new(sg, config.controller));
            member_of.extend(members.iter().map(|m| (*m, i)));
        }
        let routers = topology
            .nodes()
            .filter(|a| !member_of.contains_key(a))
            .map(|asn| {
                let neigh = topology
                    .neighbors(asn)
                    .map(|n| (n, topology.role_of(asn, n).expect("adjacent")))
                    .collect();
                (asn, BgpRouter::new(asn, neigh, config.bgp, seed))
            })
            .collect();
        Ok(Simulation {
            topology: topology.clone(),
            config,
            routers,
            controllers,
            member_of,
            queue: EventQueue::new(),
            now: SimTime::ZERO,
            log: Collector::new(),
            in_flight: 0,
            pending_installs: 0,
            epochs: BTreeMap::new(),
            failed: BTreeMap::new(),
            actions: Vec::new(),
            injected: 0,
            after: Vec::new(),
            events: 0,
        })
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn log(&self) -> &Collector {
        &self.log
    }

    pub fn router(&self, asn: Asn) -> Option<&BgpRouter> {
        self.routers.get(&asn)
    }

    pub fn routers(&self) -> impl Iterator<Item = &BgpRouter> + '_ {
        self.routers.values()
    }

    pub fn controllers(&self) -> &[Controller] {
        &self.controllers
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn events_processed(&self) -> u64 {
        self.events
    }

    /// Queues a scenario. Actions must be time ordered and consistent with the topology.
    pub fn schedule(&mut self, actions: &[ScenarioAction]) -> Result<(), SimError> {
        validate_scenario(&self.topology, actions)?;
        let base = self.actions.len();
        for (i, a) in actions.iter().enumerate() {
            self.queue.push(a.at.max(self.now), Event::Inject { index: base + i });
        }
        self.actions.extend_from_slice(actions);
        Ok(())
    }

    /// No messages in flight, no MRAI timer holding changes, no controller work pending.
    pub fn quiescent(&self) -> bool {
        self.in_flight == 0
            && self.pending_installs == 0
            && self.routers.values().all(|r| r.pending_count() == 0)
            && self.controllers.iter().all(|c| c.queue().is_idle())
    }

    /// Runs until every scheduled action has been injected and the network is quiescent,
    /// or a limit is hit.
    pub fn run_to_quiescence(&mut self) -> Result<RunStatus, SimError> {
        loop {
            if self.injected == self.actions.len() && self.quiescent() {
                return Ok(RunStatus::Converged { at: self.now });
            }
            let Some(next) = self.queue.peek_time() else {
                return Ok(RunStatus::Converged { at: self.now });
            };
            if next > self.config.limits.max_time || self.events >= self.config.limits.max_events {
                return Ok(RunStatus::Timeout { at: self.now });
            }
            self.step()?;
        }
    }

    /// Processes every event scheduled at or before `until`.
    pub fn advance_until(&mut self, until: SimTime) -> Result<(), SimError> {
        while self.queue.peek_time().is_some_and(|t| t <= until) {
            self.step()?;
        }
        self.now = self.now.max(until);
        Ok(())
    }

    pub fn forwarding_state(&self) -> ForwardingState {
        let mut s = ForwardingState::new(self.topology.nodes());
        for r in self.routers.values() {
            for (p, route) in &r.rib().loc {
                let hop = if route.next_hop == r.asn() { Hop::Local } else { Hop::Via(route.next_hop) };
                s.set(*p, r.asn(), hop);
            }
        }
        for c in &self.controllers {
            for m in c.switch_graph().members() {
                for p in self.topology.prefixes() {
                    match c.flow_table().egress(*m, p) {
                        Some(Egress::Local) => s.set(p, *m, Hop::Local),
                        Some(Egress::Member(x) | Egress::External(x)) => s.set(p, *m, Hop::Via(x)),
                        None => {}
                    }
                }
            }
        }
        s
    }

    fn step(&mut self) -> Result<(), SimError> {
        let Some((at, _, event)) = self.queue.pop() else {
            return Ok(());
        };
        debug_assert!(at >= self.now, "causality");
        self.now = at;
        self.events += 1;
        match event {
            Event::Deliver { msg, epoch, sent_at } => {
                if self.epoch(msg.sender, msg.receiver) != epoch {
                    self.in_flight -= 1;
                    return Ok(());
                }
                self.log.record(at, RecordKind::delivered(&msg, sent_at));
                self.queue.push(at + self.config.processing_delay, Event::Process { msg, epoch });
            }
            Event::Process { msg, epoch } => {
                self.in_flight -= 1;
                if self.epoch(msg.sender, msg.receiver) != epoch {
                    return Ok(());
                }
                if let Some(&c) = self.member_of.get(&msg.receiver) {
                    let armed = self.controllers[c]
                        .handle_external(&msg, at)
                        .map_err(|e| SimError::Protocol(e.to_string()))?;
                    self.arm_controller(c, armed);
                } else {
                    let router = self.routers.get_mut(&msg.receiver).expect("legacy receiver");
                    let out = router.process_message(&msg, at).map_err(|e| SimError::Protocol(e.to_string()))?;
                    self.dispatch_router(msg.receiver, out);
                }
            }
            Event::MraiExpiry { asn, neighbor } => {
                if let Some(r) = self.routers.get_mut(&asn) {
                    let out = r.mrai_expired(neighbor, at);
                    self.dispatch_router(asn, out);
                }
            }
            Event::ControllerRecompute { cluster } => {
                if let Some(plan) = self.controllers[cluster].recompute(at) {
                    let prefixes = plan.paths.iter().map(|(p, _)| *p).collect();
                    self.log.record(at, RecordKind::ControllerRecompute { cluster, prefixes });
                    let lat = self.config.controller.install_latency;
                    if lat == SimTime::ZERO {
                        let out = self.controllers[cluster].apply(plan);
                        self.dispatch_controller(out);
                    } else {
                        self.pending_installs += 1;
                        self.queue.push(at + lat, Event::ControllerInstall { cluster, plan });
                    }
                }
            }
            Event::ControllerInstall { cluster, plan } => {
                self.pending_installs -= 1;
                let out = self.controllers[cluster].apply(plan);
                self.dispatch_controller(out);
            }
            Event::Inject { index } => self.inject(index)?,
        }
        Ok(())
    }

    fn inject(&mut self, index: usize) -> Result<(), SimError> {
        if index > 0 {
            let snap = self.forwarding_state();
            self.after.push(snap);
        }
        self.injected += 1;
        let action = self.actions[index].clone();
        let now = self.now;
        self.log.record(now, RecordKind::ScenarioInjected { index, action: action.clone() });
        let invalid = |e: String| SimError::InvalidArgument(vec![e]);
        match action.kind {
            ActionKind::Announce { asn, prefix } => match self.member_of.get(&asn).copied() {
                Some(c) => {
                    let armed = self.controllers[c].originate(asn, prefix, now).map_err(|e| invalid(e.to_string()))?;
                    self.arm_controller(c, armed);
                }
                None => {
                    let out = self.routers.get_mut(&asn).expect("legacy").originate(prefix, now);
                    self.dispatch_router(asn, out);
                }
            },
            ActionKind::Withdraw { asn, prefix } => match self.member_of.get(&asn).copied() {
                Some(c) => {
                    let armed =
                        self.controllers[c].withdraw_origin(asn, prefix, now).map_err(|e| invalid(e.to_string()))?;
                    self.arm_controller(c, armed);
                }
                None => {
                    let out = self
                        .routers
                        .get_mut(&asn)
                        .expect("legacy")
                        .withdraw_origin(prefix, now)
                        .map_err(|e| invalid(e.to_string()))?;
                    self.dispatch_router(asn, out);
                }
            },
            ActionKind::LinkFail { a, b } => self.link_down(a, b)?,
            ActionKind::LinkRestore { a, b } => self.link_up(a, b)?,
        }
        Ok(())
    }

    fn link_down(&mut self, a: Asn, b: Asn) -> Result<(), SimError> {
        let key = LinkKey::new(a, b);
        let link = self
            .topology
            .remove_link(a, b)
            .map_err(|e| SimError::InvalidArgument(vec![e.to_string()]))?;
        self.failed.insert(key, link);
        *self.epochs.entry(key).or_default() += 1;
        let now = self.now;
        let (ca, cb) = (self.member_of.get(&a).copied(), self.member_of.get(&b).copied());
        if let (Some(x), Some(y)) = (ca, cb) {
            if x == y {
                let armed = self.controllers[x].internal_link_down(a, b, now);
                self.arm_controller(x, armed);
                return Ok(());
            }
        }
        for (me, other) in [(a, b), (b, a)] {
            match self.member_of.get(&me).copied() {
                Some(c) => {
                    let armed = self.controllers[c].session_down(me, other, now);
                    self.arm_controller(c, armed);
                }
                None => {
                    let out = self.routers.get_mut(&me).expect("legacy").session_down(other, now);
                    self.dispatch_router(me, out);
                }
            }
        }
        Ok(())
    }

    fn link_up(&mut self, a: Asn, b: Asn) -> Result<(), SimError> {
        let key = LinkKey::new(a, b);
        let link = self
            .failed
            .remove(&key)
            .ok_or_else(|| SimError::InvalidArgument(vec![format!("link {a}-{b} is not failed")]))?;
        self.topology
            .add_link(a, b, link)
            .map_err(|e| SimError::InvalidArgument(vec![e.to_string()]))?;
        let now = self.now;
        let (ca, cb) = (self.member_of.get(&a).copied(), self.member_of.get(&b).copied());
        if let (Some(x), Some(y)) = (ca, cb) {
            if x == y {
                let armed = self.controllers[x].internal_link_up(a, b, link, now);
                self.arm_controller(x, armed);
                return Ok(());
            }
        }
        for (me, other) in [(a, b), (b, a)] {
            let role = self.topology.role_of(me, other).expect("link just restored");
            match self.member_of.get(&me).copied() {
                Some(c) => {
                    let armed = self.controllers[c].session_up(me, other, Session { role, latency: link.latency }, now);
                    self.arm_controller(c, armed);
                }
                None => {
                    let out = self.routers.get_mut(&me).expect("legacy").session_up(other, role, now);
                    self.dispatch_router(me, out);
                }
            }
        }
        Ok(())
    }

    fn epoch(&self, a: Asn, b: Asn) -> u64 {
        self.epochs.get(&LinkKey::new(a, b)).copied().unwrap_or(0)
    }

    fn arm_controller(&mut self, cluster: usize, deadline: Option<SimTime>) {
        if let Some(at) = deadline {
            self.queue.push(at, Event::ControllerRecompute { cluster });
        }
    }

    fn send(&mut self, msg: BgpMessage) {
        let Some(link) = self.topology.link(msg.sender, msg.receiver) else {
            // session torn down in this same instant
            return;
        };
        let at = self.now + link.latency;
        let epoch = self.epoch(msg.sender, msg.receiver);
        self.log.record(self.now, RecordKind::sent(&msg));
        self.in_flight += 1;
        let sent_at = self.now;
        self.queue.push(at, Event::Deliver { msg, epoch, sent_at });
    }

    fn dispatch_router(&mut self, asn: Asn, out: RouterOutput) {
        let now = self.now;
        for c in out.loc_changes {
            self.log.record(
                now,
                RecordKind::LocRibChange {
                    asn,
                    prefix: c.prefix,
                    old: c.old.map(|r| r.as_path),
                    new: c.new.map(|r| r.as_path),
                },
            );
        }
        for m in out.messages {
            self.send(m);
        }
        for (neighbor, at) in out.timers {
            self.queue.push(at, Event::MraiExpiry { asn, neighbor });
        }
    }

    fn dispatch_controller(&mut self, out: ControllerOutput) {
        let now = self.now;
        for c in out.route_changes {
            self.log.record(now, RecordKind::LocRibChange { asn: c.member, prefix: c.prefix, old: c.old, new: c.new });
        }
        for d in out.fib_deltas {
            self.log.record(now, RecordKind::FibDelta { asn: d.member, prefix: d.prefix, old: d.old, new: d.new });
        }
        for m in out.messages {
            self.send(m);
        }
    }

    fn into_outcome(mut self, status: RunStatus) -> RunOutcome {
        if !self.actions.is_empty() {
            let snap = self.forwarding_state();
            self.after.push(snap);
        }
        RunOutcome { log: self.log, status, after: self.after }
    }
}

/// Runs `scenario` on `topology` to quiescence.
pub fn run(
    topology: &Topology,
    scenario: &[ScenarioAction],
    seed: u64,
    config: EngineConfig,
) -> Result<RunOutcome, SimError> {
    let mut sim = Simulation::new(topology, config, seed)?;
    sim.schedule(scenario)?;
    let status = sim.run_to_quiescence()?;
    Ok(sim.into_outcome(status))
}

impl Simulation {
    /// Finishes the run, attaching the final forwarding snapshot.
    pub fn finish(self, status: RunStatus) -> RunOutcome {
        self.into_outcome(status)
    }
}
