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

//! Path-vector BGP speaker for legacy ASes.
//!
//! A [`BgpRouter`] owns the three RIB stages and per-neighbor MRAI pacing. Every handler
//! takes the current simulated time and returns a [`RouterOutput`] with the messages to
//! put on the wire, the loc-RIB changes it made and the timers it armed. The router never
//! schedules anything itself.

mod policy;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use policy::{decide, export_filter, exportable, RouteAdvert, RouteSource};

use crate::time::SimTime;
use crate::topo::{Asn, PeerRole, Prefix};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BgpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MessageKind {
    Update { as_path: Vec<Asn> },
    Withdraw,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BgpMessage {
    pub kind: MessageKind,
    pub prefix: Prefix,
    pub sender: Asn,
    pub receiver: Asn,
}

impl BgpMessage {
    pub fn update(sender: Asn, receiver: Asn, prefix: Prefix, as_path: Vec<Asn>) -> Self {
        BgpMessage { kind: MessageKind::Update { as_path }, prefix, sender, receiver }
    }

    pub fn withdraw(sender: Asn, receiver: Asn, prefix: Prefix) -> Self {
        BgpMessage { kind: MessageKind::Withdraw, prefix, sender, receiver }
    }

    pub fn as_path(&self) -> Option<&[Asn]> {
        match &self.kind {
            MessageKind::Update { as_path } => Some(as_path),
            MessageKind::Withdraw => None,
        }
    }
}

/// Last thing sent to a neighbor for a prefix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Advertised {
    Route(Vec<Asn>),
    Withdrawn,
}

#[derive(Clone, Debug, Default)]
pub struct Rib {
    /// Keyed by prefix first so candidates for one prefix are a contiguous range.
    pub adj_in: BTreeMap<(Prefix, Asn), RouteAdvert>,
    pub loc: BTreeMap<Prefix, RouteAdvert>,
    pub adj_out: BTreeMap<(Asn, Prefix), Advertised>,
}

impl Rib {
    pub fn candidates(&self, prefix: Prefix) -> impl Iterator<Item = &RouteAdvert> + '_ {
        self.adj_in
            .range((prefix, Asn(0))..=(prefix, Asn(u32::MAX)))
            .map(|(_, r)| r)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MraiState {
    pub deadline: Option<SimTime>,
    pub pending: BTreeSet<Prefix>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BgpConfig {
    /// Zero disables pacing.
    pub mrai: SimTime,
    /// Relative jitter; each arming draws uniformly from `mrai * [1 - j, 1 + j]`.
    pub mrai_jitter: f64,
}

impl Default for BgpConfig {
    fn default() -> Self {
        BgpConfig { mrai: SimTime::from_secs_f64(2.0), mrai_jitter: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocChange {
    pub prefix: Prefix,
    pub old: Option<RouteAdvert>,
    pub new: Option<RouteAdvert>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RouterOutput {
    pub messages: Vec<BgpMessage>,
    pub loc_changes: Vec<LocChange>,
    /// `(neighbor, deadline)` for every MRAI timer armed while handling the event.
    pub timers: Vec<(Asn, SimTime)>,
}

impl RouterOutput {
    fn absorb(&mut self, other: RouterOutput) {
        self.messages.extend(other.messages);
        self.loc_changes.extend(other.loc_changes);
        self.timers.extend(other.timers);
    }
}

#[derive(Clone, Debug)]
pub struct BgpRouter {
    asn: Asn,
    neighbors: BTreeMap<Asn, PeerRole>,
    rib: Rib,
    originated: BTreeSet<Prefix>,
    mrai: BTreeMap<Asn, MraiState>,
    config: BgpConfig,
    rng: ChaCha8Rng,
}

impl BgpRouter {
    /// `seed` is the run seed; each router draws from its own stream of it.
    pub fn new(asn: Asn, neighbors: BTreeMap<Asn, PeerRole>, config: BgpConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::from(asn.0));
        let mrai = neighbors.keys().map(|n| (*n, MraiState::default())).collect();
        BgpRouter { asn, neighbors, rib: Rib::default(), originated: BTreeSet::new(), mrai, config, rng }
    }

    pub fn asn(&self) -> Asn {
        self.asn
    }

    pub fn rib(&self) -> &Rib {
        &self.rib
    }

    pub fn neighbors(&self) -> &BTreeMap<Asn, PeerRole> {
        &self.neighbors
    }

    pub fn mrai_state(&self, neighbor: Asn) -> Option<&MraiState> {
        self.mrai.get(&neighbor)
    }

    pub fn best(&self, prefix: Prefix) -> Option<&RouteAdvert> {
        self.rib.loc.get(&prefix)
    }

    pub fn originates(&self, prefix: Prefix) -> bool {
        self.originated.contains(&prefix)
    }

    /// Number of prefixes waiting behind armed MRAI timers.
    pub fn pending_count(&self) -> usize {
        self.mrai
            .values()
            .filter(|s| s.deadline.is_some())
            .map(|s| s.pending.len())
            .sum()
    }

    pub fn process_message(&mut self, msg: &BgpMessage, now: SimTime) -> Result<RouterOutput, BgpError> {
        if msg.receiver != self.asn {
            return Err(BgpError::Protocol(format!("{} got a message for {}", self.asn, msg.receiver)));
        }
        let Some(role) = self.neighbors.get(&msg.sender).copied() else {
            return Err(BgpError::Protocol(format!(
                "{} got a message from non-adjacent {}",
                self.asn, msg.sender
            )));
        };
        let key = (msg.prefix, msg.sender);
        match &msg.kind {
            MessageKind::Update { as_path } if as_path.is_empty() => {
                return Err(BgpError::Protocol(format!("empty AS path from {}", msg.sender)));
            }
            MessageKind::Update { as_path } if as_path.contains(&self.asn) => {
                // A looped path replaces whatever the sender told us before.
                if self.rib.adj_in.remove(&key).is_none() {
                    return Ok(RouterOutput::default());
                }
            }
            MessageKind::Update { as_path } => {
                let route = RouteAdvert {
                    prefix: msg.prefix,
                    as_path: as_path.clone(),
                    next_hop: msg.sender,
                    learned_from: role.into(),
                };
                self.rib.adj_in.insert(key, route);
            }
            MessageKind::Withdraw => {
                if self.rib.adj_in.remove(&key).is_none() {
                    return Ok(RouterOutput::default());
                }
            }
        }
        Ok(self.redecide(msg.prefix, now))
    }

    /// Starts originating `prefix`. Repeated calls are no-ops.
    pub fn originate(&mut self, prefix: Prefix, now: SimTime) -> RouterOutput {
        if !self.originated.insert(prefix) {
            return RouterOutput::default();
        }
        self.redecide(prefix, now)
    }

    pub fn withdraw_origin(&mut self, prefix: Prefix, now: SimTime) -> Result<RouterOutput, BgpError> {
        if !self.originated.remove(&prefix) {
            return Err(BgpError::InvalidArgument(format!("{} never originated {prefix}", self.asn)));
        }
        Ok(self.redecide(prefix, now))
    }

    /// Session to `neighbor` went away: flush everything learned from and sent to it.
    pub fn session_down(&mut self, neighbor: Asn, now: SimTime) -> RouterOutput {
        if self.neighbors.remove(&neighbor).is_none() {
            return RouterOutput::default();
        }
        self.mrai.remove(&neighbor);
        self.rib.adj_out.retain(|(n, _), _| *n != neighbor);
        let affected: BTreeSet<Prefix> = self
            .rib
            .adj_in
            .keys()
            .filter(|(_, n)| *n == neighbor)
            .map(|(p, _)| *p)
            .collect();
        self.rib.adj_in.retain(|(_, n), _| *n != neighbor);
        let mut out = RouterOutput::default();
        for p in affected {
            out.absorb(self.redecide(p, now));
        }
        out
    }

    /// Session to `neighbor` (re)established: advertise the full loc-RIB to it.
    pub fn session_up(&mut self, neighbor: Asn, role: PeerRole, now: SimTime) -> RouterOutput {
        self.neighbors.insert(neighbor, role);
        self.mrai.insert(neighbor, MraiState::default());
        let prefixes: Vec<Prefix> = self.rib.loc.keys().copied().collect();
        self.schedule_to(neighbor, &prefixes, now)
    }

    /// Handles an MRAI expiry; stale timers (re-armed or removed since) are ignored.
    pub fn mrai_expired(&mut self, neighbor: Asn, now: SimTime) -> RouterOutput {
        let Some(state) = self.mrai.get_mut(&neighbor) else {
            return RouterOutput::default();
        };
        if state.deadline != Some(now) {
            return RouterOutput::default();
        }
        state.deadline = None;
        let pending: Vec<Prefix> = std::mem::take(&mut state.pending).into_iter().collect();
        self.schedule_to(neighbor, &pending, now)
    }

    fn redecide(&mut self, prefix: Prefix, now: SimTime) -> RouterOutput {
        let new = if self.originated.contains(&prefix) {
            Some(RouteAdvert::local(prefix, self.asn))
        } else {
            decide(self.rib.candidates(prefix), self.asn)
                .expect("adj_in candidates share the prefix")
                .cloned()
        };
        let old = self.rib.loc.get(&prefix).cloned();
        if old == new {
            return RouterOutput::default();
        }
        match &new {
            Some(r) => self.rib.loc.insert(prefix, r.clone()),
            None => self.rib.loc.remove(&prefix),
        };
        let mut out = RouterOutput::default();
        out.loc_changes.push(LocChange { prefix, old, new });
        let neighbors: Vec<Asn> = self.neighbors.keys().copied().collect();
        for n in neighbors {
            out.absorb(self.schedule_to(n, &[prefix], now));
        }
        out
    }

    /// What should currently be advertised to `neighbor` for `prefix`.
    fn desired(&self, neighbor: Asn, prefix: Prefix) -> Option<Vec<Asn>> {
        let route = self.rib.loc.get(&prefix)?;
        let role = *self.neighbors.get(&neighbor)?;
        // No sender-side loop suppression: receivers run the loop check.
        export_filter(route, role, self.asn).map(|adv| adv.as_path)
    }

    /// Sends changes for `prefixes` now if the neighbor's timer is idle, otherwise queues
    /// them until expiry.
    fn schedule_to(&mut self, neighbor: Asn, prefixes: &[Prefix], now: SimTime) -> RouterOutput {
        let mut out = RouterOutput::default();
        let armed = match self.mrai.get(&neighbor) {
            Some(s) => matches!(s.deadline, Some(d) if d > now),
            None => return out,
        };
        if armed {
            let state = self.mrai.get_mut(&neighbor).expect("checked above");
            state.pending.extend(prefixes.iter().copied());
            return out;
        }
        for &p in prefixes {
            if let Some(msg) = self.delta(neighbor, p) {
                out.messages.push(msg);
            }
        }
        if !out.messages.is_empty() && self.config.mrai > SimTime::ZERO {
            let deadline = now + self.jittered_mrai();
            let state = self.mrai.get_mut(&neighbor).expect("checked above");
            state.deadline = Some(deadline);
            out.timers.push((neighbor, deadline));
        }
        out
    }

    /// The message bringing adj-out for `(neighbor, prefix)` in line with loc, if any.
    fn delta(&mut self, neighbor: Asn, prefix: Prefix) -> Option<BgpMessage> {
        let desired = self.desired(neighbor, prefix);
        let key = (neighbor, prefix);
        let current = self.rib.adj_out.get(&key);
        match desired {
            Some(path) => {
                if matches!(current, Some(Advertised::Route(p)) if *p == path) {
                    return None;
                }
                self.rib.adj_out.insert(key, Advertised::Route(path.clone()));
                Some(BgpMessage::update(self.asn, neighbor, prefix, path))
            }
            None => {
                if !matches!(current, Some(Advertised::Route(_))) {
                    return None;
                }
                self.rib.adj_out.insert(key, Advertised::Withdrawn);
                Some(BgpMessage::withdraw(self.asn, neighbor, prefix))
            }
        }
    }

    fn jittered_mrai(&mut self) -> SimTime {
        let base = self.config.mrai.as_micros() as f64;
        let j = self.config.mrai_jitter.clamp(0.0, 1.0);
        if j == 0.0 {
            return self.config.mrai;
        }
        let factor = self.rng.gen_range((1.0 - j)..=(1.0 + j));
        SimTime::from_micros((base * factor).round().max(1.0) as u64)
    }
}
