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

//! Forwarding-state snapshots and hop-by-hop reachability walks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::topo::{Asn, Prefix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "asn", rename_all = "snake_case")]
pub enum Hop {
    /// The AS originates the prefix.
    Local,
    Via(Asn),
}

/// Every AS's forwarding choice per prefix: loc-RIB next hop for legacy ASes, flow-table
/// egress for cluster members. ASes without an entry have no route.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardingState {
    pub nodes: BTreeSet<Asn>,
    pub hops: BTreeMap<Prefix, BTreeMap<Asn, Hop>>,
}

impl ForwardingState {
    pub fn new(nodes: impl IntoIterator<Item = Asn>) -> Self {
        ForwardingState { nodes: nodes.into_iter().collect(), hops: BTreeMap::new() }
    }

    pub fn set(&mut self, prefix: Prefix, asn: Asn, hop: Hop) {
        self.hops.entry(prefix).or_default().insert(asn, hop);
    }

    pub fn hop(&self, prefix: Prefix, asn: Asn) -> Option<Hop> {
        self.hops.get(&prefix)?.get(&asn).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum WalkOutcome {
    /// `path` runs from the start AS to the origin inclusive.
    Reaches { path: Vec<Asn> },
    /// `cycle` lists the ASes of the loop in traversal order.
    Loop { cycle: Vec<Asn> },
    Blackhole { at: Asn },
}

impl WalkOutcome {
    pub fn reaches(&self) -> bool {
        matches!(self, WalkOutcome::Reaches { .. })
    }
}

/// Follows forwarding choices from every AS until the origin, a repeated AS, or an AS
/// without a route. Each walk takes at most `|nodes|` steps.
pub fn fib_walk(state: &ForwardingState, prefix: Prefix) -> BTreeMap<Asn, WalkOutcome> {
    let empty = BTreeMap::new();
    let table = state.hops.get(&prefix).unwrap_or(&empty);
    state
        .nodes
        .iter()
        .map(|&start| {
            let mut path = vec![start];
            let mut at = start;
            let outcome = loop {
                match table.get(&at) {
                    None => break WalkOutcome::Blackhole { at },
                    Some(Hop::Local) => break WalkOutcome::Reaches { path },
                    Some(Hop::Via(next)) => {
                        if let Some(pos) = path.iter().position(|a| a == next) {
                            break WalkOutcome::Loop { cycle: path[pos..].to_vec() };
                        }
                        path.push(*next);
                        at = *next;
                    }
                }
            };
            (start, outcome)
        })
        .collect()
}

/// Number of distinct forwarding cycles among walk outcomes.
pub fn count_loops(walks: &BTreeMap<Asn, WalkOutcome>) -> usize {
    let cycles: BTreeSet<Vec<Asn>> = walks
        .values()
        .filter_map(|w| match w {
            WalkOutcome::Loop { cycle } => {
                let min = cycle.iter().enumerate().min_by_key(|(_, a)| **a).map(|(i, _)| i).unwrap_or(0);
                let mut c = cycle.clone();
                c.rotate_left(min);
                Some(c)
            }
            _ => None,
        })
        .collect();
    cycles.len()
}
