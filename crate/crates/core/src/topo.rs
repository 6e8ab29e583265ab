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

//! AS-level topologies: nodes, typed business relationships, prefix originations and
//! cluster declarations.
//!
//! A [`Topology`] is a plain value. Builders consume and return it, so a scenario is
//! assembled as a chain of transformations:
//!
//! ```
//! use idrsim::topo::{Asn, RelationshipKind, Topology};
//!
//! let topo = Topology::clique(4, RelationshipKind::FullTransit)
//!     .unwrap()
//!     .assign_prefixes(&[Asn(1)])
//!     .unwrap()
//!     .declare_cluster([Asn(1), Asn(2)])
//!     .unwrap();
//! assert_eq!(topo.link_count(), 6);
//! assert_eq!(topo.cluster_internal_links().count(), 1);
//! ```

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

/// Latency applied to every link unless overridden.
pub const DEFAULT_LATENCY: SimTime = SimTime::from_millis(10);

/// Synthetic prefixes are carved as /16s out of 10.0.0.0/8.
pub const MAX_PREFIXES: usize = 256;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopoError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: link {a}-{b} redeclared with a conflicting relationship")]
    Conflict { line: usize, a: Asn, b: Asn },
    #[error("at most {MAX_PREFIXES} prefixes can be assigned, got {0}")]
    Capacity(usize),
    #[error("invalid topology: {0}")]
    Invalid(String),
    #[error("json: {0}")]
    Json(String),
}

/// Autonomous system number. Zero is reserved and never a valid node.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Asn(pub u32);

impl TryFrom<u32> for Asn {
    type Error = TopoError;
    fn try_from(v: u32) -> Result<Self, Self::Error> {
        if v == 0 {
            Err(TopoError::InvalidArgument("AS number 0 is reserved".into()))
        } else {
            Ok(Asn(v))
        }
    }
}

impl From<Asn> for u32 {
    fn from(a: Asn) -> u32 {
        a.0
    }
}

impl fmt::Debug for Asn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AS{}", self.0)
    }
}

impl fmt::Display for Asn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AS{}", self.0)
    }
}

/// A synthetic /16 destination. The index `i` renders as `10.<i>.0.0/16`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Prefix(pub u8);

impl Prefix {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "10.{}.0.0/16", self.0)
    }
}

impl fmt::Debug for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Prefix {
    type Err = TopoError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TopoError::InvalidArgument(format!("not a synthetic prefix: {s:?}"));
        let rest = s.strip_prefix("10.").ok_or_else(bad)?;
        let (octet, tail) = rest.split_once('.').ok_or_else(bad)?;
        if tail != "0.0/16" {
            return Err(bad());
        }
        octet.parse::<u8>().map(Prefix).map_err(|_| bad())
    }
}

impl TryFrom<String> for Prefix {
    type Error = TopoError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Prefix> for String {
    fn from(p: Prefix) -> String {
        p.to_string()
    }
}

/// Business relationship carried by a link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relationship {
    /// Directed: `customer` buys transit from the other endpoint.
    CustomerToProvider { customer: Asn },
    PeerToPeer,
    /// Policy-free: routes are exported to and accepted from everyone.
    FullTransit,
}

/// Relationship without direction, used by generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationshipKind {
    CustomerToProvider,
    PeerToPeer,
    FullTransit,
}

impl Relationship {
    pub fn kind(self) -> RelationshipKind {
        match self {
            Relationship::CustomerToProvider { .. } => RelationshipKind::CustomerToProvider,
            Relationship::PeerToPeer => RelationshipKind::PeerToPeer,
            Relationship::FullTransit => RelationshipKind::FullTransit,
        }
    }
}

/// What a neighbor is to a given AS.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerRole {
    Customer,
    Peer,
    Provider,
    Transit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Legacy,
    ClusterMember,
}

/// Unordered link identity, stored with the lower ASN first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkKey(Asn, Asn);

impl LinkKey {
    pub fn new(a: Asn, b: Asn) -> Self {
        if a <= b {
            LinkKey(a, b)
        } else {
            LinkKey(b, a)
        }
    }

    pub fn low(self) -> Asn {
        self.0
    }

    pub fn high(self) -> Asn {
        self.1
    }

    pub fn contains(self, a: Asn) -> bool {
        self.0 == a || self.1 == a
    }

    pub fn other(self, a: Asn) -> Option<Asn> {
        if self.0 == a {
            Some(self.1)
        } else if self.1 == a {
            Some(self.0)
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Link {
    pub relationship: Relationship,
    pub latency: SimTime,
}

impl Link {
    pub fn new(relationship: Relationship) -> Self {
        Link { relationship, latency: DEFAULT_LATENCY }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Topology {
    nodes: BTreeSet<Asn>,
    links: BTreeMap<LinkKey, Link>,
    originations: BTreeMap<Prefix, Asn>,
    clusters: Vec<BTreeSet<Asn>>,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    /// Complete graph on ASes `1..=n`, every pair linked once.
    ///
    /// For `CustomerToProvider` the higher-numbered endpoint is the customer.
    pub fn clique(n: usize, kind: RelationshipKind) -> Result<Self, TopoError> {
        if n < 2 {
            return Err(TopoError::InvalidArgument(format!("clique needs n >= 2, got {n}")));
        }
        let n = u32::try_from(n).map_err(|_| TopoError::InvalidArgument("clique too large".into()))?;
        let mut t = Topology::new();
        for i in 1..=n {
            t.add_node(Asn(i));
        }
        for i in 1..=n {
            for j in (i + 1)..=n {
                let rel = match kind {
                    RelationshipKind::CustomerToProvider => {
                        Relationship::CustomerToProvider { customer: Asn(j) }
                    }
                    RelationshipKind::PeerToPeer => Relationship::PeerToPeer,
                    RelationshipKind::FullTransit => Relationship::FullTransit,
                };
                t.add_link(Asn(i), Asn(j), Link::new(rel))?;
            }
        }
        Ok(t)
    }

    pub fn add_node(&mut self, asn: Asn) -> bool {
        self.nodes.insert(asn)
    }

    /// Adds a link between two existing nodes. Self-links and duplicates are rejected.
    pub fn add_link(&mut self, a: Asn, b: Asn, link: Link) -> Result<(), TopoError> {
        if a == b {
            return Err(TopoError::InvalidArgument(format!("self-link on {a}")));
        }
        for x in [a, b] {
            if !self.nodes.contains(&x) {
                return Err(TopoError::InvalidArgument(format!("unknown {x}")));
            }
        }
        if let Relationship::CustomerToProvider { customer } = link.relationship {
            if customer != a && customer != b {
                return Err(TopoError::InvalidArgument(format!(
                    "customer {customer} is not an endpoint of {a}-{b}"
                )));
            }
        }
        let key = LinkKey::new(a, b);
        if self.links.contains_key(&key) {
            return Err(TopoError::InvalidArgument(format!("duplicate link {a}-{b}")));
        }
        self.links.insert(key, link);
        Ok(())
    }

    pub fn remove_link(&mut self, a: Asn, b: Asn) -> Result<Link, TopoError> {
        self.links
            .remove(&LinkKey::new(a, b))
            .ok_or_else(|| TopoError::InvalidArgument(format!("no link {a}-{b}")))
    }

    pub fn set_latency(&mut self, a: Asn, b: Asn, latency: SimTime) -> Result<(), TopoError> {
        let link = self
            .links
            .get_mut(&LinkKey::new(a, b))
            .ok_or_else(|| TopoError::InvalidArgument(format!("no link {a}-{b}")))?;
        link.latency = latency;
        Ok(())
    }

    pub fn nodes(&self) -> impl Iterator<Item = Asn> + '_ {
        self.nodes.iter().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, asn: Asn) -> bool {
        self.nodes.contains(&asn)
    }

    pub fn links(&self) -> impl Iterator<Item = (LinkKey, &Link)> + '_ {
        self.links.iter().map(|(k, l)| (*k, l))
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn link(&self, a: Asn, b: Asn) -> Option<&Link> {
        self.links.get(&LinkKey::new(a, b))
    }

    pub fn neighbors(&self, asn: Asn) -> impl Iterator<Item = Asn> + '_ {
        self.links.keys().filter_map(move |k| k.other(asn))
    }

    /// Role of `neighbor` as seen from `me`, if the two are adjacent.
    pub fn role_of(&self, me: Asn, neighbor: Asn) -> Option<PeerRole> {
        let link = self.link(me, neighbor)?;
        Some(role_from(link.relationship, me))
    }

    pub fn originations(&self) -> impl Iterator<Item = (Prefix, Asn)> + '_ {
        self.originations.iter().map(|(p, a)| (*p, *a))
    }

    pub fn origin_of(&self, prefix: Prefix) -> Option<Asn> {
        self.originations.get(&prefix).copied()
    }

    pub fn prefixes(&self) -> impl Iterator<Item = Prefix> + '_ {
        self.originations.keys().copied()
    }

    /// Replaces all originations: prefix `i` is `10.<i>.0.0/16`, originated by `origins[i]`.
    pub fn assign_prefixes(mut self, origins: &[Asn]) -> Result<Self, TopoError> {
        if origins.len() > MAX_PREFIXES {
            return Err(TopoError::Capacity(origins.len()));
        }
        if let Some(bad) = origins.iter().find(|a| !self.nodes.contains(a)) {
            return Err(TopoError::InvalidArgument(format!("unknown origin {bad}")));
        }
        self.originations = origins
            .iter()
            .enumerate()
            .map(|(i, a)| (Prefix(i as u8), *a))
            .collect();
        Ok(self)
    }

    /// Declares a cluster. Links with both endpoints in `members` become cluster-internal.
    /// An empty member set leaves the topology unchanged.
    pub fn declare_cluster(mut self, members: impl IntoIterator<Item = Asn>) -> Result<Self, TopoError> {
        let members: BTreeSet<Asn> = members.into_iter().collect();
        if members.is_empty() {
            return Ok(self);
        }
        if let Some(bad) = members.iter().find(|a| !self.nodes.contains(a)) {
            return Err(TopoError::InvalidArgument(format!("unknown cluster member {bad}")));
        }
        if let Some(dup) = members.iter().find(|a| self.cluster_of(**a).is_some()) {
            return Err(TopoError::InvalidArgument(format!("{dup} already belongs to a cluster")));
        }
        self.clusters.push(members);
        Ok(self)
    }

    pub fn clusters(&self) -> &[BTreeSet<Asn>] {
        &self.clusters
    }

    pub fn cluster_of(&self, asn: Asn) -> Option<usize> {
        self.clusters.iter().position(|c| c.contains(&asn))
    }

    pub fn role(&self, asn: Asn) -> NodeRole {
        if self.cluster_of(asn).is_some() {
            NodeRole::ClusterMember
        } else {
            NodeRole::Legacy
        }
    }

    pub fn is_cluster_internal(&self, key: LinkKey) -> bool {
        match (self.cluster_of(key.low()), self.cluster_of(key.high())) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    pub fn cluster_internal_links(&self) -> impl Iterator<Item = (LinkKey, &Link)> + '_ {
        self.links().filter(|(k, _)| self.is_cluster_internal(*k))
    }

    pub fn is_connected(&self) -> bool {
        let Some(&start) = self.nodes.iter().next() else {
            return true;
        };
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for y in self.neighbors(x) {
                if seen.insert(y) {
                    queue.push_back(y);
                }
            }
        }
        seen.len() == self.nodes.len()
    }

    /// Checks every structural invariant, reporting all violations at once.
    pub fn validate(&self) -> Result<(), TopoError> {
        let mut problems = Vec::new();
        if self.nodes.is_empty() {
            problems.push("topology has no nodes".to_string());
        }
        for (k, _) in self.links() {
            for x in [k.low(), k.high()] {
                if !self.nodes.contains(&x) {
                    problems.push(format!("link {}-{} references unknown {x}", k.low(), k.high()));
                }
            }
        }
        if !self.is_connected() {
            problems.push("topology is not connected".to_string());
        }
        for (p, a) in &self.originations {
            if !self.nodes.contains(a) {
                problems.push(format!("{p} originated by unknown {a}"));
            }
        }
        let mut seen = BTreeSet::new();
        for c in &self.clusters {
            for m in c {
                if !self.nodes.contains(m) {
                    problems.push(format!("cluster member {m} is not a node"));
                }
                if !seen.insert(*m) {
                    problems.push(format!("{m} declared in more than one cluster"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(TopoError::Invalid(problems.join("; ")))
        }
    }

    /// Shortest-path hop diameter; `None` for disconnected graphs.
    pub fn diameter(&self) -> Option<usize> {
        let mut best = 0;
        for s in self.nodes() {
            let mut dist = BTreeMap::from([(s, 0usize)]);
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                let d = dist[&x];
                for y in self.neighbors(x) {
                    if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(y) {
                        e.insert(d + 1);
                        queue.push_back(y);
                    }
                }
            }
            if dist.len() != self.nodes.len() {
                return None;
            }
            best = best.max(dist.values().copied().max().unwrap_or(0));
        }
        Some(best)
    }

    /// Reads the CAIDA serial-1 relationship format.
    pub fn parse_caida(text: &str) -> Result<Self, TopoError> {
        Self::parse_caida_reader(text.as_bytes())
    }

    pub fn parse_caida_reader<R: BufRead>(reader: R) -> Result<Self, TopoError> {
        let mut t = Topology::new();
        for (idx, line) in reader.split(b'\n').enumerate() {
            let lineno = idx + 1;
            let raw = line.map_err(|e| TopoError::Parse { line: lineno, reason: e.to_string() })?;
            let raw = raw.strip_suffix(b"\r").unwrap_or(&raw);
            let line = std::str::from_utf8(raw)
                .map_err(|_| TopoError::Parse { line: lineno, reason: "not UTF-8".into() })?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('|').collect();
            if fields.len() != 3 {
                return Err(TopoError::Parse {
                    line: lineno,
                    reason: format!("expected 3 '|'-separated fields, got {}", fields.len()),
                });
            }
            let asn = |s: &str| -> Result<Asn, TopoError> {
                match s.parse::<u32>() {
                    Ok(v) if v != 0 => Ok(Asn(v)),
                    _ => Err(TopoError::Parse { line: lineno, reason: format!("bad AS number {s:?}") }),
                }
            };
            let a = asn(fields[0])?;
            let b = asn(fields[1])?;
            if a == b {
                return Err(TopoError::Parse { line: lineno, reason: format!("self-link on {a}") });
            }
            let rel = match fields[2] {
                "-1" => Relationship::CustomerToProvider { customer: b },
                "0" => Relationship::PeerToPeer,
                other => {
                    return Err(TopoError::Parse {
                        line: lineno,
                        reason: format!("relationship must be -1 or 0, got {other:?}"),
                    })
                }
            };
            t.add_node(a);
            t.add_node(b);
            match t.link(a, b) {
                Some(existing) if existing.relationship == rel => {}
                Some(_) => return Err(TopoError::Conflict { line: lineno, a, b }),
                None => t.add_link(a, b, Link::new(rel))?,
            }
        }
        Ok(t)
    }

    /// Writes the links in CAIDA serial-1 form, sorted by link.
    ///
    /// Only relationships are representable: FullTransit links and non-default latencies
    /// are rejected.
    pub fn to_caida(&self) -> Result<String, TopoError> {
        let mut out = String::new();
        for (k, link) in self.links() {
            if link.latency != DEFAULT_LATENCY {
                return Err(TopoError::InvalidArgument(format!(
                    "link {}-{} has a non-default latency",
                    k.low(),
                    k.high()
                )));
            }
            match link.relationship {
                Relationship::CustomerToProvider { customer } => {
                    let provider = k.other(customer).expect("customer is an endpoint");
                    out.push_str(&format!("{}|{}|-1\n", provider.0, customer.0));
                }
                Relationship::PeerToPeer => out.push_str(&format!("{}|{}|0\n", k.low().0, k.high().0)),
                Relationship::FullTransit => {
                    return Err(TopoError::InvalidArgument(
                        "FullTransit has no CAIDA representation".into(),
                    ))
                }
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TopologyDoc::from(self)).expect("topology serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TopoError> {
        let doc: TopologyDoc = serde_json::from_str(text).map_err(|e| TopoError::Json(e.to_string()))?;
        Topology::try_from(doc)
    }
}

pub(crate) fn role_from(rel: Relationship, me: Asn) -> PeerRole {
    match rel {
        Relationship::CustomerToProvider { customer } if customer == me => PeerRole::Provider,
        Relationship::CustomerToProvider { .. } => PeerRole::Customer,
        Relationship::PeerToPeer => PeerRole::Peer,
        Relationship::FullTransit => PeerRole::Transit,
    }
}

/// On-disk JSON layout of a [`Topology`].
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    pub nodes: Vec<NodeDoc>,
    pub links: Vec<LinkDoc>,
    #[serde(default)]
    pub originations: Vec<OriginationDoc>,
    #[serde(default)]
    pub clusters: Vec<Vec<Asn>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub asn: Asn,
    #[serde(default = "legacy")]
    pub role: NodeRole,
}

fn legacy() -> NodeRole {
    NodeRole::Legacy
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub a: Asn,
    pub b: Asn,
    pub relationship: RelationshipKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub customer: Option<Asn>,
    #[serde(default = "default_latency_ms")]
    pub latency_ms: f64,
}

fn default_latency_ms() -> f64 {
    DEFAULT_LATENCY.as_millis_f64()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OriginationDoc {
    pub prefix: Prefix,
    pub origin: Asn,
}

impl From<&Topology> for TopologyDoc {
    fn from(t: &Topology) -> Self {
        TopologyDoc {
            nodes: t.nodes().map(|asn| NodeDoc { asn, role: t.role(asn) }).collect(),
            links: t
                .links()
                .map(|(k, l)| LinkDoc {
                    a: k.low(),
                    b: k.high(),
                    relationship: l.relationship.kind(),
                    customer: match l.relationship {
                        Relationship::CustomerToProvider { customer } => Some(customer),
                        _ => None,
                    },
                    latency_ms: l.latency.as_millis_f64(),
                })
                .collect(),
            originations: t
                .originations()
                .map(|(prefix, origin)| OriginationDoc { prefix, origin })
                .collect(),
            clusters: t.clusters.iter().map(|c| c.iter().copied().collect()).collect(),
        }
    }
}

impl TryFrom<TopologyDoc> for Topology {
    type Error = TopoError;

    fn try_from(doc: TopologyDoc) -> Result<Self, Self::Error> {
        let mut t = Topology::new();
        for n in &doc.nodes {
            if !t.add_node(n.asn) {
                return Err(TopoError::InvalidArgument(format!("duplicate node {}", n.asn)));
            }
        }
        for l in &doc.links {
            let rel = match (l.relationship, l.customer) {
                (RelationshipKind::CustomerToProvider, Some(customer)) => {
                    Relationship::CustomerToProvider { customer }
                }
                (RelationshipKind::CustomerToProvider, None) => {
                    return Err(TopoError::InvalidArgument(format!(
                        "customer_to_provider link {}-{} needs a customer",
                        l.a, l.b
                    )))
                }
                (_, Some(_)) => {
                    return Err(TopoError::InvalidArgument(format!(
                        "link {}-{}: customer only applies to customer_to_provider",
                        l.a, l.b
                    )))
                }
                (RelationshipKind::PeerToPeer, None) => Relationship::PeerToPeer,
                (RelationshipKind::FullTransit, None) => Relationship::FullTransit,
            };
            if !(l.latency_ms.is_finite() && l.latency_ms >= 0.0) {
                return Err(TopoError::InvalidArgument(format!("link {}-{}: bad latency", l.a, l.b)));
            }
            t.add_link(l.a, l.b, Link { relationship: rel, latency: SimTime::from_millis_f64(l.latency_ms) })?;
        }
        let mut origins = BTreeMap::new();
        for o in &doc.originations {
            if !t.contains(o.origin) {
                return Err(TopoError::InvalidArgument(format!("unknown origin {}", o.origin)));
            }
            if origins.insert(o.prefix, o.origin).is_some() {
                return Err(TopoError::InvalidArgument(format!("{} originated twice", o.prefix)));
            }
        }
        t.originations = origins;
        for c in doc.clusters {
            t = t.declare_cluster(c)?;
        }
        for n in &doc.nodes {
            if t.role(n.asn) != n.role {
                return Err(TopoError::InvalidArgument(format!(
                    "{} role {:?} disagrees with cluster declarations",
                    n.asn, n.role
                )));
            }
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clique_sizes() {
        let t = Topology::clique(16, RelationshipKind::FullTransit).unwrap();
        assert_eq!(t.node_count(), 16);
        assert_eq!(t.link_count(), 120);
        let t = Topology::clique(2, RelationshipKind::PeerToPeer).unwrap();
        assert_eq!((t.node_count(), t.link_count()), (2, 1));
        let t = Topology::clique(5, RelationshipKind::FullTransit).unwrap();
        assert_eq!(t.link_count(), 10);
        assert!(t.links().all(|(_, l)| l.relationship == Relationship::FullTransit));
        assert!(t.originations().next().is_none());
        assert!(matches!(
            Topology::clique(1, RelationshipKind::FullTransit),
            Err(TopoError::InvalidArgument(_))
        ));
    }

    #[test]
    fn caida_provider_customer() {
        let t = Topology::parse_caida("1|2|-1\n").unwrap();
        assert_eq!(t.node_count(), 2);
        assert_eq!(t.role_of(Asn(1), Asn(2)), Some(PeerRole::Customer));
        assert_eq!(t.role_of(Asn(2), Asn(1)), Some(PeerRole::Provider));
    }

    #[test]
    fn caida_comment_and_crlf() {
        let t = Topology::parse_caida("# comment\n3|4|0\n").unwrap();
        assert_eq!(t.node_count(), 2);
        assert_eq!(t.link(Asn(3), Asn(4)).unwrap().relationship, Relationship::PeerToPeer);
        let t = Topology::parse_caida("# x\r\n3|4|0\r\n5|3|-1\r\n").unwrap();
        assert_eq!(t.link_count(), 2);
    }

    #[test]
    fn caida_errors() {
        assert_eq!(
            Topology::parse_caida("1|2|-1\n1|2|0\n"),
            Err(TopoError::Conflict { line: 2, a: Asn(1), b: Asn(2) })
        );
        assert!(matches!(Topology::parse_caida("1|2|1\n"), Err(TopoError::Parse { line: 1, .. })));
        assert!(matches!(Topology::parse_caida("#\n1|2\n"), Err(TopoError::Parse { line: 2, .. })));
        assert!(matches!(Topology::parse_caida("1|x|0\n"), Err(TopoError::Parse { line: 1, .. })));
        assert!(matches!(Topology::parse_caida("0|1|0\n"), Err(TopoError::Parse { .. })));
        assert!(matches!(Topology::parse_caida("2|1|-1\n1|2|-1\n"), Err(TopoError::Conflict { .. })));
        // identical duplicate is harmless
        assert_eq!(Topology::parse_caida("1|2|0\n2|1|0\n").unwrap().link_count(), 1);
    }

    #[test]
    fn prefixes_are_sequential() {
        let t = Topology::clique(3, RelationshipKind::FullTransit).unwrap();
        let a = t.clone().assign_prefixes(&[Asn(1)]).unwrap();
        assert_eq!(a.origin_of("10.0.0.0/16".parse().unwrap()), Some(Asn(1)));
        let b = t.clone().assign_prefixes(&[Asn(1), Asn(3)]).unwrap();
        let got: Vec<_> = b.originations().map(|(p, a)| (p.to_string(), a)).collect();
        assert_eq!(got, vec![("10.0.0.0/16".into(), Asn(1)), ("10.1.0.0/16".into(), Asn(3))]);
        assert!(matches!(t.clone().assign_prefixes(&[Asn(9)]), Err(TopoError::InvalidArgument(_))));
        let many = vec![Asn(1); 257];
        assert_eq!(t.assign_prefixes(&many), Err(TopoError::Capacity(257)));
    }

    #[test]
    fn cluster_tags() {
        let t = Topology::clique(4, RelationshipKind::FullTransit).unwrap();
        let c = t.clone().declare_cluster([Asn(1), Asn(2)]).unwrap();
        assert_eq!(c.role(Asn(1)), NodeRole::ClusterMember);
        assert_eq!(c.role(Asn(3)), NodeRole::Legacy);
        let internal: Vec<_> = c.cluster_internal_links().map(|(k, _)| k).collect();
        assert_eq!(internal, vec![LinkKey::new(Asn(1), Asn(2))]);
        assert_eq!(c.link_count(), 6);

        assert_eq!(t.clone().declare_cluster([]).unwrap(), t);

        let mut split = t.clone();
        split.remove_link(Asn(1), Asn(3)).unwrap();
        let split = split.declare_cluster([Asn(1), Asn(3)]).unwrap();
        assert_eq!(split.cluster_internal_links().count(), 0);
        assert!(split.validate().is_ok());

        assert!(t.clone().declare_cluster([Asn(7)]).is_err());
        assert!(c.declare_cluster([Asn(2), Asn(3)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut t = Topology::clique(4, RelationshipKind::FullTransit)
            .unwrap()
            .assign_prefixes(&[Asn(2), Asn(4)])
            .unwrap()
            .declare_cluster([Asn(1), Asn(3)])
            .unwrap();
        t.set_latency(Asn(1), Asn(2), SimTime::from_micros(12_345)).unwrap();
        let back = Topology::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn prefix_parse() {
        assert_eq!("10.7.0.0/16".parse::<Prefix>().unwrap(), Prefix(7));
        assert!("10.256.0.0/16".parse::<Prefix>().is_err());
        assert!("11.0.0.0/16".parse::<Prefix>().is_err());
    }

    #[test]
    fn validate_reports_disconnect() {
        let mut t = Topology::clique(2, RelationshipKind::PeerToPeer).unwrap();
        t.add_node(Asn(9));
        assert!(matches!(t.validate(), Err(TopoError::Invalid(_))));
    }
}
