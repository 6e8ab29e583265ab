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

//! Per-action convergence metrics and sweep statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fib::{count_loops, fib_walk, ForwardingState};
use super::{LogRecord, RecordKind};
use crate::sim::ScenarioAction;
use crate::time::SimTime;
use crate::topo::{Asn, PeerRole, Prefix, Topology};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Records belonging to action `index`: from its injection up to the next injection.
fn window(log: &[LogRecord], index: usize) -> Result<(&LogRecord, &[LogRecord]), MetricsError> {
    let start = log
        .iter()
        .position(|r| matches!(&r.kind, RecordKind::ScenarioInjected { index: i, .. } if *i == index))
        .ok_or_else(|| MetricsError::InvalidArgument(format!("action #{index} not found in log")))?;
    let end = log[start + 1..]
        .iter()
        .position(|r| matches!(r.kind, RecordKind::ScenarioInjected { .. }))
        .map_or(log.len(), |off| start + 1 + off);
    Ok((&log[start], &log[start + 1..end]))
}

fn injected_action(rec: &LogRecord) -> &ScenarioAction {
    match &rec.kind {
        RecordKind::ScenarioInjected { action, .. } => action,
        _ => unreachable!("window starts at an injection"),
    }
}

/// Time from injecting action `index` to the last loc-RIB or FIB change it caused.
/// Zero when nothing changed.
pub fn convergence_time(log: &[LogRecord], index: usize) -> Result<SimTime, MetricsError> {
    let (inj, rest) = window(log, index)?;
    let prefix = injected_action(inj).prefix();
    let last = rest
        .iter()
        .filter(|r| match r.kind.state_change_prefix() {
            Some(p) => prefix.is_none_or(|q| q == p),
            None => false,
        })
        .map(|r| r.at)
        .max();
    Ok(last.map_or(SimTime::ZERO, |t| t - inj.at))
}

/// Updates and withdrawals sent while action `index` was converging.
pub fn message_count(log: &[LogRecord], index: usize) -> Result<u64, MetricsError> {
    let (inj, rest) = window(log, index)?;
    let prefix = injected_action(inj).prefix();
    Ok(rest
        .iter()
        .filter(|r| match &r.kind {
            RecordKind::MsgSent { prefix: p, .. } => prefix.is_none_or(|q| q == *p),
            _ => false,
        })
        .count() as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionReport {
    pub index: usize,
    pub action: ScenarioAction,
    pub convergence_time_s: f64,
    pub message_count: u64,
    /// Fraction of non-origin ASes whose forwarding path reaches the origin afterwards.
    pub reachable_fraction: f64,
    pub loops: usize,
}

/// Metrics of action `index`, with reachability judged on `after`, the forwarding
/// state once the action settled.
pub fn action_report(
    log: &[LogRecord],
    index: usize,
    after: &ForwardingState,
    origins: &BTreeMap<Prefix, Asn>,
) -> Result<ActionReport, MetricsError> {
    let (inj, _) = window(log, index)?;
    let action = injected_action(inj).clone();
    let prefixes: Vec<Prefix> = match action.prefix() {
        Some(p) => vec![p],
        None => origins.keys().copied().collect(),
    };
    let mut reach_sum = 0.0;
    let mut loops = 0;
    for &p in &prefixes {
        let walks = fib_walk(after, p);
        loops += count_loops(&walks);
        let origin = origins.get(&p).copied();
        let others = walks.keys().filter(|a| Some(**a) != origin).count();
        let ok = walks.iter().filter(|(a, w)| Some(**a) != origin && w.reaches()).count();
        reach_sum += if others == 0 { 1.0 } else { ok as f64 / others as f64 };
    }
    let reachable_fraction = if prefixes.is_empty() { 1.0 } else { reach_sum / prefixes.len() as f64 };
    Ok(ActionReport {
        index,
        action,
        convergence_time_s: convergence_time(log, index)?.as_secs_f64(),
        message_count: message_count(log, index)?,
        reachable_fraction,
        loops,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub seed: u64,
    pub converged: bool,
    pub end_time_s: f64,
    pub actions: Vec<ActionReport>,
}

impl ConvergenceReport {
    /// A run only counts as converged when it went quiet without forwarding loops.
    pub fn is_clean(&self) -> bool {
        self.converged && self.actions.iter().all(|a| a.loops == 0)
    }
}

/// Five-number summary of convergence time (nearest-rank quartiles) plus mean churn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean_messages: f64,
}

/// Nearest rank: the smallest value with at least `p` of the sample at or below it.
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn summarize(reports: &[ActionReport]) -> Result<Summary, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::InvalidArgument("cannot summarize zero reports".into()));
    }
    let mut times: Vec<f64> = reports.iter().map(|r| r.convergence_time_s).collect();
    times.sort_by(f64::total_cmp);
    let msgs: f64 = reports.iter().map(|r| r.message_count as f64).sum();
    Ok(Summary {
        n: times.len(),
        min: times[0],
        q1: nearest_rank(&times, 0.25),
        median: nearest_rank(&times, 0.5),
        q3: nearest_rank(&times, 0.75),
        max: times[times.len() - 1],
        mean_messages: msgs / reports.len() as f64,
    })
}

/// Updates that carry a peer- or provider-learned route to another peer or provider.
pub fn valley_free_violations(log: &[LogRecord], topology: &Topology) -> usize {
    let uphill = |r: Option<PeerRole>| matches!(r, Some(PeerRole::Peer | PeerRole::Provider));
    log.iter()
        .filter(|r| match &r.kind {
            RecordKind::MsgSent { sender, receiver, as_path: Some(path), .. } if path.len() >= 2 => {
                uphill(topology.role_of(*sender, path[1])) && uphill(topology.role_of(*sender, *receiver))
            }
            _ => false,
        })
        .count()
}
