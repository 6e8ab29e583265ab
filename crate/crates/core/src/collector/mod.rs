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

//! Route collector: an append-only log of everything that happens in a run, plus the
//! analyses run over it afterwards.
//!
//! The log is exported as newline-delimited JSON, one [`LogRecord`] per line:
//!
//! ```text
//! {"seq":0,"at_us":0,"kind":"scenario_injected","index":0,"action":{...}}
//! {"seq":1,"at_us":0,"kind":"msg_sent","sender":1,"receiver":2,"prefix":"10.0.0.0/16","as_path":[1]}
//! {"seq":2,"at_us":10000,"kind":"msg_delivered","sender":1,"receiver":2,"prefix":"10.0.0.0/16","as_path":[1],"sent_at_us":0}
//! {"seq":3,"at_us":11000,"kind":"loc_rib_change","asn":2,"prefix":"10.0.0.0/16","old":null,"new":[1]}
//! ```
//!
//! Withdrawals carry no `as_path`. `fib_delta` records carry `old`/`new` egress objects
//! and `controller_recompute` records list the prefixes recomputed.

mod fib;
mod metrics;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

pub use fib::{count_loops, fib_walk, ForwardingState, Hop, WalkOutcome};
pub use metrics::{
    action_report, convergence_time, message_count, summarize, valley_free_violations, ActionReport,
    ConvergenceReport, MetricsError, Summary,
};

use crate::bgp::BgpMessage;
use crate::sdn::Egress;
use crate::sim::ScenarioAction;
use crate::time::SimTime;
use crate::topo::{Asn, Prefix};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    #[serde(rename = "at_us")]
    pub at: SimTime,
    #[serde(flatten)]
    pub kind: RecordKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordKind {
    MsgSent {
        sender: Asn,
        receiver: Asn,
        prefix: Prefix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        as_path: Option<Vec<Asn>>,
    },
    MsgDelivered {
        sender: Asn,
        receiver: Asn,
        prefix: Prefix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        as_path: Option<Vec<Asn>>,
        #[serde(rename = "sent_at_us")]
        sent_at: SimTime,
    },
    LocRibChange {
        asn: Asn,
        prefix: Prefix,
        old: Option<Vec<Asn>>,
        new: Option<Vec<Asn>>,
    },
    FibDelta {
        asn: Asn,
        prefix: Prefix,
        old: Option<Egress>,
        new: Option<Egress>,
    },
    ControllerRecompute {
        cluster: usize,
        prefixes: Vec<Prefix>,
    },
    ScenarioInjected {
        index: usize,
        action: ScenarioAction,
    },
}

impl RecordKind {
    pub fn sent(msg: &BgpMessage) -> Self {
        RecordKind::MsgSent {
            sender: msg.sender,
            receiver: msg.receiver,
            prefix: msg.prefix,
            as_path: msg.as_path().map(<[Asn]>::to_vec),
        }
    }

    pub fn delivered(msg: &BgpMessage, sent_at: SimTime) -> Self {
        RecordKind::MsgDelivered {
            sender: msg.sender,
            receiver: msg.receiver,
            prefix: msg.prefix,
            as_path: msg.as_path().map(<[Asn]>::to_vec),
            sent_at,
        }
    }

    /// Prefix whose routing state this record describes, if any.
    pub fn state_change_prefix(&self) -> Option<Prefix> {
        match self {
            RecordKind::LocRibChange { prefix, .. } | RecordKind::FibDelta { prefix, .. } => Some(*prefix),
            _ => None,
        }
    }
}

/// Append-only, totally ordered run log.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Collector {
    records: Vec<LogRecord>,
}

impl Collector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, at: SimTime, kind: RecordKind) {
        debug_assert!(self.records.last().is_none_or(|r| r.at <= at), "log must be time ordered");
        let seq = self.records.len() as u64;
        self.records.push(LogRecord { seq, at, kind });
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_ndjson<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_ndjson(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn from_ndjson(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<LogRecord>, _>>()?;
        Ok(Collector { records })
    }
}

impl From<Vec<LogRecord>> for Collector {
    fn from(records: Vec<LogRecord>) -> Self {
        Collector { records }
    }
}
