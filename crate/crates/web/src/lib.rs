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

//! Browser bindings: run a cluster-fraction sweep, inspect one run's timeline, and dump
//! the controller state, all on the shipped clique scenarios.

use std::path::Path;

use idrsim::collector::RecordKind;
use idrsim::harness::{self, ClusterSelection, ScenarioSpec, SweepSpec, TemplateRef, TopologySource};
use serde_json::json;
use wasm_bindgen::prelude::*;

const WITHDRAWAL: &str = include_str!("../../../scenarios/withdrawal-clique16.json");
const ANNOUNCE: &str = include_str!("../../../scenarios/announce-clique16.json");
const FAILOVER: &str = include_str!("../../../scenarios/failover-clique16.json");

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Shipped scenario `kind` with clique size, timers and run count overridden.
fn scenario(kind: &str, n: u32, runs: u32, mrai_s: f64, delta_s: f64) -> Result<ScenarioSpec, String> {
    let text = match kind {
        "withdrawal" => WITHDRAWAL,
        "announce" => ANNOUNCE,
        "failover" => FAILOVER,
        other => return Err(err(format!("unknown scenario {other:?}"))),
    };
    let mut spec = ScenarioSpec::from_json(text).map_err(err)?;
    if let TopologySource::Clique { n: size, .. } = &mut spec.topology {
        *size = n as usize;
    }
    spec.runs = runs;
    spec.engine.mrai_s = mrai_s;
    spec.engine.recompute_delay_s = delta_s;
    Ok(spec)
}

fn parse_fractions(list: &str) -> Result<Vec<f64>, String> {
    list.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| err(format!("fraction {s:?}: {e}"))))
        .collect()
}

/// Runs a sweep and returns `{svg, summary_csv, results_csv}` as JSON.
pub fn sweep_json(kind: &str, n: u32, runs: u32, mrai_s: f64, delta_s: f64, fractions: &str) -> Result<String, String> {
    let template = scenario(kind, n, runs, mrai_s, delta_s)?;
    let spec = SweepSpec {
        name: format!("{kind}, {n}-AS clique"),
        template: TemplateRef::Inline(Box::new(template)),
        fractions: parse_fractions(fractions)?,
    };
    let table = harness::sweep(&spec, Path::new("")).map_err(err)?;
    Ok(json!({
        "svg": harness::boxplot_svg(&table, &spec.name),
        "summary_csv": harness::summary_csv(&table),
        "results_csv": harness::results_csv(&table),
    })
    .to_string())
}

/// One run at `fraction`: per-record timeline of the measured action plus its metrics.
pub fn timeline_json(kind: &str, n: u32, fraction: f64, seed: u64, mrai_s: f64, delta_s: f64) -> Result<String, String> {
    let mut spec = scenario(kind, n, 1, mrai_s, delta_s)?;
    spec.cluster = ClusterSelection::Fraction { fraction, selection_seed: 7 };
    spec.base_seed = seed;
    let row = harness::run_scenario(&spec, Path::new("")).map_err(err)?;
    let run = &row.runs[0];
    let measured = run.measured().cloned();
    let start = measured.as_ref().map_or(0.0, |m| m.action.at.as_secs_f64());
    let events: Vec<_> = run
        .log
        .records()
        .iter()
        .filter(|r| r.at.as_secs_f64() >= start)
        .filter_map(|r| {
            let (kind, asn) = match &r.kind {
                RecordKind::MsgSent { sender, .. } => ("sent", sender.0),
                RecordKind::LocRibChange { asn, .. } => ("rib", asn.0),
                RecordKind::FibDelta { asn, .. } => ("fib", asn.0),
                RecordKind::ControllerRecompute { .. } => ("recompute", 0),
                _ => return None,
            };
            Some(json!({ "t": r.at.as_secs_f64() - start, "kind": kind, "asn": asn }))
        })
        .collect();
    Ok(json!({
        "members": row.members.iter().map(|a| a.0).collect::<Vec<_>>(),
        "converged": run.status.converged(),
        "report": measured,
        "events": events,
    })
    .to_string())
}

/// Controller state after one run at `fraction`, as pretty JSON.
pub fn controller_dump_json(kind: &str, n: u32, fraction: f64, seed: u64) -> Result<String, String> {
    let mut spec = scenario(kind, n, 1, 2.0, 0.2)?;
    spec.cluster = ClusterSelection::Fraction { fraction, selection_seed: 7 };
    let prepared = spec.prepare(Path::new("")).map_err(err)?;
    let (_, dumps) = harness::controller_dumps(&prepared, seed).map_err(err)?;
    serde_json::to_string_pretty(&dumps).map_err(err)
}

#[wasm_bindgen]
pub fn sweep(kind: &str, n: u32, runs: u32, mrai_s: f64, delta_s: f64, fractions: &str) -> Result<String, JsValue> {
    sweep_json(kind, n, runs, mrai_s, delta_s, fractions).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn timeline(kind: &str, n: u32, fraction: f64, seed: u32, mrai_s: f64, delta_s: f64) -> Result<String, JsValue> {
    timeline_json(kind, n, fraction, seed.into(), mrai_s, delta_s).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn controller_dump(kind: &str, n: u32, fraction: f64, seed: u32) -> Result<String, JsValue> {
    controller_dump_json(kind, n, fraction, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_scenarios_parse() {
        for kind in ["withdrawal", "announce", "failover"] {
            scenario(kind, 8, 1, 2.0, 0.2).unwrap();
        }
        assert!(scenario("nope", 8, 1, 2.0, 0.2).is_err());
    }

    #[test]
    fn sweep_returns_plot() {
        let out: serde_json::Value = serde_json::from_str(&sweep_json("withdrawal", 6, 2, 2.0, 0.2, "0, 0.5, 1").unwrap()).unwrap();
        assert!(out["svg"].as_str().unwrap().starts_with("<svg"));
        assert_eq!(out["summary_csv"].as_str().unwrap().lines().count(), 4);
    }

    #[test]
    fn timeline_and_dump() {
        let t: serde_json::Value = serde_json::from_str(&timeline_json("withdrawal", 6, 0.5, 1, 2.0, 0.2).unwrap()).unwrap();
        assert_eq!(t["members"].as_array().unwrap().len(), 3);
        assert!(t["converged"].as_bool().unwrap());
        let d: serde_json::Value = serde_json::from_str(&controller_dump_json("announce", 6, 0.5, 1).unwrap()).unwrap();
        assert_eq!(d.as_array().unwrap().len(), 1);
    }
}
