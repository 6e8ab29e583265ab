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

//! Experiment orchestration: scenario files, seeded replication, cluster-fraction
//! sweeps and report files.

mod report;
mod scenario;

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

pub use report::{boxplot_svg, emit_report, log_file_name, results_csv, summary_csv};
pub use scenario::{
    select_members, ActionSpec, ClusterSelection, EngineSpec, LatencyOverride, Prepared, ScenarioSpec, SweepSpec,
    TemplateRef, TopologySource,
};

use crate::collector::{action_report, summarize, ActionReport, Collector, ConvergenceReport, MetricsError, Summary};
use crate::sdn::ControllerDump;
use crate::sim::{self, RunStatus, SimError, Simulation};
use crate::topo::Asn;

/// Environment variable capping how many runs execute at once.
pub const PARALLELISM_ENV: &str = "IDRSIM_PARALLELISM";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub fraction: f64,
    pub run: u32,
    pub seed: u64,
    pub status: RunStatus,
    pub report: ConvergenceReport,
    pub measure: Option<usize>,
    pub log: Collector,
}

impl RunResult {
    /// Metrics of the scenario's measured action, if it was injected.
    pub fn measured(&self) -> Option<&ActionReport> {
        let m = self.measure?;
        self.report.actions.iter().find(|a| a.index == m)
    }
}

/// One sweep point: all runs at one cluster fraction.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub fraction: f64,
    pub members: Vec<Asn>,
    pub summary: Option<Summary>,
    pub runs: Vec<RunResult>,
}

impl SweepRow {
    fn new(fraction: f64, members: Vec<Asn>, runs: Vec<RunResult>) -> Result<Self, HarnessError> {
        let measured: Vec<ActionReport> = runs.iter().filter_map(|r| r.measured().cloned()).collect();
        let summary = if measured.is_empty() { None } else { Some(summarize(&measured)?) };
        Ok(SweepRow { fraction, members, summary, runs })
    }

    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|r| r.status.converged())
    }
}

/// Number of concurrent runs: `IDRSIM_PARALLELISM` if set to a positive integer, else
/// the processor count.
pub fn parallelism() -> usize {
    std::env::var(PARALLELISM_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Maps `f` over `items` on up to `workers` threads; output order follows input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 || cfg!(target_arch = "wasm32") {
        return items.iter().map(f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let done = std::sync::Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                done.lock().expect("no poisoned workers").push((i, r));
            });
        }
    });
    for (i, r) in done.into_inner().expect("no poisoned workers") {
        slots[i] = Some(r);
    }
    slots.into_iter().map(|r| r.expect("every item mapped")).collect()
}

/// Runs one prepared scenario with `seed`.
pub fn execute(prepared: &Prepared, fraction: f64, run: u32, seed: u64) -> Result<RunResult, HarnessError> {
    let out = sim::run(&prepared.topology, &prepared.actions, seed, prepared.config)?;
    let origins: BTreeMap<_, _> = prepared.topology.originations().collect();
    let mut actions = Vec::new();
    for (i, after) in out.after.iter().enumerate() {
        actions.push(action_report(out.log.records(), i, after, &origins)?);
    }
    Ok(RunResult {
        fraction,
        run,
        seed,
        status: out.status,
        report: ConvergenceReport {
            seed,
            converged: out.status.converged(),
            end_time_s: out.status.at().as_secs_f64(),
            actions,
        },
        measure: prepared.measure,
        log: out.log,
    })
}

/// Runs `prepared` once and returns every controller's final state.
pub fn controller_dumps(prepared: &Prepared, seed: u64) -> Result<(RunStatus, Vec<ControllerDump>), HarnessError> {
    let mut sim = Simulation::new(&prepared.topology, prepared.config, seed)?;
    sim.schedule(&prepared.actions)?;
    let status = sim.run_to_quiescence()?;
    Ok((status, sim.controllers().iter().map(|c| c.dump()).collect()))
}

/// All runs of `spec`; run `i` uses seed `base_seed + i`.
pub fn run_scenario(spec: &ScenarioSpec, base_dir: &Path) -> Result<SweepRow, HarnessError> {
    let prepared = spec.prepare(base_dir)?;
    let fraction = match spec.cluster {
        ClusterSelection::Fraction { fraction, .. } => fraction,
        _ => {
            let members: usize = prepared.topology.clusters().iter().map(|c| c.len()).sum();
            members as f64 / prepared.topology.node_count() as f64
        }
    };
    let jobs: Vec<u32> = (0..spec.runs).collect();
    let runs = par_map(&jobs, parallelism(), |&i| execute(&prepared, fraction, i, spec.seed_of(i)))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let members = prepared.topology.clusters().iter().flatten().copied().collect();
    SweepRow::new(fraction, members, runs)
}

/// Runs the template once per fraction; rows come back in fraction order.
pub fn sweep(spec: &SweepSpec, base_dir: &Path) -> Result<Vec<SweepRow>, HarnessError> {
    let (template, dir) = spec.resolve(base_dir)?;
    let mut problems = Vec::new();
    let mut points = Vec::new();
    for &f in &spec.fractions {
        let s = template.with_fraction(f);
        match s.prepare(&dir) {
            Ok(p) => points.push((f, s, p)),
            Err(HarnessError::Invalid(p)) => problems.extend(p.into_iter().map(|m| format!("fraction {f}: {m}"))),
            Err(e) => return Err(e),
        }
    }
    if !problems.is_empty() {
        return Err(HarnessError::Invalid(problems));
    }
    let jobs: Vec<(usize, u32)> =
        (0..points.len()).flat_map(|p| (0..template.runs).map(move |r| (p, r))).collect();
    let mut results = par_map(&jobs, parallelism(), |&(p, r)| {
        let (f, s, prep) = &points[p];
        execute(prep, *f, r, s.seed_of(r))
    })
    .into_iter();
    let mut rows = Vec::new();
    for (f, _, prep) in &points {
        let runs = results.by_ref().take(template.runs as usize).collect::<Result<Vec<_>, _>>()?;
        let members = prep.topology.clusters().iter().flatten().copied().collect();
        rows.push(SweepRow::new(*f, members, runs)?);
    }
    Ok(rows)
}
