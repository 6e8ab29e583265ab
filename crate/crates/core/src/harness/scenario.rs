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

//! Declarative scenario and sweep files.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::bgp::BgpConfig;
use crate::sdn::{ControllerConfig, Weighting};
use crate::sim::{validate_scenario, ActionKind, EngineConfig, Limits, ScenarioAction, SimError};
use crate::time::SimTime;
use crate::topo::{Asn, RelationshipKind, Topology, DEFAULT_LATENCY};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySource {
    Clique {
        n: usize,
        #[serde(default = "full_transit")]
        relationship: RelationshipKind,
        #[serde(default = "default_latency_ms")]
        latency_ms: f64,
    },
    /// CAIDA serial-1 file; relative paths resolve against the scenario file.
    Caida { path: PathBuf },
    /// A topology document embedded as-is.
    Inline { topology: serde_json::Value },
}

fn full_transit() -> RelationshipKind {
    RelationshipKind::FullTransit
}

fn default_latency_ms() -> f64 {
    DEFAULT_LATENCY.as_millis_f64()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClusterSelection {
    /// Keep whatever the topology source declares.
    #[default]
    None,
    Members { members: Vec<Asn> },
    /// `round(fraction * n)` ASes taken from a seeded permutation of all nodes, so a
    /// larger fraction always selects a superset.
    Fraction {
        fraction: f64,
        #[serde(default)]
        selection_seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyOverride {
    pub a: Asn,
    pub b: Asn,
    pub latency_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub at_s: f64,
    #[serde(flatten)]
    pub kind: ActionKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSpec {
    pub mrai_s: f64,
    pub mrai_jitter: f64,
    pub recompute_delay_s: f64,
    pub install_latency_ms: f64,
    pub processing_delay_ms: f64,
    pub weighting: Weighting,
    pub max_time_s: f64,
    pub max_events: u64,
}

impl Default for EngineSpec {
    fn default() -> Self {
        let e = EngineConfig::default();
        EngineSpec {
            mrai_s: e.bgp.mrai.as_secs_f64(),
            mrai_jitter: e.bgp.mrai_jitter,
            recompute_delay_s: e.controller.recompute_delay.as_secs_f64(),
            install_latency_ms: e.controller.install_latency.as_millis_f64(),
            processing_delay_ms: e.processing_delay.as_millis_f64(),
            weighting: e.controller.weighting,
            max_time_s: e.limits.max_time.as_secs_f64(),
            max_events: e.limits.max_events,
        }
    }
}

impl EngineSpec {
    fn check(&self, problems: &mut Vec<String>) {
        let nonneg = [
            ("mrai_s", self.mrai_s),
            ("recompute_delay_s", self.recompute_delay_s),
            ("install_latency_ms", self.install_latency_ms),
            ("processing_delay_ms", self.processing_delay_ms),
            ("max_time_s", self.max_time_s),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                problems.push(format!("engine.{name} must be a finite non-negative number, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.mrai_jitter) {
            problems.push(format!("engine.mrai_jitter must be in [0, 1), got {}", self.mrai_jitter));
        }
        if self.processing_delay_ms <= 0.0 {
            problems.push("engine.processing_delay_ms must be positive".into());
        }
        if self.max_events == 0 {
            problems.push("engine.max_events must be at least 1".into());
        }
    }

    pub fn config(&self) -> EngineConfig {
        EngineConfig {
            bgp: BgpConfig { mrai: SimTime::from_secs_f64(self.mrai_s), mrai_jitter: self.mrai_jitter },
            controller: ControllerConfig {
                recompute_delay: SimTime::from_secs_f64(self.recompute_delay_s),
                weighting: self.weighting,
                install_latency: SimTime::from_millis_f64(self.install_latency_ms),
            },
            processing_delay: SimTime::from_millis_f64(self.processing_delay_ms),
            limits: Limits { max_time: SimTime::from_secs_f64(self.max_time_s), max_events: self.max_events },
        }
    }
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: String,
    pub topology: TopologySource,
    #[serde(default)]
    pub remove_links: Vec<(Asn, Asn)>,
    #[serde(default)]
    pub latency_overrides: Vec<LatencyOverride>,
    #[serde(default)]
    pub cluster: ClusterSelection,
    /// Prefix `i` is originated by `originations[i]`. Empty keeps the source's own.
    #[serde(default)]
    pub originations: Vec<Asn>,
    #[serde(default)]
    pub actions: Vec<ActionSpec>,
    /// Action whose metrics go into results.csv. Defaults to the last action.
    #[serde(default)]
    pub measure: Option<usize>,
    #[serde(default)]
    pub engine: EngineSpec,
    #[serde(default = "one")]
    pub runs: u32,
    #[serde(default)]
    pub base_seed: u64,
}

/// Everything one run needs, derived from a valid [`ScenarioSpec`].
#[derive(Clone, Debug)]
pub struct Prepared {
    pub topology: Topology,
    pub actions: Vec<ScenarioAction>,
    pub config: EngineConfig,
    pub measure: Option<usize>,
}

/// Cluster members for `fraction` of `nodes` under `seed`.
pub fn select_members(nodes: &[Asn], fraction: f64, seed: u64) -> Vec<Asn> {
    let mut order = nodes.to_vec();
    order.sort();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = (fraction * nodes.len() as f64).round() as usize;
    order.truncate(k.min(nodes.len()));
    order.sort();
    order
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Invalid(vec![format!("scenario: {e}")]))
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_json(&text)?, base))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Validates the spec and builds the run inputs. Every problem found is reported.
    pub fn prepare(&self, base_dir: &Path) -> Result<Prepared, HarnessError> {
        let mut problems = Vec::new();
        if self.runs == 0 {
            problems.push("runs must be at least 1".into());
        }
        self.engine.check(&mut problems);
        let topology = self.build_topology(base_dir, &mut problems);
        let mut actions = Vec::new();
        for (i, a) in self.actions.iter().enumerate() {
            if !a.at_s.is_finite() || a.at_s < 0.0 {
                problems.push(format!("action #{i}: at_s must be a finite non-negative number"));
            }
            actions.push(ScenarioAction { at: SimTime::from_secs_f64(a.at_s), kind: a.kind.clone() });
        }
        if let Some(m) = self.measure {
            if m >= actions.len() {
                problems.push(format!("measure #{m} is out of range for {} actions", actions.len()));
            }
        }
        if let Some(t) = &topology {
            if let Err(SimError::InvalidArgument(p)) = validate_scenario(t, &actions) {
                problems.extend(p);
            }
        }
        match topology {
            Some(topology) if problems.is_empty() => Ok(Prepared {
                topology,
                measure: self.measure.or(actions.len().checked_sub(1)),
                actions,
                config: self.engine.config(),
            }),
            _ => Err(HarnessError::Invalid(problems)),
        }
    }

    fn build_topology(&self, base_dir: &Path, problems: &mut Vec<String>) -> Option<Topology> {
        let mut t = match &self.topology {
            TopologySource::Clique { n, relationship, latency_ms } => {
                let mut t = match Topology::clique(*n, *relationship) {
                    Ok(t) => t,
                    Err(e) => {
                        problems.push(format!("topology: {e}"));
                        return None;
                    }
                };
                if !latency_ms.is_finite() || *latency_ms < 0.0 {
                    problems.push(format!("topology.latency_ms must be finite and non-negative, got {latency_ms}"));
                } else {
                    let keys: Vec<_> = t.links().map(|(k, _)| k).collect();
                    for k in keys {
                        t.set_latency(k.low(), k.high(), SimTime::from_millis_f64(*latency_ms)).expect("own link");
                    }
                }
                t
            }
            TopologySource::Caida { path } => {
                let full = base_dir.join(path);
                let parsed = std::fs::File::open(&full)
                    .map_err(|e| format!("{}: {e}", full.display()))
                    .and_then(|f| {
                        Topology::parse_caida_reader(std::io::BufReader::new(f))
                            .map_err(|e| format!("{}: {e}", full.display()))
                    });
                match parsed {
                    Ok(t) => t,
                    Err(e) => {
                        problems.push(format!("topology: {e}"));
                        return None;
                    }
                }
            }
            TopologySource::Inline { topology } => match Topology::from_json(&topology.to_string()) {
                Ok(t) => t,
                Err(e) => {
                    problems.push(format!("topology: {e}"));
                    return None;
                }
            },
        };
        for &(a, b) in &self.remove_links {
            if let Err(e) = t.remove_link(a, b) {
                problems.push(format!("remove_links: {e}"));
            }
        }
        for o in &self.latency_overrides {
            if !o.latency_ms.is_finite() || o.latency_ms < 0.0 {
                problems.push(format!("latency override {}-{}: bad latency {}", o.a, o.b, o.latency_ms));
            } else if let Err(e) = t.set_latency(o.a, o.b, SimTime::from_millis_f64(o.latency_ms)) {
                problems.push(format!("latency override: {e}"));
            }
        }
        if !self.originations.is_empty() {
            t = match t.clone().assign_prefixes(&self.originations) {
                Ok(t) => t,
                Err(e) => {
                    problems.push(format!("originations: {e}"));
                    t
                }
            };
        }
        let members = match &self.cluster {
            ClusterSelection::None => Vec::new(),
            ClusterSelection::Members { members } => members.clone(),
            ClusterSelection::Fraction { fraction, selection_seed } => {
                if !(0.0..=1.0).contains(fraction) {
                    problems.push(format!("cluster.fraction must be in [0, 1], got {fraction}"));
                    Vec::new()
                } else {
                    select_members(&t.nodes().collect::<Vec<_>>(), *fraction, *selection_seed)
                }
            }
        };
        if !members.is_empty() && !t.clusters().is_empty() {
            problems.push("cluster selection conflicts with clusters declared by the topology source".into());
        }
        let t = match t.clone().declare_cluster(members) {
            Ok(t) => t,
            Err(e) => {
                problems.push(format!("cluster: {e}"));
                t
            }
        };
        if let Err(e) = t.validate() {
            problems.push(format!("topology: {e}"));
        }
        Some(t)
    }

    /// The same scenario with cluster fraction `f`, keeping the selection seed.
    pub fn with_fraction(&self, f: f64) -> ScenarioSpec {
        let selection_seed = match self.cluster {
            ClusterSelection::Fraction { selection_seed, .. } => selection_seed,
            _ => 0,
        };
        ScenarioSpec { cluster: ClusterSelection::Fraction { fraction: f, selection_seed }, ..self.clone() }
    }

    /// Convenience for building scenarios in code: `at` in seconds.
    pub fn push_action(&mut self, at_s: f64, kind: ActionKind) {
        self.actions.push(ActionSpec { at_s, kind });
    }

    pub fn seed_of(&self, run: u32) -> u64 {
        self.base_seed.wrapping_add(run as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TemplateRef {
    Path(PathBuf),
    Inline(Box<ScenarioSpec>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub name: String,
    /// Inline scenario, or a path relative to the sweep file.
    pub template: TemplateRef,
    pub fractions: Vec<f64>,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Invalid(vec![format!("sweep: {e}")]))
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_json(&text)?, base))
    }

    /// Resolves the template and checks the fraction list.
    pub fn resolve(&self, base_dir: &Path) -> Result<(ScenarioSpec, PathBuf), HarnessError> {
        let (template, dir) = match &self.template {
            TemplateRef::Inline(s) => ((**s).clone(), base_dir.to_path_buf()),
            TemplateRef::Path(p) => ScenarioSpec::load(&base_dir.join(p))?,
        };
        let mut problems = Vec::new();
        if self.fractions.is_empty() {
            problems.push("fractions must not be empty".into());
        }
        if self.fractions.windows(2).any(|w| w[0] >= w[1]) {
            problems.push("fractions must be sorted and distinct".into());
        }
        if let Some(f) = self.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            problems.push(format!("fraction {f} is outside [0, 1]"));
        }
        if let ClusterSelection::Members { .. } = template.cluster {
            problems.push("sweep template must not list explicit cluster members".into());
        }
        if template.actions.is_empty() {
            problems.push("sweep template needs at least one action".into());
        }
        if problems.is_empty() {
            Ok((template, dir))
        } else {
            Err(HarnessError::Invalid(problems))
        }
    }
}
