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

//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use idrsim::harness::{self, HarnessError, ScenarioSpec, SweepRow, SweepSpec};

#[derive(Parser)]
#[command(name = "idrsim", version, about = "Hybrid BGP / centralized routing convergence simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its report.
    Run {
        scenario: PathBuf,
        /// Base seed; run i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<u32>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a scenario template across cluster fractions.
    Sweep {
        sweep: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Validate a scenario without running it.
    Check { scenario: PathBuf },
    /// Run a scenario once and print the controller state as JSON.
    Dump {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;

fn fail(e: HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        HarnessError::Invalid(_) | HarnessError::Sim(idrsim::sim::SimError::InvalidArgument(_)) => {
            ExitCode::from(EXIT_INVALID)
        }
        _ => ExitCode::from(EXIT_FAILURE),
    }
}

fn print_table(table: &[SweepRow]) {
    println!("fraction  members  runs  converged  median_s  q1_s      q3_s      mean_msgs");
    for row in table {
        let ok = row.runs.iter().filter(|r| r.status.converged()).count();
        match &row.summary {
            Some(s) => println!(
                "{:<9.2} {:<8} {:<5} {:<10} {:<9.4} {:<9.4} {:<9.4} {:.1}",
                row.fraction,
                row.members.len(),
                row.runs.len(),
                ok,
                s.median,
                s.q1,
                s.q3,
                s.mean_messages
            ),
            None => println!("{:<9.2} {:<8} {:<5} {:<10} -", row.fraction, row.members.len(), row.runs.len(), ok),
        }
    }
}

fn finish(table: &[SweepRow], out: &Path, title: &str) -> ExitCode {
    print_table(table);
    if let Err(e) = harness::emit_report(table, out, title) {
        return fail(e);
    }
    println!("report written to {}", out.display());
    if table.iter().all(SweepRow::all_converged) {
        ExitCode::SUCCESS
    } else {
        eprintln!("error: at least one run hit its limits before converging");
        ExitCode::from(EXIT_TIMEOUT)
    }
}

fn title_of(name: &str, path: &Path) -> String {
    if name.is_empty() {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    } else {
        name.to_string()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { scenario, seed, runs, out } => {
            let (mut spec, base) = match ScenarioSpec::load(&scenario) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            if let Some(s) = seed {
                spec.base_seed = s;
            }
            if let Some(r) = runs {
                spec.runs = r;
            }
            match harness::run_scenario(&spec, &base) {
                Ok(row) => finish(&[row], &out, &title_of(&spec.name, &scenario)),
                Err(e) => fail(e),
            }
        }
        Command::Sweep { sweep, out } => {
            let (spec, base) = match SweepSpec::load(&sweep) {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            match harness::sweep(&spec, &base) {
                Ok(table) => finish(&table, &out, &title_of(&spec.name, &sweep)),
                Err(e) => fail(e),
            }
        }
        Command::Check { scenario } => {
            let checked = ScenarioSpec::load(&scenario).and_then(|(spec, base)| spec.prepare(&base));
            match checked {
                Ok(p) => {
                    println!(
                        "ok: {} ASes, {} links, {} cluster members, {} actions",
                        p.topology.node_count(),
                        p.topology.link_count(),
                        p.topology.clusters().iter().map(|c| c.len()).sum::<usize>(),
                        p.actions.len()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Dump { scenario, seed } => {
            let run = ScenarioSpec::load(&scenario).and_then(|(spec, base)| {
                let p = spec.prepare(&base)?;
                harness::controller_dumps(&p, seed.unwrap_or(spec.base_seed))
            });
            match run {
                Ok((status, dumps)) => {
                    let text = serde_json::to_string_pretty(&dumps).expect("dump serializes");
                    if writeln!(std::io::stdout().lock(), "{text}").is_err() {
                        return ExitCode::from(EXIT_FAILURE);
                    }
                    if status.converged() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_TIMEOUT)
                    }
                }
                Err(e) => fail(e),
            }
        }
    }
}
