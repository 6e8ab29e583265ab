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

//! CSV, SVG and NDJSON outputs of a sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{HarnessError, SweepRow};

pub const RESULTS_HEADER: &str = "fraction,run,seed,convergence_time_s,message_count,reachable_fraction,loops";

/// One row per run, ordered by (fraction, run). Runs whose measured action never got
/// injected are left out.
pub fn results_csv(table: &[SweepRow]) -> String {
    let mut s = String::from(RESULTS_HEADER);
    s.push('\n');
    for row in table {
        for r in &row.runs {
            if let Some(a) = r.measured() {
                writeln!(
                    s,
                    "{:.4},{},{},{:.6},{},{:.6},{}",
                    r.fraction, r.run, r.seed, a.convergence_time_s, a.message_count, a.reachable_fraction, a.loops
                )
                .expect("string write");
            }
        }
    }
    s
}

pub fn summary_csv(table: &[SweepRow]) -> String {
    let mut s = String::from("fraction,members,runs,converged,min_s,q1_s,median_s,q3_s,max_s,mean_messages\n");
    for row in table {
        let converged = row.runs.iter().filter(|r| r.status.converged()).count();
        write!(s, "{:.4},{},{},{}", row.fraction, row.members.len(), row.runs.len(), converged).expect("string write");
        match &row.summary {
            Some(m) => writeln!(
                s,
                ",{:.6},{:.6},{:.6},{:.6},{:.6},{:.3}",
                m.min, m.q1, m.median, m.q3, m.max, m.mean_messages
            ),
            None => writeln!(s, ",,,,,,"),
        }
        .expect("string write");
    }
    s
}

pub fn log_file_name(fraction: f64, run: u32) -> String {
    format!("fraction-{fraction:.4}-run-{run:03}.ndjson")
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Self-contained SVG boxplot of convergence time per fraction.
pub fn boxplot_svg(table: &[SweepRow], title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const L: f64 = 70.0;
    const R: f64 = 20.0;
    const T: f64 = 40.0;
    const B: f64 = 60.0;
    let top = table
        .iter()
        .filter_map(|r| r.summary.map(|s| s.max))
        .fold(0.0_f64, f64::max)
        .max(1e-3)
        * 1.1;
    let y = |v: f64| T + (H - T - B) * (1.0 - v / top);
    let n = table.len().max(1) as f64;
    let slot = (W - L - R) / n;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, esc(title)).unwrap();
    writeln!(s, r#"<line x1="{L}" y1="{T}" x2="{L}" y2="{:.1}" stroke="black"/>"#, H - B).unwrap();
    writeln!(s, r#"<line x1="{L}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#, H - B, W - R, H - B).unwrap();
    for i in 0..=5 {
        let v = top * i as f64 / 5.0;
        let yy = y(v);
        writeln!(s, r##"<line x1="{:.1}" y1="{yy:.1}" x2="{:.1}" y2="{yy:.1}" stroke="#ddd"/>"##, L, W - R).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#, L - 6.0, yy + 4.0).unwrap();
    }
    for (i, row) in table.iter().enumerate() {
        let cx = L + slot * (i as f64 + 0.5);
        let half = (slot * 0.3).min(30.0);
        writeln!(s, r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">{:.2}</text>"#, H - B + 18.0, row.fraction)
            .unwrap();
        let Some(m) = row.summary else { continue };
        writeln!(s, r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#, y(m.max), y(m.q3))
            .unwrap();
        writeln!(s, r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#, y(m.q1), y(m.min))
            .unwrap();
        for v in [m.min, m.max] {
            writeln!(
                s,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
                cx - half / 2.0,
                y(v),
                cx + half / 2.0,
                y(v)
            )
            .unwrap();
        }
        writeln!(
            s,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#9cc3e6" stroke="black"/>"##,
            cx - half,
            y(m.q3),
            2.0 * half,
            (y(m.q1) - y(m.q3)).max(0.5)
        )
        .unwrap();
        writeln!(
            s,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#c0392b" stroke-width="2"/>"##,
            cx - half,
            y(m.median),
            cx + half,
            y(m.median)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">fraction of ASes under centralized control</text>"#,
        L + (W - L - R) / 2.0,
        H - 18.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">convergence time (s)</text>"#,
        T + (H - T - B) / 2.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

/// Writes results.csv, summary.csv, boxplot.svg and logs/*.ndjson under `out_dir`.
/// The directory is probed for writability before anything is written.
pub fn emit_report(table: &[SweepRow], out_dir: &Path, title: &str) -> Result<Vec<PathBuf>, HarnessError> {
    if table.is_empty() {
        return Err(HarnessError::Invalid(vec!["report table is empty".into()]));
    }
    let io = |p: &Path, e: std::io::Error| HarnessError::Io(format!("{}: {e}", p.display()));
    let logs = out_dir.join("logs");
    fs::create_dir_all(&logs).map_err(|e| io(&logs, e))?;
    let probe = out_dir.join(".idrsim-write-probe");
    fs::write(&probe, b"").map_err(|e| io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| io(&probe, e))?;

    let mut files = vec![
        (out_dir.join("results.csv"), results_csv(table)),
        (out_dir.join("summary.csv"), summary_csv(table)),
        (out_dir.join("boxplot.svg"), boxplot_svg(table, title)),
    ];
    for row in table {
        for r in &row.runs {
            files.push((logs.join(log_file_name(r.fraction, r.run)), r.log.to_ndjson()));
        }
    }
    for (path, body) in &files {
        fs::write(path, body).map_err(|e| io(path, e))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
