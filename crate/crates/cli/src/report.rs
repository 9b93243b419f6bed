//! Report assembly and rendering.

use std::fmt::Write;

use optconn::connection::{ChristoffelRecord, TablePath};
use optconn::oracle::CheckOutcome;
use serde::Serialize;

use crate::config::{Mode, RawParams};

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioEcho {
    pub name: String,
    pub family: String,
    pub dim: usize,
    pub mode: Mode,
    pub fd_step: f64,
    pub seed: u64,
    pub params: RawParams,
    pub fault: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointTable {
    pub point: usize,
    pub path: TablePath,
    pub entries: Vec<ChristoffelRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureSummary {
    pub point: usize,
    pub scalar: f64,
    pub riemann_symmetry: f64,
    pub ricci_symmetry: f64,
    /// Largest gap to the coordinate-chart computation, when requested.
    pub coordinate_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: ScenarioEcho,
    pub points: Vec<Vec<f64>>,
    pub tables: Vec<PointTable>,
    pub checks: Vec<CheckOutcome>,
    pub curvature: Vec<CurvatureSummary>,
    pub passed: bool,
    pub elapsed_ms: f64,
}

/// Shortest round-trip form, with `-0` printed as `0`.
fn num(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v}")
}

fn short(v: f64) -> String {
    format!("{v:.3e}")
}

impl RunReport {
    /// Line-oriented text. Everything except the final `elapsed_ms` line is
    /// a pure function of the configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let s = &self.scenario;
        let _ = writeln!(out, "scenario {}", s.name);
        let _ = writeln!(out, "family {}", s.family);
        let _ = writeln!(out, "dim {}", s.dim);
        let mode = match s.mode {
            Mode::Exact => "exact".to_string(),
            Mode::Fd => format!("fd step={}", s.fd_step),
        };
        let _ = writeln!(out, "mode {mode}");
        let _ = writeln!(out, "seed {}", s.seed);
        let _ = writeln!(out, "sigma {}", s.params.sigma);
        let _ = writeln!(out, "alpha {}", s.params.alpha);
        let _ = writeln!(out, "beta {}", s.params.beta);
        let _ = writeln!(out, "gamma {}", s.params.gamma.join("; "));
        if let Some(f) = &s.fault {
            let _ = writeln!(out, "fault {f}");
        }
        for (i, p) in self.points.iter().enumerate() {
            let coords: Vec<String> = p.iter().map(|v| num(*v)).collect();
            let _ = writeln!(out, "point {i} {}", coords.join(","));
        }
        for t in &self.tables {
            for r in &t.entries {
                let _ = writeln!(
                    out,
                    "christoffel {} {} {} {} {} {}",
                    t.path,
                    t.point,
                    r.a,
                    r.b,
                    r.c,
                    num(r.value)
                );
            }
        }
        for c in &self.curvature {
            let _ = write!(
                out,
                "curvature {} scalar={} riemann_symmetry={} ricci_symmetry={}",
                c.point,
                num(c.scalar),
                short(c.riemann_symmetry),
                short(c.ricci_symmetry)
            );
            if let Some(g) = c.coordinate_gap {
                let _ = write!(out, " coordinate_gap={}", short(g));
            }
            out.push('\n');
        }
        let mut passed = 0;
        for c in &self.checks {
            if c.pass {
                passed += 1;
            }
            let _ = writeln!(
                out,
                "check {} {} residual={} tolerance={:e} point={} worst={}",
                c.check,
                if c.pass { "PASS" } else { "FAIL" },
                short(c.residual),
                c.tolerance,
                c.point,
                if c.worst.is_empty() || c.residual == 0.0 {
                    "-"
                } else {
                    &c.worst
                },
            );
        }
        let _ = writeln!(
            out,
            "result {} {passed}/{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.checks.len()
        );
        let _ = writeln!(out, "elapsed_ms {:.3}", self.elapsed_ms);
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
