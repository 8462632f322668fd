//! Machine-readable outputs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::config::{ext_f64, Bounds, ProblemConfig};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::solver::{ConditionReport, SolverOptions};
use crate::value::{Region, Solution, VerificationReport};

pub const SOLUTION_SCHEMA: &str = "ostop.solution.v1";
pub const VERIFICATION_SCHEMA: &str = "ostop.verification.v1";
pub const ORACLE_SCHEMA: &str = "ostop.oracle.v1";
pub const ERROR_SCHEMA: &str = "ostop.error.v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportInterval {
    #[serde(with = "ext_f64")]
    pub lo: f64,
    #[serde(with = "ext_f64")]
    pub hi: f64,
    pub k1: f64,
    pub k2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportPair {
    pub n: Bounds,
    pub c: Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub work_window: Bounds,
    pub scan_points: usize,
    pub root_tol: f64,
    pub enlarge_tol: f64,
    pub gap_tol: f64,
    pub condition_rel_tol: f64,
    pub quadrature_rel_tol: f64,
    pub quadrature_abs_tol: f64,
}

impl From<&SolverOptions> for Tolerances {
    fn from(o: &SolverOptions) -> Self {
        Self {
            work_window: o.work_window.into(),
            scan_points: o.scan_points,
            root_tol: o.root_tol,
            enlarge_tol: o.enlarge_tol,
            gap_tol: o.gap_tol,
            condition_rel_tol: o.condition_rel_tol,
            quadrature_rel_tol: o.quadrature.rel_tol,
            quadrature_abs_tol: o.quadrature.abs_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMetadata {
    pub iterations: usize,
    pub merges: usize,
    pub enlarge_passes: usize,
    pub negative_set: Vec<Bounds>,
    pub initial_pairs: Vec<ReportPair>,
    pub merged_pairs: Vec<ReportPair>,
    pub tolerances: Tolerances,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub schema: String,
    /// `"continuation"`, or `"stop_everywhere"` when the negative set is empty.
    pub status: String,
    pub continuation: Vec<ReportInterval>,
    pub pairs: Vec<ReportPair>,
    pub diagnostics: Vec<ConditionReport>,
    pub verification: VerificationReport,
    pub solver: SolverMetadata,
    pub problem: ProblemConfig,
}

impl SolutionReport {
    pub fn new(
        solution: &Solution,
        verification: VerificationReport,
        opts: &SolverOptions,
        problem: ProblemConfig,
        elapsed_seconds: f64,
    ) -> Self {
        let pair = |p: &crate::solver::PairNC| ReportPair {
            n: p.n.into(),
            c: p.c.into(),
        };
        let stats = solution.stats();
        Self {
            schema: SOLUTION_SCHEMA.into(),
            status: if solution.intervals().is_empty() {
                "stop_everywhere".into()
            } else {
                "continuation".into()
            },
            continuation: solution
                .intervals()
                .iter()
                .map(|s| ReportInterval {
                    lo: s.c.lo(),
                    hi: s.c.hi(),
                    k1: s.k1,
                    k2: s.k2,
                })
                .collect(),
            pairs: solution.pairs().iter().map(pair).collect(),
            diagnostics: solution.diagnostics().to_vec(),
            verification,
            solver: SolverMetadata {
                iterations: stats.iterations,
                merges: stats.merges,
                enlarge_passes: stats.enlarge_passes,
                negative_set: stats.negative_set.iter().map(|&n| n.into()).collect(),
                initial_pairs: stats.base_pairs.iter().map(pair).collect(),
                merged_pairs: stats.merged.iter().map(pair).collect(),
                tolerances: opts.into(),
                elapsed_seconds,
            },
            problem,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: SolutionReport = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if report.schema != SOLUTION_SCHEMA {
            return Err(Error::Config(format!(
                "unsupported schema {:?}, expected {SOLUTION_SCHEMA:?}",
                report.schema
            )));
        }
        Ok(report)
    }

    pub fn continuation_intervals(&self) -> Result<Vec<Interval>> {
        self.continuation
            .iter()
            .map(|c| Interval::new(c.lo, c.hi).map_err(|e| Error::Config(e.to_string())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutput {
    pub schema: String,
    pub continuation: Vec<ReportInterval>,
    pub verification: VerificationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    pub x: f64,
    pub solver_value: f64,
    pub best_value: f64,
    /// `best_value − solver_value`; positive means a scanned policy did better.
    pub excess: f64,
    pub best_gaps: Vec<Bounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloPoint {
    pub x: f64,
    pub solver_value: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// `(estimate − solver_value) / stderr`, zero for exact estimates.
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutput {
    pub schema: String,
    pub policies_scanned: u64,
    pub max_excess: f64,
    pub dominance_tol: f64,
    pub dominated: bool,
    pub points: Vec<OraclePoint>,
    pub monte_carlo: Vec<MonteCarloPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorOutput {
    pub schema: String,
    pub error: ErrorBody,
}

impl ErrorOutput {
    pub fn new(e: &Error) -> Self {
        Self {
            schema: ERROR_SCHEMA.into(),
            error: ErrorBody {
                kind: e.kind().into(),
                message: e.to_string(),
            },
        }
    }
}

/// Writes `x,g,V,region` rows for `points`.
pub fn write_samples<W: Write>(mut out: W, solution: &Solution, points: &[f64]) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(format!("cannot write samples: {e}"));
    writeln!(out, "x,g,V,region").map_err(io)?;
    for &x in points {
        let v = solution.evaluate(x)?;
        let region = match solution.region(x) {
            Region::Stop => "stop".to_string(),
            Region::Continue(i) => format!("cont-{i}"),
        };
        writeln!(out, "{:.16e},{:.16e},{:.16e},{region}", x, solution.reward().g(x), v).map_err(io)?;
    }
    Ok(())
}
