//! Adapters that hand a [`MilpModel`] to a branch-and-bound engine.

use std::sync::Mutex;
use std::time::Duration;

use super::milp::{MilpModel, Sense};
use crate::error::{Error, Result};

pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(120);
pub const DEFAULT_MIP_REL_GAP: f64 = 1e-7;
/// Feasibility tolerance applied when re-checking solutions.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub time_limit: Duration,
    pub mip_rel_gap: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            time_limit: DEFAULT_TIME_LIMIT,
            mip_rel_gap: DEFAULT_MIP_REL_GAP,
        }
    }
}

impl SolverConfig {
    /// Defaults with `STODYN_TIME_LIMIT` (seconds) applied when set.
    pub fn from_env() -> Result<Self> {
        let mut cfg = Self::default();
        if let Ok(raw) = std::env::var("STODYN_TIME_LIMIT") {
            let secs: f64 = raw.trim().parse().map_err(|_| {
                Error::Environment(format!("STODYN_TIME_LIMIT must be seconds, got {raw:?}"))
            })?;
            if !(secs.is_finite() && secs > 0.0) {
                return Err(Error::Environment(format!(
                    "STODYN_TIME_LIMIT must be positive, got {raw:?}"
                )));
            }
            cfg.time_limit = Duration::from_secs_f64(secs);
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Limit,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Infeasible => "infeasible",
            Self::Limit => "limit",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct SolverSolution {
    pub status: SolveStatus,
    /// Objective including the model's constant; NaN without an incumbent.
    pub objective: f64,
    /// Empty without an incumbent.
    pub values: Vec<f64>,
}

impl SolverSolution {
    pub fn infeasible() -> Self {
        Self {
            status: SolveStatus::Infeasible,
            objective: f64::NAN,
            values: Vec::new(),
        }
    }

    pub fn has_incumbent(&self) -> bool {
        !self.values.is_empty()
    }
}

pub trait MilpSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, model: &MilpModel, cfg: &SolverConfig) -> Result<SolverSolution>;
}

/// Picks the adapter named by `STODYN_SOLVER` (`highs` when unset).
pub fn solver_from_env() -> Result<Box<dyn MilpSolver>> {
    match std::env::var("STODYN_SOLVER") {
        Ok(name) => solver_by_name(name.trim()),
        Err(_) => Ok(Box::new(HighsSolver)),
    }
}

pub fn solver_by_name(name: &str) -> Result<Box<dyn MilpSolver>> {
    match name.to_ascii_lowercase().as_str() {
        "" | "highs" => Ok(Box::new(HighsSolver)),
        "microlp" => Ok(Box::new(MicroLpSolver)),
        other => Err(Error::Environment(format!(
            "unknown solver adapter {other:?}; set STODYN_SOLVER to \"highs\" or \"microlp\""
        ))),
    }
}

/// Solves with the adapter from the environment.
pub fn solve(model: &MilpModel, cfg: &SolverConfig) -> Result<SolverSolution> {
    solver_from_env()?.solve(model, cfg)
}

fn trivial(model: &MilpModel) -> Option<SolverSolution> {
    if model.variables.is_empty() {
        let feasible = model
            .rows
            .iter()
            .all(|r| r.lower <= FEASIBILITY_TOLERANCE && -FEASIBILITY_TOLERANCE <= r.upper);
        return Some(if feasible {
            SolverSolution {
                status: SolveStatus::Optimal,
                objective: model.objective_constant,
                values: Vec::new(),
            }
        } else {
            SolverSolution::infeasible()
        });
    }
    None
}

/// Fixes binaries at their rounded values and re-solves the continuous part,
/// which removes integrality slack left by the branch-and-bound tolerances.
fn polish<F>(model: &MilpModel, values: &[f64], lp: F) -> Result<Option<Vec<f64>>>
where
    F: FnOnce(&MilpModel) -> Result<SolverSolution>,
{
    if model.num_binaries() == 0 {
        return Ok(None);
    }
    let mut fixed = model.clone();
    for (v, &x) in fixed.variables.iter_mut().zip(values) {
        if v.binary {
            let r = x.round().clamp(0.0, 1.0);
            v.binary = false;
            v.lower = r;
            v.upper = r;
        }
    }
    let sol = lp(&fixed)?;
    Ok(match sol.status {
        SolveStatus::Optimal => Some(sol.values),
        _ => None,
    })
}

fn finish(model: &MilpModel, status: SolveStatus, mut values: Vec<f64>) -> SolverSolution {
    for (v, x) in model.variables.iter().zip(values.iter_mut()) {
        if v.binary {
            *x = x.round();
        }
    }
    SolverSolution {
        status,
        objective: model.objective_value(&values),
        values,
    }
}

/// HiGHS through its C API. Calls are serialized because the library keeps
/// process-wide state that is not safe to drive from many threads at once.
#[derive(Clone, Copy, Debug, Default)]
pub struct HighsSolver;

static HIGHS_LOCK: Mutex<()> = Mutex::new(());

impl HighsSolver {
    fn raw(model: &MilpModel, cfg: &SolverConfig) -> Result<SolverSolution> {
        use highs::{HighsModelStatus, RowProblem, Sense as HSense};

        if let Some(s) = trivial(model) {
            return Ok(s);
        }
        let mut pb = RowProblem::default();
        let cols: Vec<_> = model
            .variables
            .iter()
            .map(|v| pb.add_column_with_integrality(v.objective, v.lower..=v.upper, v.binary))
            .collect();
        for r in &model.rows {
            pb.add_row(r.lower..=r.upper, r.terms.iter().map(|&(i, c)| (cols[i], c)));
        }
        let sense = match model.sense {
            Sense::Minimize => HSense::Minimise,
            Sense::Maximize => HSense::Maximise,
        };
        let _guard = HIGHS_LOCK.lock().unwrap_or_else(|e| e.into_inner());
        let mut m = pb.optimise(sense);
        m.make_quiet();
        m.set_option("threads", 1);
        m.set_option("time_limit", cfg.time_limit.as_secs_f64());
        m.set_option("mip_rel_gap", cfg.mip_rel_gap);
        let solved = m.solve();
        let status = solved.status();
        let values = || solved.get_solution().columns().to_vec();
        Ok(match status {
            HighsModelStatus::Optimal => finish(model, SolveStatus::Optimal, values()),
            HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => {
                SolverSolution::infeasible()
            }
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit
            | HighsModelStatus::ReachedInterrupt
            | HighsModelStatus::ReachedMemoryLimit => {
                let v = values();
                let usable = v.len() == model.variables.len()
                    && model.max_violation(&v) <= FEASIBILITY_TOLERANCE * 10.0;
                if usable {
                    finish(model, SolveStatus::Limit, v)
                } else {
                    SolverSolution {
                        status: SolveStatus::Limit,
                        objective: f64::NAN,
                        values: Vec::new(),
                    }
                }
            }
            other => {
                return Err(Error::Solver(format!("HiGHS returned status {other:?}")));
            }
        })
    }
}

impl MilpSolver for HighsSolver {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, model: &MilpModel, cfg: &SolverConfig) -> Result<SolverSolution> {
        let sol = Self::raw(model, cfg)?;
        if sol.status != SolveStatus::Optimal {
            return Ok(sol);
        }
        match polish(model, &sol.values, |m| Self::raw(m, cfg))? {
            Some(v) => Ok(finish(model, SolveStatus::Optimal, v)),
            None => Ok(sol),
        }
    }
}

/// Pure-Rust engine, used as an independent cross-check.
#[derive(Clone, Copy, Debug, Default)]
pub struct MicroLpSolver;

impl MicroLpSolver {
    fn raw(model: &MilpModel, cfg: &SolverConfig) -> Result<SolverSolution> {
        use microlp::{
            ComparisonOp, OptimizationDirection, Problem, SolutionStatus, SolveOptions,
            SolveOutcome,
        };

        if let Some(s) = trivial(model) {
            return Ok(s);
        }
        let dir = match model.sense {
            Sense::Minimize => OptimizationDirection::Minimize,
            Sense::Maximize => OptimizationDirection::Maximize,
        };
        let mut pb = Problem::new(dir);
        let vars: Vec<_> = model
            .variables
            .iter()
            .map(|v| {
                if v.binary {
                    pb.add_binary_var(v.objective)
                } else {
                    pb.add_var(v.objective, (v.lower, v.upper))
                }
            })
            .collect();
        for r in &model.rows {
            let terms: Vec<_> = r.terms.iter().map(|&(i, c)| (vars[i], c)).collect();
            if r.lower == r.upper {
                pb.add_constraint(terms.as_slice(), ComparisonOp::Eq, r.lower);
                continue;
            }
            if r.lower.is_finite() {
                pb.add_constraint(terms.as_slice(), ComparisonOp::Ge, r.lower);
            }
            if r.upper.is_finite() {
                pb.add_constraint(terms.as_slice(), ComparisonOp::Le, r.upper);
            }
        }
        let mut opts = SolveOptions::default();
        opts.time_limit = Some(cfg.time_limit);
        opts.mip_gap = cfg.mip_rel_gap;
        match pb.solve_with(opts) {
            Ok(SolveOutcome::Solution(sol)) => {
                let values: Vec<f64> = vars.iter().map(|&v| sol.var_value_raw(v)).collect();
                let status = match sol.status() {
                    SolutionStatus::Optimal => SolveStatus::Optimal,
                    // a stop at the requested gap still certifies optimality to tolerance
                    SolutionStatus::Feasible if sol.gap().is_some_and(|g| g <= cfg.mip_rel_gap) => {
                        SolveStatus::Optimal
                    }
                    _ => SolveStatus::Limit,
                };
                Ok(finish(model, status, values))
            }
            Ok(SolveOutcome::Interrupted(_)) => Ok(SolverSolution {
                status: SolveStatus::Limit,
                objective: f64::NAN,
                values: Vec::new(),
            }),
            Err(microlp::Error::Infeasible) => Ok(SolverSolution::infeasible()),
            Err(e) => Err(Error::Solver(format!("microlp: {e}"))),
        }
    }
}

impl MilpSolver for MicroLpSolver {
    fn name(&self) -> &'static str {
        "microlp"
    }

    fn solve(&self, model: &MilpModel, cfg: &SolverConfig) -> Result<SolverSolution> {
        let sol = Self::raw(model, cfg)?;
        if sol.status != SolveStatus::Optimal {
            return Ok(sol);
        }
        match polish(model, &sol.values, |m| Self::raw(m, cfg))? {
            Some(v) => Ok(finish(model, SolveStatus::Optimal, v)),
            None => Ok(sol),
        }
    }
}
