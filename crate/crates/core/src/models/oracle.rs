//! Brute-force check of the MILP: with the review schedule fixed every model
//! is a linear program.

use rayon::prelude::*;

use super::build::{build_lost_sales_model, build_model, ModelInputs};
use super::instance::{ModelVariant, Shortage};
use super::milp::{MilpModel, Sense};
use super::policy::{extract_policy, Policy};
use super::solver::{MicroLpSolver, MilpSolver, SolveStatus, SolverConfig, SolverSolution};
use crate::error::{Error, Result};

pub const ORACLE_MAX_HORIZON: usize = 10;

/// Model for `variant` with every binary fixed by the schedule bitmask
/// (bit `t−1` set means a review in period `t`).
pub fn fix_schedule(model: &MilpModel, schedule: u32) -> MilpModel {
    let layout = &model.layout;
    let n = layout.horizon;
    let mut fixed = model.clone();
    let mut pin = |i: usize, on: bool| {
        let v = &mut fixed.variables[i];
        let x = if on { 1.0 } else { 0.0 };
        v.binary = false;
        v.lower = x;
        v.upper = x;
    };
    let mut latest = 1;
    for t in 1..=n {
        let review = schedule >> (t - 1) & 1 == 1;
        if review {
            latest = t;
        }
        pin(layout.delta(t), review);
        for j in 1..=t {
            pin(layout.p(j, t), j == latest);
        }
    }
    fixed
}

/// Best objective and its policy over all `2^N` review schedules.
pub fn enumerate_schedules_oracle(
    inputs: &ModelInputs,
    variant: ModelVariant,
) -> Result<(f64, Policy)> {
    let inst = inputs.instance;
    let n = inst.horizon();
    if n > ORACLE_MAX_HORIZON {
        return Err(Error::Config(format!(
            "schedule enumeration is limited to N <= {ORACLE_MAX_HORIZON} (got {n})"
        )));
    }
    if variant.measure != inst.service.measure() || variant.shortage != inst.shortage {
        return Err(Error::Config(format!(
            "variant {} does not match the instance",
            variant.label()
        )));
    }
    let model = match variant.shortage {
        Shortage::LostSales => build_lost_sales_model(inputs, variant)?,
        Shortage::Backorder => build_model(inputs, variant.direction)?,
    };
    let cfg = SolverConfig::default();
    let solved: Vec<(u32, SolverSolution)> = (0..1u32 << n)
        .into_par_iter()
        .map(|s| Ok((s, MicroLpSolver.solve(&fix_schedule(&model, s), &cfg)?)))
        .collect::<Result<_>>()?;
    let better = |a: f64, b: f64| match model.sense {
        Sense::Minimize => a < b,
        Sense::Maximize => a > b,
    };
    let mut best: Option<&SolverSolution> = None;
    for (_, sol) in &solved {
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => continue,
            SolveStatus::Limit => {
                return Err(Error::Solver("schedule LP hit the solver limit".into()));
            }
        }
        if best.is_none_or(|b| better(sol.objective, b.objective)) {
            best = Some(sol);
        }
    }
    let best = best.ok_or_else(|| {
        Error::ServiceInfeasible(format!("no review schedule is feasible for {}", variant.label()))
    })?;
    let policy = extract_policy(&model, best, inst)?;
    Ok((best.objective, policy))
}
