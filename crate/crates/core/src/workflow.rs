//! End-to-end pipeline: convolutions, linearizations, both bound models,
//! solves, and exact evaluation of the resulting policies.

use std::fmt;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::evaluate::{exact_policy_cost, optimality_gap, EvaluationReport};
use crate::linloss::{
    optimize_partition, standard_normal_table, LinearizationSet, Partition, SearchConfig,
};
use crate::models::{
    build_lost_sales_model, build_model, extract_policy, BoundDirection, BuildOptions,
    LotSizingInstance, MilpModel, MilpSolver, ModelInputs, Policy, Shortage, SolveStatus,
    SolverConfig, SolverSolution,
};
use crate::probdist::{ConvolutionConfig, ConvolutionTable};

/// How the `W` masses of the shared partition are chosen.
#[derive(Clone, Debug)]
pub enum PartitionStrategy {
    /// Equal masses `1/W`.
    Uniform,
    /// Minimax search over every range sum of the instance.
    Search(SearchConfig),
    /// Equal-error partition of the standard normal, scaled per range sum
    /// (all-normal demand only).
    NormalTable,
    Fixed(Partition),
}

impl PartitionStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Search(_) => "search",
            Self::NormalTable => "normal_table",
            Self::Fixed(_) => "fixed",
        }
    }

    /// Normal table for all-normal demand, uniform masses otherwise.
    pub fn default_for(inst: &LotSizingInstance) -> Self {
        if inst.demand.all_normal() {
            Self::NormalTable
        } else {
            Self::Uniform
        }
    }
}

impl fmt::Display for PartitionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn convolution_table(inst: &LotSizingInstance) -> Result<ConvolutionTable> {
    ConvolutionTable::build(&inst.demand, &ConvolutionConfig::default())
}

pub fn linearization_set(
    table: &ConvolutionTable,
    strategy: &PartitionStrategy,
    w: usize,
) -> Result<LinearizationSet> {
    match strategy {
        PartitionStrategy::Uniform => LinearizationSet::build(table, &Partition::uniform(w)?),
        PartitionStrategy::Fixed(p) => {
            if p.segments() != w {
                return Err(Error::Config(format!(
                    "fixed partition has {} segments, {w} requested",
                    p.segments()
                )));
            }
            LinearizationSet::build(table, p)
        }
        PartitionStrategy::NormalTable => {
            LinearizationSet::from_standard(table, standard_normal_table(w)?.as_ref())
        }
        PartitionStrategy::Search(cfg) => {
            let laws: Vec<_> = table.iter().map(|c| c.law.clone()).collect();
            let found = optimize_partition(&laws, w, cfg)?;
            LinearizationSet::build(table, &found.partition)
        }
    }
}

/// One solved bound model.
#[derive(Clone, Debug)]
pub struct SolvedBound {
    pub direction: BoundDirection,
    pub model: MilpModel,
    pub solution: SolverSolution,
    pub policy: Option<Policy>,
    pub build_ms: f64,
    pub solve_ms: f64,
}

impl SolvedBound {
    pub fn status(&self) -> SolveStatus {
        self.solution.status
    }

    pub fn objective(&self) -> Option<f64> {
        (self.solution.status == SolveStatus::Optimal).then_some(self.solution.objective)
    }
}

pub fn solve_bound(
    inst: &LotSizingInstance,
    table: &ConvolutionTable,
    lins: &LinearizationSet,
    direction: BoundDirection,
    options: BuildOptions,
    solver: &dyn MilpSolver,
    cfg: &SolverConfig,
) -> Result<SolvedBound> {
    let started = Instant::now();
    let mut inputs = ModelInputs::new(inst, table, lins);
    inputs.options = options;
    let model = match inst.shortage {
        Shortage::Backorder => build_model(&inputs, direction)?,
        Shortage::LostSales => build_lost_sales_model(&inputs, inst.variant(direction))?,
    };
    let build_ms = started.elapsed().as_secs_f64() * 1e3;
    let started = Instant::now();
    let solution = solver.solve(&model, cfg)?;
    let solve_ms = started.elapsed().as_secs_f64() * 1e3;
    let policy = if solution.status == SolveStatus::Optimal {
        Some(extract_policy(&model, &solution, inst)?)
    } else {
        None
    };
    Ok(SolvedBound {
        direction,
        model,
        solution,
        policy,
        build_ms,
        solve_ms,
    })
}

/// Both bound models for one instance, with the exact value of the policy
/// from the model that bounds the objective from the pessimistic side.
#[derive(Clone, Debug)]
pub struct Bounds {
    pub lower: SolvedBound,
    pub upper: SolvedBound,
    pub gap: Option<f64>,
    /// Exact evaluation of the policy prescribed by the pessimistic model
    /// (upper-bound cost model, lower-bound profit model).
    pub exact: Option<EvaluationReport>,
}

impl Bounds {
    pub fn status(&self) -> SolveStatus {
        match (self.lower.status(), self.upper.status()) {
            (SolveStatus::Optimal, SolveStatus::Optimal) => SolveStatus::Optimal,
            (SolveStatus::Infeasible, _) | (_, SolveStatus::Infeasible) => SolveStatus::Infeasible,
            _ => SolveStatus::Limit,
        }
    }

    pub fn pessimistic(&self) -> &SolvedBound {
        match self.lower.model.variant.map(|v| v.shortage) {
            Some(Shortage::LostSales) => &self.lower,
            _ => &self.upper,
        }
    }
}

pub fn solve_bounds(
    inst: &LotSizingInstance,
    table: &ConvolutionTable,
    lins: &LinearizationSet,
    options: BuildOptions,
    solver: &dyn MilpSolver,
    cfg: &SolverConfig,
) -> Result<Bounds> {
    let lower = solve_bound(inst, table, lins, BoundDirection::LowerBound, options, solver, cfg)?;
    let upper = solve_bound(inst, table, lins, BoundDirection::UpperBound, options, solver, cfg)?;
    let gap = match (lower.objective(), upper.objective()) {
        (Some(lb), Some(ub)) => Some(optimality_gap(lb, ub)?),
        _ => None,
    };
    let mut bounds = Bounds {
        lower,
        upper,
        gap,
        exact: None,
    };
    if let Some(policy) = &bounds.pessimistic().policy {
        bounds.exact = Some(exact_policy_cost(policy, inst)?);
    }
    Ok(bounds)
}
