mod build;
mod instance;
mod milp;
mod oracle;
mod policy;
mod solver;

pub use build::{
    build_alpha_model, build_beta_cyc_model, build_beta_model, build_lost_sales_model,
    build_model, build_penalty_model, BuildOptions, ModelInputs, OrderLink,
};
pub use instance::{
    BoundDirection, Costs, LotSizingInstance, ModelVariant, PenaltyBasis, Service, ServiceMeasure,
    Shortage,
};
pub use milp::{MilpModel, Row, Sense, VarLayout, Variable};
pub use oracle::{enumerate_schedules_oracle, fix_schedule, ORACLE_MAX_HORIZON};
pub use policy::{extract_policy, Policy};
pub use solver::{
    solve, solver_by_name, solver_from_env, HighsSolver, MicroLpSolver, MilpSolver, SolveStatus,
    SolverConfig, SolverSolution, DEFAULT_MIP_REL_GAP, DEFAULT_TIME_LIMIT, FEASIBILITY_TOLERANCE,
};
