//! Factorial test bed, heterogeneous demand processes and the
//! gap-versus-segments study.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluate::optimality_gap;
use crate::linloss::SearchConfig;
use crate::models::{
    BuildOptions, Costs, LotSizingInstance, MilpSolver, Service, ServiceMeasure, Shortage,
    SolveStatus, SolverConfig,
};
use crate::probdist::{DemandProcess, Distribution};
use crate::workflow::{convolution_table, linearization_set, solve_bounds, PartitionStrategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pattern {
    #[serde(rename = "LCY1")]
    Lcy1,
    #[serde(rename = "LCY2")]
    Lcy2,
    #[serde(rename = "SIN1")]
    Sin1,
    #[serde(rename = "SIN2")]
    Sin2,
    #[serde(rename = "STA")]
    Sta,
    #[serde(rename = "RAND")]
    Rand,
    #[serde(rename = "EMP1")]
    Emp1,
    #[serde(rename = "EMP2")]
    Emp2,
    #[serde(rename = "EMP3")]
    Emp3,
    #[serde(rename = "EMP4")]
    Emp4,
}

impl Pattern {
    pub const ALL: [Pattern; 10] = [
        Self::Lcy1,
        Self::Lcy2,
        Self::Sin1,
        Self::Sin2,
        Self::Sta,
        Self::Rand,
        Self::Emp1,
        Self::Emp2,
        Self::Emp3,
        Self::Emp4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lcy1 => "LCY1",
            Self::Lcy2 => "LCY2",
            Self::Sin1 => "SIN1",
            Self::Sin2 => "SIN2",
            Self::Sta => "STA",
            Self::Rand => "RAND",
            Self::Emp1 => "EMP1",
            Self::Emp2 => "EMP2",
            Self::Emp3 => "EMP3",
            Self::Emp4 => "EMP4",
        }
    }

    /// Mean demand per period around `base`. `seed` only affects RAND.
    pub fn means(self, n: usize, base: f64, seed: u64) -> Vec<f64> {
        let x = |t: usize| if n > 1 { (t - 1) as f64 / (n - 1) as f64 } else { 0.0 };
        let hump = |t: usize, peak: f64| {
            let x = x(t);
            let tri = if x <= peak { x / peak } else { (1.0 - x) / (1.0 - peak) };
            base * (0.4 + 1.2 * tri)
        };
        let wave = |t: usize, cycles: f64| {
            let phase = 2.0 * std::f64::consts::PI * cycles * (t - 1) as f64 / n as f64;
            base * (1.0 + 0.5 * phase.sin())
        };
        let stored = |v: &[f64; 15]| (1..=n).map(|t| base / 100.0 * v[(t - 1) % 15]).collect();
        let round = |v: f64| (v * 10.0).round() / 10.0;
        let raw: Vec<f64> = match self {
            Self::Lcy1 => (1..=n).map(|t| hump(t, 0.3)).collect(),
            Self::Lcy2 => (1..=n).map(|t| hump(t, 0.7)).collect(),
            Self::Sin1 => (1..=n).map(|t| wave(t, 1.0)).collect(),
            Self::Sin2 => (1..=n).map(|t| wave(t, 2.0)).collect(),
            Self::Sta => vec![base; n],
            Self::Rand => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| base * rng.random_range(0.5..1.5)).collect()
            }
            Self::Emp1 => stored(&EMP1),
            Self::Emp2 => stored(&EMP2),
            Self::Emp3 => stored(&EMP3),
            Self::Emp4 => stored(&EMP4),
        };
        raw.into_iter().map(round).collect()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown demand pattern {s:?}")))
    }
}

const EMP1: [f64; 15] = [
    47.0, 81.0, 93.0, 46.0, 57.0, 129.0, 168.0, 74.0, 63.0, 131.0, 112.0, 55.0, 89.0, 150.0, 62.0,
];
const EMP2: [f64; 15] = [
    142.0, 117.0, 95.0, 84.0, 61.0, 58.0, 72.0, 103.0, 131.0, 160.0, 149.0, 121.0, 88.0, 70.0, 66.0,
];
const EMP3: [f64; 15] = [
    80.0, 84.0, 77.0, 96.0, 103.0, 118.0, 110.0, 126.0, 139.0, 122.0, 108.0, 95.0, 101.0, 87.0, 92.0,
];
const EMP4: [f64; 15] = [
    35.0, 60.0, 120.0, 175.0, 140.0, 90.0, 52.0, 44.0, 78.0, 133.0, 162.0, 118.0, 70.0, 41.0, 57.0,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestBedConfig {
    pub patterns: Vec<Pattern>,
    pub horizon: usize,
    pub base_mean: f64,
    pub a_levels: Vec<f64>,
    pub v_levels: Vec<f64>,
    pub measure: ServiceMeasure,
    /// Service targets, or penalty costs `b` for the penalty measure.
    pub levels: Vec<f64>,
    pub cv_levels: Vec<f64>,
    pub shortage: Shortage,
    /// Selling price `s = v + margin` for lost sales.
    pub margin: f64,
    pub holding: f64,
    pub initial_inventory: f64,
    pub seed: u64,
}

impl Default for TestBedConfig {
    fn default() -> Self {
        Self {
            patterns: Pattern::ALL.to_vec(),
            horizon: 15,
            base_mean: 100.0,
            a_levels: vec![500.0, 1000.0, 2000.0],
            v_levels: vec![2.0, 5.0, 10.0],
            measure: ServiceMeasure::Alpha,
            levels: vec![0.8, 0.9, 0.95],
            cv_levels: vec![0.1, 0.2, 0.3],
            shortage: Shortage::Backorder,
            margin: 10.0,
            holding: 1.0,
            initial_inventory: 0.0,
            seed: 0,
        }
    }
}

impl TestBedConfig {
    /// Product of the factor cardinalities.
    pub fn size(&self) -> usize {
        self.patterns.len()
            * self.a_levels.len()
            * self.v_levels.len()
            * self.levels.len()
            * self.cv_levels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let lists: [(&str, usize); 5] = [
            ("patterns", self.patterns.len()),
            ("a_levels", self.a_levels.len()),
            ("v_levels", self.v_levels.len()),
            ("levels", self.levels.len()),
            ("cv_levels", self.cv_levels.len()),
        ];
        for (name, len) in lists {
            if len == 0 {
                return Err(Error::Config(format!("factor list {name} is empty")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if !(self.base_mean > 0.0) {
            return Err(Error::Config("base mean must be positive".into()));
        }
        if self.cv_levels.iter().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return Err(Error::Config("cv levels must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// An instance with its factor coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchInstance {
    pub id: String,
    pub pattern: Pattern,
    pub a: f64,
    pub v: f64,
    pub measure: ServiceMeasure,
    pub level: f64,
    pub cv: f64,
    pub shortage: Shortage,
    pub instance: LotSizingInstance,
}

/// Full factorial bed with normal demand `N(d̃_t, cv·d̃_t)`; `cv = 0` gives
/// known demand.
pub fn generate_testbed(cfg: &TestBedConfig) -> Result<Vec<BenchInstance>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.size());
    for (pi, &pattern) in cfg.patterns.iter().enumerate() {
        let means = pattern.means(cfg.horizon, cfg.base_mean, cfg.seed ^ ((pi as u64) << 32));
        for &a in &cfg.a_levels {
            for &v in &cfg.v_levels {
                for &level in &cfg.levels {
                    for &cv in &cfg.cv_levels {
                        let demand = DemandProcess::new(
                            means
                                .iter()
                                .map(|&m| {
                                    if cv == 0.0 {
                                        Distribution::point(m)
                                    } else {
                                        Distribution::normal(m, cv * m)
                                    }
                                })
                                .collect::<Result<_>>()?,
                        )?;
                        let (service, b) = match cfg.measure {
                            ServiceMeasure::Penalty => (Service::Penalty, level),
                            m => (Service::from_parts(m, Some(level))?, 0.0),
                        };
                        let costs = Costs {
                            a,
                            v,
                            h: cfg.holding,
                            b,
                            s: (cfg.shortage == Shortage::LostSales).then_some(v + cfg.margin),
                        };
                        let instance = LotSizingInstance::new(
                            costs,
                            cfg.initial_inventory,
                            service,
                            cfg.shortage,
                            demand,
                        )?;
                        out.push(BenchInstance {
                            id: format!("{pattern}-a{a}-v{v}-l{level}-c{cv}"),
                            pattern,
                            a,
                            v,
                            measure: cfg.measure,
                            level,
                            cv,
                            shortage: cfg.shortage,
                            instance,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Rotation normal (σ = 0.3·mean), Poisson, exponential, uniform on
/// `[0, 2·mean]`, starting with normal in period 1.
pub fn heterogeneous_process(means: &[f64]) -> Result<DemandProcess> {
    let periods = means
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::Domain(format!("period {} mean must be positive, got {m}", k + 1)));
            }
            match k % 4 {
                0 => Distribution::normal(m, 0.3 * m),
                1 => Distribution::poisson(m),
                2 => Distribution::exponential(m),
                _ => Distribution::uniform(0.0, 2.0 * m),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    DemandProcess::new(periods)
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub segments: Vec<usize>,
    pub strategies: Vec<PartitionStrategy>,
    pub solver: SolverConfig,
    pub build: BuildOptions,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            segments: vec![2, 3, 4, 7, 11],
            strategies: vec![PartitionStrategy::Uniform],
            solver: SolverConfig::default(),
            build: BuildOptions::default(),
        }
    }
}

impl StudyConfig {
    pub fn with_search(mut self, cfg: SearchConfig) -> Self {
        self.strategies.push(PartitionStrategy::Search(cfg));
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub instance_id: String,
    pub pattern: String,
    pub a: f64,
    pub v: f64,
    pub measure: String,
    pub level: f64,
    pub cv: f64,
    pub shortage: String,
    #[serde(rename = "W")]
    pub w: usize,
    pub partition_strategy: String,
    pub lb_objective: Option<f64>,
    pub ub_objective: Option<f64>,
    pub gap: Option<f64>,
    pub exact_cost_of_ub_policy: Option<f64>,
    pub build_ms: f64,
    pub solve_ms: f64,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    #[serde(rename = "W")]
    pub w: usize,
    pub partition_strategy: String,
    pub rows: usize,
    pub optimal_rows: usize,
    pub q1_gap: Option<f64>,
    pub median_gap: Option<f64>,
    pub q3_gap: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct GapStudy {
    pub rows: Vec<GapRow>,
    pub summary: Vec<GapSummary>,
}

/// Solves the lower and upper model for every (instance, W, strategy) cell.
/// Cells run in parallel; rows come back in canonical cell order.
pub fn run_gap_study(
    instances: &[BenchInstance],
    cfg: &StudyConfig,
    solver: &dyn MilpSolver,
) -> Result<GapStudy> {
    if instances.is_empty() || cfg.segments.is_empty() || cfg.strategies.is_empty() {
        return Err(Error::Config(
            "gap study needs instances, segment counts and partition strategies".into(),
        ));
    }
    let tables = instances
        .par_iter()
        .map(|b| convolution_table(&b.instance))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize, usize)> = (0..instances.len())
        .flat_map(|i| {
            (0..cfg.segments.len())
                .flat_map(move |w| (0..cfg.strategies.len()).map(move |s| (i, w, s)))
        })
        .collect();
    let mut rows = cells
        .par_iter()
        .map(|&(i, wi, si)| {
            let b = &instances[i];
            let w = cfg.segments[wi];
            let strategy = &cfg.strategies[si];
            let mut row = GapRow {
                instance_id: b.id.clone(),
                pattern: b.pattern.to_string(),
                a: b.a,
                v: b.v,
                measure: b.measure.to_string(),
                level: b.level,
                cv: b.cv,
                shortage: b.shortage.to_string(),
                w,
                partition_strategy: strategy.name().to_string(),
                lb_objective: None,
                ub_objective: None,
                gap: None,
                exact_cost_of_ub_policy: None,
                build_ms: 0.0,
                solve_ms: 0.0,
                status: String::new(),
            };
            let outcome = linearization_set(&tables[i], strategy, w).and_then(|lins| {
                solve_bounds(&b.instance, &tables[i], &lins, cfg.build, solver, &cfg.solver)
            });
            match outcome {
                Ok(bounds) => {
                    row.lb_objective = bounds.lower.objective();
                    row.ub_objective = bounds.upper.objective();
                    row.gap = bounds.gap;
                    row.exact_cost_of_ub_policy = bounds.exact.as_ref().map(|r| r.value);
                    row.build_ms = bounds.lower.build_ms + bounds.upper.build_ms;
                    row.solve_ms = bounds.lower.solve_ms + bounds.upper.solve_ms;
                    row.status = bounds.status().to_string();
                }
                Err(e) => row.status = format!("error: {e}"),
            }
            ((i, wi, si), row)
        })
        .collect::<Vec<_>>();
    rows.sort_by_key(|(k, _)| *k);
    let rows: Vec<GapRow> = rows.into_iter().map(|(_, r)| r).collect();
    let summary = summarize(&rows, cfg);
    Ok(GapStudy { rows, summary })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

fn summarize(rows: &[GapRow], cfg: &StudyConfig) -> Vec<GapSummary> {
    let mut out = Vec::new();
    for strategy in &cfg.strategies {
        for &w in &cfg.segments {
            let cell: Vec<&GapRow> = rows
                .iter()
                .filter(|r| r.w == w && r.partition_strategy == strategy.name())
                .collect();
            let mut gaps: Vec<f64> = cell
                .iter()
                .filter(|r| r.status == SolveStatus::Optimal.as_str())
                .filter_map(|r| r.gap)
                .collect();
            gaps.sort_by(f64::total_cmp);
            out.push(GapSummary {
                w,
                partition_strategy: strategy.name().to_string(),
                rows: cell.len(),
                optimal_rows: gaps.len(),
                q1_gap: quantile_sorted(&gaps, 0.25),
                median_gap: quantile_sorted(&gaps, 0.5),
                q3_gap: quantile_sorted(&gaps, 0.75),
            });
        }
    }
    out
}

pub fn write_rows_csv<W: Write>(rows: &[GapRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(summary: &[GapSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in summary {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Recomputes the gap column from the row's own objectives.
pub fn row_gap(row: &GapRow) -> Option<Result<f64>> {
    match (row.lb_objective, row.ub_objective) {
        (Some(lb), Some(ub)) => Some(optimality_gap(lb, ub)),
        _ => None,
    }
}
