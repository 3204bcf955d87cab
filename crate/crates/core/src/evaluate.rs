//! Exact and simulated evaluation of static-dynamic policies.

use std::fmt::Write as _;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{LotSizingInstance, PenaltyBasis, Policy, Service, ServiceMeasure, Shortage};
use crate::probdist::{convolve, Distribution};

const SERVICE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Cost,
    Profit,
}

impl ObjectiveKind {
    pub fn of(inst: &LotSizingInstance) -> Self {
        match inst.shortage {
            Shortage::Backorder => Self::Cost,
            Shortage::LostSales => Self::Profit,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Cost => "cost",
            Self::Profit => "profit",
        }
    }
}

/// Fill rate achieved over one replenishment cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleService {
    pub start: usize,
    pub end: usize,
    /// `1 − E[B_end] / d̃_cycle`; NaN for a cycle without expected demand.
    pub beta_cyc: f64,
}

/// Standard errors matching the fields of an [`EvaluationReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    pub value: f64,
    pub orders: Vec<f64>,
    pub on_hand: Vec<f64>,
    pub backorders: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta_cyc: Vec<f64>,
    pub beta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub kind: ObjectiveKind,
    /// Expected total cost, or expected total profit.
    pub value: f64,
    /// Expected order quantity per period (zero off reviews).
    pub orders: Vec<f64>,
    /// `E[max(I_t, 0)]`.
    pub on_hand: Vec<f64>,
    /// `E[max(−I_t, 0)]`; under lost sales the demand lost so far in the cycle.
    pub backorders: Vec<f64>,
    /// Probability of no stockout in each period.
    pub alpha: Vec<f64>,
    pub cycles: Vec<CycleService>,
    /// Horizon fill rate `1 − Σ E[B_end] / Σ d̃`.
    pub beta: f64,
    pub replications: Option<usize>,
    pub standard_errors: Option<StandardErrors>,
}

impl EvaluationReport {
    pub fn expected_cost(&self) -> Option<f64> {
        (self.kind == ObjectiveKind::Cost).then_some(self.value)
    }

    pub fn expected_profit(&self) -> Option<f64> {
        (self.kind == ObjectiveKind::Profit).then_some(self.value)
    }

    pub fn min_alpha(&self) -> f64 {
        self.alpha.iter().copied().fold(1.0, f64::min)
    }

    fn value_key(&self) -> &'static str {
        match self.kind {
            ObjectiveKind::Cost => "expected_cost",
            ObjectiveKind::Profit => "expected_profit",
        }
    }

    /// Flat `key = value` block, one entry per line.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.flat_fields() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn csv_header(&self) -> Vec<String> {
        self.flat_fields().into_iter().map(|(k, _)| k).collect()
    }

    pub fn csv_row(&self) -> Vec<String> {
        self.flat_fields().into_iter().map(|(_, v)| v).collect()
    }

    fn flat_fields(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let se = self.standard_errors.as_ref();
        let key = self.value_key();
        out.push((key.to_string(), fmt_num(self.value)));
        if let Some(se) = se {
            out.push((format!("{key}_se"), fmt_num(se.value)));
        }
        if let Some(r) = self.replications {
            out.push(("replications".into(), r.to_string()));
        }
        out.push(("beta".into(), fmt_num(self.beta)));
        if let Some(se) = se {
            out.push(("beta_se".into(), fmt_num(se.beta)));
        }
        let series: [(&str, &Vec<f64>, Option<&Vec<f64>>); 4] = [
            ("order", &self.orders, se.map(|s| &s.orders)),
            ("on_hand", &self.on_hand, se.map(|s| &s.on_hand)),
            ("backorders", &self.backorders, se.map(|s| &s.backorders)),
            ("alpha", &self.alpha, se.map(|s| &s.alpha)),
        ];
        for (name, xs, errs) in series {
            for (t, x) in xs.iter().enumerate() {
                out.push((format!("{name}_{}", t + 1), fmt_num(*x)));
                if let Some(e) = errs {
                    out.push((format!("{name}_{}_se", t + 1), fmt_num(e[t])));
                }
            }
        }
        for (k, c) in self.cycles.iter().enumerate() {
            out.push((format!("beta_cyc_{}_{}", c.start, c.end), fmt_num(c.beta_cyc)));
            if let Some(se) = se {
                out.push((format!("beta_cyc_{}_{}_se", c.start, c.end), fmt_num(se.beta_cyc[k])));
            }
        }
        out
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}

/// A replenishment cycle and the level it starts from.
#[derive(Clone, Copy, Debug)]
struct Cycle {
    start: usize,
    end: usize,
    level: f64,
    review: bool,
}

fn cycles_of(policy: &Policy, inst: &LotSizingInstance) -> Result<Vec<Cycle>> {
    let n = inst.horizon();
    policy.check_horizon(n)?;
    let i0 = inst.initial_inventory;
    for (&t, &s) in policy.levels() {
        let negative_ok = inst.shortage == Shortage::Backorder && i0 < 0.0;
        if s < 0.0 && !negative_ok {
            return Err(Error::Policy(format!(
                "order-up-to level {s} at period {t} is negative"
            )));
        }
    }
    let reviews = policy.reviews();
    let mut out = Vec::new();
    if reviews.first() != Some(&1) {
        out.push(Cycle {
            start: 1,
            end: 0,
            level: i0,
            review: false,
        });
    }
    for &t in &reviews {
        out.push(Cycle {
            start: t,
            end: 0,
            level: policy.level(t).unwrap(),
            review: true,
        });
    }
    for k in 0..out.len() {
        out[k].end = out.get(k + 1).map_or(n, |c| c.start - 1);
    }
    Ok(out)
}

fn check_initial_service(inst: &LotSizingInstance, cycle: &Cycle, alpha: &[f64]) -> Result<()> {
    if let Service::Alpha(target) = inst.service {
        if !cycle.review {
            for t in cycle.start..=cycle.end {
                if alpha[t - 1] < target - SERVICE_TOLERANCE {
                    return Err(Error::ServiceInfeasible(format!(
                        "initial inventory {} meets period {t} with probability {:.6} < {target}",
                        inst.initial_inventory,
                        alpha[t - 1]
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Exact expected cost (backorders) or profit (lost sales) of `policy`,
/// with per-period expectations from the first-order loss functions of the
/// cycle demand sums.
pub fn exact_policy_cost(policy: &Policy, inst: &LotSizingInstance) -> Result<EvaluationReport> {
    let n = inst.horizon();
    let process = &inst.demand;
    let means = inst.means();
    let cycles = cycles_of(policy, inst)?;
    let lost = inst.shortage == Shortage::LostSales;
    let mut orders = vec![0.0; n];
    let mut on_hand = vec![0.0; n];
    let mut backorders = vec![0.0; n];
    let mut alpha = vec![0.0; n];
    let mut end_short = Vec::with_capacity(cycles.len());
    let mut prev: Option<&Cycle> = None;
    for c in &cycles {
        for t in c.start..=c.end {
            let law = convolve(process, c.start, t)?.law;
            on_hand[t - 1] = law.complementary_loss(c.level);
            backorders[t - 1] = law.loss(c.level);
            alpha[t - 1] = law.cdf(c.level).clamp(0.0, 1.0);
        }
        check_initial_service(inst, c, &alpha)?;
        end_short.push(backorders[c.end - 1]);
        if c.review {
            let carried = match prev {
                None => {
                    if lost {
                        inst.initial_inventory.max(0.0)
                    } else {
                        inst.initial_inventory
                    }
                }
                Some(p) if lost => on_hand[p.end - 1],
                Some(p) => p.level - process.range_mean(p.start, p.end),
            };
            orders[c.start - 1] = c.level - carried;
        }
        prev = Some(c);
    }
    let reviews = policy.reviews().len() as f64;
    let value = objective(inst, reviews, &orders, &on_hand, &backorders, &end_short);
    let (cycle_service, beta) = fill_rates(&cycles, &means, &end_short);
    Ok(EvaluationReport {
        kind: ObjectiveKind::of(inst),
        value,
        orders,
        on_hand,
        backorders,
        alpha,
        cycles: cycle_service,
        beta,
        replications: None,
        standard_errors: None,
    })
}

fn objective(
    inst: &LotSizingInstance,
    reviews: f64,
    orders: &[f64],
    on_hand: &[f64],
    backorders: &[f64],
    end_short: &[f64],
) -> f64 {
    let c = inst.costs;
    let penalty = inst.service.measure() == ServiceMeasure::Penalty;
    let sum = |xs: &[f64]| xs.iter().sum::<f64>();
    match inst.shortage {
        Shortage::Backorder => {
            let mut cost = c.a * reviews + c.v * sum(orders) + c.h * sum(on_hand);
            if penalty {
                cost += c.b * sum(backorders);
            }
            cost
        }
        Shortage::LostSales => {
            let s = c.s.unwrap_or(0.0);
            let mut profit = s * inst.initial_inventory + inst.margin() * sum(orders)
                - c.a * reviews
                - c.h * sum(on_hand)
                - s * on_hand.last().copied().unwrap_or(0.0);
            if penalty {
                profit -= c.b
                    * match inst.penalty_basis {
                        PenaltyBasis::PerPeriod => sum(backorders),
                        PenaltyBasis::PerUnitShort => sum(end_short),
                    };
            }
            profit
        }
    }
}

fn fill_rates(cycles: &[Cycle], means: &[f64], end_short: &[f64]) -> (Vec<CycleService>, f64) {
    let mut out = Vec::with_capacity(cycles.len());
    for (c, &b) in cycles.iter().zip(end_short) {
        let demand: f64 = means[c.start - 1..c.end].iter().sum();
        out.push(CycleService {
            start: c.start,
            end: c.end,
            beta_cyc: if demand > 0.0 { (1.0 - b / demand).clamp(0.0, 1.0) } else { f64::NAN },
        });
    }
    let total: f64 = means.iter().sum();
    let beta = if total > 0.0 {
        (1.0 - end_short.iter().sum::<f64>() / total).clamp(0.0, 1.0)
    } else {
        f64::NAN
    };
    (out, beta)
}

/// Running mean and sum of squared deviations.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(a: Moments, b: Moments) -> Moments {
        if a.n == 0.0 {
            return b;
        }
        if b.n == 0.0 {
            return a;
        }
        let n = a.n + b.n;
        let d = b.mean - a.mean;
        Moments {
            n,
            mean: a.mean + d * b.n / n,
            m2: a.m2 + b.m2 + d * d * a.n * b.n / n,
        }
    }

    fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            return f64::NAN;
        }
        (self.m2 / (self.n - 1.0) / self.n).max(0.0).sqrt()
    }
}

fn merge_pairwise(parts: &[Vec<Moments>]) -> Vec<Moments> {
    match parts.len() {
        0 => Vec::new(),
        1 => parts[0].clone(),
        len => {
            let (l, r) = parts.split_at(len / 2);
            let (l, r) = (merge_pairwise(l), merge_pairwise(r));
            l.into_iter().zip(r).map(|(a, b)| Moments::merge(a, b)).collect()
        }
    }
}

const CHUNK: usize = 1024;

fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Monte Carlo replay of the policy. Replication `k` draws from ChaCha8
/// stream `k` of `seed`, so results do not depend on the thread count.
pub fn simulate_policy(
    policy: &Policy,
    inst: &LotSizingInstance,
    reps: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    if reps < 2 {
        return Err(Error::Config(format!("simulation needs at least 2 replications, got {reps}")));
    }
    let n = inst.horizon();
    let cycles = cycles_of(policy, inst)?;
    let periods: Vec<Distribution> = inst.demand.periods().to_vec();
    let lost = inst.shortage == Shortage::LostSales;
    let reviews = policy.reviews().len() as f64;
    let nc = cycles.len();
    // field layout: value, orders, on_hand, backorders, alpha, cycle ends, total end
    let width = 1 + 4 * n + nc + 1;
    let mut cycle_of = vec![0usize; n];
    for (k, c) in cycles.iter().enumerate() {
        for t in c.start..=c.end {
            cycle_of[t - 1] = k;
        }
    }

    let run = |rep: usize, row: &mut [f64]| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep as u64);
        let (q, rest) = row[1..].split_at_mut(n);
        let (oh, rest) = rest.split_at_mut(n);
        let (bo, rest) = rest.split_at_mut(n);
        let (al, ends) = rest.split_at_mut(n);
        q.fill(0.0);
        let mut level = inst.initial_inventory;
        let mut carried = if lost { level.max(0.0) } else { level };
        for t in 1..=n {
            let c = &cycles[cycle_of[t - 1]];
            if c.review && c.start == t {
                q[t - 1] = c.level - carried;
                level = c.level;
            }
            level -= periods[t - 1].sample_from_uniform(open_unit(&mut rng));
            oh[t - 1] = level.max(0.0);
            bo[t - 1] = (-level).max(0.0);
            al[t - 1] = if level >= 0.0 { 1.0 } else { 0.0 };
            carried = if lost { oh[t - 1] } else { level };
            if t == c.end {
                ends[cycle_of[t - 1]] = bo[t - 1];
            }
        }
        ends[nc] = ends[..nc].iter().sum();
        let end_short = ends[..nc].to_vec();
        let value = objective(
            inst,
            reviews,
            &row[1..=n],
            &row[n + 1..=2 * n],
            &row[2 * n + 1..=3 * n],
            &end_short,
        );
        row[0] = value;
    };

    let chunks = reps.div_ceil(CHUNK);
    let parts: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut acc = vec![Moments::default(); width];
            let mut row = vec![0.0; width];
            for rep in k * CHUNK..((k + 1) * CHUNK).min(reps) {
                run(rep, &mut row);
                for (m, &x) in acc.iter_mut().zip(&row) {
                    m.push(x);
                }
            }
            acc
        })
        .collect();
    let stats = merge_pairwise(&parts);

    let mean = |r: std::ops::Range<usize>| stats[r].iter().map(|m| m.mean).collect::<Vec<_>>();
    let se = |r: std::ops::Range<usize>| stats[r].iter().map(|m| m.std_error()).collect::<Vec<_>>();
    let means = inst.means();
    let ends = mean(1 + 4 * n..1 + 4 * n + nc);
    let (cycle_service, _) = fill_rates(&cycles, &means, &ends);
    let total_demand: f64 = means.iter().sum();
    let total_end = stats[width - 1];
    let beta = if total_demand > 0.0 {
        (1.0 - total_end.mean / total_demand).clamp(0.0, 1.0)
    } else {
        f64::NAN
    };
    let beta_cyc_se = cycles
        .iter()
        .zip(&stats[1 + 4 * n..1 + 4 * n + nc])
        .map(|(c, m)| {
            let d: f64 = means[c.start - 1..c.end].iter().sum();
            if d > 0.0 { m.std_error() / d } else { f64::NAN }
        })
        .collect();
    Ok(EvaluationReport {
        kind: ObjectiveKind::of(inst),
        value: stats[0].mean,
        orders: mean(1..1 + n),
        on_hand: mean(1 + n..1 + 2 * n),
        backorders: mean(1 + 2 * n..1 + 3 * n),
        alpha: mean(1 + 3 * n..1 + 4 * n),
        cycles: cycle_service,
        beta,
        replications: Some(reps),
        standard_errors: Some(StandardErrors {
            value: stats[0].std_error(),
            orders: se(1..1 + n),
            on_hand: se(1 + n..1 + 2 * n),
            backorders: se(1 + 2 * n..1 + 3 * n),
            alpha: se(1 + 3 * n..1 + 4 * n),
            beta_cyc: beta_cyc_se,
            beta: if total_demand > 0.0 { total_end.std_error() / total_demand } else { f64::NAN },
        }),
    })
}

/// Relative gap `(hi − lo) / |hi|` between a lower and an upper objective
/// bound, zero when both vanish.
pub fn optimality_gap(lb: f64, ub: f64) -> Result<f64> {
    if !(lb.is_finite() && ub.is_finite()) {
        return Err(Error::Consistency(format!("bounds must be finite: lb {lb}, ub {ub}")));
    }
    let slack = 1e-9 * ub.abs().max(1.0);
    if lb > ub + slack {
        return Err(Error::Consistency(format!("lower bound {lb} exceeds upper bound {ub}")));
    }
    if lb >= ub {
        return Ok(0.0);
    }
    Ok((ub - lb) / ub.abs())
}
