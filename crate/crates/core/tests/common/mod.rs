#![allow(dead_code)]

//! Reference computations that share no code with the library.

use stodyn::linloss::{LinearizationSet, Partition};
use stodyn::models::{
    BoundDirection, Costs, LotSizingInstance, ModelInputs, Service, Shortage,
};
use stodyn::probdist::{ConvolutionConfig, ConvolutionTable, DemandProcess, Distribution};

/// Closed-form laws re-declared for the quadrature oracle.
#[derive(Clone, Copy, Debug)]
pub enum RefLaw {
    Normal(f64, f64),
    Poisson(f64),
    Exponential(f64),
    Uniform(f64, f64),
}

impl RefLaw {
    pub fn to_distribution(self) -> Distribution {
        match self {
            Self::Normal(m, s) => Distribution::normal(m, s).unwrap(),
            Self::Poisson(m) => Distribution::poisson(m).unwrap(),
            Self::Exponential(m) => Distribution::exponential(m).unwrap(),
            Self::Uniform(a, b) => Distribution::uniform(a, b).unwrap(),
        }
    }

    fn pdf(self, x: f64) -> f64 {
        match self {
            Self::Normal(m, s) => {
                let z = (x - m) / s;
                (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
            }
            Self::Exponential(m) => {
                if x < 0.0 {
                    0.0
                } else {
                    (-x / m).exp() / m
                }
            }
            Self::Uniform(a, b) => {
                if x < a || x > b {
                    0.0
                } else {
                    1.0 / (b - a)
                }
            }
            Self::Poisson(_) => unreachable!(),
        }
    }

    fn support(self) -> (f64, f64) {
        match self {
            Self::Normal(m, s) => (m - 40.0 * s, m + 40.0 * s),
            Self::Exponential(m) => (0.0, 80.0 * m),
            Self::Uniform(a, b) => (a, b),
            Self::Poisson(_) => unreachable!(),
        }
    }

    fn poisson_pmfs(mean: f64) -> Vec<f64> {
        let kmax = (mean + 40.0 * mean.sqrt() + 40.0) as usize;
        let mut out = Vec::with_capacity(kmax + 1);
        // log-space start avoids underflow for large means
        let mut logp = -mean;
        for k in 0..=kmax {
            if k > 0 {
                logp += mean.ln() - (k as f64).ln();
            }
            out.push(logp.exp());
        }
        out
    }

    /// `E[max(x − ω, 0)]` by quadrature of the density or summation of the pmf.
    pub fn complementary_loss(self, x: f64) -> f64 {
        match self {
            Self::Poisson(m) => Self::poisson_pmfs(m)
                .iter()
                .enumerate()
                .map(|(k, p)| p * (x - k as f64).max(0.0))
                .sum(),
            _ => {
                let (lo, hi) = self.support();
                if x <= lo {
                    return 0.0;
                }
                let upto = x.min(hi);
                integrate(|w| (x - w) * self.pdf(w), lo, upto)
                    + if x > hi { (x - hi) * integrate(|w| self.pdf(w), lo, hi) } else { 0.0 }
            }
        }
    }

    pub fn mean(self) -> f64 {
        match self {
            Self::Normal(m, _) | Self::Poisson(m) | Self::Exponential(m) => m,
            Self::Uniform(a, b) => 0.5 * (a + b),
        }
    }

    /// `E[max(ω − x, 0)]` through the loss identity checked independently.
    pub fn loss(self, x: f64) -> f64 {
        match self {
            Self::Poisson(m) => Self::poisson_pmfs(m)
                .iter()
                .enumerate()
                .map(|(k, p)| p * (k as f64 - x).max(0.0))
                .sum(),
            _ => {
                let (lo, hi) = self.support();
                if x >= hi {
                    return 0.0;
                }
                let from = x.max(lo);
                integrate(|w| (w - x) * self.pdf(w), from, hi)
                    + if x < lo { (lo - x) * integrate(|w| self.pdf(w), lo, hi) } else { 0.0 }
            }
        }
    }
}

/// Composite Gauss-Legendre on many panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let panels = 4000;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            s += w * f(mid + half * x);
        }
        total += s * half;
    }
    total
}

/// Wagner-Whitin dynamic program with known demand: minimal
/// `a·orders + h·Σ end-of-period stock + v·Σ orders`, zero initial stock.
/// Returns the cost and the order periods with their order-up-to levels.
pub fn wagner_whitin(d: &[f64], a: f64, h: f64, v: f64) -> (f64, Vec<(usize, f64)>) {
    let n = d.len();
    let mut best = vec![f64::INFINITY; n + 1];
    let mut from = vec![0usize; n + 1];
    best[0] = 0.0;
    for t in 1..=n {
        for j in 1..=t {
            // one order at j covers periods j..=t
            let mut hold = 0.0;
            for k in j..=t {
                let left: f64 = d[k..t].iter().sum();
                hold += h * left;
            }
            let cost = best[j - 1] + a + hold;
            if cost < best[t] - 1e-12 {
                best[t] = cost;
                from[t] = j;
            }
        }
    }
    let mut plan = Vec::new();
    let mut t = n;
    while t > 0 {
        let j = from[t];
        plan.push((j, d[j - 1..t].iter().sum()));
        t = j - 1;
    }
    plan.reverse();
    (best[n] + v * d.iter().sum::<f64>(), plan)
}

/// Golden-section maximum of a unimodal function.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

pub fn normal_process(means: &[f64], cv: f64) -> DemandProcess {
    DemandProcess::new(
        means
            .iter()
            .map(|&m| Distribution::normal(m, cv * m).unwrap())
            .collect(),
    )
    .unwrap()
}

pub fn point_process(means: &[f64]) -> DemandProcess {
    DemandProcess::new(means.iter().map(|&m| Distribution::point(m).unwrap()).collect()).unwrap()
}

pub fn costs(a: f64, v: f64, h: f64) -> Costs {
    Costs { a, v, h, b: 0.0, s: None }
}

pub fn instance(
    costs: Costs,
    service: Service,
    shortage: Shortage,
    demand: DemandProcess,
) -> LotSizingInstance {
    LotSizingInstance::new(costs, 0.0, service, shortage, demand).unwrap()
}

/// Convolutions and uniform-partition linearizations for an instance.
pub struct Prepared {
    pub table: ConvolutionTable,
    pub lins: LinearizationSet,
}

impl Prepared {
    pub fn new(inst: &LotSizingInstance, w: usize) -> Self {
        let table = ConvolutionTable::build(&inst.demand, &ConvolutionConfig::default()).unwrap();
        let lins = LinearizationSet::build(&table, &Partition::uniform(w).unwrap()).unwrap();
        Self { table, lins }
    }

    pub fn inputs<'a>(&'a self, inst: &'a LotSizingInstance) -> ModelInputs<'a> {
        ModelInputs::new(inst, &self.table, &self.lins)
    }
}

pub const DIRECTIONS: [BoundDirection; 2] = [BoundDirection::LowerBound, BoundDirection::UpperBound];

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
