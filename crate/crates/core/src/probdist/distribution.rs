use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::special::{
    poisson_cdf, poisson_sf_inclusive, std_normal_cdf, std_normal_pdf, std_normal_quantile,
    std_normal_sf,
};
use crate::error::{Error, Result};

/// Tolerance on the total mass of a grid law.
pub const GRID_MASS_TOLERANCE: f64 = 1e-12;

/// Slack used when comparing probabilities against cumulative sums of a
/// discrete law.
const CUM_SLACK: f64 = 1e-12;

/// Serialized form of a [`Distribution`], e.g.
/// `{"kind":"normal","mean":100,"stdev":30}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Normal { mean: f64, stdev: f64 },
    Poisson { mean: f64 },
    Exponential { mean: f64 },
    Uniform { lower: f64, upper: f64 },
    Grid { points: Vec<f64>, probs: Vec<f64> },
}

/// The law behind a [`Distribution`].
#[derive(Clone, Debug)]
pub enum Law {
    Normal { mean: f64, stdev: f64 },
    Poisson { mean: f64 },
    Exponential { mean: f64 },
    Uniform { lower: f64, upper: f64 },
    Grid(Arc<GridLaw>),
}

/// Finite discrete law with precomputed cumulative tables.
#[derive(Debug)]
pub struct GridLaw {
    points: Vec<f64>,
    probs: Vec<f64>,
    cum: Vec<f64>,
    cum_moment: Vec<f64>,
    tail: Vec<f64>,
    tail_moment: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl GridLaw {
    pub fn new(points: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != probs.len() {
            return Err(Error::Domain(format!(
                "grid law needs matching nonempty point/probability lists (got {} and {})",
                points.len(),
                probs.len()
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("grid support points must be finite".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Domain("grid probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > GRID_MASS_TOLERANCE {
            return Err(Error::Domain(format!(
                "grid probabilities sum to {total}, expected 1"
            )));
        }

        let mut pairs: Vec<(f64, f64)> = points.into_iter().zip(probs).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (x, p) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += p,
                _ => merged.push((x, p)),
            }
        }
        let (points, probs): (Vec<f64>, Vec<f64>) = merged.into_iter().unzip();
        Ok(Self::from_sorted(points, probs))
    }

    fn from_sorted(points: Vec<f64>, probs: Vec<f64>) -> Self {
        let n = points.len();
        let mut cum = Vec::with_capacity(n);
        let mut cum_moment = Vec::with_capacity(n);
        let (mut c, mut m) = (0.0, 0.0);
        for (x, p) in points.iter().zip(&probs) {
            c += p;
            m += p * x;
            cum.push(c);
            cum_moment.push(m);
        }
        let mut tail = vec![0.0; n + 1];
        let mut tail_moment = vec![0.0; n + 1];
        for i in (0..n).rev() {
            tail[i] = tail[i + 1] + probs[i];
            tail_moment[i] = tail_moment[i + 1] + probs[i] * points[i];
        }
        let mean = cum_moment[n - 1];
        let variance = points
            .iter()
            .zip(&probs)
            .map(|(x, p)| p * (x - mean) * (x - mean))
            .sum();
        Self {
            points,
            probs,
            cum,
            cum_moment,
            tail,
            tail_moment,
            mean,
            variance,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of support points `<= x` (or `< x` when not inclusive).
    fn count_below(&self, x: f64, inclusive: bool) -> usize {
        if inclusive {
            self.points.partition_point(|&p| p <= x)
        } else {
            self.points.partition_point(|&p| p < x)
        }
    }

    fn lower_mass(&self, x: f64, inclusive: bool) -> f64 {
        match self.count_below(x, inclusive) {
            0 => 0.0,
            k => self.cum[k - 1],
        }
    }

    fn lower_moment(&self, x: f64, inclusive: bool) -> f64 {
        match self.count_below(x, inclusive) {
            0 => 0.0,
            k => self.cum_moment[k - 1],
        }
    }

    fn upper_mass(&self, x: f64, inclusive: bool) -> f64 {
        self.tail[self.count_below(x, !inclusive)]
    }

    fn upper_moment(&self, x: f64, inclusive: bool) -> f64 {
        self.tail_moment[self.count_below(x, !inclusive)]
    }

    fn quantile_index(&self, p: f64) -> usize {
        let i = self.cum.partition_point(|&c| c < p - CUM_SLACK);
        i.min(self.points.len() - 1)
    }

    /// `∫_0^u F⁻¹(v) dv`.
    fn mass_moment_below(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return self.mean;
        }
        let i = self.quantile_index(u);
        let (c_prev, m_prev) = if i == 0 {
            (0.0, 0.0)
        } else {
            (self.cum[i - 1], self.cum_moment[i - 1])
        };
        m_prev + self.points[i] * (u - c_prev).clamp(0.0, self.probs[i])
    }

    /// `∫_u^1 F⁻¹(v) dv`.
    fn mass_moment_above(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.mean;
        }
        if u >= 1.0 {
            return 0.0;
        }
        let i = self.quantile_index(u);
        let upto = self.cum[i];
        self.tail_moment[i + 1] + self.points[i] * (upto - u).clamp(0.0, self.probs[i])
    }
}

/// A single-period demand law.
#[derive(Clone, Debug)]
pub struct Distribution {
    law: Law,
}

/// A value-space region `[lower, upper)` or `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub upper_closed: bool,
}

impl Interval {
    /// Half-open region `[lower, upper)`.
    pub fn half_open(lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            upper_closed: false,
        }
    }

    pub fn closed(lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            upper_closed: true,
        }
    }
}

impl Distribution {
    pub fn normal(mean: f64, stdev: f64) -> Result<Self> {
        if !mean.is_finite() || !stdev.is_finite() || stdev <= 0.0 {
            return Err(Error::Domain(format!(
                "normal law needs finite mean and stdev > 0 (got mean {mean}, stdev {stdev})"
            )));
        }
        Ok(Self {
            law: Law::Normal { mean, stdev },
        })
    }

    pub fn poisson(mean: f64) -> Result<Self> {
        if !mean.is_finite() || mean <= 0.0 {
            return Err(Error::Domain(format!("poisson mean must be > 0 (got {mean})")));
        }
        Ok(Self {
            law: Law::Poisson { mean },
        })
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        if !mean.is_finite() || mean <= 0.0 {
            return Err(Error::Domain(format!(
                "exponential mean must be > 0 (got {mean})"
            )));
        }
        Ok(Self {
            law: Law::Exponential { mean },
        })
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() || lower >= upper {
            return Err(Error::Domain(format!(
                "uniform law needs lower < upper (got {lower}, {upper})"
            )));
        }
        Ok(Self {
            law: Law::Uniform { lower, upper },
        })
    }

    pub fn grid(points: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        Ok(Self::from_grid(GridLaw::new(points, probs)?))
    }

    pub(crate) fn from_grid(grid: GridLaw) -> Self {
        Self {
            law: Law::Grid(Arc::new(grid)),
        }
    }

    /// Degenerate law concentrated on `value`.
    pub fn point(value: f64) -> Result<Self> {
        Self::grid(vec![value], vec![1.0])
    }

    pub fn law(&self) -> &Law {
        &self.law
    }

    pub fn spec(&self) -> DistributionSpec {
        match &self.law {
            Law::Normal { mean, stdev } => DistributionSpec::Normal {
                mean: *mean,
                stdev: *stdev,
            },
            Law::Poisson { mean } => DistributionSpec::Poisson { mean: *mean },
            Law::Exponential { mean } => DistributionSpec::Exponential { mean: *mean },
            Law::Uniform { lower, upper } => DistributionSpec::Uniform {
                lower: *lower,
                upper: *upper,
            },
            Law::Grid(g) => DistributionSpec::Grid {
                points: g.points.clone(),
                probs: g.probs.clone(),
            },
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.law {
            Law::Normal { .. } => "normal",
            Law::Poisson { .. } => "poisson",
            Law::Exponential { .. } => "exponential",
            Law::Uniform { .. } => "uniform",
            Law::Grid(_) => "grid",
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.law, Law::Poisson { .. } | Law::Grid(_))
    }

    pub fn is_normal(&self) -> bool {
        matches!(self.law, Law::Normal { .. })
    }

    /// Single-atom law.
    pub fn is_degenerate(&self) -> bool {
        matches!(&self.law, Law::Grid(g) if g.probs.iter().filter(|&&p| p > 0.0).count() <= 1)
    }

    pub fn mean(&self) -> f64 {
        match &self.law {
            Law::Normal { mean, .. } | Law::Poisson { mean } | Law::Exponential { mean } => *mean,
            Law::Uniform { lower, upper } => 0.5 * (lower + upper),
            Law::Grid(g) => g.mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match &self.law {
            Law::Normal { stdev, .. } => stdev * stdev,
            Law::Poisson { mean } => *mean,
            Law::Exponential { mean } => mean * mean,
            Law::Uniform { lower, upper } => (upper - lower).powi(2) / 12.0,
            Law::Grid(g) => g.variance,
        }
    }

    pub fn stdev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// `P(ω <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.lower_mass(x, true)
    }

    /// `P(ω < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        self.lower_mass(x, false)
    }

    fn lower_mass(&self, x: f64, inclusive: bool) -> f64 {
        match &self.law {
            Law::Normal { mean, stdev } => std_normal_cdf((x - mean) / stdev),
            Law::Poisson { mean } => poisson_cdf(last_integer_below(x, inclusive), *mean),
            Law::Exponential { mean } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x / mean).exp_m1()
                }
            }
            Law::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            Law::Grid(g) => g.lower_mass(x, inclusive),
        }
    }

    fn upper_mass(&self, x: f64, inclusive: bool) -> f64 {
        match &self.law {
            Law::Normal { mean, stdev } => std_normal_sf((x - mean) / stdev),
            Law::Poisson { mean } => {
                poisson_sf_inclusive(last_integer_below(x, !inclusive) + 1, *mean)
            }
            Law::Exponential { mean } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-x / mean).exp()
                }
            }
            Law::Uniform { lower, upper } => ((upper - x) / (upper - lower)).clamp(0.0, 1.0),
            Law::Grid(g) => g.upper_mass(x, inclusive),
        }
    }

    /// `E[ω 1{ω <= x}]` (or `ω < x`).
    fn lower_moment(&self, x: f64, inclusive: bool) -> f64 {
        match &self.law {
            Law::Normal { mean, stdev } => {
                if x == f64::INFINITY {
                    return *mean;
                }
                if x == f64::NEG_INFINITY {
                    return 0.0;
                }
                let z = (x - mean) / stdev;
                mean * std_normal_cdf(z) - stdev * std_normal_pdf(z)
            }
            Law::Poisson { mean } => {
                mean * poisson_cdf(last_integer_below(x, inclusive) - 1, *mean)
            }
            Law::Exponential { mean } => {
                if x <= 0.0 {
                    0.0
                } else if x == f64::INFINITY {
                    *mean
                } else {
                    mean - (x + mean) * (-x / mean).exp()
                }
            }
            Law::Uniform { lower, upper } => {
                let c = x.clamp(*lower, *upper);
                (c * c - lower * lower) / (2.0 * (upper - lower))
            }
            Law::Grid(g) => g.lower_moment(x, inclusive),
        }
    }

    /// `E[ω 1{ω >= x}]` (or `ω > x`).
    fn upper_moment(&self, x: f64, inclusive: bool) -> f64 {
        match &self.law {
            Law::Normal { mean, stdev } => {
                if x == f64::NEG_INFINITY {
                    return *mean;
                }
                if x == f64::INFINITY {
                    return 0.0;
                }
                let z = (x - mean) / stdev;
                mean * std_normal_sf(z) + stdev * std_normal_pdf(z)
            }
            Law::Poisson { mean } => {
                let first = last_integer_below(x, !inclusive) + 1;
                mean * poisson_sf_inclusive(first - 1, *mean)
            }
            Law::Exponential { mean } => {
                if x <= 0.0 {
                    *mean
                } else if x == f64::INFINITY {
                    0.0
                } else {
                    (x + mean) * (-x / mean).exp()
                }
            }
            Law::Uniform { lower, upper } => {
                let c = x.clamp(*lower, *upper);
                (upper * upper - c * c) / (2.0 * (upper - lower))
            }
            Law::Grid(g) => g.upper_moment(x, inclusive),
        }
    }

    /// Smallest `x` with `CDF(x) >= p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!(
                "quantile probability must lie in (0,1) (got {p})"
            )));
        }
        Ok(self.quantile_unchecked(p))
    }

    /// Quantile on the closed unit interval; the endpoints map to the support
    /// bounds, which may be infinite.
    pub fn quantile_unchecked(&self, p: f64) -> f64 {
        match &self.law {
            Law::Normal { mean, stdev } => {
                if p <= 0.0 {
                    f64::NEG_INFINITY
                } else if p >= 1.0 {
                    f64::INFINITY
                } else {
                    mean + stdev * std_normal_quantile(p)
                }
            }
            Law::Poisson { mean } => {
                if p <= 0.0 {
                    0.0
                } else if p >= 1.0 {
                    f64::INFINITY
                } else {
                    poisson_quantile(p, *mean) as f64
                }
            }
            Law::Exponential { mean } => {
                if p <= 0.0 {
                    0.0
                } else if p >= 1.0 {
                    f64::INFINITY
                } else {
                    -mean * (-p).ln_1p()
                }
            }
            Law::Uniform { lower, upper } => lower + p.clamp(0.0, 1.0) * (upper - lower),
            Law::Grid(g) => {
                if p <= 0.0 {
                    g.points[0]
                } else {
                    g.points[g.quantile_index(p.min(1.0))]
                }
            }
        }
    }

    /// Inverse-CDF draw from a uniform variate in `(0, 1)`.
    pub fn sample_from_uniform(&self, u: f64) -> f64 {
        self.quantile_unchecked(u)
    }

    /// Complementary first-order loss `E[max(x − ω, 0)]`.
    pub fn complementary_loss(&self, x: f64) -> f64 {
        match &self.law {
            Law::Normal { mean, stdev } => {
                let z = (x - mean) / stdev;
                stdev * (z * std_normal_cdf(z) + std_normal_pdf(z))
            }
            Law::Poisson { mean } => {
                let k = last_integer_below(x, true);
                if k < 0 {
                    0.0
                } else {
                    x * poisson_cdf(k, *mean) - mean * poisson_cdf(k - 1, *mean)
                }
            }
            Law::Exponential { mean } => {
                if x <= 0.0 {
                    0.0
                } else {
                    x + mean * (-x / mean).exp_m1()
                }
            }
            Law::Uniform { lower, upper } => {
                if x <= *lower {
                    0.0
                } else if x >= *upper {
                    x - 0.5 * (lower + upper)
                } else {
                    (x - lower).powi(2) / (2.0 * (upper - lower))
                }
            }
            Law::Grid(g) => x * g.lower_mass(x, true) - g.lower_moment(x, true),
        }
    }

    /// First-order loss `E[max(ω − x, 0)]`, evaluated from the upper tail.
    pub fn loss(&self, x: f64) -> f64 {
        match &self.law {
            Law::Normal { mean, stdev } => {
                let z = (x - mean) / stdev;
                stdev * (std_normal_pdf(z) - z * std_normal_sf(z))
            }
            Law::Exponential { mean } => {
                if x <= 0.0 {
                    mean - x
                } else {
                    mean * (-x / mean).exp()
                }
            }
            Law::Uniform { lower, upper } => {
                if x <= *lower {
                    0.5 * (lower + upper) - x
                } else if x >= *upper {
                    0.0
                } else {
                    (upper - x).powi(2) / (2.0 * (upper - lower))
                }
            }
            Law::Poisson { .. } | Law::Grid(_) => {
                self.upper_moment(x, false) - x * self.upper_mass(x, false)
            }
        }
    }

    /// `E[ω | ω ∈ region]`.
    pub fn conditional_mean(&self, region: Interval) -> Result<f64> {
        if region.upper < region.lower {
            return Err(Error::Domain(format!(
                "region [{}, {}] is reversed",
                region.lower, region.upper
            )));
        }
        let use_upper = region.lower >= self.mean();
        let (mass, moment) = if use_upper {
            (
                self.upper_mass(region.lower, true) - self.upper_mass(region.upper, !region.upper_closed),
                self.upper_moment(region.lower, true)
                    - self.upper_moment(region.upper, !region.upper_closed),
            )
        } else {
            (
                self.lower_mass(region.upper, region.upper_closed)
                    - self.lower_mass(region.lower, false),
                self.lower_moment(region.upper, region.upper_closed)
                    - self.lower_moment(region.lower, false),
            )
        };
        if !(mass > 0.0) {
            return Err(Error::DegenerateRegion(format!(
                "region [{}, {}] carries no probability mass",
                region.lower, region.upper
            )));
        }
        Ok(moment / mass)
    }

    /// `∫_{u0}^{u1} F⁻¹(v) dv`: the first moment of the probability slice
    /// between cumulative masses `u0 < u1`. Atoms straddling a boundary are
    /// split proportionally.
    pub fn mass_slice_moment(&self, u0: f64, u1: f64) -> f64 {
        let u0 = u0.clamp(0.0, 1.0);
        let u1 = u1.clamp(0.0, 1.0);
        match &self.law {
            Law::Normal { mean, stdev } => {
                let pdf_at = |u: f64| {
                    if u <= 0.0 || u >= 1.0 {
                        0.0
                    } else {
                        std_normal_pdf(std_normal_quantile(u))
                    }
                };
                mean * (u1 - u0) - stdev * (pdf_at(u1) - pdf_at(u0))
            }
            Law::Exponential { mean } => {
                // ∫ −θ ln(1−v) dv expressed through survival masses s = 1 − u
                let term = |u: f64| {
                    let s = 1.0 - u;
                    if s <= 0.0 {
                        0.0
                    } else {
                        let x = -mean * s.ln();
                        (x + mean) * s
                    }
                };
                term(u0) - term(u1)
            }
            Law::Uniform { lower, upper } => {
                lower * (u1 - u0) + (upper - lower) * (u1 * u1 - u0 * u0) * 0.5
            }
            Law::Poisson { mean } => {
                if u0 >= 0.5 {
                    poisson_mass_moment_above(u0, *mean) - poisson_mass_moment_above(u1, *mean)
                } else {
                    poisson_mass_moment_below(u1, *mean) - poisson_mass_moment_below(u0, *mean)
                }
            }
            Law::Grid(g) => {
                if u0 >= 0.5 {
                    g.mass_moment_above(u0) - g.mass_moment_above(u1)
                } else {
                    g.mass_moment_below(u1) - g.mass_moment_below(u0)
                }
            }
        }
    }

    /// Stable hash of the law's parameters.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.kind_name().hash(&mut h);
        match &self.law {
            Law::Normal { mean, stdev } => {
                mean.to_bits().hash(&mut h);
                stdev.to_bits().hash(&mut h);
            }
            Law::Poisson { mean } | Law::Exponential { mean } => mean.to_bits().hash(&mut h),
            Law::Uniform { lower, upper } => {
                lower.to_bits().hash(&mut h);
                upper.to_bits().hash(&mut h);
            }
            Law::Grid(g) => {
                for (x, p) in g.points.iter().zip(&g.probs) {
                    x.to_bits().hash(&mut h);
                    p.to_bits().hash(&mut h);
                }
            }
        }
        h.finish()
    }
}

impl PartialEq for Distribution {
    fn eq(&self, other: &Self) -> bool {
        self.spec() == other.spec()
    }
}

impl TryFrom<DistributionSpec> for Distribution {
    type Error = Error;

    fn try_from(spec: DistributionSpec) -> Result<Self> {
        match spec {
            DistributionSpec::Normal { mean, stdev } => Self::normal(mean, stdev),
            DistributionSpec::Poisson { mean } => Self::poisson(mean),
            DistributionSpec::Exponential { mean } => Self::exponential(mean),
            DistributionSpec::Uniform { lower, upper } => Self::uniform(lower, upper),
            DistributionSpec::Grid { points, probs } => Self::grid(points, probs),
        }
    }
}

impl Serialize for Distribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = DistributionSpec::deserialize(d)?;
        Distribution::try_from(spec).map_err(serde::de::Error::custom)
    }
}

/// Largest integer `k` with `k <= x` (or `k < x`).
fn last_integer_below(x: f64, inclusive: bool) -> i64 {
    if x == f64::INFINITY {
        return i64::MAX / 4;
    }
    if x == f64::NEG_INFINITY {
        return -1;
    }
    let f = x.floor();
    let k = if !inclusive && f == x { f - 1.0 } else { f };
    k.max(-1.0) as i64
}

fn poisson_quantile(p: f64, mean: f64) -> i64 {
    let guess = mean + std_normal_quantile(p) * mean.sqrt();
    let mut k = guess.floor().max(0.0) as i64;
    while k > 0 && poisson_cdf(k - 1, mean) >= p - CUM_SLACK {
        k -= 1;
    }
    while poisson_cdf(k, mean) < p - CUM_SLACK {
        k += 1;
    }
    k
}

fn poisson_mass_moment_below(u: f64, mean: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return mean;
    }
    let k = poisson_quantile(u, mean);
    let below = poisson_cdf(k - 1, mean);
    let atom = poisson_cdf(k, mean) - below;
    mean * poisson_cdf(k - 2, mean) + k as f64 * (u - below).clamp(0.0, atom)
}

fn poisson_mass_moment_above(u: f64, mean: f64) -> f64 {
    if u <= 0.0 {
        return mean;
    }
    if u >= 1.0 {
        return 0.0;
    }
    let k = poisson_quantile(u, mean);
    let upto = poisson_cdf(k, mean);
    let atom = upto - poisson_cdf(k - 1, mean);
    // Σ_{j > k} j p_j = mean · P(X >= k)
    mean * poisson_sf_inclusive(k, mean) + k as f64 * (upto - u).clamp(0.0, atom)
}
