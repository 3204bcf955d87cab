//! Period-range demand sums `d_j + … + d_t`.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::distribution::{Distribution, GridLaw, Law};
use crate::error::{Error, Result};

/// Ordered per-period demand laws, periods numbered from 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Distribution>", into = "Vec<Distribution>")]
pub struct DemandProcess {
    periods: Vec<Distribution>,
}

impl DemandProcess {
    pub fn new(periods: Vec<Distribution>) -> Result<Self> {
        if periods.is_empty() {
            return Err(Error::Domain("demand process needs at least one period".into()));
        }
        Ok(Self { periods })
    }

    pub fn horizon(&self) -> usize {
        self.periods.len()
    }

    /// Demand law of period `t` (1-based).
    pub fn period(&self, t: usize) -> &Distribution {
        &self.periods[t - 1]
    }

    pub fn periods(&self) -> &[Distribution] {
        &self.periods
    }

    pub fn means(&self) -> Vec<f64> {
        self.periods.iter().map(Distribution::mean).collect()
    }

    pub fn all_normal(&self) -> bool {
        self.periods.iter().all(Distribution::is_normal)
    }

    /// Sum of means over periods `j..=t`.
    pub fn range_mean(&self, j: usize, t: usize) -> f64 {
        self.periods[j - 1..t].iter().map(Distribution::mean).sum()
    }
}

impl TryFrom<Vec<Distribution>> for DemandProcess {
    type Error = Error;
    fn try_from(v: Vec<Distribution>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DemandProcess> for Vec<Distribution> {
    fn from(p: DemandProcess) -> Self {
        p.periods
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConvolutionConfig {
    /// Lattice points spanning the central range of a numerically convolved sum.
    pub grid_points: usize,
    /// Tail mass excluded on each side when sizing that central range.
    pub tail_mass: f64,
}

impl Default for ConvolutionConfig {
    fn default() -> Self {
        Self {
            grid_points: 1 << 12,
            tail_mass: 1e-6,
        }
    }
}

/// Law of `d_j + … + d_t`.
#[derive(Clone, Debug)]
pub struct Convolution {
    pub first: usize,
    pub last: usize,
    pub law: Distribution,
    /// Relative mean error of the raw lattice law before moment matching
    /// (zero for closed forms).
    pub raw_mean_error: f64,
    /// Relative variance error of the raw lattice law before moment matching.
    pub raw_variance_error: f64,
}

impl Convolution {
    pub fn is_closed_form(&self) -> bool {
        !matches!(self.law.law(), Law::Grid(_)) || self.law.is_degenerate()
    }
}

pub fn convolve(process: &DemandProcess, j: usize, t: usize) -> Result<Convolution> {
    convolve_with(process, j, t, &ConvolutionConfig::default())
}

pub fn convolve_with(
    process: &DemandProcess,
    j: usize,
    t: usize,
    cfg: &ConvolutionConfig,
) -> Result<Convolution> {
    let n = process.horizon();
    if j < 1 || j > t || t > n {
        return Err(Error::Index(format!(
            "invalid period range ({j}, {t}) for a horizon of {n}"
        )));
    }
    let parts = &process.periods()[j - 1..t];
    let closed = |law: Distribution| Convolution {
        first: j,
        last: t,
        law,
        raw_mean_error: 0.0,
        raw_variance_error: 0.0,
    };
    if parts.len() == 1 {
        return Ok(closed(parts[0].clone()));
    }
    if let Some(law) = closed_form_sum(parts)? {
        return Ok(closed(law));
    }
    let (grid, mean_err, var_err) = lattice_sum(parts, cfg)?;
    Ok(Convolution {
        first: j,
        last: t,
        law: Distribution::from_grid(grid),
        raw_mean_error: mean_err,
        raw_variance_error: var_err,
    })
}

fn closed_form_sum(parts: &[Distribution]) -> Result<Option<Distribution>> {
    let shift: f64 = parts
        .iter()
        .filter(|d| d.is_degenerate())
        .map(Distribution::mean)
        .sum();
    let random: Vec<&Distribution> = parts.iter().filter(|d| !d.is_degenerate()).collect();
    if random.is_empty() {
        return Distribution::point(shift).map(Some);
    }
    if random.iter().all(|d| d.is_normal()) {
        let mean: f64 = random.iter().map(|d| d.mean()).sum::<f64>() + shift;
        let var: f64 = random.iter().map(|d| d.variance()).sum();
        return Distribution::normal(mean, var.sqrt()).map(Some);
    }
    if shift == 0.0 && random.iter().all(|d| matches!(d.law(), Law::Poisson { .. })) {
        let mean: f64 = random.iter().map(|d| d.mean()).sum();
        return Distribution::poisson(mean).map(Some);
    }
    Ok(None)
}

/// Lattice discretization of one summand: masses on `(offset + i)·step`.
struct LatticeLaw {
    offset: i64,
    masses: Vec<f64>,
}

const COMPONENT_TAIL: f64 = 1e-13;

fn discretize(d: &Distribution, step: f64) -> LatticeLaw {
    match d.law() {
        Law::Poisson { .. } | Law::Grid(_) => {
            let atoms: Vec<(f64, f64)> = match d.law() {
                Law::Grid(g) => g.points().iter().copied().zip(g.probs().iter().copied()).collect(),
                _ => {
                    let lo = d.quantile_unchecked(COMPONENT_TAIL) as i64;
                    let hi = d.quantile_unchecked(1.0 - COMPONENT_TAIL) as i64;
                    (lo..=hi)
                        .map(|k| (k as f64, d.cdf(k as f64) - d.cdf_left(k as f64)))
                        .collect()
                }
            };
            let lo = (atoms.first().unwrap().0 / step).floor() as i64;
            let hi = (atoms.last().unwrap().0 / step).floor() as i64 + 1;
            let mut masses = vec![0.0; (hi - lo + 1) as usize];
            for (x, p) in atoms {
                let r = x / step;
                let i = r.floor();
                let frac = r - i;
                let idx = (i as i64 - lo) as usize;
                masses[idx] += p * (1.0 - frac);
                masses[idx + 1] += p * frac;
            }
            LatticeLaw { offset: lo, masses }
        }
        _ => {
            let lo_x = d.quantile_unchecked(COMPONENT_TAIL);
            let hi_x = d.quantile_unchecked(1.0 - COMPONENT_TAIL);
            let lo = (lo_x / step).round() as i64;
            let hi = ((hi_x / step).round() as i64).max(lo + 1);
            let len = (hi - lo + 1) as usize;
            let mut masses = Vec::with_capacity(len);
            let mut prev = 0.0;
            for i in 0..len {
                let edge = if i + 1 == len {
                    1.0
                } else {
                    d.cdf(((lo + i as i64) as f64 + 0.5) * step)
                };
                masses.push((edge - prev).max(0.0));
                prev = edge;
            }
            LatticeLaw { offset: lo, masses }
        }
    }
}

fn convolve_lattices(parts: &[LatticeLaw]) -> LatticeLaw {
    let total_len: usize = parts.iter().map(|p| p.masses.len()).sum::<usize>() + 1 - parts.len();
    let size = total_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);

    let mut acc = vec![Complex::new(1.0, 0.0); size];
    let mut buf = vec![Complex::new(0.0, 0.0); size];
    for part in parts {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (b, &m) in buf.iter_mut().zip(&part.masses) {
            b.re = m;
        }
        forward.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a *= *b;
        }
    }
    inverse.process(&mut acc);
    let scale = 1.0 / size as f64;
    let masses = acc[..total_len]
        .iter()
        .map(|c| (c.re * scale).max(0.0))
        .collect();
    LatticeLaw {
        offset: parts.iter().map(|p| p.offset).sum(),
        masses,
    }
}

/// Cumulative-mass quantile of a lattice law.
fn lattice_quantile(law: &LatticeLaw, step: f64, p: f64) -> f64 {
    let total: f64 = law.masses.iter().sum();
    let mut c = 0.0;
    for (i, m) in law.masses.iter().enumerate() {
        c += m / total;
        if c >= p {
            return (law.offset + i as i64) as f64 * step;
        }
    }
    (law.offset + law.masses.len() as i64 - 1) as f64 * step
}

fn lattice_sum(parts: &[Distribution], cfg: &ConvolutionConfig) -> Result<(GridLaw, f64, f64)> {
    if cfg.grid_points < 16 {
        return Err(Error::Config("grid convolution needs at least 16 points".into()));
    }
    let n = parts.len() as f64;
    let eps = cfg.tail_mass;
    let span = |p: f64| -> f64 { parts.iter().map(|d| d.quantile_unchecked(p)).sum() };
    let union_range = span(1.0 - eps / n) - span(eps / n);
    let coarse_step = union_range / (cfg.grid_points - 1) as f64;
    let coarse = convolve_lattices(
        &parts
            .iter()
            .map(|d| discretize(d, coarse_step))
            .collect::<Vec<_>>(),
    );
    let central = lattice_quantile(&coarse, coarse_step, 1.0 - eps)
        - lattice_quantile(&coarse, coarse_step, eps);
    let step = (central.max(coarse_step) / (cfg.grid_points - 1) as f64).min(coarse_step);
    let fine = convolve_lattices(&parts.iter().map(|d| discretize(d, step)).collect::<Vec<_>>());

    // fold negligible outer tails into the first/last retained points
    let total: f64 = fine.masses.iter().sum();
    let cut = 1e-15 * total;
    let mut lo = 0;
    let mut acc = 0.0;
    while lo + 1 < fine.masses.len() && acc + fine.masses[lo] < cut {
        acc += fine.masses[lo];
        lo += 1;
    }
    let low_fold = acc;
    let mut hi = fine.masses.len() - 1;
    acc = 0.0;
    while hi > lo && acc + fine.masses[hi] < cut {
        acc += fine.masses[hi];
        hi -= 1;
    }
    let mut probs: Vec<f64> = fine.masses[lo..=hi].iter().map(|m| m / total).collect();
    probs[0] += low_fold / total;
    let last = probs.len() - 1;
    probs[last] += acc / total;
    let points: Vec<f64> = (lo..=hi)
        .map(|i| (fine.offset + i as i64) as f64 * step)
        .collect();

    let target_mean: f64 = parts.iter().map(Distribution::mean).sum();
    let target_var: f64 = parts.iter().map(Distribution::variance).sum();
    let norm: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= norm);
    let raw_mean: f64 = points.iter().zip(&probs).map(|(x, p)| x * p).sum();
    let raw_var: f64 = points
        .iter()
        .zip(&probs)
        .map(|(x, p)| p * (x - raw_mean).powi(2))
        .sum();
    let scale = (target_var / raw_var).sqrt();
    let matched: Vec<f64> = points
        .iter()
        .map(|x| target_mean + (x - raw_mean) * scale)
        .collect();
    let mean_err = (raw_mean - target_mean) / target_mean.abs().max(f64::MIN_POSITIVE);
    let var_err = (raw_var - target_var) / target_var;
    Ok((GridLaw::new(matched, probs)?, mean_err, var_err))
}

/// All `N(N+1)/2` range sums of a process.
#[derive(Clone, Debug)]
pub struct ConvolutionTable {
    horizon: usize,
    entries: Vec<Convolution>,
}

impl ConvolutionTable {
    pub fn build(process: &DemandProcess, cfg: &ConvolutionConfig) -> Result<Self> {
        let n = process.horizon();
        let pairs: Vec<(usize, usize)> = (1..=n)
            .flat_map(|t| (1..=t).map(move |j| (j, t)))
            .collect();
        let entries = pairs
            .par_iter()
            .map(|&(j, t)| convolve_with(process, j, t, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            horizon: n,
            entries,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    fn index(j: usize, t: usize) -> usize {
        t * (t - 1) / 2 + (j - 1)
    }

    pub fn get(&self, j: usize, t: usize) -> &Convolution {
        assert!(1 <= j && j <= t && t <= self.horizon, "range ({j},{t}) out of bounds");
        &self.entries[Self::index(j, t)]
    }

    pub fn law(&self, j: usize, t: usize) -> &Distribution {
        &self.get(j, t).law
    }

    pub fn iter(&self) -> impl Iterator<Item = &Convolution> {
        self.entries.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn process(v: Vec<Distribution>) -> DemandProcess {
        DemandProcess::new(v).unwrap()
    }

    #[test]
    fn normal_sum_is_closed_form() {
        let p = process(vec![
            Distribution::normal(100.0, 10.0).unwrap(),
            Distribution::normal(50.0, 10.0).unwrap(),
        ]);
        let c = convolve(&p, 1, 2).unwrap();
        assert!(c.is_closed_form());
        match c.law.law() {
            Law::Normal { mean, stdev } => {
                assert_abs_diff_eq!(*mean, 150.0, epsilon = 1e-12);
                assert_abs_diff_eq!(*stdev, 200f64.sqrt(), epsilon = 1e-12);
            }
            other => panic!("expected normal, got {other:?}"),
        }
    }

    #[test]
    fn poisson_sum_is_closed_form() {
        let p = process(vec![
            Distribution::poisson(3.0).unwrap(),
            Distribution::poisson(4.0).unwrap(),
        ]);
        let c = convolve(&p, 1, 2).unwrap();
        assert_eq!(c.law, Distribution::poisson(7.0).unwrap());
    }

    #[test]
    fn point_masses_shift_normals() {
        let p = process(vec![
            Distribution::point(100.0).unwrap(),
            Distribution::normal(50.0, 5.0).unwrap(),
        ]);
        let c = convolve(&p, 1, 2).unwrap();
        assert_eq!(c.law, Distribution::normal(150.0, 5.0).unwrap());
        let p = process(vec![Distribution::point(100.0).unwrap(); 3]);
        assert_eq!(convolve(&p, 1, 3).unwrap().law, Distribution::point(300.0).unwrap());
    }

    #[test]
    fn invalid_ranges_are_index_errors() {
        let p = process(vec![Distribution::poisson(3.0).unwrap(); 2]);
        assert!(matches!(convolve(&p, 0, 1), Err(Error::Index(_))));
        assert!(matches!(convolve(&p, 2, 1), Err(Error::Index(_))));
        assert!(matches!(convolve(&p, 1, 3), Err(Error::Index(_))));
    }

    #[test]
    fn mixed_sum_moments_match_within_tolerance() {
        let p = process(vec![
            Distribution::normal(100.0, 30.0).unwrap(),
            Distribution::poisson(80.0).unwrap(),
            Distribution::exponential(100.0).unwrap(),
            Distribution::uniform(0.0, 200.0).unwrap(),
        ]);
        for t in 2..=4 {
            let c = convolve(&p, 1, t).unwrap();
            let mean = p.range_mean(1, t);
            let var: f64 = p.periods()[..t].iter().map(Distribution::variance).sum();
            assert!((c.law.mean() - mean).abs() <= 1e-6 * mean);
            assert!((c.law.variance() - var).abs() <= 1e-6 * var);
            assert!(c.raw_mean_error.abs() < 1e-3, "raw mean error {}", c.raw_mean_error);
            assert!(c.raw_variance_error.abs() < 1e-3, "raw var error {}", c.raw_variance_error);
        }
    }

    #[test]
    fn table_indexes_every_range() {
        let p = process(vec![Distribution::normal(10.0, 1.0).unwrap(); 4]);
        let table = ConvolutionTable::build(&p, &ConvolutionConfig::default()).unwrap();
        for t in 1..=4 {
            for j in 1..=t {
                let c = table.get(j, t);
                assert_eq!((c.first, c.last), (j, t));
                assert_abs_diff_eq!(c.law.mean(), 10.0 * (t - j + 1) as f64, epsilon = 1e-12);
            }
        }
    }
}
