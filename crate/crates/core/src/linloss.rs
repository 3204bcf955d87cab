//! Piecewise-linear bounds on the complementary first-order loss.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::probdist::{ConvolutionTable, Distribution, Law};

/// Tolerance on the total mass of a partition.
pub const PARTITION_MASS_TOLERANCE: f64 = 1e-12;

/// Region masses `p_1..p_W`; regions are the consecutive mass-quantile slices.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    probs: Vec<f64>,
}

impl Partition {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("partition needs at least one region".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Domain("partition masses must be positive".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PARTITION_MASS_TOLERANCE {
            return Err(Error::Domain(format!(
                "partition masses sum to {total}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(w: usize) -> Result<Self> {
        uniform_partition(w)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn segments(&self) -> usize {
        self.probs.len()
    }

    /// Cumulative masses `u_1..u_W`, the last pinned to exactly 1.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out: Vec<f64> = self
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        *out.last_mut().unwrap() = 1.0;
        out
    }

    fn key(&self) -> Vec<u64> {
        self.probs.iter().map(|p| p.to_bits()).collect()
    }
}

pub fn uniform_partition(w: usize) -> Result<Partition> {
    if w == 0 {
        return Err(Error::Domain("number of segments must be at least 1".into()));
    }
    let mut probs = vec![1.0 / w as f64; w];
    // the last mass absorbs rounding so the masses sum to exactly 1
    let head: f64 = probs[..w - 1].iter().sum();
    probs[w - 1] = 1.0 - head;
    Ok(Partition { probs })
}

/// Jensen / Edmundson-Madanski data for one random variable.
#[derive(Clone, Debug, PartialEq)]
pub struct LossLinearization {
    pub partition: Partition,
    pub conditional_means: Vec<f64>,
    pub max_error: f64,
    pub source_mean: f64,
    pub source_stdev: f64,
}

impl LossLinearization {
    pub fn segments(&self) -> usize {
        self.partition.segments()
    }

    /// Slope `Σ_{k<=i} p_k` of segment `i` (1-based).
    pub fn slope(&self, i: usize) -> f64 {
        if i == self.segments() {
            return 1.0;
        }
        self.partition.probs[..i].iter().sum()
    }

    /// `Σ_{k<=i} p_k E[ω|Ω_k]`, subtracted in segment `i`.
    pub fn offset(&self, i: usize) -> f64 {
        if i == self.segments() {
            return self.source_mean;
        }
        self.partition.probs[..i]
            .iter()
            .zip(&self.conditional_means)
            .map(|(p, m)| p * m)
            .sum()
    }

    /// `(slope, offset)` for segments `1..=W`.
    pub fn segment_coefficients(&self) -> Vec<(f64, f64)> {
        let mut c = 0.0;
        let mut m = 0.0;
        let w = self.segments();
        let mut out = Vec::with_capacity(w);
        for (i, (p, e)) in self
            .partition
            .probs
            .iter()
            .zip(&self.conditional_means)
            .enumerate()
        {
            c += p;
            m += p * e;
            if i + 1 == w {
                out.push((1.0, self.source_mean));
            } else {
                out.push((c, m));
            }
        }
        out
    }

    pub fn lower(&self, x: f64) -> f64 {
        self.segment_coefficients()
            .iter()
            .fold(0.0_f64, |acc, (c, m)| acc.max(x * c - m))
    }

    pub fn upper(&self, x: f64) -> f64 {
        self.lower(x) + self.max_error
    }

    /// Linearization of `mean + stdev·ω` given this one for `ω`.
    pub fn affine(&self, mean: f64, stdev: f64) -> Self {
        Self {
            partition: self.partition.clone(),
            conditional_means: self
                .conditional_means
                .iter()
                .map(|e| mean + stdev * e)
                .collect(),
            max_error: stdev * self.max_error,
            source_mean: mean + stdev * self.source_mean,
            source_stdev: stdev * self.source_stdev,
        }
    }

    /// Plain-text dump: one `p_i E_i` line per region, then `e_W`.
    pub fn to_dump(&self) -> String {
        let mut s = String::new();
        for (p, e) in self.partition.probs.iter().zip(&self.conditional_means) {
            let _ = writeln!(s, "{p} {e}");
        }
        let _ = writeln!(s, "{}", self.max_error);
        s
    }

    /// Parses [`to_dump`](Self::to_dump) output. Mean and stdev of the source
    /// are rebuilt from the regions.
    pub fn from_dump(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.len() < 2 {
            return Err(Error::Parse("dump needs region lines and an error line".into()));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))
        };
        let mut probs = Vec::new();
        let mut means = Vec::new();
        for line in &lines[..lines.len() - 1] {
            let mut it = line.split_whitespace();
            match (it.next(), it.next(), it.next()) {
                (Some(p), Some(e), None) => {
                    probs.push(num(p)?);
                    means.push(num(e)?);
                }
                _ => return Err(Error::Parse(format!("malformed region line {line:?}"))),
            }
        }
        let max_error = num(lines[lines.len() - 1].trim())?;
        let source_mean = probs.iter().zip(&means).map(|(p, e)| p * e).sum();
        Ok(Self {
            partition: Partition::new(probs)?,
            conditional_means: means,
            max_error,
            source_mean,
            source_stdev: f64::NAN,
        })
    }
}

pub fn linearize(dist: &Distribution, partition: &Partition) -> Result<LossLinearization> {
    let mean = dist.mean();
    let w = partition.segments();
    if dist.is_degenerate() {
        return Ok(LossLinearization {
            partition: partition.clone(),
            conditional_means: vec![mean; w],
            max_error: 0.0,
            source_mean: mean,
            source_stdev: 0.0,
        });
    }
    let cum = partition.cumulative();
    let mut means = Vec::with_capacity(w);
    let mut lo = 0.0;
    for (&hi, &p) in cum.iter().zip(partition.probs()) {
        means.push(dist.mass_slice_moment(lo, hi) / p);
        lo = hi;
    }
    let mut lin = LossLinearization {
        partition: partition.clone(),
        conditional_means: means,
        max_error: 0.0,
        source_mean: mean,
        source_stdev: dist.stdev(),
    };
    lin.max_error = breakpoint_error(dist, &lin);
    Ok(lin)
}

/// Largest gap between exact complementary loss and the Jensen bound over the
/// breakpoints.
fn breakpoint_error(dist: &Distribution, lin: &LossLinearization) -> f64 {
    lin.conditional_means
        .iter()
        .map(|&e| dist.complementary_loss(e) - lin.lower(e))
        .fold(0.0, f64::max)
}

/// `(lower, upper)` bounds on `E[max(x − ω, 0)]`.
pub fn bound_values(x: f64, lin: &LossLinearization) -> (f64, f64) {
    let lower = lin.lower(x);
    (lower, lower + lin.max_error)
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    /// Random candidates drawn before the descent; `None` means `500·W`.
    pub population_size: Option<usize>,
    pub step_size: f64,
    pub seed: u64,
    pub max_sweeps: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            population_size: None,
            step_size: 0.002,
            seed: 0,
            max_sweeps: 1000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub partition: Partition,
    /// Minimax error of the returned partition.
    pub error: f64,
    /// Minimax error of the uniform partition.
    pub uniform_error: f64,
    pub sweeps: usize,
    pub warnings: Vec<String>,
}

fn minimax_error(dists: &[Distribution], probs: &[f64]) -> f64 {
    let partition = Partition {
        probs: probs.to_vec(),
    };
    dists
        .par_iter()
        .map(|d| linearize(d, &partition).map_or(f64::INFINITY, |l| l.max_error))
        .reduce(|| 0.0, f64::max)
}

fn dirichlet_member(seed: u64, member: u64, w: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member);
    let draws: Vec<f64> = (0..w)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = draws.iter().sum();
    let mut probs: Vec<f64> = draws.iter().map(|d| d / total).collect();
    // absorb rounding so the masses sum to 1 up to a few ulps
    let head: f64 = probs[..w - 1].iter().sum();
    probs[w - 1] = 1.0 - head;
    probs
}

/// Random search followed by coordinate descent on the minimax breakpoint
/// error over `dists`.
pub fn optimize_partition(
    dists: &[Distribution],
    w: usize,
    cfg: &SearchConfig,
) -> Result<SearchResult> {
    if dists.is_empty() {
        return Err(Error::Domain("partition search needs at least one distribution".into()));
    }
    if w < 2 {
        return Err(Error::Domain("partition search needs at least two segments".into()));
    }
    let population = cfg.population_size.unwrap_or(500 * w);
    if population == 0 {
        return Err(Error::Config("population size must be at least 1".into()));
    }
    if !(cfg.step_size > 0.0 && cfg.step_size < 1.0) {
        return Err(Error::Config(format!("step size {} outside (0,1)", cfg.step_size)));
    }

    let uniform = uniform_partition(w)?.probs;
    let uniform_error = minimax_error(dists, &uniform);

    let candidates: Vec<Vec<f64>> = (0..population as u64)
        .map(|k| dirichlet_member(cfg.seed, k, w))
        .filter(|p| p.iter().all(|x| *x > 0.0))
        .collect();
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|p| {
            let partition = Partition { probs: p.clone() };
            dists
                .iter()
                .map(|d| linearize(d, &partition).map_or(f64::INFINITY, |l| l.max_error))
                .fold(0.0, f64::max)
        })
        .collect();

    let mut best = uniform;
    let mut best_err = uniform_error;
    for (p, s) in candidates.into_iter().zip(scores) {
        if s < best_err {
            best = p;
            best_err = s;
        }
    }

    let mut warnings = Vec::new();
    let mut step = cfg.step_size;
    let min_p = best.iter().copied().fold(f64::INFINITY, f64::min);
    if step >= min_p {
        step = 0.5 * min_p;
        warnings.push(format!(
            "step size {} not below smallest mass {min_p}; clipped to {step}",
            cfg.step_size
        ));
    }

    let mut sweeps = 0;
    loop {
        if sweeps >= cfg.max_sweeps {
            warnings.push(format!("coordinate descent stopped after {sweeps} sweeps"));
            break;
        }
        sweeps += 1;
        let mut improved = false;
        for i in 0..w - 1 {
            let mut choice: Option<(Vec<f64>, f64)> = None;
            for delta in [-step, step] {
                let mut trial = best.clone();
                trial[i] += delta;
                trial[w - 1] -= delta;
                if trial[i] <= 0.0 || trial[w - 1] <= 0.0 {
                    continue;
                }
                let err = minimax_error(dists, &trial);
                let incumbent = choice.as_ref().map_or(best_err, |c| c.1);
                if err < incumbent {
                    choice = Some((trial, err));
                }
            }
            if let Some((p, e)) = choice {
                best = p;
                best_err = e;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }

    Ok(SearchResult {
        partition: Partition::new(best)?,
        error: best_err,
        uniform_error,
        sweeps,
        warnings,
    })
}

pub const MAX_TABLE_SEGMENTS: usize = 20;

fn standard_normal() -> Distribution {
    Distribution::normal(0.0, 1.0).expect("valid standard normal")
}

/// Breakpoint error of region `i` given the boundary masses so far.
fn region_error(z: &Distribution, lo: f64, hi: f64, c_prev: f64, m_prev: f64) -> (f64, f64) {
    let p = hi - lo;
    let e = z.mass_slice_moment(lo, hi) / p;
    (z.complementary_loss(e) - (e * c_prev - m_prev).max(0.0), e)
}

/// Places boundaries left to right so each breakpoint error equals `target`;
/// returns the error of the last region, or `None` when the mass runs out.
fn shoot(z: &Distribution, w: usize, target: f64) -> Option<(Vec<f64>, f64)> {
    let mut cuts = Vec::with_capacity(w);
    let (mut lo, mut c, mut m) = (0.0, 0.0, 0.0);
    for _ in 0..w - 1 {
        let (top_err, _) = region_error(z, lo, 1.0, c, m);
        if top_err <= target {
            return None;
        }
        let (mut a, mut b) = (lo, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if region_error(z, lo, mid, c, m).0 < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        let hi = 0.5 * (a + b);
        let p = hi - lo;
        c += p;
        m += z.mass_slice_moment(lo, hi);
        cuts.push(hi);
        lo = hi;
    }
    let (last, _) = region_error(z, lo, 1.0, c, m);
    Some((cuts, last))
}

fn compute_standard_table(w: usize) -> LossLinearization {
    let z = standard_normal();
    if w == 1 {
        return linearize(&z, &uniform_partition(1).unwrap()).unwrap();
    }
    // equal breakpoint errors: bisection on the common error level
    let (mut lo, mut hi) = (0.0, z.complementary_loss(0.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(&z, w, mid) {
            Some((_, last)) if last > mid => lo = mid,
            _ => hi = mid,
        }
    }
    let (cuts, _) = shoot(&z, w, lo).expect("feasible lower error level");
    let mut probs = Vec::with_capacity(w);
    let mut prev = 0.0;
    for &c in &cuts {
        probs.push(c - prev);
        prev = c;
    }
    probs.push(1.0 - prev);
    let partition = Partition::new(probs).expect("table masses form a partition");
    linearize(&z, &partition).expect("standard normal linearization")
}

/// Minimax linearization of the standard normal with `w` regions (cached).
pub fn standard_normal_table(w: usize) -> Result<Arc<LossLinearization>> {
    if w == 0 || w > MAX_TABLE_SEGMENTS {
        return Err(Error::Domain(format!(
            "standard normal tables cover 1..={MAX_TABLE_SEGMENTS} segments (got {w})"
        )));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<LossLinearization>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().unwrap().get(&w) {
        return Ok(hit.clone());
    }
    let table = Arc::new(compute_standard_table(w));
    Ok(cache.lock().unwrap().entry(w).or_insert(table).clone())
}

/// Memoizes linearizations by `(distribution fingerprint, partition)`.
#[derive(Default)]
pub struct LinearizationCache {
    entries: Mutex<HashMap<(u64, Vec<u64>), Arc<LossLinearization>>>,
}

impl LinearizationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(
        &self,
        dist: &Distribution,
        partition: &Partition,
    ) -> Result<Arc<LossLinearization>> {
        let key = (dist.fingerprint(), partition.key());
        if let Some(hit) = self.entries.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let lin = Arc::new(linearize(dist, partition)?);
        Ok(self
            .entries
            .lock()
            .unwrap()
            .entry(key)
            .or_insert(lin)
            .clone())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One linearization per range sum `d_jt`, all sharing a partition.
#[derive(Clone, Debug)]
pub struct LinearizationSet {
    horizon: usize,
    partition: Partition,
    entries: Vec<LossLinearization>,
}

impl LinearizationSet {
    /// Generic path: linearize every convolution directly.
    pub fn build(table: &ConvolutionTable, partition: &Partition) -> Result<Self> {
        let entries = table
            .iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|c| linearize(&c.law, partition))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            horizon: table.horizon(),
            partition: partition.clone(),
            entries,
        })
    }

    /// Scales a standard normal linearization onto every (normal) convolution.
    pub fn from_standard(table: &ConvolutionTable, standard: &LossLinearization) -> Result<Self> {
        let entries = table
            .iter()
            .map(|c| match c.law.law() {
                Law::Normal { mean, stdev } => Ok(standard.affine(*mean, *stdev)),
                _ if c.law.is_degenerate() => linearize(&c.law, &standard.partition),
                _ => Err(Error::Construction(format!(
                    "convolution ({}, {}) is not normal; the standard table does not apply",
                    c.first, c.last
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            horizon: table.horizon(),
            partition: standard.partition.clone(),
            entries,
        })
    }

    pub fn from_entries(
        horizon: usize,
        partition: Partition,
        entries: Vec<LossLinearization>,
    ) -> Result<Self> {
        if entries.len() != horizon * (horizon + 1) / 2 {
            return Err(Error::Construction(format!(
                "expected {} linearizations for a horizon of {horizon}, got {}",
                horizon * (horizon + 1) / 2,
                entries.len()
            )));
        }
        if entries.iter().any(|e| e.partition.segments() != partition.segments()) {
            return Err(Error::Construction("linearizations disagree on the partition".into()));
        }
        Ok(Self {
            horizon,
            partition,
            entries,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn segments(&self) -> usize {
        self.partition.segments()
    }

    pub fn get(&self, j: usize, t: usize) -> Option<&LossLinearization> {
        if j < 1 || j > t || t > self.horizon {
            return None;
        }
        self.entries.get(t * (t - 1) / 2 + (j - 1))
    }
}
