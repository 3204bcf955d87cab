mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stodyn::probdist::*;

fn law_strategy() -> impl Strategy<Value = RefLaw> {
    prop_oneof![
        (-50.0..200.0f64, 0.5..40.0f64).prop_map(|(m, s)| RefLaw::Normal(m, s)),
        (0.5..60.0f64).prop_map(RefLaw::Poisson),
        (1.0..150.0f64).prop_map(RefLaw::Exponential),
        (-20.0..100.0f64, 1.0..150.0f64).prop_map(|(a, w)| RefLaw::Uniform(a, a + w)),
    ]
}

fn grid(dist: &Distribution) -> Vec<f64> {
    let lo = dist.quantile(0.001).unwrap() - dist.stdev();
    let hi = dist.quantile(0.999).unwrap() + dist.stdev();
    (0..100).map(|k| lo + (hi - lo) * k as f64 / 99.0).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn complementary_loss_is_nondecreasing_and_convex(law in law_strategy()) {
        let d = law.to_distribution();
        let xs = grid(&d);
        let v: Vec<f64> = xs.iter().map(|&x| d.complementary_loss(x)).collect();
        for k in 1..v.len() {
            prop_assert!(v[k] >= v[k - 1] - 1e-12);
        }
        for k in 1..v.len() - 1 {
            prop_assert!(v[k + 1] - 2.0 * v[k] + v[k - 1] >= -1e-9);
        }
    }

    #[test]
    fn loss_identity_on_the_grid(law in law_strategy()) {
        let d = law.to_distribution();
        for x in grid(&d) {
            let lhs = d.loss(x);
            let rhs = d.complementary_loss(x) - (x - d.mean());
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + d.mean().abs()), "{x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn losses_match_quadrature(law in law_strategy(), u in 0.0..1.0f64) {
        let d = law.to_distribution();
        let x = d.quantile(0.001).unwrap() + u * (d.quantile(0.999).unwrap() - d.quantile(0.001).unwrap());
        let scale = 1e-8 * (1.0 + d.stdev());
        prop_assert!((d.complementary_loss(x) - law.complementary_loss(x)).abs() <= scale);
        prop_assert!((d.loss(x) - law.loss(x)).abs() <= scale);
    }

    #[test]
    fn quantile_inverts_cdf_for_continuous_laws(law in law_strategy(), p in 0.001..0.999f64) {
        prop_assume!(!matches!(law, RefLaw::Poisson(_)));
        let d = law.to_distribution();
        prop_assert!((d.cdf(d.quantile(p).unwrap()) - p).abs() <= 1e-7);
    }

    #[test]
    fn conditional_means_recover_the_mean(
        law in law_strategy(),
        raw in prop::collection::vec(0.05..1.0f64, 2..8),
    ) {
        let d = law.to_distribution();
        let total: f64 = raw.iter().sum();
        let mut acc = 0.0;
        let mut sum = 0.0;
        for (k, r) in raw.iter().enumerate() {
            let (u0, u1) = (acc, if k + 1 == raw.len() { 1.0 } else { acc + r / total });
            sum += d.mass_slice_moment(u0, u1);
            acc = u1;
        }
        prop_assert!((sum - d.mean()).abs() <= 1e-7 * (1.0 + d.mean().abs()), "{sum} vs {}", d.mean());
    }
}

/// Bisection on the cdf obtained by quadrature of the density.
fn quadrature_quantile(law: RefLaw, p: f64, mut lo: f64, mut hi: f64) -> f64 {
    // the loss has derivative −(1 − F); a centred difference keeps it second order
    let sf = |x: f64| (law.loss(x - 1e-4) - law.loss(x + 1e-4)) / 2e-4;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if 1.0 - sf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn quantile_examples() {
    let q = Distribution::normal(100.0, 10.0).unwrap().quantile(0.95).unwrap();
    let oracle = quadrature_quantile(RefLaw::Normal(100.0, 10.0), 0.95, 90.0, 140.0);
    assert!((q - oracle).abs() < 1e-6, "{q} vs {oracle}");
    assert!((q - 116.449).abs() < 1e-3);
    assert_eq!(Distribution::uniform(0.0, 200.0).unwrap().quantile(0.5).unwrap(), 100.0);
    // smallest k with P(X ≤ k) ≥ 1/2 from the cumulative pmf
    let mut cum = 0.0;
    let mut pmf = (-4.0f64).exp();
    let mut k = 0;
    loop {
        cum += pmf;
        if cum >= 0.5 {
            break;
        }
        k += 1;
        pmf *= 4.0 / k as f64;
    }
    assert_eq!(Distribution::poisson(4.0).unwrap().quantile(0.5).unwrap(), k as f64);
}

#[test]
fn standard_normal_half_means() {
    let d = Distribution::normal(0.0, 1.0).unwrap();
    let below = d.conditional_mean(Interval::half_open(f64::NEG_INFINITY, 0.0)).unwrap();
    let above = d.conditional_mean(Interval::closed(0.0, f64::INFINITY)).unwrap();
    // 2∫_{-∞}^0 t φ(t) dt by quadrature
    let oracle = 2.0 * integrate(|t| t * (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt(), -40.0, 0.0);
    assert!((below - oracle).abs() < 1e-7);
    assert!((above + oracle).abs() < 1e-7);
    assert!((d.complementary_loss(0.0) - 0.398_942_280_401_432_7).abs() < 1e-12);
    assert!((d.loss(0.0) - 0.398_942_280_401_432_7).abs() < 1e-12);
}

#[test]
fn normal_plus_exponential_matches_monte_carlo() {
    let process = DemandProcess::new(vec![
        Distribution::normal(100.0, 30.0).unwrap(),
        Distribution::exponential(100.0).unwrap(),
    ])
    .unwrap();
    let c = convolve(&process, 1, 2).unwrap();
    assert!(!c.is_closed_form());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 1_000_000;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let z = {
            // Box-Muller keeps the oracle free of library samplers
            let (u1, u2): (f64, f64) = (rng.random(), rng.random());
            (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let x = 100.0 + 30.0 * z - 100.0 * (1.0 - rng.random::<f64>()).ln();
        s1 += x;
        s2 += x * x;
    }
    let mean = s1 / n as f64;
    let var = s2 / n as f64 - mean * mean;
    assert!((c.law.mean() - 200.0).abs() < 0.5);
    assert!((c.law.mean() - mean).abs() < 0.5);
    assert!((c.law.variance() / 10_900.0 - 1.0).abs() < 0.01);
    assert!((c.law.variance() / var - 1.0).abs() < 0.01);
}

#[test]
fn convolution_losses_match_direct_quadrature() {
    // L̂ of normal(100,30) + uniform(0,200) by double integration
    let process = DemandProcess::new(vec![
        Distribution::normal(100.0, 30.0).unwrap(),
        Distribution::uniform(0.0, 200.0).unwrap(),
    ])
    .unwrap();
    let c = convolve(&process, 1, 2).unwrap();
    let n = RefLaw::Normal(100.0, 30.0);
    for x in [50.0, 150.0, 200.0, 260.0, 400.0] {
        let oracle = integrate(|u| n.complementary_loss(x - u) / 200.0, 0.0, 200.0);
        let got = c.law.complementary_loss(x);
        assert!((got - oracle).abs() < 1e-3 * (1.0 + oracle), "{x}: {got} vs {oracle}");
    }
}

#[test]
fn closed_form_sums() {
    let normals = DemandProcess::new(vec![
        Distribution::normal(100.0, 10.0).unwrap(),
        Distribution::normal(50.0, 10.0).unwrap(),
    ])
    .unwrap();
    let c = convolve(&normals, 1, 2).unwrap();
    assert!(c.is_closed_form());
    assert!((c.law.mean() - 150.0).abs() < 1e-12);
    assert!((c.law.stdev() - 200f64.sqrt()).abs() < 1e-12);
    let poissons = DemandProcess::new(vec![
        Distribution::poisson(3.0).unwrap(),
        Distribution::poisson(4.0).unwrap(),
    ])
    .unwrap();
    let c = convolve(&poissons, 1, 2).unwrap();
    assert!(c.is_closed_form());
    assert_eq!(c.law.spec(), Distribution::poisson(7.0).unwrap().spec());
}
