use stodyn::bench::*;
use stodyn::evaluate::optimality_gap;
use stodyn::io::InstanceFile;
use stodyn::models::{HighsSolver, ServiceMeasure, Shortage};
use stodyn::workflow::PartitionStrategy;
use stodyn::Error;

fn small_bed(cv_levels: Vec<f64>) -> TestBedConfig {
    TestBedConfig {
        patterns: vec![Pattern::Sta, Pattern::Sin1],
        horizon: 5,
        a_levels: vec![500.0],
        v_levels: vec![2.0],
        levels: vec![0.9],
        cv_levels,
        ..TestBedConfig::default()
    }
}

fn study(segments: Vec<usize>) -> StudyConfig {
    StudyConfig {
        segments,
        strategies: vec![PartitionStrategy::Uniform, PartitionStrategy::NormalTable],
        ..StudyConfig::default()
    }
}

#[test]
fn default_bed_is_the_full_factorial() {
    let cfg = TestBedConfig::default();
    let bed = generate_testbed(&cfg).unwrap();
    assert_eq!(bed.len(), cfg.size());
    assert_eq!(bed.len(), 810);
    assert_eq!(bed, generate_testbed(&cfg).unwrap());
    assert!(bed.iter().all(|b| b.instance.horizon() == 15));
    let mut ids: Vec<&str> = bed.iter().map(|b| b.id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    assert_eq!(ids.len(), bed.len());
}

#[test]
fn pattern_means_are_positive_and_deterministic() {
    for p in Pattern::ALL {
        let m = p.means(15, 100.0, 0);
        assert_eq!(m.len(), 15);
        assert!(m.iter().all(|&x| x > 0.0 && x.is_finite()), "{p}: {m:?}");
        assert_eq!(m, p.means(15, 100.0, 0));
    }
    assert!(Pattern::Sta.means(15, 100.0, 0).iter().all(|&x| x == 100.0));
}

#[test]
fn empty_factor_is_a_config_error() {
    let cfg = TestBedConfig { a_levels: vec![], ..TestBedConfig::default() };
    assert!(matches!(generate_testbed(&cfg), Err(Error::Config(_))));
    let cfg = TestBedConfig { cv_levels: vec![-0.1], ..TestBedConfig::default() };
    assert!(matches!(generate_testbed(&cfg), Err(Error::Config(_))));
}

#[test]
fn gap_rows_are_consistent_and_reproducible() {
    let bed = generate_testbed(&small_bed(vec![0.0, 0.2])).unwrap();
    let cfg = study(vec![2, 4]);
    let a = run_gap_study(&bed, &cfg, &HighsSolver).unwrap();
    assert_eq!(a.rows.len(), bed.len() * 2 * 2);
    for row in &a.rows {
        assert_eq!(row.status, "optimal", "{row:?}");
        let (lb, ub) = (row.lb_objective.unwrap(), row.ub_objective.unwrap());
        assert!(lb <= ub + 1e-9 * ub.abs().max(1.0), "{row:?}");
        let recomputed = optimality_gap(lb, ub).unwrap();
        assert!((row.gap.unwrap() - recomputed).abs() <= 1e-12);
        let exact = row.exact_cost_of_ub_policy.unwrap();
        assert!(exact <= ub + 1e-6 * ub.abs().max(1.0), "{row:?}");
        if row.cv == 0.0 {
            // known demand leaves no linearization error
            assert!(row.gap.unwrap() < 1e-7, "{row:?}");
        }
    }
    let b = run_gap_study(&bed, &cfg, &HighsSolver).unwrap();
    let text = |s: &GapStudy| {
        let mut buf = Vec::new();
        write_rows_csv(&s.rows, &mut buf).unwrap();
        let mut out = String::from_utf8(buf).unwrap();
        // wall-clock columns differ between runs
        out = out
            .lines()
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                [&f[..14], &f[16..]].concat().join(",")
            })
            .collect::<Vec<_>>()
            .join("\n");
        out
    };
    assert_eq!(text(&a), text(&b));
    assert_eq!(a.summary.len(), 4);
    assert!(a.summary.iter().all(|s| s.rows == bed.len() && s.optimal_rows == bed.len()));
}

#[test]
fn summary_quantiles() {
    assert_eq!(quantile_sorted(&[], 0.5), None);
    assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.5), Some(2.5));
    assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), Some(2.0));
}

#[test]
fn generated_instances_round_trip_through_json() {
    let cfg = TestBedConfig {
        patterns: Pattern::ALL.to_vec(),
        a_levels: vec![1000.0],
        v_levels: vec![5.0],
        levels: vec![0.95],
        cv_levels: vec![0.0, 0.3],
        ..TestBedConfig::default()
    };
    for b in generate_testbed(&cfg).unwrap() {
        let file = InstanceFile::from_instance(&b.instance);
        let back = InstanceFile::parse(&file.to_json()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_instance().unwrap(), b.instance);
    }
    let lost = TestBedConfig {
        measure: ServiceMeasure::Penalty,
        levels: vec![20.0],
        shortage: Shortage::LostSales,
        ..cfg
    };
    for b in generate_testbed(&lost).unwrap() {
        let file = InstanceFile::from_instance(&b.instance);
        assert_eq!(InstanceFile::parse(&file.to_json()).unwrap().to_instance().unwrap(), b.instance);
    }
}
