use metasel_core::cv::CvConfig;
use metasel_core::forest::ForestConfig;
use metasel_core::meta::{
    bootstrap_site, correlate_rows, pair_table, pearson, site_stats, BootstrapConfig, Metric,
};
use metasel_core::synth::{generate, SynthConfig};
use metasel_core::{Label, Mask};

fn small_forest() -> ForestConfig {
    ForestConfig {
        n_trees: 10,
        ..ForestConfig::default()
    }
}

#[test]
fn full_fraction_draws_every_subject() {
    let data = generate(&SynthConfig::single_site(40, 4, 1, 2.0, 1)).unwrap();
    let cfg = BootstrapConfig {
        replicates: 5,
        fraction: 1.0,
    };
    let out = bootstrap_site(
        "SITE01",
        &data.table,
        &data.all_phenotypes(),
        &Mask::ones(4),
        &cfg,
        &small_forest(),
        &CvConfig::default(),
        3,
    )
    .unwrap();
    assert_eq!(out.replicates.len(), 5);
    for rep in &out.replicates {
        assert_eq!(rep.rows, (0..40).collect::<Vec<_>>());
    }
}

#[test]
fn subsampled_mean_age_concentrates_on_site_mean() {
    let data = generate(&SynthConfig::single_site(160, 4, 1, 2.0, 2)).unwrap();
    let phenos = data.all_phenotypes();
    let (full, _) = site_stats("SITE01", &data.table, &phenos, 0.0).unwrap();
    let cfg = BootstrapConfig::default();
    let out = bootstrap_site(
        "SITE01",
        &data.table,
        &phenos,
        &Mask::ones(4),
        &cfg,
        &small_forest(),
        &CvConfig::default(),
        5,
    )
    .unwrap();
    let ages: Vec<f64> = out.replicates.iter().map(|r| r.stats.mean_age).collect();
    let mean = ages.iter().sum::<f64>() / ages.len() as f64;
    let n_asd = data.table.count_label(Label::Asd) as f64;
    let bound = 2.0 * full.std_age / (cfg.fraction * n_asd).sqrt();
    assert!(
        (mean - full.mean_age).abs() <= bound,
        "{mean} vs {}",
        full.mean_age
    );
}

#[test]
fn replicates_do_not_depend_on_count() {
    let data = generate(&SynthConfig::single_site(60, 4, 1, 2.0, 4)).unwrap();
    let phenos = data.all_phenotypes();
    let run = |b: usize| {
        bootstrap_site(
            "SITE01",
            &data.table,
            &phenos,
            &Mask::ones(4),
            &BootstrapConfig {
                replicates: b,
                fraction: 0.5,
            },
            &small_forest(),
            &CvConfig::default(),
            9,
        )
        .unwrap()
    };
    let few = run(3);
    let many = run(8);
    assert_eq!(few.replicates[..], many.replicates[..3]);
}

#[test]
fn null_phenotypes_correlate_weakly_within_a_site() {
    let data = generate(&SynthConfig::single_site(120, 4, 1, 1.5, 6)).unwrap();
    let out = bootstrap_site(
        "SITE01",
        &data.table,
        &data.all_phenotypes(),
        &data.truth_mask,
        &BootstrapConfig::default(),
        &small_forest(),
        &CvConfig::default(),
        6,
    )
    .unwrap();
    let all = vec![("SITE01".to_string(), out.replicates)];
    for metric in [Metric::MeanAge, Metric::StdAge, Metric::FmRatio] {
        let rows = pair_table(metric, &all);
        assert_eq!(rows.len(), 50);
        let (res, _) = correlate_rows(&rows).unwrap();
        assert!(res.r.abs() < 0.3, "{}: {}", metric.name(), res.r);
    }
}

#[test]
fn exact_linear_relation() {
    let x: Vec<f64> = (1..=10).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    let res = pearson(&x, &y).unwrap();
    assert!((res.r - 1.0).abs() < 1e-12);
    assert_eq!(res.p_value, 0.0);
    assert_eq!(res.n, 10);
}
