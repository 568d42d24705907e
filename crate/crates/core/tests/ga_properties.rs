use metasel_core::cv::CvConfig;
use metasel_core::forest::ForestConfig;
use metasel_core::ga::{
    crossover_at, crossover_single_point, evolve, init_population, mask_fitness, mutate_bitflip,
    tournament_select, GaConfig, MutationRate,
};
use metasel_core::hier::{run_rounds, should_stop, HierConfig};
use metasel_core::rng;
use metasel_core::synth::{generate, SynthConfig};
use metasel_core::Mask;

#[test]
fn selection_pressure_matches_closed_form() {
    let fitness = [0.9, 0.1];
    let trials = 10_000;
    for size in 1..=4usize {
        let mut g = rng::stream(size as u64, &[]);
        let wins = (0..trials)
            .filter(|_| tournament_select(&fitness, size, &mut g) == 0)
            .count();
        let p = 1.0 - 0.5f64.powi(size as i32);
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        let freq = wins as f64 / trials as f64;
        assert!(
            (freq - p).abs() <= 3.0 * sigma.max(1e-12),
            "size {size}: {freq} vs {p}"
        );
    }
}

#[test]
fn equal_fitness_returns_first_draw() {
    let fitness = [0.5; 7];
    let mut a = rng::stream(5, &[]);
    let mut b = rng::stream(5, &[]);
    for _ in 0..100 {
        let first = rng::index(&mut b, 7);
        for _ in 1..3 {
            rng::index(&mut b, 7);
        }
        assert_eq!(tournament_select(&fitness, 3, &mut a), first);
    }
}

#[test]
fn mutation_flips_four_bits_on_average() {
    let d = 62;
    let ones = Mask::ones(d);
    let mut g = rng::stream(12, &[]);
    let trials = 10_000;
    let flips: usize = (0..trials)
        .map(|_| {
            let m = mutate_bitflip(&ones, MutationRate::PerDimension(4.0).resolve(d), &mut g);
            d - m.count_ones()
        })
        .sum();
    let mean = flips as f64 / trials as f64;
    assert!((mean - 4.0).abs() <= 0.06, "{mean}");
}

#[test]
fn mutation_example() {
    let parent = Mask::parse("1100").unwrap();
    let mut child = parent.clone();
    child.flip(2);
    assert_eq!(child, Mask::parse("1110").unwrap());
    let mut g = rng::stream(0, &[]);
    assert_eq!(mutate_bitflip(&parent, 0.0, &mut g), parent);
}

#[test]
fn crossover_example_and_conservation() {
    let a = Mask::parse("1111").unwrap();
    let b = Mask::parse("0000").unwrap();
    let (c1, c2) = crossover_at(&a, &b, 2);
    assert_eq!(c1, Mask::parse("1100").unwrap());
    assert_eq!(c2, Mask::parse("0011").unwrap());
    let mut g = rng::stream(3, &[]);
    for _ in 0..200 {
        let x = Mask::from_u64(10, rng::index(&mut g, 1024) as u64);
        let y = Mask::from_u64(10, rng::index(&mut g, 1024) as u64);
        let (p, q) = crossover_single_point(&x, &y, 0.9, &mut g).unwrap();
        assert_eq!(
            p.count_ones() + q.count_ones(),
            x.count_ones() + y.count_ones()
        );
        let (p, q) = crossover_single_point(&x, &y, 0.0, &mut g).unwrap();
        assert_eq!((p, q), (x.clone(), y.clone()));
    }
}

#[test]
fn initial_population_popcount() {
    let pop = init_population(62, 300, 9);
    let mean = pop.iter().map(|c| c.count_ones()).sum::<usize>() as f64 / 300.0;
    assert!((mean - 31.0).abs() <= 3.0, "{mean}");
    assert!(init_population(1, 10, 0).iter().all(|c| c.get(0)));
    assert_eq!(init_population(20, 30, 4), init_population(20, 30, 4));
}

fn small_ga(seed: u64) -> GaConfig {
    GaConfig {
        n_iter: 8,
        n_pop: 20,
        seed,
        ..GaConfig::default()
    }
}

fn small_forest() -> ForestConfig {
    ForestConfig {
        n_trees: 30,
        ..ForestConfig::default()
    }
}

#[test]
fn ga_recovers_planted_features() {
    // at this separation neither planted column alone saturates CV accuracy,
    // so dropping one always costs fitness
    let seeds = 20;
    let mut contained = [0usize; 2];
    for seed in 0..seeds {
        let data = generate(&SynthConfig::single_site(120, 8, 2, 3.0, seed)).unwrap();
        let res = evolve(
            &data.table,
            &small_ga(seed),
            &small_forest(),
            &CvConfig::default(),
        )
        .unwrap();
        for (slot, bit) in data.truth_mask.indices().into_iter().enumerate() {
            if res.best_mask.get(bit) {
                contained[slot] += 1;
            }
        }
        for w in res.history.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }
    for c in contained {
        assert!(c as f64 / seeds as f64 > 0.9, "{contained:?}");
    }
}

#[test]
fn planted_single_feature_converges_in_two_rounds() {
    let data = generate(&SynthConfig::single_site(120, 4, 1, 3.0, 21)).unwrap();
    let hier = HierConfig::default();
    let history = run_rounds(
        &data.table,
        &small_ga(21),
        &small_forest(),
        &CvConfig::default(),
        &hier,
        &mut |_, _| {},
    )
    .unwrap();
    let optimum = (1..16u64)
        .map(|w| {
            mask_fitness(
                &data.table,
                &Mask::from_u64(4, w),
                &small_forest(),
                &CvConfig::default(),
                21,
            )
            .unwrap()
            .mean
        })
        .fold(0.0, f64::max);
    assert_eq!(history.rounds[0].result.mean, optimum);
    assert!(data.truth_mask.is_subset_of(&history.rounds[0].mask));
    assert!(history.converged);
    assert_eq!(history.rounds_run(), 2);
    let gain = history.rounds[1].result.mean - history.rounds[0].result.mean;
    assert!(should_stop(
        history.rounds[0].result.mean,
        history.rounds[1].result.mean,
        hier.epsilon
    ));
    assert!(gain < hier.epsilon);
}

#[test]
fn single_round_budget() {
    let data = generate(&SynthConfig::single_site(60, 4, 1, 3.0, 2)).unwrap();
    let hier = HierConfig {
        max_rounds: 1,
        ..HierConfig::default()
    };
    let history = run_rounds(
        &data.table,
        &small_ga(2),
        &small_forest(),
        &CvConfig::default(),
        &hier,
        &mut |_, _| {},
    )
    .unwrap();
    assert_eq!(history.rounds_run(), 1);
    assert!(!history.converged);
}

#[test]
fn rounds_nest_and_stop_exactly_on_epsilon() {
    for seed in 0..3 {
        let data = generate(&SynthConfig::single_site(90, 12, 3, 1.5, seed)).unwrap();
        let hier = HierConfig {
            epsilon: 0.02,
            max_rounds: 4,
        };
        let history = run_rounds(
            &data.table,
            &small_ga(seed),
            &small_forest(),
            &CvConfig::default(),
            &hier,
            &mut |_, _| {},
        )
        .unwrap();
        let mut prev = Mask::ones(12);
        for (i, round) in history.rounds.iter().enumerate() {
            assert_eq!(round.mask.and(&prev).unwrap(), round.mask);
            prev = round.mask.clone();
            if i >= 1 {
                let stop = should_stop(
                    history.rounds[i - 1].result.mean,
                    round.result.mean,
                    hier.epsilon,
                );
                let last = i + 1 == history.rounds.len();
                assert_eq!(stop, last && history.converged);
            }
        }
        assert!(history.converged || history.rounds_run() == hier.max_rounds);
    }
}
