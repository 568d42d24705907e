//! Binary genetic algorithm over feature masks.
//!
//! Each generation evaluates every individual, then breeds a full
//! replacement population: `n_pop` tournament winners are paired in
//! selection order, each pair undergoes single-point crossover with
//! probability `r_cross`, and every child gets independent bit flips with
//! probability `r_mut`. There is no elitism; the best mask seen across all
//! evaluations is tracked outside the population.
//!
//! Fitness must be a pure function of the mask. [`evolve`] seeds each
//! cross-validation from `(seed, mask fingerprint)`, which makes the fitness
//! cache a plain memo: caching on or off, serial or parallel, gives the same
//! result.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::cv::{cv_accuracy, CvConfig, CvResult};
use crate::forest::ForestConfig;
use crate::rng::{self, tag, StreamRng};
use crate::tabular::{FeatureTable, Mask};
use crate::{par, Error, Result};

pub type Chromosome = Mask;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MutationRate {
    Fixed(f64),
    /// `numerator / d` for a mask of length `d`.
    PerDimension(f64),
}

impl MutationRate {
    pub fn resolve(self, d: usize) -> f64 {
        match self {
            MutationRate::Fixed(r) => r,
            MutationRate::PerDimension(k) => (k / d as f64).min(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub n_iter: usize,
    pub n_pop: usize,
    pub r_cross: f64,
    pub r_mut: MutationRate,
    pub tournament_size: usize,
    pub seed: u64,
    pub cache: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            n_iter: 30,
            n_pop: 300,
            r_cross: 0.9,
            r_mut: MutationRate::PerDimension(4.0),
            tournament_size: 3,
            seed: 0,
            cache: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_pop < 2 || !self.n_pop.is_multiple_of(2) {
            return bad("n_pop must be even and at least 2");
        }
        if self.n_iter == 0 {
            return bad("n_iter must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.r_cross) {
            return bad("r_cross must lie in [0, 1]");
        }
        let r_mut_ok = match self.r_mut {
            MutationRate::Fixed(r) => (0.0..=1.0).contains(&r),
            MutationRate::PerDimension(k) => k >= 0.0 && k.is_finite(),
        };
        if !r_mut_ok {
            return bad("r_mut must lie in [0, 1]");
        }
        if self.tournament_size == 0 {
            return bad("tournament_size must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub cache_hit_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaResult {
    pub best_mask: Chromosome,
    pub best_fitness: CvResult,
    /// Best-so-far fitness after each generation.
    pub history: Vec<f64>,
    pub generations: Vec<GenerationStats>,
    /// Fitness lookups requested (population size × generations).
    pub evaluations: usize,
    /// Lookups served from the cache.
    pub cache_hits: usize,
}

/// Sets one uniformly chosen bit if `c` is all zero.
pub fn repair(c: &mut Chromosome, rng: &mut StreamRng) {
    if c.is_all_zero() && !c.is_empty() {
        let i = rng::index(rng, c.len());
        c.set(i, true);
    }
}

/// `n_pop` fair-coin masks of length `d`, all-zero ones repaired.
pub fn init_population(d: usize, n_pop: usize, seed: u64) -> Vec<Chromosome> {
    let mut rng = rng::stream(seed, &[tag::INIT]);
    (0..n_pop)
        .map(|_| {
            let mut c = Mask::new((0..d).map(|_| rng.next_u32_bit()).collect());
            repair(&mut c, &mut rng);
            c
        })
        .collect()
}

trait CoinFlip {
    fn next_u32_bit(&mut self) -> bool;
}

impl CoinFlip for StreamRng {
    fn next_u32_bit(&mut self) -> bool {
        use rand::RngCore;
        self.next_u32() & 1 == 1
    }
}

/// Draws `size` members uniformly with replacement and returns the index of
/// the fittest; ties go to the earliest draw.
pub fn tournament_select(fitness: &[f64], size: usize, rng: &mut StreamRng) -> usize {
    let mut best = rng::index(rng, fitness.len());
    for _ in 1..size {
        let c = rng::index(rng, fitness.len());
        if fitness[c] > fitness[best] {
            best = c;
        }
    }
    best
}

/// Exchanges the suffixes of `a` and `b` starting at `cut`.
pub fn crossover_at(a: &Chromosome, b: &Chromosome, cut: usize) -> (Chromosome, Chromosome) {
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    for i in cut..a.len() {
        c1.set(i, b.get(i));
        c2.set(i, a.get(i));
    }
    (c1, c2)
}

/// With probability `r_cross`, cuts at a uniform point in `1..d` and swaps
/// suffixes; otherwise returns copies of the parents.
pub fn crossover_single_point(
    a: &Chromosome,
    b: &Chromosome,
    r_cross: f64,
    rng: &mut StreamRng,
) -> Result<(Chromosome, Chromosome)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let d = a.len();
    if d >= 2 && rng::unit(rng) < r_cross {
        let cut = 1 + rng::index(rng, d - 1);
        Ok(crossover_at(a, b, cut))
    } else {
        Ok((a.clone(), b.clone()))
    }
}

/// Flips each bit independently with probability `r_mut`, then repairs.
pub fn mutate_bitflip(c: &Chromosome, r_mut: f64, rng: &mut StreamRng) -> Chromosome {
    let mut out = c.clone();
    for i in 0..out.len() {
        if rng::unit(rng) < r_mut {
            out.flip(i);
        }
    }
    repair(&mut out, rng);
    out
}

/// Cross-validated accuracy of `mask`, seeded from `(seed, mask)`.
pub fn mask_fitness(
    table: &FeatureTable,
    mask: &Mask,
    forest: &ForestConfig,
    cv: &CvConfig,
    seed: u64,
) -> Result<CvResult> {
    let cv_seed = rng::derive(seed, &[tag::FITNESS, mask.fingerprint()]);
    cv_accuracy(table, mask, forest, cv, cv_seed)
}

/// Runs the GA on `table`, using [`mask_fitness`] with `config.seed`.
pub fn evolve(
    table: &FeatureTable,
    config: &GaConfig,
    forest: &ForestConfig,
    cv: &CvConfig,
) -> Result<GaResult> {
    let seed = config.seed;
    evolve_with(
        table.d(),
        config,
        |m: &Mask| mask_fitness(table, m, forest, cv, seed),
        &mut |_| {},
    )
}

/// Generational loop over masks of length `d` with an arbitrary fitness.
/// `observe` is called once per generation.
pub fn evolve_with<F>(
    d: usize,
    config: &GaConfig,
    fitness: F,
    observe: &mut dyn FnMut(&GenerationStats),
) -> Result<GaResult>
where
    F: Fn(&Mask) -> Result<CvResult> + Sync,
{
    config.validate()?;
    if d == 0 {
        return Err(Error::EmptyInput);
    }
    let r_mut = config.r_mut.resolve(d);
    let mut population = init_population(d, config.n_pop, config.seed);
    let mut cache: BTreeMap<Mask, CvResult> = BTreeMap::new();
    let mut best: Option<(Mask, CvResult)> = None;
    let mut history = Vec::with_capacity(config.n_iter);
    let mut generations = Vec::with_capacity(config.n_iter);
    let mut evaluations = 0;
    let mut cache_hits = 0;

    for g in 0..config.n_iter {
        let results: Vec<CvResult> = if config.cache {
            let mut pending: Vec<&Mask> = Vec::new();
            let mut hits = 0;
            for c in &population {
                if cache.contains_key(c) || pending.contains(&c) {
                    hits += 1;
                } else {
                    pending.push(c);
                }
            }
            let fresh = par::map_indices(pending.len(), |i| fitness(pending[i]));
            for (c, r) in pending.iter().zip(fresh) {
                cache.insert((*c).clone(), r?);
            }
            cache_hits += hits;
            population.iter().map(|c| cache[c].clone()).collect()
        } else {
            par::map_indices(population.len(), |i| fitness(&population[i]))
                .into_iter()
                .collect::<Result<Vec<_>>>()?
        };
        evaluations += population.len();

        for (c, r) in population.iter().zip(&results) {
            if best.as_ref().is_none_or(|(_, b)| r.mean > b.mean) {
                best = Some((c.clone(), r.clone()));
            }
        }
        let best_mean = best.as_ref().map_or(0.0, |(_, b)| b.mean);
        history.push(best_mean);
        let scores: Vec<f64> = results.iter().map(|r| r.mean).collect();
        let stats = GenerationStats {
            generation: g,
            best_fitness: best_mean,
            mean_fitness: scores.iter().sum::<f64>() / scores.len() as f64,
            cache_hit_rate: if config.cache {
                cache_hits as f64 / evaluations as f64
            } else {
                0.0
            },
        };
        observe(&stats);
        generations.push(stats);

        if g + 1 == config.n_iter {
            break;
        }
        let mut rng = rng::stream(config.seed, &[tag::BREED, g as u64]);
        let selected: Vec<usize> = (0..config.n_pop)
            .map(|_| tournament_select(&scores, config.tournament_size, &mut rng))
            .collect();
        let mut next = Vec::with_capacity(config.n_pop);
        for pair in selected.chunks_exact(2) {
            let (c1, c2) = crossover_single_point(
                &population[pair[0]],
                &population[pair[1]],
                config.r_cross,
                &mut rng,
            )?;
            next.push(mutate_bitflip(&c1, r_mut, &mut rng));
            next.push(mutate_bitflip(&c2, r_mut, &mut rng));
        }
        population = next;
    }

    let (best_mask, best_fitness) = best.ok_or(Error::EmptyInput)?;
    Ok(GaResult {
        best_mask,
        best_fitness,
        history,
        generations,
        evaluations,
        cache_hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn bits(s: &str) -> Mask {
        Mask::parse(s).unwrap()
    }

    #[test]
    fn single_dimension_population_is_all_ones() {
        let pop = init_population(1, 50, 4);
        assert!(pop.iter().all(|c| c.get(0)));
    }

    #[test]
    fn init_popcount_concentrates() {
        let pop = init_population(62, 300, 12);
        let mean = pop.iter().map(Mask::count_ones).sum::<usize>() as f64 / 300.0;
        // binomial(62, 1/2): mean 31, sd of the mean over 300 draws ≈ 0.23
        assert!((mean - 31.0).abs() < 3.0, "mean popcount {mean}");
        assert_eq!(init_population(62, 10, 3), init_population(62, 10, 3));
    }

    #[test]
    fn crossover_matches_four_bit_example() {
        let (a, b) = crossover_at(&bits("1111"), &bits("0000"), 2);
        assert_eq!(a, bits("1100"));
        assert_eq!(b, bits("0011"));
    }

    #[test]
    fn crossover_without_probability_copies() {
        let mut rng = rng::stream(1, &[]);
        let (a, b) = (bits("101100"), bits("010011"));
        for _ in 0..50 {
            assert_eq!(
                crossover_single_point(&a, &b, 0.0, &mut rng).unwrap(),
                (a.clone(), b.clone())
            );
        }
        assert!(crossover_single_point(&a, &bits("01"), 0.5, &mut rng).is_err());
    }

    #[test]
    fn crossover_conserves_bits() {
        let mut rng = rng::stream(2, &[]);
        for _ in 0..500 {
            let a = Mask::from_u64(13, rand::RngCore::next_u64(&mut rng));
            let b = Mask::from_u64(13, rand::RngCore::next_u64(&mut rng));
            let (c1, c2) = crossover_single_point(&a, &b, 1.0, &mut rng).unwrap();
            assert_eq!(
                a.count_ones() + b.count_ones(),
                c1.count_ones() + c2.count_ones()
            );
        }
    }

    #[test]
    fn mutation_example_and_identity() {
        let mut c = bits("1100");
        c.flip(2);
        assert_eq!(c, bits("1110"));
        let mut rng = rng::stream(3, &[]);
        let orig = bits("1010011");
        assert_eq!(mutate_bitflip(&orig, 0.0, &mut rng), orig);
        // r_mut = 1 flips everything; all-ones becomes all-zero and is repaired
        let flipped = mutate_bitflip(&bits("1111"), 1.0, &mut rng);
        assert_eq!(flipped.count_ones(), 1);
    }

    #[test]
    fn tournament_ties_take_first_draw() {
        let fitness = vec![0.5; 10];
        let mut a = rng::stream(4, &[]);
        let mut b = rng::stream(4, &[]);
        for _ in 0..100 {
            let first = rng::index(&mut b, 10);
            for _ in 1..3 {
                rng::index(&mut b, 10);
            }
            assert_eq!(tournament_select(&fitness, 3, &mut a), first);
        }
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        assert!(GaConfig {
            n_pop: 7,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(GaConfig {
            r_cross: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(GaConfig {
            r_mut: MutationRate::Fixed(-0.1),
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(GaConfig {
            tournament_size: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert_eq!(MutationRate::PerDimension(4.0).resolve(62), 4.0 / 62.0);
    }

    fn toy_fitness(m: &Mask) -> Result<CvResult> {
        // rewards bits 1 and 4, penalizes everything else
        let score = m
            .bits()
            .iter()
            .enumerate()
            .map(|(i, &b)| match (i, b) {
                (1 | 4, true) => 0.2,
                (_, true) => -0.05,
                _ => 0.0,
            })
            .sum::<f64>();
        Ok(CvResult::from_folds(vec![0.5 + score]))
    }

    #[test]
    fn history_is_monotone_and_finds_optimum() {
        let cfg = GaConfig {
            n_pop: 40,
            n_iter: 25,
            seed: 5,
            ..Default::default()
        };
        let res = evolve_with(8, &cfg, toy_fitness, &mut |_| {}).unwrap();
        assert!(res.history.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(res.best_mask, Mask::from_indices(8, &[1, 4]));
        assert_eq!(res.evaluations, 40 * 25);
        assert_eq!(res.generations.len(), 25);
    }

    #[test]
    fn cache_does_not_change_result() {
        let on = GaConfig {
            n_pop: 20,
            n_iter: 10,
            seed: 9,
            ..Default::default()
        };
        let off = GaConfig {
            cache: false,
            ..on.clone()
        };
        let a = evolve_with(6, &on, toy_fitness, &mut |_| {}).unwrap();
        let b = evolve_with(6, &off, toy_fitness, &mut |_| {}).unwrap();
        assert_eq!(a.best_mask, b.best_mask);
        assert_eq!(a.best_fitness, b.best_fitness);
        assert_eq!(a.history, b.history);
        assert!(a.cache_hits > 0);
        assert_eq!(b.cache_hits, 0);
    }

    #[test]
    fn never_evaluates_all_zero() {
        let cfg = GaConfig {
            n_pop: 30,
            n_iter: 15,
            r_mut: MutationRate::Fixed(0.5),
            seed: 1,
            ..Default::default()
        };
        let check = |m: &Mask| {
            assert!(!m.is_all_zero());
            toy_fitness(m)
        };
        evolve_with(3, &cfg, check, &mut |_| {}).unwrap();
    }

    #[test]
    fn no_variation_preserves_population_under_equal_fitness() {
        // r_cross = r_mut = 0 and tournament size 1: the next generation is a
        // uniform resample of the current one, so every pattern must already
        // have been present in generation 0.
        let cfg = GaConfig {
            n_pop: 24,
            n_iter: 6,
            r_cross: 0.0,
            r_mut: MutationRate::Fixed(0.0),
            tournament_size: 1,
            seed: 17,
            cache: true,
        };
        let initial = init_population(10, 24, 17);
        let flat = |m: &Mask| {
            assert!(initial.contains(m));
            Ok(CvResult::from_folds(vec![0.5]))
        };
        let res = evolve_with(10, &cfg, flat, &mut |_| {}).unwrap();
        assert_eq!(res.best_mask, initial[0]);
    }
}
