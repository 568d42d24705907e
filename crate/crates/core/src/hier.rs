//! Hierarchical selection: repeated GA rounds, each restricted to the
//! features kept by the previous round, until the best CV accuracy stops
//! improving by at least `epsilon`.
//!
//! Round masks are always stored in the original column indexing. Fitness is
//! seeded from the run seed and the mask in original indexing, so a mask
//! scores the same in every round; only the GA's own operators get a fresh
//! stream per round.

use alloc::string::String;
use alloc::vec::Vec;

use crate::cv::{CvConfig, CvResult};
use crate::forest::ForestConfig;
use crate::ga::{evolve_with, mask_fitness, GaConfig, GenerationStats};
use crate::rng::{self, tag};
use crate::tabular::{FeatureTable, Mask};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierConfig {
    pub epsilon: f64,
    pub max_rounds: usize,
}

impl Default for HierConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            max_rounds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    /// 1-based round number.
    pub round: usize,
    pub mask: Mask,
    pub result: CvResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundHistory {
    /// All-features accuracy, reported as round 0.
    pub baseline: CvResult,
    pub rounds: Vec<Round>,
    pub converged: bool,
}

impl RoundHistory {
    pub fn rounds_run(&self) -> usize {
        self.rounds.len()
    }

    pub fn final_mask(&self) -> &Mask {
        &self.rounds.last().expect("at least one round").mask
    }

    /// Accuracy with the last round's mask.
    pub fn final_result(&self) -> &CvResult {
        &self.rounds.last().expect("at least one round").result
    }

    /// `(round, result)` for round 0 (baseline) through the last round.
    pub fn results(&self) -> impl Iterator<Item = (usize, &CvResult)> {
        core::iter::once((0, &self.baseline))
            .chain(self.rounds.iter().map(|r| (r.round, &r.result)))
    }
}

/// True when the improvement from `prev` to `current` is below `epsilon`.
pub fn should_stop(prev: f64, current: f64, epsilon: f64) -> bool {
    current - prev < epsilon
}

pub fn run_rounds(
    table: &FeatureTable,
    ga: &GaConfig,
    forest: &ForestConfig,
    cv: &CvConfig,
    hier: &HierConfig,
    observe: &mut dyn FnMut(usize, &GenerationStats),
) -> Result<RoundHistory> {
    if hier.epsilon.is_nan() || hier.epsilon < 0.0 {
        return Err(Error::InvalidConfig("epsilon must be non-negative".into()));
    }
    if hier.max_rounds == 0 {
        return Err(Error::InvalidConfig("max_rounds must be at least 1".into()));
    }
    let d = table.d();
    let run_seed = ga.seed;
    let baseline = mask_fitness(table, &Mask::ones(d), forest, cv, run_seed)?;
    let mut current = Mask::ones(d);
    let mut rounds: Vec<Round> = Vec::new();
    let mut converged = false;

    for r in 1..=hier.max_rounds {
        let round_cfg = GaConfig {
            seed: rng::derive(run_seed, &[tag::ROUND, r as u64]),
            ..ga.clone()
        };
        let outer = current.clone();
        let fitness = |sub: &Mask| {
            let lifted = sub.lift(&outer)?;
            mask_fitness(table, &lifted, forest, cv, run_seed)
        };
        let res = evolve_with(outer.count_ones(), &round_cfg, fitness, &mut |g| {
            observe(r, g)
        })?;
        let mask = res.best_mask.lift(&outer)?;
        let stop = rounds
            .last()
            .is_some_and(|prev| should_stop(prev.result.mean, res.best_fitness.mean, hier.epsilon));
        rounds.push(Round {
            round: r,
            mask: mask.clone(),
            result: res.best_fitness,
        });
        current = mask;
        if stop {
            converged = true;
            break;
        }
    }
    Ok(RoundHistory {
        baseline,
        rounds,
        converged,
    })
}

/// Progress callback for [`run_sites`]: site id, round, generation stats.
pub type SiteObserver<'a> = &'a (dyn Fn(&str, usize, &GenerationStats) + Sync);

/// Runs [`run_rounds`] independently on every site; site `i` uses the GA
/// seed derived from `(ga.seed, i)`.
pub fn run_sites(
    table: &FeatureTable,
    ga: &GaConfig,
    forest: &ForestConfig,
    cv: &CvConfig,
    hier: &HierConfig,
    observe: SiteObserver<'_>,
) -> Result<Vec<(String, RoundHistory)>> {
    let sites = table.partition_by_site();
    let histories = par::map_indices(sites.len(), |i| {
        let cfg = GaConfig {
            seed: rng::derive(ga.seed, &[tag::SITE, i as u64]),
            ..ga.clone()
        };
        let site = sites[i].0.as_str();
        run_rounds(&sites[i].1, &cfg, forest, cv, hier, &mut |r, g| {
            observe(site, r, g)
        })
    });
    sites
        .into_iter()
        .zip(histories)
        .map(|((site, _), h)| Ok((site, h?)))
        .collect()
}

/// One line of the site-wise accuracy table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub site_id: String,
    pub data_size: usize,
    pub round: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
}

/// Rows for every site (dataset order) and every round, baseline first.
pub fn site_wise_eval(
    dataset: &FeatureTable,
    histories: &[(String, RoundHistory)],
) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for (site, part) in dataset.partition_by_site() {
        let (_, hist) = histories
            .iter()
            .find(|(s, _)| *s == site)
            .ok_or_else(|| Error::MissingSite(site.clone()))?;
        for (round, res) in hist.results() {
            rows.push(ReportRow {
                site_id: site.clone(),
                data_size: part.n(),
                round,
                acc_mean: res.mean,
                acc_std: res.std,
            });
        }
    }
    Ok(rows)
}
