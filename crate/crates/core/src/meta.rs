//! Meta-data statistics: Pearson correlation with two-sided p-values,
//! per-site phenotype summaries, and within-site subsampling replicates.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::cv::{cv_accuracy, CvConfig};
use crate::forest::ForestConfig;
use crate::rng::{self, tag};
use crate::special::student_t_two_sided;
use crate::tabular::{FeatureTable, Label, Mask, PhenotypeRecord, Sex};
use crate::{par, Error, Result, Warning};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Sample Pearson correlation coefficient.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "{n} pairs, need at least 3"
        )));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Two-sided p-value for the null of zero correlation, from
/// `t = r √((n − 2) / (1 − r²))` on `n − 2` degrees of freedom.
pub fn pearson_p(r: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "{n} pairs, need at least 3"
        )));
    }
    if r.is_nan() || r.abs() > 1.0 {
        return Err(Error::UndefinedCorrelation(format!(
            "|r| = {} exceeds 1",
            r.abs()
        )));
    }
    if r.abs() == 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = r * libm::sqrt(df / (1.0 - r * r));
    Ok(student_t_two_sided(t, df).clamp(0.0, 1.0))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    let r = pearson_r(x, y)?;
    Ok(CorrelationResult {
        r,
        p_value: pearson_p(r, x.len())?,
        n: x.len(),
    })
}

/// Per-site phenotype summary of the ASD group, paired with an accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteStats {
    pub site_id: String,
    /// Site data size (all subjects, both groups).
    pub n: usize,
    pub mean_age: f64,
    /// Sample standard deviation (divisor n − 1); 0 for a single subject.
    pub std_age: f64,
    /// `N_female / N_male`; `None` when the group has no males.
    pub fm_ratio: Option<f64>,
    /// Median eye status code, one of 1, 1.5, 2.
    pub eye_median: f64,
    pub accuracy: f64,
}

/// Site-level quantities that can be correlated with accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Metric {
    Size,
    MeanAge,
    StdAge,
    FmRatio,
    EyeMedian,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Size,
        Metric::MeanAge,
        Metric::StdAge,
        Metric::FmRatio,
        Metric::EyeMedian,
    ];

    /// The four phenotype metrics.
    pub const PHENOTYPE: [Metric; 4] = [
        Metric::MeanAge,
        Metric::StdAge,
        Metric::FmRatio,
        Metric::EyeMedian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Size => "size",
            Metric::MeanAge => "mean_age",
            Metric::StdAge => "age_std",
            Metric::FmRatio => "fm_ratio",
            Metric::EyeMedian => "eye_median",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn value(self, s: &SiteStats) -> Option<f64> {
        match self {
            Metric::Size => Some(s.n as f64),
            Metric::MeanAge => Some(s.mean_age),
            Metric::StdAge => Some(s.std_age),
            Metric::FmRatio => s.fm_ratio,
            Metric::EyeMedian => Some(s.eye_median),
        }
    }
}

/// Summarizes `records` (the ASD members of one site or subsample).
pub fn phenotype_stats(
    site_id: &str,
    n: usize,
    records: &[&PhenotypeRecord],
    accuracy: f64,
) -> Result<(SiteStats, Option<Warning>)> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let m = records.len() as f64;
    let mean_age = records.iter().map(|r| r.age_at_scan).sum::<f64>() / m;
    let std_age = if records.len() > 1 {
        let ss: f64 = records
            .iter()
            .map(|r| (r.age_at_scan - mean_age) * (r.age_at_scan - mean_age))
            .sum();
        libm::sqrt(ss / (m - 1.0))
    } else {
        0.0
    };
    let females = records.iter().filter(|r| r.sex == Sex::Female).count();
    let males = records.len() - females;
    let (fm_ratio, warning) = if males == 0 {
        (
            None,
            Some(Warning(format!(
                "site {site_id}: no males in group, female/male ratio undefined"
            ))),
        )
    } else {
        (Some(females as f64 / males as f64), None)
    };
    let mut eyes: Vec<u8> = records.iter().map(|r| r.eye_status.code()).collect();
    eyes.sort_unstable();
    let mid = eyes.len() / 2;
    let eye_median = if eyes.len() % 2 == 1 {
        eyes[mid] as f64
    } else {
        (eyes[mid - 1] as f64 + eyes[mid] as f64) / 2.0
    };
    Ok((
        SiteStats {
            site_id: site_id.into(),
            n,
            mean_age,
            std_age,
            fm_ratio,
            eye_median,
            accuracy,
        },
        warning,
    ))
}

/// Summary of a whole site's ASD group.
pub fn site_stats(
    site_id: &str,
    table: &FeatureTable,
    phenotypes: &[PhenotypeRecord],
    accuracy: f64,
) -> Result<(SiteStats, Option<Warning>)> {
    let lookup = index_phenotypes(phenotypes);
    let rows: Vec<usize> = (0..table.n()).collect();
    let asd = asd_records(table, &rows, &lookup)?;
    phenotype_stats(site_id, table.n(), &asd, accuracy)
}

fn index_phenotypes(records: &[PhenotypeRecord]) -> BTreeMap<&str, &PhenotypeRecord> {
    records.iter().map(|r| (r.subject_id.as_str(), r)).collect()
}

fn asd_records<'a>(
    table: &FeatureTable,
    rows: &[usize],
    lookup: &BTreeMap<&str, &'a PhenotypeRecord>,
) -> Result<Vec<&'a PhenotypeRecord>> {
    rows.iter()
        .filter(|&&i| table.labels()[i] == Label::Asd)
        .map(|&i| {
            let id = &table.subject_ids()[i];
            lookup.get(id.as_str()).copied().ok_or_else(|| {
                Error::InvalidRecord(format!("no phenotype record for subject {id}"))
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub fraction: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 50,
            fraction: 0.5,
        }
    }
}

impl BootstrapConfig {
    pub fn sample_size(&self, n: usize) -> usize {
        (libm::ceil(self.fraction * n as f64) as usize).clamp(1, n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub index: usize,
    /// Row indices into the site table, ascending.
    pub rows: Vec<usize>,
    pub stats: SiteStats,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BootstrapOutcome {
    pub replicates: Vec<Replicate>,
    pub warnings: Vec<Warning>,
}

/// Draws `replicates` subsamples of `ceil(fraction · n)` subjects without
/// replacement from one site and, for each, measures the cross-validated
/// accuracy of the masked subsample and summarizes the phenotypes of its ASD
/// members. Replicate `r` uses the stream `(seed, r)`.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_site(
    site_id: &str,
    table: &FeatureTable,
    phenotypes: &[PhenotypeRecord],
    mask: &Mask,
    config: &BootstrapConfig,
    forest: &ForestConfig,
    cv: &CvConfig,
    seed: u64,
) -> Result<BootstrapOutcome> {
    if config.replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be at least 1".into()));
    }
    if !(config.fraction > 0.0 && config.fraction <= 1.0) {
        return Err(Error::InvalidConfig("fraction must lie in (0, 1]".into()));
    }
    let n = table.n();
    let m = config.sample_size(n);
    if m < cv.k {
        return Err(Error::TooFewRows { n: m, k: cv.k });
    }
    let lookup = index_phenotypes(phenotypes);
    let results = par::map_indices(
        config.replicates,
        |r| -> Result<core::result::Result<Replicate, Warning>> {
            let mut rng = rng::stream(seed, &[tag::REPLICATE, r as u64]);
            let mut perm: Vec<usize> = (0..n).collect();
            for i in 0..m {
                let j = i + rng::index(&mut rng, n - i);
                perm.swap(i, j);
            }
            let mut rows = perm[..m].to_vec();
            rows.sort_unstable();
            let asd = asd_records(table, &rows, &lookup)?;
            if asd.is_empty() {
                return Ok(Err(Warning(format!(
                    "site {site_id}: replicate {r} has no ASD members, skipped"
                ))));
            }
            let sub = table.select_rows(&rows);
            let cv_seed = rng::derive(seed, &[tag::REPLICATE, r as u64, tag::FOLDS]);
            let acc = cv_accuracy(&sub, mask, forest, cv, cv_seed)?;
            let (stats, _) = phenotype_stats(site_id, n, &asd, acc.mean)?;
            Ok(Ok(Replicate {
                index: r,
                rows,
                stats,
            }))
        },
    );
    let mut out = BootstrapOutcome::default();
    for res in results {
        match res? {
            Ok(rep) => {
                if rep.stats.fm_ratio.is_none() {
                    out.warnings.push(Warning(format!(
                        "site {site_id}: replicate {} has no males, female/male ratio undefined",
                        rep.index
                    )));
                }
                out.replicates.push(rep);
            }
            Err(w) => out.warnings.push(w),
        }
    }
    Ok(out)
}

/// One row of a (metric, accuracy) pair table.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub metric: Metric,
    pub site_id: String,
    pub replicate: usize,
    pub value: Option<f64>,
    pub accuracy: f64,
}

/// Pools `(metric, accuracy)` pairs over all sites' replicates.
pub fn pair_table(metric: Metric, replicates: &[(String, Vec<Replicate>)]) -> Vec<PairRow> {
    replicates
        .iter()
        .flat_map(|(site, reps)| {
            reps.iter().map(move |rep| PairRow {
                metric,
                site_id: site.clone(),
                replicate: rep.index,
                value: metric.value(&rep.stats),
                accuracy: rep.stats.accuracy,
            })
        })
        .collect()
}

/// Correlates metric values with accuracies, skipping undefined metric
/// values. Returns the result and the number of skipped rows.
pub fn correlate(pairs: &[(Option<f64>, f64)]) -> Result<(CorrelationResult, usize)> {
    let (x, y): (Vec<f64>, Vec<f64>) = pairs
        .iter()
        .filter_map(|&(m, a)| m.filter(|v| v.is_finite()).map(|v| (v, a)))
        .unzip();
    let skipped = pairs.len() - x.len();
    if x.len() < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "{} valid pairs, need at least 3",
            x.len()
        )));
    }
    Ok((pearson(&x, &y)?, skipped))
}

pub fn correlate_rows(rows: &[PairRow]) -> Result<(CorrelationResult, usize)> {
    let pairs: Vec<(Option<f64>, f64)> = rows.iter().map(|r| (r.value, r.accuracy)).collect();
    correlate(&pairs)
}
