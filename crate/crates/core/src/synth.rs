//! Synthetic multi-site datasets with planted informative features.
//!
//! Informative columns are class-conditional Gaussians with means
//! `±effect_size / 2` and standard deviation equal to the site's
//! `noise_scale`; all other columns are independent standard Gaussians.
//! For a single informative feature the Bayes-optimal accuracy is therefore
//! `Φ(effect_size / (2 · noise_scale))` (see [`bayes_accuracy`]).
//!
//! Every site draws from its own stream `(seed, site index)`; phenotypes and
//! scan parameters use separate streams, so no part of the output depends on
//! generation order.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::rng::{self, tag};
use crate::special::normal_cdf;
use crate::tabular::{
    EyeStatus, FeatureTable, Label, Mask, Matrix, PhenotypeRecord, ScanParamsRecord, Sex,
};
use crate::{par, Error, Result};

/// Distribution of the generated phenotype columns. Phenotypes are drawn
/// independently of the features.
#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypeModel {
    pub age_mean: f64,
    pub age_std: f64,
    pub age_min: f64,
    pub female_prob: f64,
    pub eyes_open_prob: f64,
}

impl Default for PhenotypeModel {
    fn default() -> Self {
        Self {
            age_mean: 17.0,
            age_std: 7.0,
            age_min: 6.0,
            female_prob: 0.15,
            eyes_open_prob: 0.65,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Subjects per site; the number of sites is `sizes.len()`.
    pub sizes: Vec<usize>,
    /// Per-site noise multiplier (the data-quality knob), parallel to `sizes`.
    pub noise_scales: Vec<f64>,
    pub d: usize,
    pub k_informative: usize,
    pub effect_size: f64,
    /// Fraction of subjects labelled ASD.
    pub label_balance: f64,
    pub phenotypes: PhenotypeModel,
    pub seed: u64,
}

impl SynthConfig {
    /// Single-site config with unit noise.
    pub fn single_site(
        n: usize,
        d: usize,
        k_informative: usize,
        effect_size: f64,
        seed: u64,
    ) -> Self {
        Self {
            sizes: alloc::vec![n],
            noise_scales: alloc::vec![1.0],
            d,
            k_informative,
            effect_size,
            label_balance: 0.5,
            phenotypes: PhenotypeModel::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.sizes.is_empty() {
            return bad("at least one site is required".into());
        }
        if self.noise_scales.len() != self.sizes.len() {
            return bad(format!(
                "{} noise scales for {} sites",
                self.noise_scales.len(),
                self.sizes.len()
            ));
        }
        if let Some(n) = self.sizes.iter().find(|&&n| n < 2) {
            return bad(format!("site size {n} is below 2"));
        }
        if !self.noise_scales.iter().all(|&s| s.is_finite() && s > 0.0) {
            return bad("noise scales must be positive".into());
        }
        if self.d == 0 || self.k_informative == 0 || self.k_informative > self.d {
            return bad(format!(
                "need 1 <= k_informative ({}) <= d ({})",
                self.k_informative, self.d
            ));
        }
        if !(self.effect_size.is_finite() && self.effect_size >= 0.0) {
            return bad("effect_size must be non-negative".into());
        }
        if !(self.label_balance > 0.0 && self.label_balance < 1.0) {
            return bad("label_balance must lie in (0, 1)".into());
        }
        let p = &self.phenotypes;
        if !(p.age_std >= 0.0 && p.age_min > 0.0)
            || !(0.0..=1.0).contains(&p.female_prob)
            || !(0.0..=1.0).contains(&p.eyes_open_prob)
        {
            return bad("invalid phenotype model".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub table: FeatureTable,
    pub truth_mask: Mask,
    /// Phenotypes grouped by site, in site order.
    pub phenotypes: Vec<(String, Vec<PhenotypeRecord>)>,
    pub scan_params: Vec<ScanParamsRecord>,
}

impl SynthDataset {
    pub fn all_phenotypes(&self) -> Vec<PhenotypeRecord> {
        self.phenotypes
            .iter()
            .flat_map(|(_, p)| p.iter().cloned())
            .collect()
    }
}

pub fn site_name(s: usize) -> String {
    format!("SITE{:02}", s + 1)
}

/// Vendor strings used for synthetic scan parameters.
pub const VENDORS: [&str; 7] = [
    "Siemens Magnetom TrioTim",
    "Siemens Magnetom Verio",
    "Philips Achieva 3T",
    "Siemens Magnetom Allegra",
    "General Electric Discovery MR750 3T",
    "Philips Intera 3T",
    "General Electric Signa 3T",
];

struct SiteBlock {
    ids: Vec<String>,
    labels: Vec<Label>,
    values: Vec<f64>,
    phenotypes: Vec<PhenotypeRecord>,
    scan: ScanParamsRecord,
}

pub fn generate(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let d = config.d;

    let mut cols: Vec<usize> = (0..d).collect();
    rng::shuffle(&mut rng::stream(config.seed, &[tag::TRUTH]), &mut cols);
    let truth_mask = Mask::from_indices(d, &cols[..config.k_informative]);

    let blocks = par::map_indices(config.sizes.len(), |s| site_block(config, &truth_mask, s));
    let blocks = blocks.into_iter().collect::<Result<Vec<_>>>()?;

    let n: usize = config.sizes.iter().sum();
    let mut ids = Vec::with_capacity(n);
    let mut sites = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * d);
    let mut phenotypes = Vec::with_capacity(blocks.len());
    let mut scan_params = Vec::with_capacity(blocks.len());
    for (s, b) in blocks.into_iter().enumerate() {
        let name = site_name(s);
        sites.extend(core::iter::repeat_n(name.clone(), b.ids.len()));
        ids.extend(b.ids);
        labels.extend(b.labels);
        values.extend(b.values);
        phenotypes.push((name, b.phenotypes));
        scan_params.push(b.scan);
    }
    let table = FeatureTable::new(
        ids,
        sites,
        Matrix::new(n, d, values)?,
        labels,
        (1..=d).map(|j| format!("f_{j}")).collect(),
    )?;
    Ok(SynthDataset {
        table,
        truth_mask,
        phenotypes,
        scan_params,
    })
}

fn site_block(config: &SynthConfig, truth: &Mask, s: usize) -> Result<SiteBlock> {
    let n = config.sizes[s];
    let d = config.d;
    let noise = config.noise_scales[s];
    let name = site_name(s);
    let mut rng = rng::stream(config.seed, &[tag::SITE, s as u64]);

    let n_asd = (libm::round(config.label_balance * n as f64) as usize).clamp(1, n - 1);
    let mut labels: Vec<Label> = (0..n)
        .map(|i| if i < n_asd { Label::Asd } else { Label::Nt })
        .collect();
    rng::shuffle(&mut rng, &mut labels);

    let half = config.effect_size / 2.0;
    let mut values = Vec::with_capacity(n * d);
    for &label in &labels {
        let sign = if label == Label::Asd { 1.0 } else { -1.0 };
        for j in 0..d {
            let z = rng::normal(&mut rng);
            values.push(if truth.get(j) {
                sign * half + noise * z
            } else {
                z
            });
        }
    }

    let ids: Vec<String> = (0..n).map(|i| format!("{name}_{i:04}")).collect();

    let pm = &config.phenotypes;
    let mut prng = rng::stream(config.seed, &[tag::PHENO, s as u64]);
    let phenotypes = ids
        .iter()
        .map(|id| {
            let age = (pm.age_mean + pm.age_std * rng::normal(&mut prng)).max(pm.age_min);
            let sex = if rng::unit(&mut prng) < pm.female_prob {
                Sex::Female
            } else {
                Sex::Male
            };
            let eye = if rng::unit(&mut prng) < pm.eyes_open_prob {
                EyeStatus::Open
            } else {
                EyeStatus::Closed
            };
            PhenotypeRecord::new(id.clone(), age, sex, eye)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut srng = rng::stream(config.seed, &[tag::SCAN, s as u64]);
    let vendor = VENDORS[rng::index(&mut srng, VENDORS.len())];
    let tr = 1.2 + 1.4 * rng::unit(&mut srng);
    let te = 1.7e-3 + 2.9e-3 * rng::unit(&mut srng);
    let ti = 0.6 + 0.5 * rng::unit(&mut srng);
    let fa = (7 + rng::index(&mut srng, 9)) as f64;
    let scan = ScanParamsRecord::new(name, vendor.into(), Some(tr), Some(te), Some(ti), Some(fa))?;

    Ok(SiteBlock {
        ids,
        labels,
        values,
        phenotypes,
        scan,
    })
}

/// Bayes-optimal accuracy of one informative feature with the given mean
/// separation and noise standard deviation.
pub fn bayes_accuracy(effect_size: f64, noise_scale: f64) -> f64 {
    normal_cdf(effect_size / (2.0 * noise_scale))
}

/// Multi-site study in which site noise grows with site size:
/// `noise_scale = base_noise · (1 + quality_slope · normalized_size)` where
/// `normalized_size = (size − size_min) / (size_max − size_min)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeQualityConfig {
    pub n_sites: usize,
    pub size_min: usize,
    pub size_max: usize,
    pub quality_slope: f64,
    pub base_noise: f64,
    pub d: usize,
    pub k_informative: usize,
    pub effect_size: f64,
    pub label_balance: f64,
    pub phenotypes: PhenotypeModel,
    pub seed: u64,
}

impl Default for SizeQualityConfig {
    fn default() -> Self {
        // site sizes span 26..184 subjects over 20 sites
        Self {
            n_sites: 20,
            size_min: 26,
            size_max: 184,
            quality_slope: 2.0,
            base_noise: 1.0,
            d: 8,
            k_informative: 2,
            effect_size: 3.0,
            label_balance: 0.5,
            phenotypes: PhenotypeModel::default(),
            seed: 0,
        }
    }
}

/// The per-site schedule a size-quality study was generated with.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeQualitySchedule {
    pub sizes: Vec<usize>,
    pub normalized_sizes: Vec<f64>,
    pub noise_scales: Vec<f64>,
}

/// Evenly spaced site sizes over `[size_min, size_max]` (rounded).
pub fn spread_sizes(n_sites: usize, size_min: usize, size_max: usize) -> Vec<usize> {
    if n_sites == 1 {
        return alloc::vec![size_min];
    }
    let span = (size_max - size_min) as f64;
    (0..n_sites)
        .map(|i| size_min + libm::round(span * i as f64 / (n_sites - 1) as f64) as usize)
        .collect()
}

pub fn generate_size_quality_study(
    config: &SizeQualityConfig,
) -> Result<(SynthDataset, SizeQualitySchedule)> {
    if config.n_sites == 0 {
        return Err(Error::InvalidConfig("n_sites must be at least 1".into()));
    }
    if config.size_min > config.size_max {
        return Err(Error::InvalidConfig("size_min exceeds size_max".into()));
    }
    if !config.quality_slope.is_finite() {
        return Err(Error::InvalidConfig("quality_slope must be finite".into()));
    }
    let degenerate = config.size_min == config.size_max || config.n_sites == 1;
    if degenerate && config.quality_slope != 0.0 {
        return Err(Error::InvalidConfig(
            "a non-zero quality_slope needs a non-degenerate size range".into(),
        ));
    }
    let sizes = spread_sizes(config.n_sites, config.size_min, config.size_max);
    let normalized_sizes: Vec<f64> = sizes
        .iter()
        .map(|&s| {
            if degenerate {
                0.0
            } else {
                (s - config.size_min) as f64 / (config.size_max - config.size_min) as f64
            }
        })
        .collect();
    let noise_scales: Vec<f64> = normalized_sizes
        .iter()
        .map(|&z| config.base_noise * (1.0 + config.quality_slope * z))
        .collect();
    let synth = SynthConfig {
        sizes: sizes.clone(),
        noise_scales: noise_scales.clone(),
        d: config.d,
        k_informative: config.k_informative,
        effect_size: config.effect_size,
        label_balance: config.label_balance,
        phenotypes: config.phenotypes.clone(),
        seed: config.seed,
    };
    let dataset = generate(&synth)?;
    Ok((
        dataset,
        SizeQualitySchedule {
            sizes,
            normalized_sizes,
            noise_scales,
        },
    ))
}
