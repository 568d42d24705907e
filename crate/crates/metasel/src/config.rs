//! Flat `key = value` run configuration.
//!
//! A config file holds one `key = value` pair per line; blank lines and lines
//! starting with `#` are ignored. Command-line overrides use the same keys
//! and are applied after the file. Unknown keys are rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use metasel_core::cv::CvConfig;
use metasel_core::embed::TsneConfig;
use metasel_core::forest::{ForestConfig, MaxFeatures};
use metasel_core::ga::{GaConfig, MutationRate};
use metasel_core::hier::HierConfig;
use metasel_core::meta::BootstrapConfig;
use metasel_core::synth::SizeQualityConfig;

use crate::error::CliError;

/// Every setting a pipeline command can consume.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub seed: u64,
    pub features: Option<PathBuf>,
    pub phenotypes: Option<PathBuf>,
    pub scan_params: Option<PathBuf>,
    pub synth: SizeQualityConfig,
    pub ga: GaConfig,
    pub forest: ForestConfig,
    pub cv: CvConfig,
    pub hier: HierConfig,
    pub bootstrap: BootstrapConfig,
    pub tsne: TsneConfig,
    /// Write a text dump of each site's final forest during `select`.
    pub dump_forest: bool,
    synth_keys_set: bool,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| invalid(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(invalid(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

fn format_max_features(m: MaxFeatures) -> String {
    match m {
        MaxFeatures::Sqrt => "sqrt".into(),
        MaxFeatures::All => "all".into(),
        MaxFeatures::Fixed(k) => k.to_string(),
    }
}

fn format_r_mut(r: MutationRate) -> String {
    match r {
        MutationRate::Fixed(p) => p.to_string(),
        MutationRate::PerDimension(c) => format!("{c}/d"),
    }
}

impl RunConfig {
    /// Reads `path` (if any) and then applies `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(p) = path {
            let text = fs::read_to_string(p).map_err(|e| CliError::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = split_pair(line).ok_or_else(|| {
                    invalid(format!(
                        "{}:{}: expected key = value",
                        p.display(),
                        lineno + 1
                    ))
                })?;
                cfg.set(k, v)
                    .map_err(|e| invalid(format!("{}:{}: {e}", p.display(), lineno + 1)))?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        if key.starts_with("synth.") {
            self.synth_keys_set = true;
        }
        match key {
            "seed" => self.seed = parse_num(key, v)?,
            "features" => self.features = Some(PathBuf::from(v)),
            "phenotypes" => self.phenotypes = Some(PathBuf::from(v)),
            "scan_params" => self.scan_params = Some(PathBuf::from(v)),
            "synth.sites" => self.synth.n_sites = parse_num(key, v)?,
            "synth.size_min" => self.synth.size_min = parse_num(key, v)?,
            "synth.size_max" => self.synth.size_max = parse_num(key, v)?,
            "synth.quality_slope" => self.synth.quality_slope = parse_num(key, v)?,
            "synth.base_noise" => self.synth.base_noise = parse_num(key, v)?,
            "synth.d" => self.synth.d = parse_num(key, v)?,
            "synth.k_informative" => self.synth.k_informative = parse_num(key, v)?,
            "synth.effect_size" => self.synth.effect_size = parse_num(key, v)?,
            "synth.label_balance" => self.synth.label_balance = parse_num(key, v)?,
            "synth.age_mean" => self.synth.phenotypes.age_mean = parse_num(key, v)?,
            "synth.age_std" => self.synth.phenotypes.age_std = parse_num(key, v)?,
            "synth.age_min" => self.synth.phenotypes.age_min = parse_num(key, v)?,
            "synth.female_prob" => self.synth.phenotypes.female_prob = parse_num(key, v)?,
            "synth.eyes_open_prob" => self.synth.phenotypes.eyes_open_prob = parse_num(key, v)?,
            "ga.n_iter" => self.ga.n_iter = parse_num(key, v)?,
            "ga.n_pop" => self.ga.n_pop = parse_num(key, v)?,
            "ga.r_cross" => self.ga.r_cross = parse_num(key, v)?,
            "ga.r_mut" => {
                self.ga.r_mut = match v.strip_suffix("/d") {
                    Some(c) => MutationRate::PerDimension(parse_num(key, c.trim())?),
                    None => MutationRate::Fixed(parse_num(key, v)?),
                }
            }
            "ga.tournament_size" => self.ga.tournament_size = parse_num(key, v)?,
            "ga.cache" => self.ga.cache = parse_bool(key, v)?,
            "forest.n_trees" => self.forest.n_trees = parse_num(key, v)?,
            "forest.max_features" => {
                self.forest.max_features = match v.to_ascii_lowercase().as_str() {
                    "sqrt" => MaxFeatures::Sqrt,
                    "all" => MaxFeatures::All,
                    _ => MaxFeatures::Fixed(parse_num(key, v)?),
                }
            }
            "forest.min_samples_leaf" => self.forest.min_samples_leaf = parse_num(key, v)?,
            "forest.max_depth" => {
                self.forest.max_depth = if v.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(parse_num(key, v)?)
                }
            }
            "forest.bootstrap" => self.forest.bootstrap = parse_bool(key, v)?,
            "forest.dump" => self.dump_forest = parse_bool(key, v)?,
            "cv.k" => self.cv.k = parse_num(key, v)?,
            "cv.stratified" => self.cv.stratified = parse_bool(key, v)?,
            "hier.epsilon" => self.hier.epsilon = parse_num(key, v)?,
            "hier.max_rounds" => self.hier.max_rounds = parse_num(key, v)?,
            "bootstrap.replicates" => self.bootstrap.replicates = parse_num(key, v)?,
            "bootstrap.fraction" => self.bootstrap.fraction = parse_num(key, v)?,
            "tsne.perplexity" => self.tsne.perplexity = parse_num(key, v)?,
            "tsne.iterations" => self.tsne.iterations = parse_num(key, v)?,
            "tsne.learning_rate" => self.tsne.learning_rate = parse_num(key, v)?,
            "tsne.early_exaggeration" => self.tsne.early_exaggeration = parse_num(key, v)?,
            "tsne.exaggeration_iters" => self.tsne.exaggeration_iters = parse_num(key, v)?,
            "tsne.momentum_initial" => self.tsne.momentum_initial = parse_num(key, v)?,
            "tsne.momentum_final" => self.tsne.momentum_final = parse_num(key, v)?,
            "tsne.momentum_switch" => self.tsne.momentum_switch = parse_num(key, v)?,
            "tsne.init_std" => self.tsne.init_std = parse_num(key, v)?,
            _ => return Err(invalid(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Checks cross-field constraints and every sub-config.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.features.is_some() && self.synth_keys_set {
            return Err(invalid(
                "give either input paths or synth.* parameters, not both",
            ));
        }
        let core = |r: metasel_core::Result<()>| r.map_err(CliError::Core);
        core(self.ga.validate())?;
        core(self.forest.validate())?;
        if self.cv.k < 2 {
            return Err(invalid("cv.k must be at least 2"));
        }
        if self.hier.epsilon.is_nan() || self.hier.epsilon < 0.0 || self.hier.max_rounds == 0 {
            return Err(invalid(
                "hier.epsilon must be >= 0 and hier.max_rounds >= 1",
            ));
        }
        if self.bootstrap.replicates == 0
            || !(self.bootstrap.fraction > 0.0 && self.bootstrap.fraction <= 1.0)
        {
            return Err(invalid(
                "bootstrap.replicates must be >= 1 and bootstrap.fraction in (0, 1]",
            ));
        }
        if self.tsne.iterations == 0 || self.tsne.perplexity <= 1.0 {
            return Err(invalid(
                "tsne.iterations must be >= 1 and tsne.perplexity > 1",
            ));
        }
        Ok(())
    }

    /// The settings that determine results, in a fixed order. Paths, thread
    /// counts and output locations are left out so that reruns elsewhere
    /// echo the same text.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let s = &self.synth;
        let g = &self.ga;
        let f = &self.forest;
        let t = &self.tsne;
        vec![
            ("seed", self.seed.to_string()),
            ("synth.sites", s.n_sites.to_string()),
            ("synth.size_min", s.size_min.to_string()),
            ("synth.size_max", s.size_max.to_string()),
            ("synth.quality_slope", s.quality_slope.to_string()),
            ("synth.base_noise", s.base_noise.to_string()),
            ("synth.d", s.d.to_string()),
            ("synth.k_informative", s.k_informative.to_string()),
            ("synth.effect_size", s.effect_size.to_string()),
            ("synth.label_balance", s.label_balance.to_string()),
            ("synth.age_mean", s.phenotypes.age_mean.to_string()),
            ("synth.age_std", s.phenotypes.age_std.to_string()),
            ("synth.age_min", s.phenotypes.age_min.to_string()),
            ("synth.female_prob", s.phenotypes.female_prob.to_string()),
            (
                "synth.eyes_open_prob",
                s.phenotypes.eyes_open_prob.to_string(),
            ),
            ("ga.n_iter", g.n_iter.to_string()),
            ("ga.n_pop", g.n_pop.to_string()),
            ("ga.r_cross", g.r_cross.to_string()),
            ("ga.r_mut", format_r_mut(g.r_mut)),
            ("ga.tournament_size", g.tournament_size.to_string()),
            ("forest.n_trees", f.n_trees.to_string()),
            ("forest.max_features", format_max_features(f.max_features)),
            ("forest.min_samples_leaf", f.min_samples_leaf.to_string()),
            (
                "forest.max_depth",
                f.max_depth.map_or("none".into(), |d| d.to_string()),
            ),
            ("forest.bootstrap", f.bootstrap.to_string()),
            ("cv.k", self.cv.k.to_string()),
            ("cv.stratified", self.cv.stratified.to_string()),
            ("hier.epsilon", self.hier.epsilon.to_string()),
            ("hier.max_rounds", self.hier.max_rounds.to_string()),
            (
                "bootstrap.replicates",
                self.bootstrap.replicates.to_string(),
            ),
            ("bootstrap.fraction", self.bootstrap.fraction.to_string()),
            ("tsne.perplexity", t.perplexity.to_string()),
            ("tsne.iterations", t.iterations.to_string()),
            ("tsne.learning_rate", t.learning_rate.to_string()),
            ("tsne.early_exaggeration", t.early_exaggeration.to_string()),
            ("tsne.exaggeration_iters", t.exaggeration_iters.to_string()),
            ("tsne.momentum_initial", t.momentum_initial.to_string()),
            ("tsne.momentum_final", t.momentum_final.to_string()),
            ("tsne.momentum_switch", t.momentum_switch.to_string()),
            ("tsne.init_std", t.init_std.to_string()),
        ]
    }

    /// The echo as `key = value` lines, loadable by [`RunConfig::load`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.echo() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Splits `key = value`, trimming both sides.
pub fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    if k.is_empty() {
        return None;
    }
    Some((k, v.trim()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_win_over_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(
            &path,
            "# comment\nga.n_pop = 40\nforest.n_trees = 10\n\nseed=3\n",
        )
        .unwrap();
        let cfg = RunConfig::load(Some(&path), &[("ga.n_pop".into(), "12".into())]).unwrap();
        assert_eq!(cfg.ga.n_pop, 12);
        assert_eq!(cfg.forest.n_trees, 10);
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn echo_round_trips_through_text() {
        let mut cfg = RunConfig::default();
        cfg.set("ga.r_mut", "0.05").unwrap();
        cfg.set("forest.max_depth", "4").unwrap();
        cfg.set("forest.max_features", "all").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("echo.cfg");
        fs::write(&path, cfg.to_text()).unwrap();
        let back = RunConfig::load(Some(&path), &[]).unwrap();
        assert_eq!(back.echo(), cfg.echo());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("ga.population", "3").is_err());
        assert!(cfg.set("ga.n_pop", "many").is_err());
        assert!(RunConfig::load(None, &[("ga.n_pop".into(), "7".into())]).is_err());
    }

    #[test]
    fn inputs_and_synth_parameters_are_exclusive() {
        let err = RunConfig::load(
            None,
            &[
                ("features".into(), "x.csv".into()),
                ("synth.d".into(), "4".into()),
            ],
        );
        assert!(err.is_err());
    }
}
