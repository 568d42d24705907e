//! Pipeline commands. Each reads its inputs from the configured paths or the
//! output directory and writes its artifacts back into the output directory.

use std::path::PathBuf;

use log::{info, warn};
use serde_json::{json, Value};

use metasel_core::embed::{encode_scan_conditions, standardize, tsne, TsneConfig};
use metasel_core::forest;
use metasel_core::hier::{run_sites, site_wise_eval, RoundHistory};
use metasel_core::meta::{
    bootstrap_site, correlate, correlate_rows, pair_table, site_stats, Metric, Replicate,
};
use metasel_core::rng::{self, tag};
use metasel_core::synth::generate_size_quality_study;
use metasel_core::tabular::{PhenotypeRecord, ScanParamsRecord};
use metasel_core::{FeatureTable, Label};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{self, EmbeddingRow, Header};

pub const FEATURES: &str = "features.csv";
pub const PHENOTYPES: &str = "phenotypes.csv";
pub const SCAN_PARAMS: &str = "scan_params.csv";
pub const TRUTH_MASK: &str = "truth_mask.txt";
pub const SCHEDULE: &str = "schedule.csv";
pub const ROUNDS_DIR: &str = "rounds";
pub const FOREST_DIR: &str = "forests";
pub const REPORT: &str = "report.csv";
pub const EMBEDDING: &str = "embedding.csv";
pub const KL_HISTORY: &str = "kl_history.csv";
pub const BUNDLE: &str = "bundle.json";

pub fn pairs_file(m: Metric) -> String {
    format!("pairs_{}.csv", m.name())
}

pub fn correlation_file(m: Metric) -> String {
    format!("correlation_{}.json", m.name())
}

pub fn site_correlation_file(m: Metric) -> String {
    format!("site_correlation_{}.json", m.name())
}

/// File name for a site's artifacts: letters, digits, `-` and `_` kept,
/// everything else replaced by `_`.
pub fn site_file(site: &str, ext: &str) -> String {
    let clean: String = site
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{clean}.{ext}")
}

/// Configuration plus output directory shared by every command.
pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(config: RunConfig, out_dir: PathBuf) -> Self {
        Self { config, out_dir }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn header(&self) -> Header {
        Header::new(self.config.seed, &self.config.echo())
    }

    fn provenance(&self) -> Value {
        io::json_provenance(self.config.seed, &self.config.echo())
    }

    fn input(&self, configured: &Option<PathBuf>, default: &str) -> PathBuf {
        configured.clone().unwrap_or_else(|| self.out(default))
    }

    fn features_path(&self) -> PathBuf {
        self.input(&self.config.features, FEATURES)
    }

    fn phenotypes_path(&self) -> PathBuf {
        self.input(&self.config.phenotypes, PHENOTYPES)
    }

    fn scan_params_path(&self) -> PathBuf {
        self.input(&self.config.scan_params, SCAN_PARAMS)
    }

    fn require(&self, paths: &[PathBuf]) -> Result<()> {
        let missing: Vec<String> = paths
            .iter()
            .filter(|p| !p.exists())
            .map(|p| p.display().to_string())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CliError::MissingArtifacts(missing))
        }
    }

    fn load_table(&self) -> Result<FeatureTable> {
        let p = self.features_path();
        self.require(std::slice::from_ref(&p))?;
        io::load_feature_table(&p)
    }

    fn load_histories(&self, table: &FeatureTable) -> Result<Vec<(String, RoundHistory)>> {
        let sites = table.partition_by_site();
        let paths: Vec<PathBuf> = sites
            .iter()
            .map(|(s, _)| self.out_dir.join(ROUNDS_DIR).join(site_file(s, "csv")))
            .collect();
        self.require(&paths)?;
        paths.iter().map(|p| io::load_round_history(p)).collect()
    }
}

/// Checks that every input present parses and validates. Returns a summary.
pub fn validate(ctx: &Context) -> Result<Value> {
    let table = ctx.load_table()?;
    let sites = table.partition_by_site();
    let mut summary = json!({
        "features": {
            "path": ctx.features_path().display().to_string(),
            "subjects": table.n(),
            "features": table.d(),
            "sites": sites.len(),
            "asd": table.count_label(Label::Asd),
            "nt": table.count_label(Label::Nt),
        }
    });
    let pheno_path = ctx.phenotypes_path();
    if pheno_path.exists() {
        let records = io::load_phenotypes(&pheno_path)?;
        let known: std::collections::BTreeSet<&str> =
            records.iter().map(|r| r.subject_id.as_str()).collect();
        let missing = table
            .subject_ids()
            .iter()
            .filter(|id| !known.contains(id.as_str()))
            .count();
        summary["phenotypes"] = json!({
            "path": pheno_path.display().to_string(),
            "records": records.len(),
            "subjects_without_record": missing,
        });
    }
    let scan_path = ctx.scan_params_path();
    if scan_path.exists() {
        let records = io::load_scan_params(&scan_path)?;
        let with_na = records
            .iter()
            .filter(|r| {
                r.tr_sec.is_none() || r.te_sec.is_none() || r.ti_sec.is_none() || r.fa_deg.is_none()
            })
            .count();
        summary["scan_params"] = json!({
            "path": scan_path.display().to_string(),
            "records": records.len(),
            "records_with_missing_values": with_na,
        });
    }
    Ok(summary)
}

/// Generates a size-quality study and writes it as input files.
pub fn synth(ctx: &Context) -> Result<()> {
    let cfg = metasel_core::synth::SizeQualityConfig {
        seed: ctx.config.seed,
        ..ctx.config.synth.clone()
    };
    let (data, schedule) = generate_size_quality_study(&cfg)?;
    let h = ctx.header();
    io::save_feature_table(&ctx.out(FEATURES), &h, &data.table)?;
    io::save_phenotypes(&ctx.out(PHENOTYPES), &h, &data.all_phenotypes())?;
    io::save_scan_params(&ctx.out(SCAN_PARAMS), &h, &data.scan_params)?;
    io::save_mask(&ctx.out(TRUTH_MASK), &h, &data.truth_mask)?;
    let sites: Vec<String> = data.phenotypes.iter().map(|(s, _)| s.clone()).collect();
    io::save_schedule(
        &ctx.out(SCHEDULE),
        &h,
        &sites,
        &schedule.sizes,
        &schedule.noise_scales,
    )?;
    info!(
        "synth: {} subjects, {} sites, truth mask {}",
        data.table.n(),
        sites.len(),
        data.truth_mask
    );
    Ok(())
}

/// Hierarchical selection on every site, then the site-wise report.
pub fn select(ctx: &Context) -> Result<()> {
    let table = ctx.load_table()?;
    let c = &ctx.config;
    let ga = metasel_core::ga::GaConfig {
        seed: c.seed,
        ..c.ga.clone()
    };
    let histories = run_sites(&table, &ga, &c.forest, &c.cv, &c.hier, &|site, round, g| {
        info!(
            "site={site} round={round} generation={} best={:.4} mean={:.4} cache_hit_rate={:.3}",
            g.generation, g.best_fitness, g.mean_fitness, g.cache_hit_rate
        );
    })?;
    let h = ctx.header();
    for (site, hist) in &histories {
        let path = ctx.out_dir.join(ROUNDS_DIR).join(site_file(site, "csv"));
        io::save_round_history(&path, &h, site, hist)?;
    }
    let rows = site_wise_eval(&table, &histories)?;
    io::save_report(&ctx.out(REPORT), &h, &rows)?;
    if c.dump_forest {
        for (i, (site, part)) in table.partition_by_site().into_iter().enumerate() {
            let (_, hist) = &histories[i];
            let masked = part.apply_mask(hist.final_mask())?;
            let fcfg = c
                .forest
                .with_seed(rng::derive(c.seed, &[tag::SITE, i as u64, tag::TREE]));
            let model = forest::fit(masked.features(), masked.labels(), &fcfg)?;
            let mut text = String::new();
            for l in &h.lines {
                text.push_str(&format!("# {l}\n"));
            }
            text.push_str(&format!(
                "# site = {site}\n# mask = {}\n",
                hist.final_mask()
            ));
            text.push_str(&model.dump());
            io::write_atomic(
                &ctx.out_dir.join(FOREST_DIR).join(site_file(&site, "txt")),
                text.as_bytes(),
            )?;
        }
    }
    Ok(())
}

/// Subsamples every site with its final mask and writes one pair table per
/// metric.
pub fn bootstrap(ctx: &Context) -> Result<()> {
    let table = ctx.load_table()?;
    let pheno_path = ctx.phenotypes_path();
    ctx.require(std::slice::from_ref(&pheno_path))?;
    let phenotypes = io::load_phenotypes(&pheno_path)?;
    let histories = ctx.load_histories(&table)?;
    let c = &ctx.config;
    let mut all: Vec<(String, Vec<Replicate>)> = Vec::new();
    for (i, (site, part)) in table.partition_by_site().into_iter().enumerate() {
        let (_, hist) = histories
            .iter()
            .find(|(s, _)| *s == site)
            .ok_or_else(|| CliError::MissingArtifacts(vec![format!("round history for {site}")]))?;
        let seed = rng::derive(c.seed, &[tag::SITE, i as u64, tag::REPLICATE]);
        let out = bootstrap_site(
            &site,
            &part,
            &phenotypes,
            hist.final_mask(),
            &c.bootstrap,
            &c.forest,
            &c.cv,
            seed,
        )?;
        for w in &out.warnings {
            warn!("{w}");
        }
        all.push((site, out.replicates));
    }
    let h = ctx.header();
    for m in Metric::ALL {
        io::save_pairs(&ctx.out(&pairs_file(m)), &h, &pair_table(m, &all))?;
    }
    Ok(())
}

fn correlation_json(
    ctx: &Context,
    metric: Metric,
    level: &str,
    result: metasel_core::Result<(metasel_core::meta::CorrelationResult, usize)>,
) -> Value {
    let mut v = match result {
        Ok((r, skipped)) => json!({
            "r": r.r,
            "p": r.p_value,
            "n": r.n,
            "skipped": skipped,
        }),
        Err(e) => {
            warn!("{level} correlation for {}: {e}", metric.name());
            json!({ "r": null, "p": null, "n": 0, "error": e.to_string() })
        }
    };
    v["metric"] = json!(metric.name());
    v["level"] = json!(level);
    v["provenance"] = ctx.provenance();
    v
}

/// Pearson correlations of every metric with accuracy: pooled bootstrap
/// pairs and, when the report exists, one point per site using PRE_last.
pub fn correlate_cmd(ctx: &Context) -> Result<()> {
    let pair_paths: Vec<PathBuf> = Metric::ALL
        .iter()
        .map(|&m| ctx.out(&pairs_file(m)))
        .collect();
    let report_path = ctx.out(REPORT);
    ctx.require(&pair_paths)?;
    for (m, path) in Metric::ALL.into_iter().zip(&pair_paths) {
        let rows = io::load_pairs(path)?;
        let v = correlation_json(ctx, m, "bootstrap", correlate_rows(&rows));
        io::save_json(&ctx.out(&correlation_file(m)), &v)?;
    }
    if report_path.exists() {
        let report = io::load_report(&report_path)?;
        let last = io::pre_last(&report);
        let table = ctx.load_table()?;
        let parts = table.partition_by_site();
        let pheno_path = ctx.phenotypes_path();
        let phenotypes: Vec<PhenotypeRecord> = if pheno_path.exists() {
            io::load_phenotypes(&pheno_path)?
        } else {
            Vec::new()
        };
        let mut stats = Vec::new();
        for (site, size, acc) in &last {
            let s = match parts.iter().find(|(s, _)| s == site) {
                Some((_, part)) if !phenotypes.is_empty() => {
                    site_stats(site, part, &phenotypes, *acc)
                        .map(|(s, _)| Some(s))
                        .unwrap_or_else(|e| {
                            warn!("site {site}: {e}");
                            None
                        })
                }
                _ => None,
            };
            stats.push((*size, *acc, s));
        }
        for m in Metric::ALL {
            let pairs: Vec<(Option<f64>, f64)> = stats
                .iter()
                .map(|(size, acc, s)| match m {
                    Metric::Size => (Some(*size as f64), *acc),
                    _ => (s.as_ref().and_then(|s| m.value(s)), *acc),
                })
                .collect();
            let v = correlation_json(ctx, m, "site", correlate(&pairs));
            io::save_json(&ctx.out(&site_correlation_file(m)), &v)?;
        }
    }
    Ok(())
}

/// Embeds the sites' scan conditions in 2-D.
pub fn embed(ctx: &Context) -> Result<()> {
    let scan_path = ctx.scan_params_path();
    ctx.require(std::slice::from_ref(&scan_path))?;
    let records: Vec<ScanParamsRecord> = io::load_scan_params(&scan_path)?;
    let encoded = encode_scan_conditions(&records)?;
    for w in &encoded.warnings {
        warn!("{w}");
    }
    let (z, warnings) = standardize(&encoded.matrix())?;
    for w in &warnings {
        warn!("{w}");
    }
    let cfg = TsneConfig {
        seed: rng::derive(ctx.config.seed, &[tag::EMBED]),
        ..ctx.config.tsne.clone()
    };
    let out = tsne(&z, &cfg)?;
    let report_path = ctx.out(REPORT);
    let accuracy = if report_path.exists() {
        io::pre_last(&io::load_report(&report_path)?)
    } else {
        Vec::new()
    };
    let rows: Vec<EmbeddingRow> = encoded
        .vectors
        .iter()
        .enumerate()
        .map(|(i, v)| EmbeddingRow {
            site_id: v.site_id.clone(),
            x: out.embedding.get(i, 0),
            y: out.embedding.get(i, 1),
            accuracy: accuracy
                .iter()
                .find(|(s, ..)| *s == v.site_id)
                .map(|(_, _, a)| *a),
        })
        .collect();
    let h = ctx.header();
    io::save_embedding(&ctx.out(EMBEDDING), &h, &rows)?;
    io::save_kl_history(&ctx.out(KL_HISTORY), &h, &out.kl_history)?;
    info!("embed: {} sites, final KL {:.4}", rows.len(), out.final_kl);
    Ok(())
}

/// Every artifact `report` aggregates, relative to the output directory.
pub fn report_artifacts() -> Vec<String> {
    let mut names = vec![REPORT.to_string()];
    for m in Metric::ALL {
        names.push(pairs_file(m));
        names.push(correlation_file(m));
        names.push(site_correlation_file(m));
    }
    names.push(EMBEDDING.to_string());
    names.push(KL_HISTORY.to_string());
    names
}

/// Collects all artifacts into one JSON bundle.
pub fn report(ctx: &Context) -> Result<()> {
    let names = report_artifacts();
    let paths: Vec<PathBuf> = names.iter().map(|n| ctx.out(n)).collect();
    ctx.require(&paths)?;
    let rows = io::load_report(&ctx.out(REPORT))?;
    let report_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "site_id": r.site_id,
                "data_size": r.data_size,
                "round": r.round,
                "acc_mean": r.acc_mean,
                "acc_std": r.acc_std,
            })
        })
        .collect();
    let mut rounds = serde_json::Map::new();
    let rounds_dir = ctx.out_dir.join(ROUNDS_DIR);
    let mut sites: Vec<String> = Vec::new();
    for r in &rows {
        if !sites.contains(&r.site_id) {
            sites.push(r.site_id.clone());
        }
    }
    for site in &sites {
        let p = rounds_dir.join(site_file(site, "csv"));
        ctx.require(std::slice::from_ref(&p))?;
        let (_, hist) = io::load_round_history(&p)?;
        rounds.insert(
            site.clone(),
            json!({
                "rounds_run": hist.rounds_run(),
                "converged": hist.converged,
                "final_mask": hist.final_mask().to_string(),
            }),
        );
    }
    let mut correlations = serde_json::Map::new();
    for m in Metric::ALL {
        let strip = |mut v: Value| {
            if let Some(o) = v.as_object_mut() {
                o.remove("provenance");
            }
            v
        };
        correlations.insert(
            m.name().to_string(),
            json!({
                "bootstrap": strip(io::load_json(&ctx.out(&correlation_file(m)))?),
                "site": strip(io::load_json(&ctx.out(&site_correlation_file(m)))?),
            }),
        );
    }
    let embedding: Vec<Value> = io::load_embedding(&ctx.out(EMBEDDING))?
        .into_iter()
        .map(|e| json!({ "site_id": e.site_id, "x": e.x, "y": e.y, "accuracy": e.accuracy }))
        .collect();
    let kl = io::load_kl_history(&ctx.out(KL_HISTORY))?;
    let bundle = json!({
        "provenance": ctx.provenance(),
        "report": report_rows,
        "rounds": rounds,
        "correlations": correlations,
        "embedding": embedding,
        "final_kl": kl.last(),
    });
    io::save_json(&ctx.out(BUNDLE), &bundle)
}
