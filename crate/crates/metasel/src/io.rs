//! CSV and text file formats.
//!
//! Every reader skips lines starting with `#`, which writers use for the
//! provenance header (toolkit version, seed, effective configuration).
//! Floating-point values are written in Rust's shortest round-trip form, so
//! a save followed by a load reproduces every value bit for bit. The literal
//! `NA` (any case) marks a missing optional value.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use metasel_core::cv::CvResult;
use metasel_core::hier::{ReportRow, Round, RoundHistory};
use metasel_core::meta::{Metric, PairRow};
use metasel_core::tabular::{EyeStatus, PhenotypeRecord, ScanParamsRecord, Sex};
use metasel_core::{FeatureTable, Label, Mask, Matrix};

use crate::error::{CliError, Result};

/// Provenance lines written at the top of every output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub lines: Vec<String>,
}

impl Header {
    pub fn new(seed: u64, echo: &[(&str, String)]) -> Self {
        let mut lines = vec![
            format!("metasel {}", crate::VERSION),
            format!("seed = {seed}"),
        ];
        lines.extend(
            echo.iter()
                .filter(|(k, _)| *k != "seed")
                .map(|(k, v)| format!("{k} = {v}")),
        );
        Self { lines }
    }

    /// A header without configuration, for ad-hoc files.
    pub fn bare() -> Self {
        Self {
            lines: vec![format!("metasel {}", crate::VERSION)],
        }
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        for l in &self.lines {
            out.extend_from_slice(b"# ");
            out.extend_from_slice(l.as_bytes());
            out.push(b'\n');
        }
    }
}

/// Writes `bytes` to a temporary file beside `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |e: std::io::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io_err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt_f64)
}

fn is_na(s: &str) -> bool {
    s.trim().eq_ignore_ascii_case("NA")
}

fn csv_bytes(header: &Header, columns: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = Vec::new();
    header.write_to(&mut out);
    let mut w = csv::WriterBuilder::new().from_writer(&mut out);
    w.write_record(columns).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.flush().expect("in-memory write");
    drop(w);
    out
}

/// A parsed CSV file with named columns.
struct Sheet {
    path: PathBuf,
    columns: Vec<String>,
    /// (1-based line number, cells)
    rows: Vec<(u64, Vec<String>)>,
}

impl Sheet {
    fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(bytes.as_slice());
        let schema = |message: String| CliError::Schema {
            path: path.to_path_buf(),
            message,
        };
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| schema(format!("unreadable header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        if columns.is_empty() || columns.iter().all(String::is_empty) {
            return Err(schema("empty file".into()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let row = e.position().map_or(0, |p| p.line());
                CliError::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: "-".into(),
                    message: e.to_string(),
                }
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        if rows.is_empty() {
            return Err(schema("no data rows".into()));
        }
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            rows,
        })
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| CliError::Schema {
                path: self.path.clone(),
                message: format!("missing required column {name}"),
            })
    }

    fn error(&self, row: u64, col: usize, message: impl Into<String>) -> CliError {
        CliError::Parse {
            path: self.path.clone(),
            row,
            column: self.columns[col].clone(),
            message: message.into(),
        }
    }

    fn parse_f64(&self, row: u64, cells: &[String], col: usize) -> Result<f64> {
        let s = &cells[col];
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) => Err(self.error(row, col, format!("non-finite value {s:?}"))),
            Err(_) => Err(self.error(row, col, format!("not a number: {s:?}"))),
        }
    }

    fn parse_opt_f64(&self, row: u64, cells: &[String], col: usize) -> Result<Option<f64>> {
        if is_na(&cells[col]) {
            Ok(None)
        } else {
            self.parse_f64(row, cells, col).map(Some)
        }
    }

    fn parse_usize(&self, row: u64, cells: &[String], col: usize) -> Result<usize> {
        cells[col]
            .parse()
            .map_err(|_| self.error(row, col, format!("not a count: {:?}", cells[col])))
    }

    fn schema_error(&self, e: metasel_core::Error) -> CliError {
        CliError::Schema {
            path: self.path.clone(),
            message: e.to_string(),
        }
    }
}

const SUB_ID: &str = "SUB_ID";
const SITE_ID: &str = "SITE_ID";
const DX_GROUP: &str = "DX_GROUP";

/// Reads a feature table: `SUB_ID,SITE_ID,DX_GROUP` followed by at least
/// one numeric feature column. Row order is preserved.
pub fn load_feature_table(path: &Path) -> Result<FeatureTable> {
    let sheet = Sheet::read(path)?;
    let c_sub = sheet.require(SUB_ID)?;
    let c_site = sheet.require(SITE_ID)?;
    let c_dx = sheet.require(DX_GROUP)?;
    let feature_cols: Vec<usize> = (0..sheet.columns.len())
        .filter(|&c| c != c_sub && c != c_site && c != c_dx)
        .collect();
    if feature_cols.is_empty() {
        return Err(CliError::Schema {
            path: path.to_path_buf(),
            message: "no feature columns".into(),
        });
    }
    let n = sheet.rows.len();
    let d = feature_cols.len();
    let mut subjects = Vec::with_capacity(n);
    let mut sites = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * d);
    for (line, cells) in &sheet.rows {
        subjects.push(cells[c_sub].clone());
        sites.push(cells[c_site].clone());
        let label = Label::parse(&cells[c_dx]).ok_or_else(|| {
            sheet.error(*line, c_dx, format!("unknown diagnosis {:?}", cells[c_dx]))
        })?;
        labels.push(label);
        for &c in &feature_cols {
            data.push(sheet.parse_f64(*line, cells, c)?);
        }
    }
    let names = feature_cols
        .iter()
        .map(|&c| sheet.columns[c].clone())
        .collect();
    let matrix = Matrix::new(n, d, data).map_err(|e| sheet.schema_error(e))?;
    FeatureTable::new(subjects, sites, matrix, labels, names).map_err(|e| sheet.schema_error(e))
}

pub fn feature_table_bytes(header: &Header, table: &FeatureTable) -> Vec<u8> {
    let mut columns = vec![SUB_ID, SITE_ID, DX_GROUP];
    columns.extend(table.feature_names().iter().map(String::as_str));
    let rows: Vec<Vec<String>> = (0..table.n())
        .map(|i| {
            let mut r = vec![
                table.subject_ids()[i].clone(),
                table.site_ids()[i].clone(),
                table.labels()[i].as_str().to_string(),
            ];
            r.extend(table.features().row(i).iter().map(|&v| fmt_f64(v)));
            r
        })
        .collect();
    csv_bytes(header, &columns, &rows)
}

pub fn save_feature_table(path: &Path, header: &Header, table: &FeatureTable) -> Result<()> {
    write_atomic(path, &feature_table_bytes(header, table))
}

/// Reads `SUB_ID,AGE_AT_SCAN,SEX,EYE_STATUS_AT_SCAN`.
pub fn load_phenotypes(path: &Path) -> Result<Vec<PhenotypeRecord>> {
    let sheet = Sheet::read(path)?;
    let c_sub = sheet.require(SUB_ID)?;
    let c_age = sheet.require("AGE_AT_SCAN")?;
    let c_sex = sheet.require("SEX")?;
    let c_eye = sheet.require("EYE_STATUS_AT_SCAN")?;
    sheet
        .rows
        .iter()
        .map(|(line, cells)| {
            let age = sheet.parse_f64(*line, cells, c_age)?;
            let sex = Sex::parse(&cells[c_sex]).ok_or_else(|| {
                sheet.error(*line, c_sex, format!("unknown sex {:?}", cells[c_sex]))
            })?;
            let eye = cells[c_eye]
                .parse::<i64>()
                .ok()
                .and_then(EyeStatus::from_code)
                .ok_or_else(|| {
                    sheet.error(
                        *line,
                        c_eye,
                        format!("eye status must be 1 or 2, got {:?}", cells[c_eye]),
                    )
                })?;
            PhenotypeRecord::new(cells[c_sub].clone(), age, sex, eye)
                .map_err(|e| sheet.error(*line, c_age, e.to_string()))
        })
        .collect()
}

pub fn save_phenotypes(path: &Path, header: &Header, records: &[PhenotypeRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.subject_id.clone(),
                fmt_f64(r.age_at_scan),
                r.sex.as_str().to_string(),
                r.eye_status.code().to_string(),
            ]
        })
        .collect();
    write_atomic(
        path,
        &csv_bytes(
            header,
            &[SUB_ID, "AGE_AT_SCAN", "SEX", "EYE_STATUS_AT_SCAN"],
            &rows,
        ),
    )
}

const SCAN_COLUMNS: [&str; 6] = [SITE_ID, "VENDOR", "TR_SEC", "TE_SEC", "TI_SEC", "FA_DEG"];

/// Reads `SITE_ID,VENDOR,TR_SEC,TE_SEC,TI_SEC,FA_DEG`; `NA` marks an absent
/// numeric value.
pub fn load_scan_params(path: &Path) -> Result<Vec<ScanParamsRecord>> {
    let sheet = Sheet::read(path)?;
    let cols: Vec<usize> = SCAN_COLUMNS
        .iter()
        .map(|c| sheet.require(c))
        .collect::<Result<_>>()?;
    sheet
        .rows
        .iter()
        .map(|(line, cells)| {
            let mut values = [None; 4];
            for (k, v) in values.iter_mut().enumerate() {
                let col = cols[2 + k];
                *v = sheet.parse_opt_f64(*line, cells, col)?;
                if v.is_some_and(|x| x <= 0.0) {
                    return Err(sheet.error(*line, col, "value must be positive"));
                }
            }
            ScanParamsRecord::new(
                cells[cols[0]].clone(),
                cells[cols[1]].clone(),
                values[0],
                values[1],
                values[2],
                values[3],
            )
            .map_err(|e| sheet.error(*line, cols[0], e.to_string()))
        })
        .collect()
}

pub fn save_scan_params(path: &Path, header: &Header, records: &[ScanParamsRecord]) -> Result<()> {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.site_id.clone(),
                r.vendor.clone(),
                fmt_opt(r.tr_sec),
                fmt_opt(r.te_sec),
                fmt_opt(r.ti_sec),
                fmt_opt(r.fa_deg),
            ]
        })
        .collect();
    write_atomic(path, &csv_bytes(header, &SCAN_COLUMNS, &rows))
}

/// Writes a mask as a single line of `0`/`1` characters after the header.
pub fn save_mask(path: &Path, header: &Header, mask: &Mask) -> Result<()> {
    let mut out = Vec::new();
    header.write_to(&mut out);
    out.extend_from_slice(format!("{mask}\n").as_bytes());
    write_atomic(path, &out)
}

pub fn load_mask(path: &Path) -> Result<Mask> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let schema = |message: String| CliError::Schema {
        path: path.to_path_buf(),
        message,
    };
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    match lines.as_slice() {
        [one] => Mask::parse(one).map_err(|e| schema(e.to_string())),
        _ => Err(schema(format!(
            "expected one mask line, found {}",
            lines.len()
        ))),
    }
}

const REPORT_COLUMNS: [&str; 5] = [SITE_ID, "DATA_SIZE", "ROUND", "ACC_MEAN", "ACC_STD"];

pub fn save_report(path: &Path, header: &Header, rows: &[ReportRow]) -> Result<()> {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.site_id.clone(),
                r.data_size.to_string(),
                r.round.to_string(),
                fmt_f64(r.acc_mean),
                fmt_f64(r.acc_std),
            ]
        })
        .collect();
    write_atomic(path, &csv_bytes(header, &REPORT_COLUMNS, &cells))
}

pub fn load_report(path: &Path) -> Result<Vec<ReportRow>> {
    let sheet = Sheet::read(path)?;
    let cols: Vec<usize> = REPORT_COLUMNS
        .iter()
        .map(|c| sheet.require(c))
        .collect::<Result<_>>()?;
    sheet
        .rows
        .iter()
        .map(|(line, cells)| {
            Ok(ReportRow {
                site_id: cells[cols[0]].clone(),
                data_size: sheet.parse_usize(*line, cells, cols[1])?,
                round: sheet.parse_usize(*line, cells, cols[2])?,
                acc_mean: sheet.parse_f64(*line, cells, cols[3])?,
                acc_std: sheet.parse_f64(*line, cells, cols[4])?,
            })
        })
        .collect()
}

/// The last round's mean accuracy per site, in report order.
pub fn pre_last(rows: &[ReportRow]) -> Vec<(String, usize, f64)> {
    let mut out: Vec<(String, usize, usize, f64)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(s, ..)| *s == r.site_id) {
            Some(e) if r.round >= e.2 => {
                e.2 = r.round;
                e.3 = r.acc_mean;
            }
            Some(_) => {}
            None => out.push((r.site_id.clone(), r.data_size, r.round, r.acc_mean)),
        }
    }
    out.into_iter().map(|(s, n, _, a)| (s, n, a)).collect()
}

const ROUND_COLUMNS: [&str; 7] = [
    SITE_ID,
    "ROUND",
    "MASK",
    "ACC_MEAN",
    "ACC_STD",
    "FOLD_ACCURACIES",
    "CONVERGED",
];

/// One site's round history; round 0 is the all-features baseline.
pub fn save_round_history(
    path: &Path,
    header: &Header,
    site_id: &str,
    history: &RoundHistory,
) -> Result<()> {
    let d = history.rounds.first().map_or(0, |r| r.mask.len());
    let row = |round: usize, mask: &Mask, res: &CvResult| {
        vec![
            site_id.to_string(),
            round.to_string(),
            mask.to_string(),
            fmt_f64(res.mean),
            fmt_f64(res.std),
            res.fold_accuracies
                .iter()
                .map(|&a| fmt_f64(a))
                .collect::<Vec<_>>()
                .join(";"),
            history.converged.to_string(),
        ]
    };
    let mut rows = vec![row(0, &Mask::ones(d), &history.baseline)];
    rows.extend(
        history
            .rounds
            .iter()
            .map(|r| row(r.round, &r.mask, &r.result)),
    );
    write_atomic(path, &csv_bytes(header, &ROUND_COLUMNS, &rows))
}

pub fn load_round_history(path: &Path) -> Result<(String, RoundHistory)> {
    let sheet = Sheet::read(path)?;
    let cols: Vec<usize> = ROUND_COLUMNS
        .iter()
        .map(|c| sheet.require(c))
        .collect::<Result<_>>()?;
    let mut site = String::new();
    let mut baseline = None;
    let mut rounds = Vec::new();
    let mut converged = false;
    for (line, cells) in &sheet.rows {
        site = cells[cols[0]].clone();
        let round = sheet.parse_usize(*line, cells, cols[1])?;
        let mask =
            Mask::parse(&cells[cols[2]]).map_err(|e| sheet.error(*line, cols[2], e.to_string()))?;
        let folds = cells[cols[5]]
            .split(';')
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| sheet.error(*line, cols[5], format!("not a number: {s:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let result = CvResult {
            fold_accuracies: folds,
            mean: sheet.parse_f64(*line, cells, cols[3])?,
            std: sheet.parse_f64(*line, cells, cols[4])?,
        };
        converged = match cells[cols[6]].as_str() {
            "true" => true,
            "false" => false,
            other => return Err(sheet.error(*line, cols[6], format!("not a boolean: {other:?}"))),
        };
        if round == 0 {
            baseline = Some(result);
        } else {
            rounds.push(Round {
                round,
                mask,
                result,
            });
        }
    }
    let baseline = baseline.ok_or_else(|| CliError::Schema {
        path: path.to_path_buf(),
        message: "missing round 0".into(),
    })?;
    Ok((
        site,
        RoundHistory {
            baseline,
            rounds,
            converged,
        },
    ))
}

const PAIR_COLUMNS: [&str; 5] = [
    "METRIC_NAME",
    SITE_ID,
    "REPLICATE",
    "METRIC_VALUE",
    "ACCURACY",
];

pub fn save_pairs(path: &Path, header: &Header, rows: &[PairRow]) -> Result<()> {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.metric.name().to_string(),
                r.site_id.clone(),
                r.replicate.to_string(),
                fmt_opt(r.value),
                fmt_f64(r.accuracy),
            ]
        })
        .collect();
    write_atomic(path, &csv_bytes(header, &PAIR_COLUMNS, &cells))
}

pub fn load_pairs(path: &Path) -> Result<Vec<PairRow>> {
    let sheet = Sheet::read(path)?;
    let cols: Vec<usize> = PAIR_COLUMNS
        .iter()
        .map(|c| sheet.require(c))
        .collect::<Result<_>>()?;
    sheet
        .rows
        .iter()
        .map(|(line, cells)| {
            let metric = Metric::parse(&cells[cols[0]]).ok_or_else(|| {
                sheet.error(
                    *line,
                    cols[0],
                    format!("unknown metric {:?}", cells[cols[0]]),
                )
            })?;
            Ok(PairRow {
                metric,
                site_id: cells[cols[1]].clone(),
                replicate: sheet.parse_usize(*line, cells, cols[2])?,
                value: sheet.parse_opt_f64(*line, cells, cols[3])?,
                accuracy: sheet.parse_f64(*line, cells, cols[4])?,
            })
        })
        .collect()
}

/// One point of a 2-D embedding with its site's accuracy, if known.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRow {
    pub site_id: String,
    pub x: f64,
    pub y: f64,
    pub accuracy: Option<f64>,
}

const EMBED_COLUMNS: [&str; 4] = [SITE_ID, "X", "Y", "ACCURACY"];

pub fn save_embedding(path: &Path, header: &Header, rows: &[EmbeddingRow]) -> Result<()> {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.site_id.clone(),
                fmt_f64(r.x),
                fmt_f64(r.y),
                fmt_opt(r.accuracy),
            ]
        })
        .collect();
    write_atomic(path, &csv_bytes(header, &EMBED_COLUMNS, &cells))
}

pub fn load_embedding(path: &Path) -> Result<Vec<EmbeddingRow>> {
    let sheet = Sheet::read(path)?;
    let cols: Vec<usize> = EMBED_COLUMNS
        .iter()
        .map(|c| sheet.require(c))
        .collect::<Result<_>>()?;
    sheet
        .rows
        .iter()
        .map(|(line, cells)| {
            Ok(EmbeddingRow {
                site_id: cells[cols[0]].clone(),
                x: sheet.parse_f64(*line, cells, cols[1])?,
                y: sheet.parse_f64(*line, cells, cols[2])?,
                accuracy: sheet.parse_opt_f64(*line, cells, cols[3])?,
            })
        })
        .collect()
}

pub fn save_kl_history(path: &Path, header: &Header, kl: &[f64]) -> Result<()> {
    let cells: Vec<Vec<String>> = kl
        .iter()
        .enumerate()
        .map(|(i, &v)| vec![i.to_string(), fmt_f64(v)])
        .collect();
    write_atomic(path, &csv_bytes(header, &["ITERATION", "KL"], &cells))
}

pub fn load_kl_history(path: &Path) -> Result<Vec<f64>> {
    let sheet = Sheet::read(path)?;
    let c = sheet.require("KL")?;
    sheet
        .rows
        .iter()
        .map(|(line, cells)| sheet.parse_f64(*line, cells, c))
        .collect()
}

/// Per-site generation schedule of a synthetic study.
pub fn save_schedule(
    path: &Path,
    header: &Header,
    sites: &[String],
    sizes: &[usize],
    noise_scales: &[f64],
) -> Result<()> {
    let cells: Vec<Vec<String>> = sites
        .iter()
        .zip(sizes)
        .zip(noise_scales)
        .map(|((s, n), q)| vec![s.clone(), n.to_string(), fmt_f64(*q)])
        .collect();
    write_atomic(
        path,
        &csv_bytes(header, &[SITE_ID, "DATA_SIZE", "NOISE_SCALE"], &cells),
    )
}

/// Writes `value` as pretty JSON with a trailing newline.
pub fn save_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Runtime(format!("cannot serialize {}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn load_json(path: &Path) -> Result<serde_json::Value> {
    let bytes = fs::read(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Provenance block embedded in JSON outputs.
pub fn json_provenance(seed: u64, echo: &[(&str, String)]) -> serde_json::Value {
    let config: BTreeMap<&str, &str> = echo.iter().map(|(k, v)| (*k, v.as_str())).collect();
    serde_json::json!({
        "version": crate::VERSION,
        "seed": seed,
        "config": config,
    })
}
