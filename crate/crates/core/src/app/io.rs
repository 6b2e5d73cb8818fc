//! Comma-separated file formats.
//!
//! Every table has a header row. Lines starting with `#` are comments; the
//! writers use them for synthetic-data labels and chain metadata.
//! Floats are written with Rust's shortest round-trip formatting, so every
//! writer/loader pair is lossless.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AppError;
use crate::dist::Family;
use crate::posterior::PosteriorSummary;
use crate::preprocess::TimeSeries;
use crate::sampler::Chain;

fn open(path: &Path) -> Result<File, AppError> {
    File::open(path).map_err(|e| AppError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, AppError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| AppError::io(path, e))
}

fn write_comments(w: &mut impl Write, path: &Path, comments: &[String]) -> Result<(), AppError> {
    for c in comments {
        writeln!(w, "# {c}").map_err(|e| AppError::io(path, e))?;
    }
    Ok(())
}

fn reader(path: &Path) -> Result<csv::Reader<File>, AppError> {
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(open(path)?))
}

/// Header check and column lookup.
fn columns(path: &Path, rdr: &mut csv::Reader<File>, required: &[&str]) -> Result<Vec<usize>, AppError> {
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let missing: Vec<String> = required
        .iter()
        .filter(|c| !headers.iter().any(|h| h == **c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(AppError::Schema { path: path.to_path_buf(), missing });
    }
    Ok(required
        .iter()
        .map(|c| headers.iter().position(|h| h == *c).unwrap_or_default())
        .collect())
}

fn csv_error(path: &Path, e: csv::Error) -> AppError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    AppError::Parse { path: path.to_path_buf(), line, message: e.to_string() }
}

fn parse_f64(path: &Path, line: u64, column: &str, raw: &str) -> Result<f64, AppError> {
    raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| AppError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("column '{column}': '{raw}' is not a finite number"),
    })
}

// ---------------------------------------------------------------------------
// Training data
// ---------------------------------------------------------------------------

/// One Ah checkpoint of a cell with its replicate fade measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadePoint {
    pub ah: f64,
    /// Fade percentages indexed by replicate number.
    pub fade_pct: Vec<f64>,
}

impl FadePoint {
    pub fn mean_fade(&self) -> f64 {
        self.fade_pct.iter().sum::<f64>() / self.fade_pct.len() as f64
    }
}

/// A cycled cell: its test condition in the units of the source table
/// (°C and SOC percent) and its measured fade curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub cell_id: String,
    pub temp_c: f64,
    pub c_rate: f64,
    pub soc_avg: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub points: Vec<FadePoint>,
}

const TRAINING_COLUMNS: [&str; 9] =
    ["cell_id", "temp_c", "c_rate", "soc_avg", "soc_min", "soc_max", "ah", "fade_pct", "replicate"];

/// Parses a training CSV, grouping rows by cell and Ah checkpoint in file order.
pub fn load_training_set(path: &Path) -> Result<Vec<TrainingRecord>, AppError> {
    let mut rdr = reader(path)?;
    let idx = columns(path, &mut rdr, &TRAINING_COLUMNS)?;
    let mut records: Vec<TrainingRecord> = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let get = |k: usize| row.get(idx[k]).unwrap_or("");
        let num = |k: usize| parse_f64(path, line, TRAINING_COLUMNS[k], get(k));
        let cell_id = get(0).to_string();
        let (temp_c, c_rate, soc_avg, soc_min, soc_max, ah, fade) =
            (num(1)?, num(2)?, num(3)?, num(4)?, num(5)?, num(6)?, num(7)?);
        let replicate: usize = get(8).parse().map_err(|_| AppError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("column 'replicate': '{}' is not a non-negative integer", get(8)),
        })?;
        let range_err = |message: String| AppError::Parse { path: path.to_path_buf(), line, message };
        if !(0.0..=100.0).contains(&fade) {
            return Err(range_err(format!("fade_pct {fade} outside [0, 100]")));
        }
        if ah < 0.0 {
            return Err(range_err(format!("ah {ah} is negative")));
        }
        if !(c_rate > 0.0) {
            return Err(range_err(format!("c_rate {c_rate} must be positive")));
        }
        if !(0.0 <= soc_min && soc_min <= soc_avg && soc_avg <= soc_max && soc_max <= 100.0) {
            return Err(range_err("SOC bounds must satisfy 0 <= min <= avg <= max <= 100".into()));
        }
        let pos = match records.iter().position(|r| r.cell_id == cell_id) {
            Some(p) => p,
            None => {
                records.push(TrainingRecord {
                    cell_id: cell_id.clone(),
                    temp_c,
                    c_rate,
                    soc_avg,
                    soc_min,
                    soc_max,
                    points: Vec::new(),
                });
                records.len() - 1
            }
        };
        let rec = &mut records[pos];
        if (rec.temp_c, rec.c_rate, rec.soc_avg, rec.soc_min, rec.soc_max)
            != (temp_c, c_rate, soc_avg, soc_min, soc_max)
        {
            return Err(range_err(format!("cell '{cell_id}' changes its test condition")));
        }
        let point = match rec.points.iter_mut().find(|p| p.ah == ah) {
            Some(p) => p,
            None => {
                rec.points.push(FadePoint { ah, fade_pct: Vec::new() });
                rec.points.last_mut().expect("just pushed")
            }
        };
        if point.fade_pct.len() <= replicate {
            point.fade_pct.resize(replicate + 1, f64::NAN);
        }
        point.fade_pct[replicate] = fade;
    }
    if records.is_empty() {
        return Err(AppError::Schema { path: path.to_path_buf(), missing: vec!["data rows".into()] });
    }
    for rec in &records {
        for p in &rec.points {
            if p.fade_pct.iter().any(|f| f.is_nan()) {
                return Err(AppError::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    message: format!("cell '{}' at {} Ah has a gap in its replicate numbers", rec.cell_id, p.ah),
                });
            }
        }
    }
    Ok(records)
}

/// Checkpoints whose mean fade drops below the previous one.
pub fn monotonicity_warnings(records: &[TrainingRecord]) -> Vec<String> {
    let mut out = Vec::new();
    for rec in records {
        let mut pts: Vec<&FadePoint> = rec.points.iter().collect();
        pts.sort_by(|a, b| a.ah.total_cmp(&b.ah));
        for w in pts.windows(2) {
            if w[1].mean_fade() < w[0].mean_fade() {
                out.push(format!(
                    "cell '{}': fade decreases from {} % at {} Ah to {} % at {} Ah",
                    rec.cell_id,
                    w[0].mean_fade(),
                    w[0].ah,
                    w[1].mean_fade(),
                    w[1].ah
                ));
            }
        }
    }
    out
}

pub fn write_training_set(path: &Path, records: &[TrainingRecord], comments: &[String]) -> Result<(), AppError> {
    let mut w = create(path)?;
    write_comments(&mut w, path, comments)?;
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| csv_error(path, e);
    out.write_record(TRAINING_COLUMNS).map_err(err)?;
    for r in records {
        for p in &r.points {
            for (rep, fade) in p.fade_pct.iter().enumerate() {
                out.write_record([
                    r.cell_id.clone(),
                    r.temp_c.to_string(),
                    r.c_rate.to_string(),
                    r.soc_avg.to_string(),
                    r.soc_min.to_string(),
                    r.soc_max.to_string(),
                    p.ah.to_string(),
                    fade.to_string(),
                    rep.to_string(),
                ])
                .map_err(err)?;
            }
        }
    }
    out.flush().map_err(|e| AppError::io(path, e))
}

// ---------------------------------------------------------------------------
// Time series
// ---------------------------------------------------------------------------

/// Loads a uniformly sampled `t_s,value` series.
pub fn load_time_series(path: &Path) -> Result<TimeSeries, AppError> {
    let mut rdr = reader(path)?;
    let idx = columns(path, &mut rdr, &["t_s", "value"])?;
    let mut t = Vec::new();
    let mut values = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        t.push(parse_f64(path, line, "t_s", row.get(idx[0]).unwrap_or(""))?);
        values.push(parse_f64(path, line, "value", row.get(idx[1]).unwrap_or(""))?);
    }
    let bad = |message: &str| AppError::Parse { path: path.to_path_buf(), line: 0, message: message.into() };
    if values.is_empty() {
        return Err(AppError::Schema { path: path.to_path_buf(), missing: vec!["data rows".into()] });
    }
    let period = match t.len() {
        1 => t[0],
        _ => t[1] - t[0],
    };
    if !(period > 0.0) {
        return Err(bad("sample period must be positive"));
    }
    for (i, w) in t.windows(2).enumerate() {
        if ((w[1] - w[0]) - period).abs() > 1e-6 * period.max(1.0) {
            return Err(AppError::Parse {
                path: path.to_path_buf(),
                line: i as u64 + 3,
                message: "time stamps must be uniformly spaced".into(),
            });
        }
    }
    Ok(TimeSeries::new(values, period))
}

/// Writes `t_s,value`; the first stamp is the sample period for single-sample
/// series (so the duration survives a round trip) and 0 otherwise.
pub fn write_time_series(path: &Path, series: &TimeSeries, comments: &[String]) -> Result<(), AppError> {
    let mut w = create(path)?;
    write_comments(&mut w, path, comments)?;
    let io = |e| AppError::io(path, e);
    writeln!(w, "t_s,value").map_err(io)?;
    if series.len() == 1 {
        writeln!(w, "{},{}", series.sample_period, series.values[0]).map_err(io)?;
    } else {
        for (i, v) in series.values.iter().enumerate() {
            writeln!(w, "{},{}", i as f64 * series.sample_period, v).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

// ---------------------------------------------------------------------------
// Chains
// ---------------------------------------------------------------------------

/// File name for a variable's chain: `lambda[3]` becomes `lambda_3.csv`.
pub fn chain_file_name(variable: &str) -> String {
    let stem: String = variable
        .chars()
        .filter_map(|c| match c {
            '[' => Some('_'),
            ']' => None,
            c => Some(c),
        })
        .collect();
    format!("{stem}.csv")
}

pub fn write_chain(path: &Path, chain: &Chain) -> Result<(), AppError> {
    let mut w = create(path)?;
    let io = |e| AppError::io(path, e);
    writeln!(
        w,
        "# chain variable={} family={} seed={} burn_in={} accepted={}",
        chain.variable, chain.family, chain.seed, chain.burn_in, chain.accepted
    )
    .map_err(io)?;
    writeln!(w, "sample").map_err(io)?;
    for s in &chain.samples {
        writeln!(w, "{s}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_chain(path: &Path) -> Result<Chain, AppError> {
    let file = BufReader::new(open(path)?);
    let mut meta: BTreeMap<String, String> = BTreeMap::new();
    let mut samples = Vec::new();
    let mut saw_header = false;
    for (i, line) in file.lines().enumerate() {
        let line = line.map_err(|e| AppError::io(path, e))?;
        let line_no = i as u64 + 1;
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            for kv in rest.split_whitespace() {
                if let Some((k, v)) = kv.split_once('=') {
                    meta.insert(k.to_string(), v.to_string());
                }
            }
        } else if !saw_header {
            if trimmed != "sample" {
                return Err(AppError::Schema { path: path.to_path_buf(), missing: vec!["sample".into()] });
            }
            saw_header = true;
        } else if !trimmed.is_empty() {
            samples.push(parse_f64(path, line_no, "sample", trimmed)?);
        }
    }
    let field = |k: &str| {
        meta.get(k).cloned().ok_or_else(|| AppError::Schema {
            path: path.to_path_buf(),
            missing: vec![format!("chain metadata '{k}'")],
        })
    };
    let parse_meta = |k: &str, v: String| AppError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: format!("chain metadata '{k}={v}' is invalid"),
    };
    let family_raw = field("family")?;
    let family: Family = family_raw.parse().map_err(|_| parse_meta("family", family_raw.clone()))?;
    let num = |k: &str| -> Result<u64, AppError> {
        let v = field(k)?;
        v.parse().map_err(|_| parse_meta(k, v))
    };
    Ok(Chain {
        variable: field("variable")?,
        family,
        seed: num("seed")?,
        burn_in: num("burn_in")? as usize,
        accepted: num("accepted")? as usize,
        samples,
    })
}

// ---------------------------------------------------------------------------
// Summaries, curves, key-value tables
// ---------------------------------------------------------------------------

const SUMMARY_COLUMNS: [&str; 6] = ["variable", "family", "mean", "sd", "ci_low", "ci_high"];

/// A row of a summary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variable: String,
    pub family: Family,
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl From<&PosteriorSummary> for SummaryRow {
    fn from(s: &PosteriorSummary) -> Self {
        Self {
            variable: s.variable.clone(),
            family: s.family,
            mean: s.mean,
            sd: s.sd,
            ci_low: s.ci_low,
            ci_high: s.ci_high,
        }
    }
}

pub fn write_summary(path: &Path, rows: &[SummaryRow], comments: &[String]) -> Result<(), AppError> {
    let mut w = create(path)?;
    write_comments(&mut w, path, comments)?;
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| csv_error(path, e);
    out.write_record(SUMMARY_COLUMNS).map_err(err)?;
    for r in rows {
        out.write_record([
            r.variable.clone(),
            r.family.to_string(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
        ])
        .map_err(err)?;
    }
    out.flush().map_err(|e| AppError::io(path, e))
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, AppError> {
    let mut rdr = reader(path)?;
    let idx = columns(path, &mut rdr, &SUMMARY_COLUMNS)?;
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let get = |k: usize| row.get(idx[k]).unwrap_or("");
        let family: Family = get(1).parse().map_err(|m: String| AppError::Parse {
            path: path.to_path_buf(),
            line,
            message: m,
        })?;
        rows.push(SummaryRow {
            variable: get(0).to_string(),
            family,
            mean: parse_f64(path, line, "mean", get(2))?,
            sd: parse_f64(path, line, "sd", get(3))?,
            ci_low: parse_f64(path, line, "ci_low", get(4))?,
            ci_high: parse_f64(path, line, "ci_high", get(5))?,
        });
    }
    Ok(rows)
}

pub fn write_pdf_curve(path: &Path, curve: &[(f64, f64)], comments: &[String]) -> Result<(), AppError> {
    let mut w = create(path)?;
    write_comments(&mut w, path, comments)?;
    let io = |e| AppError::io(path, e);
    writeln!(w, "x,density").map_err(io)?;
    for (x, d) in curve {
        writeln!(w, "{x},{d}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_pdf_curve(path: &Path) -> Result<Vec<(f64, f64)>, AppError> {
    let mut rdr = reader(path)?;
    let idx = columns(path, &mut rdr, &["x", "density"])?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        out.push((
            parse_f64(path, line, "x", row.get(idx[0]).unwrap_or(""))?,
            parse_f64(path, line, "density", row.get(idx[1]).unwrap_or(""))?,
        ));
    }
    Ok(out)
}

/// Generic table with a header row and string cells.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>], comments: &[String]) -> Result<(), AppError> {
    let mut w = create(path)?;
    write_comments(&mut w, path, comments)?;
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| csv_error(path, e);
    out.write_record(header).map_err(err)?;
    for r in rows {
        out.write_record(r).map_err(err)?;
    }
    out.flush().map_err(|e| AppError::io(path, e))
}

/// Reads a table written by [`write_table`], checking the required columns.
pub fn read_table(path: &Path, required: &[&str]) -> Result<Vec<Vec<String>>, AppError> {
    let mut rdr = reader(path)?;
    let idx = columns(path, &mut rdr, required)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        out.push(idx.iter().map(|i| row.get(*i).unwrap_or("").to_string()).collect());
    }
    Ok(out)
}
