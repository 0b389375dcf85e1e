//! File formats: record CSV, environment JSON, and the report outputs.
//!
//! Machine-readable outputs print floats with Rust's shortest round-trip
//! formatting, so everything written here reads back bit-identical.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleSpec;
use crate::error::{Error, Result};
use crate::model::{check_zenith, wrap_azimuth, Condition, Direction, DirectionalRecord, Subpath};
use crate::sounder::{SyntheticEnvironment, DEFAULT_NOISE_FLOOR_DBM};
use crate::stats::{AsValue, LogNormalSummary, Metric, Scope};
use crate::tgpp::TgppComparison;

/// Column order of the record CSV.
pub const RECORD_HEADER: [&str; 10] = [
    "link_id",
    "frequency_ghz",
    "condition",
    "tx_az_deg",
    "tx_el_deg",
    "rx_az_deg",
    "rx_el_deg",
    "power_dbm",
    "tx_gain_dbi",
    "rx_gain_dbi",
];

pub const SUMMARY_HEADER: [&str; 8] = [
    "metric",
    "scope",
    "condition",
    "frequency_ghz",
    "mu_lg",
    "sigma_lg",
    "expectation_deg",
    "n_samples",
];

pub const SPREAD_HEADER: [&str; 7] = [
    "link_id",
    "frequency_ghz",
    "condition",
    "metric",
    "scope",
    "lobe_index",
    "value_deg",
];

pub const COMPARISON_HEADER: [&str; 10] = [
    "metric",
    "condition",
    "frequency_ghz",
    "measured_mu_lg",
    "measured_sigma_lg",
    "measured_expectation_deg",
    "tgpp_mu_lg",
    "tgpp_sigma_lg",
    "tgpp_expectation_deg",
    "delta_deg",
];

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Column lookup that reports parse failures with their location.
struct Row<'a> {
    origin: &'a str,
    line: u64,
    record: &'a csv::StringRecord,
    columns: &'a [usize],
    names: &'a [&'a str],
}

impl Row<'_> {
    fn raw(&self, col: usize) -> &str {
        self.record.get(self.columns[col]).unwrap_or("").trim()
    }

    fn err(&self, col: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.origin.to_string(),
            line: self.line,
            column: self.names[col].to_string(),
            message: message.into(),
        }
    }

    fn f64(&self, col: usize) -> Result<f64> {
        let raw = self.raw(col);
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(col, format!("expected a finite number, got `{raw}`"))),
        }
    }

    fn opt_f64(&self, col: usize) -> Result<Option<f64>> {
        if self.raw(col).is_empty() {
            Ok(None)
        } else {
            self.f64(col).map(Some)
        }
    }

    fn parse<T: std::str::FromStr>(&self, col: usize) -> Result<T> {
        let raw = self.raw(col);
        raw.parse()
            .map_err(|_| self.err(col, format!("unrecognised value `{raw}`")))
    }

    fn text(&self, col: usize) -> Result<String> {
        let raw = self.raw(col);
        if raw.is_empty() {
            return Err(self.err(col, "empty value"));
        }
        Ok(raw.to_string())
    }
}

/// Maps every expected column to its position; extra or missing columns are
/// schema errors.
fn locate_columns(
    headers: &csv::StringRecord,
    expected: &[&str],
    origin: &str,
) -> Result<Vec<usize>> {
    for h in headers {
        if !expected.contains(&h.trim()) {
            return Err(Error::Schema {
                path: origin.to_string(),
                message: format!("unknown column `{}`", h.trim()),
            });
        }
    }
    expected
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| Error::Schema {
                    path: origin.to_string(),
                    message: format!("missing column `{name}`"),
                })
        })
        .collect()
}

fn for_each_row<R: Read>(
    reader: R,
    origin: &str,
    expected: &[&str],
    mut f: impl FnMut(&Row<'_>) -> Result<()>,
) -> Result<usize> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(Error::Schema {
            path: origin.to_string(),
            message: "empty file".into(),
        });
    }
    let columns = locate_columns(&headers, expected, origin)?;
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        f(&Row {
            origin,
            line,
            record: &rec,
            columns: &columns,
            names: expected,
        })?;
        n += 1;
    }
    Ok(n)
}

fn azimuth(row: &Row<'_>, col: usize) -> Result<f64> {
    let v = row.f64(col)?;
    let w = wrap_azimuth(v)?;
    if w != v {
        log::warn!(
            "{}: line {}: {} {} wrapped to {}",
            row.origin,
            row.line,
            row.names[col],
            v,
            w
        );
    }
    Ok(w)
}

fn zenith(row: &Row<'_>, col: usize) -> Result<f64> {
    let v = row.f64(col)?;
    check_zenith(v).map_err(|_| row.err(col, format!("zenith {v} outside [0, 180]")))
}

/// Reads a record CSV. The `*_el_deg` columns carry zenith angles
/// (90 = horizon); an empty `power_dbm` marks a below-noise dwell.
pub fn parse_records<R: Read>(reader: R, origin: &str) -> Result<Vec<DirectionalRecord>> {
    let mut out = Vec::new();
    for_each_row(reader, origin, &RECORD_HEADER, |row| {
        let frequency_ghz = row.f64(1)?;
        if frequency_ghz <= 0.0 {
            return Err(row.err(1, "frequency must be > 0"));
        }
        out.push(DirectionalRecord {
            link_id: row.text(0)?,
            frequency_ghz,
            condition: row.parse::<Condition>(2)?,
            tx: Direction::new(azimuth(row, 3)?, zenith(row, 4)?)?,
            rx: Direction::new(azimuth(row, 5)?, zenith(row, 6)?)?,
            power_dbm: row.opt_f64(7)?,
            tx_gain_dbi: row.f64(8)?,
            rx_gain_dbi: row.f64(9)?,
        });
        Ok(())
    })?;
    if out.is_empty() {
        return Err(Error::Empty("record file has no rows"));
    }
    Ok(out)
}

pub fn read_records(path: &Path) -> Result<Vec<DirectionalRecord>> {
    parse_records(open(path)?, &path.display().to_string())
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn finish<W: Write>(mut wr: csv::Writer<W>) -> Result<()> {
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_records<W: Write>(w: W, records: &[DirectionalRecord]) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(RECORD_HEADER)?;
    for r in records {
        wr.write_record([
            r.link_id.clone(),
            r.frequency_ghz.to_string(),
            r.condition.to_string(),
            r.tx.azimuth_deg().to_string(),
            r.tx.zenith_deg().to_string(),
            r.rx.azimuth_deg().to_string(),
            r.rx.zenith_deg().to_string(),
            opt(r.power_dbm),
            r.tx_gain_dbi.to_string(),
            r.rx_gain_dbi.to_string(),
        ])?;
    }
    finish(wr)
}

pub fn save_records(path: &Path, records: &[DirectionalRecord]) -> Result<()> {
    write_records(create(path)?, records)
}

/// One subpath of an environment file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubpathSpec {
    pub power_mw: f64,
    pub delay_ns: f64,
    pub aod_deg: f64,
    pub zod_deg: f64,
    pub aoa_deg: f64,
    pub zoa_deg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_id: Option<String>,
    pub frequency_ghz: f64,
    pub condition: Condition,
    #[serde(default = "default_noise_floor")]
    pub noise_floor_dbm: f64,
    pub subpaths: Vec<SubpathSpec>,
}

fn default_noise_floor() -> f64 {
    DEFAULT_NOISE_FLOOR_DBM
}

impl EnvironmentSpec {
    pub fn build(&self, default_link_id: &str) -> Result<SyntheticEnvironment> {
        let subpaths = self
            .subpaths
            .iter()
            .map(|s| {
                Subpath::from_power(
                    s.power_mw,
                    s.delay_ns,
                    Direction::new(s.aod_deg, s.zod_deg)?,
                    Direction::new(s.aoa_deg, s.zoa_deg)?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        SyntheticEnvironment::new(
            self.link_id
                .clone()
                .unwrap_or_else(|| default_link_id.to_string()),
            self.frequency_ghz,
            self.condition,
            self.noise_floor_dbm,
            subpaths,
        )
    }
}

/// Parses one environment object or an array of them. Links without an id
/// are named `link-NNNN` by position.
pub fn parse_environments(text: &str) -> Result<Vec<SyntheticEnvironment>> {
    let specs = if text.trim_start().starts_with('[') {
        serde_json::from_str::<Vec<EnvironmentSpec>>(text)?
    } else {
        vec![serde_json::from_str::<EnvironmentSpec>(text)?]
    };
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| s.build(&crate::ensemble::link_id(i)))
        .collect()
}

fn read_text(path: &Path) -> Result<String> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(text)
}

/// JSON syntax and shape errors become schema errors naming the file.
fn json_schema(path: &Path, e: Error) -> Error {
    match e {
        Error::Json(j) => Error::Schema {
            path: path.display().to_string(),
            message: j.to_string(),
        },
        other => other,
    }
}

pub fn read_environments(path: &Path) -> Result<Vec<SyntheticEnvironment>> {
    parse_environments(&read_text(path)?).map_err(|e| json_schema(path, e))
}

/// Reads and validates an ensemble spec (JSON).
pub fn read_ensemble_spec(path: &Path) -> Result<EnsembleSpec> {
    let text = read_text(path)?;
    let spec: EnsembleSpec =
        serde_json::from_str(&text).map_err(|e| json_schema(path, e.into()))?;
    spec.validate()?;
    Ok(spec)
}

pub fn write_summaries<W: Write>(w: W, rows: &[LogNormalSummary]) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(SUMMARY_HEADER)?;
    for s in rows {
        wr.write_record([
            s.metric.to_string(),
            s.scope.to_string(),
            s.condition.to_string(),
            s.frequency_ghz.to_string(),
            s.mu_lg.to_string(),
            s.sigma_lg.to_string(),
            s.expectation_deg.to_string(),
            s.n_samples.to_string(),
        ])?;
    }
    finish(wr)
}

/// Reads a summary CSV. The expectation column is recomputed from
/// `(mu, sigma)` rather than trusted.
pub fn parse_summaries<R: Read>(reader: R, origin: &str) -> Result<Vec<LogNormalSummary>> {
    let mut out = Vec::new();
    for_each_row(reader, origin, &SUMMARY_HEADER, |row| {
        let n: usize = row.parse(7)?;
        let s = LogNormalSummary::new(
            row.parse::<Metric>(0)?,
            row.parse::<Scope>(1)?,
            row.parse::<Condition>(2)?,
            row.f64(3)?,
            row.f64(4)?,
            row.f64(5)?,
            n,
        )
        .map_err(|e| row.err(5, e.to_string()))?;
        out.push(s);
        Ok(())
    })?;
    if out.is_empty() {
        return Err(Error::Empty("summary file has no rows"));
    }
    Ok(out)
}

pub fn read_summaries(path: &Path) -> Result<Vec<LogNormalSummary>> {
    parse_summaries(open(path)?, &path.display().to_string())
}

/// One angular-spread sample with its link context.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadRow {
    pub frequency_ghz: f64,
    pub condition: Condition,
    pub value: AsValue,
}

pub fn write_spreads<W: Write>(w: W, rows: &[SpreadRow]) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(SPREAD_HEADER)?;
    for r in rows {
        wr.write_record([
            r.value.link_id.clone(),
            r.frequency_ghz.to_string(),
            r.condition.to_string(),
            r.value.metric.to_string(),
            r.value.scope.to_string(),
            r.value
                .lobe_index
                .map(|i| i.to_string())
                .unwrap_or_default(),
            r.value.value_deg.to_string(),
        ])?;
    }
    finish(wr)
}

pub fn parse_spreads<R: Read>(reader: R, origin: &str) -> Result<Vec<SpreadRow>> {
    let mut out = Vec::new();
    for_each_row(reader, origin, &SPREAD_HEADER, |row| {
        let lobe_index = if row.raw(5).is_empty() {
            None
        } else {
            Some(row.parse::<usize>(5)?)
        };
        out.push(SpreadRow {
            frequency_ghz: row.f64(1)?,
            condition: row.parse(2)?,
            value: AsValue {
                metric: row.parse(3)?,
                scope: row.parse(4)?,
                value_deg: row.f64(6)?,
                link_id: row.text(0)?,
                lobe_index,
            },
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_cdf<W: Write>(w: W, points: &[(f64, f64)]) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(["value_deg", "probability"])?;
    for (v, p) in points {
        wr.write_record([v.to_string(), p.to_string()])?;
    }
    finish(wr)
}

pub fn write_comparisons<W: Write>(w: W, rows: &[TgppComparison]) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(COMPARISON_HEADER)?;
    for c in rows {
        wr.write_record([
            c.metric.to_string(),
            c.condition.to_string(),
            c.frequency_ghz.to_string(),
            c.measured_mu_lg.to_string(),
            c.measured_sigma_lg.to_string(),
            c.measured_expectation_deg.to_string(),
            c.tgpp_mu_lg.to_string(),
            c.tgpp_sigma_lg.to_string(),
            c.tgpp_expectation_deg.to_string(),
            c.delta_deg.to_string(),
        ])?;
    }
    finish(wr)
}

/// Writes `value` as pretty JSON followed by a newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|source| Error::Io {
        path: "<json>".into(),
        source,
    })?;
    Ok(())
}

/// Opens `path` for writing and hands it to `f`.
pub fn save_with(path: &Path, f: impl FnOnce(File) -> Result<()>) -> Result<()> {
    f(create(path)?).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}
