//! TR 38.901 InH-Office angular spread model.
//!
//! Coefficients come from a small versioned text table (see
//! `data/tr38901_inh_office.csv`) so that a revised standard can be dropped
//! in without touching code. Each log-spread parameter is affine in
//! `log10(1 + fc)`, with `fc` in GHz.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Condition;
use crate::stats::{lognormal_expectation_deg, LogNormalSummary, Metric, Scope};

pub const MIN_FREQUENCY_GHZ: f64 = 0.5;
pub const MAX_FREQUENCY_GHZ: f64 = 100.0;

const BUILTIN_TABLE: &str = include_str!("../data/tr38901_inh_office.csv");
const HEADER: &str = "metric,condition,mu_slope,mu_intercept,sigma_slope,sigma_intercept,source";

/// `slope * log10(1 + fc) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub slope: f64,
    pub intercept: f64,
}

impl Affine {
    pub fn eval(&self, fc_ghz: f64) -> f64 {
        self.slope * (1.0 + fc_ghz).log10() + self.intercept
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TgppEntry {
    pub mu: Affine,
    pub sigma: Affine,
    /// Where in the standard the row was transcribed from.
    pub source: String,
}

/// `(mu, sigma)` of `log10(AS / 1 deg)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TgppParams {
    pub mu_lg: f64,
    pub sigma_lg: f64,
}

impl TgppParams {
    /// Parameters rounded to the two decimals the standard's tables are
    /// quoted at.
    pub fn reported(&self) -> Self {
        Self {
            mu_lg: round2(self.mu_lg),
            sigma_lg: round2(self.sigma_lg),
        }
    }

    /// Log-normal expectation of the two-decimal parameters.
    pub fn expectation_deg(&self) -> Result<f64> {
        let r = self.reported();
        lognormal_expectation_deg(r.mu_lg, r.sigma_lg)
    }

    /// Log-normal expectation of the unrounded parameters.
    pub fn expectation_deg_exact(&self) -> Result<f64> {
        lognormal_expectation_deg(self.mu_lg, self.sigma_lg)
    }
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct TgppParamTable {
    pub version: String,
    entries: BTreeMap<(Metric, Condition), TgppEntry>,
}

impl TgppParamTable {
    /// Table compiled into the crate.
    pub fn builtin() -> &'static TgppParamTable {
        static TABLE: OnceLock<TgppParamTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            TgppParamTable::parse(BUILTIN_TABLE, "<builtin>").expect("builtin 3GPP table parses")
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses the coefficient format: `#` comment lines, one
    /// `@version <tag>` line, a fixed header, then one row per
    /// (metric, condition).
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let parse_err = |line: usize, column: &str, message: String| Error::Parse {
            path: origin.to_string(),
            line: line as u64,
            column: column.to_string(),
            message,
        };
        let mut version = None;
        let mut header_seen = false;
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(v) = line.strip_prefix("@version") {
                version = Some(v.trim().to_string());
                continue;
            }
            if !header_seen {
                if line != HEADER {
                    return Err(Error::Schema {
                        path: origin.to_string(),
                        message: format!("expected header `{HEADER}`, found `{line}`"),
                    });
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.splitn(7, ',').map(str::trim).collect();
            if fields.len() != 7 {
                return Err(parse_err(line_no, "source", "expected 7 fields".into()));
            }
            let metric: Metric = fields[0]
                .parse()
                .map_err(|e: Error| parse_err(line_no, "metric", e.to_string()))?;
            let condition: Condition = fields[1]
                .parse()
                .map_err(|e: Error| parse_err(line_no, "condition", e.to_string()))?;
            let names = ["mu_slope", "mu_intercept", "sigma_slope", "sigma_intercept"];
            let mut nums = [0.0; 4];
            for (k, name) in names.iter().enumerate() {
                nums[k] = fields[k + 2]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        parse_err(line_no, name, format!("bad number `{}`", fields[k + 2]))
                    })?;
            }
            let entry = TgppEntry {
                mu: Affine {
                    slope: nums[0],
                    intercept: nums[1],
                },
                sigma: Affine {
                    slope: nums[2],
                    intercept: nums[3],
                },
                source: fields[6].to_string(),
            };
            if entries.insert((metric, condition), entry).is_some() {
                return Err(parse_err(
                    line_no,
                    "metric",
                    format!("duplicate row for {metric} {condition}"),
                ));
            }
        }
        let version = version.ok_or_else(|| Error::Schema {
            path: origin.to_string(),
            message: "missing `@version` line".into(),
        })?;
        if !header_seen {
            return Err(Error::Schema {
                path: origin.to_string(),
                message: "missing header".into(),
            });
        }
        Ok(Self { version, entries })
    }

    pub fn entry(&self, metric: Metric, condition: Condition) -> Result<&TgppEntry> {
        self.entries
            .get(&(metric, condition))
            .ok_or_else(|| Error::MissingModelEntry {
                metric: metric.to_string(),
                condition: condition.to_string(),
            })
    }

    /// Unrounded `(mu, sigma)` at `fc_ghz`.
    pub fn as_params(
        &self,
        fc_ghz: f64,
        metric: Metric,
        condition: Condition,
    ) -> Result<TgppParams> {
        check_frequency(fc_ghz)?;
        let e = self.entry(metric, condition)?;
        Ok(TgppParams {
            mu_lg: e.mu.eval(fc_ghz),
            sigma_lg: e.sigma.eval(fc_ghz),
        })
    }

    pub fn expectation_deg(
        &self,
        fc_ghz: f64,
        metric: Metric,
        condition: Condition,
    ) -> Result<f64> {
        self.as_params(fc_ghz, metric, condition)?.expectation_deg()
    }

    /// Difference between a measured omni summary and the model at the
    /// summary's own frequency.
    pub fn compare(&self, measured: &LogNormalSummary, fc_ghz: f64) -> Result<TgppComparison> {
        if measured.scope != Scope::Omni {
            return Err(Error::Mismatch(format!(
                "{} {} summary is lobe-scoped; the model only covers omni spreads",
                measured.metric, measured.condition
            )));
        }
        if (measured.frequency_ghz - fc_ghz).abs() > 1e-9 {
            return Err(Error::Mismatch(format!(
                "summary measured at {} GHz compared at {} GHz",
                measured.frequency_ghz, fc_ghz
            )));
        }
        let params = self.as_params(fc_ghz, measured.metric, measured.condition)?;
        let reported = params.reported();
        let tgpp_expectation_deg = params.expectation_deg()?;
        Ok(TgppComparison {
            metric: measured.metric,
            condition: measured.condition,
            frequency_ghz: fc_ghz,
            measured_mu_lg: measured.mu_lg,
            measured_sigma_lg: measured.sigma_lg,
            measured_expectation_deg: measured.expectation_deg,
            tgpp_mu_lg: reported.mu_lg,
            tgpp_sigma_lg: reported.sigma_lg,
            tgpp_expectation_deg,
            delta_deg: (measured.expectation_deg - tgpp_expectation_deg).abs(),
        })
    }
}

fn check_frequency(fc_ghz: f64) -> Result<()> {
    if !(MIN_FREQUENCY_GHZ..=MAX_FREQUENCY_GHZ).contains(&fc_ghz) {
        return Err(Error::FrequencyOutOfRange(fc_ghz));
    }
    Ok(())
}

/// One row of a measured-versus-model comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TgppComparison {
    pub metric: Metric,
    pub condition: Condition,
    pub frequency_ghz: f64,
    pub measured_mu_lg: f64,
    pub measured_sigma_lg: f64,
    pub measured_expectation_deg: f64,
    pub tgpp_mu_lg: f64,
    pub tgpp_sigma_lg: f64,
    pub tgpp_expectation_deg: f64,
    pub delta_deg: f64,
}

/// Unrounded model parameters from the builtin table.
pub fn tgpp_as_params(fc_ghz: f64, metric: Metric, condition: Condition) -> Result<TgppParams> {
    TgppParamTable::builtin().as_params(fc_ghz, metric, condition)
}

/// Model expectation in degrees, from the two-decimal parameters.
pub fn tgpp_expectation_deg(fc_ghz: f64, metric: Metric, condition: Condition) -> Result<f64> {
    TgppParamTable::builtin().expectation_deg(fc_ghz, metric, condition)
}

/// `|E(measured) - E(model)|` in degrees.
pub fn compare_measured_vs_tgpp(measured: &LogNormalSummary, fc_ghz: f64) -> Result<f64> {
    Ok(TgppParamTable::builtin()
        .compare(measured, fc_ghz)?
        .delta_deg)
}
