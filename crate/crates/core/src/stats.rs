//! Circular-statistics angular spreads and their log-normal summaries.
//!
//! The RMS angular spread of a set of directions with powers `p_i` is the
//! circular standard deviation `sqrt(-2 ln R)` (radians), where `R` is the
//! length of the power-weighted mean resultant vector. Omni spreads pool the
//! members of every lobe of a PAS; lobe spreads use one lobe.
//!
//! Spreads across links are summarised as a log-normal law on
//! `log10(AS / 1 deg)` with expectation `10^(mu + sigma^2 / 2)` degrees.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lobes::SpatialLobe;
use crate::model::{wrap_azimuth, Condition, Plane};

/// Below this mean resultant length the spread is reported as degenerate.
pub const RESULTANT_FLOOR: f64 = 1e-12;

/// Spreads under this many radians are returned as exactly zero; they are
/// rounding residue of a single direction, not a physical spread.
pub const ZERO_SPREAD_RAD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "ASA")]
    Asa,
    #[serde(rename = "ASD")]
    Asd,
    #[serde(rename = "ZSA")]
    Zsa,
    #[serde(rename = "ZSD")]
    Zsd,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Asa, Metric::Asd, Metric::Zsa, Metric::Zsd];

    /// PAS plane whose lobes this metric is computed from.
    pub fn plane(self) -> Plane {
        match self {
            Metric::Asa | Metric::Zsa => Plane::Aoa,
            Metric::Asd | Metric::Zsd => Plane::Aod,
        }
    }

    pub fn is_zenith(self) -> bool {
        matches!(self, Metric::Zsa | Metric::Zsd)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Asa => "ASA",
            Metric::Asd => "ASD",
            Metric::Zsa => "ZSA",
            Metric::Zsd => "ZSD",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ASA" => Ok(Metric::Asa),
            "ASD" => Ok(Metric::Asd),
            "ZSA" => Ok(Metric::Zsa),
            "ZSD" => Ok(Metric::Zsd),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scope {
    #[serde(rename = "lobe")]
    Lobe,
    #[serde(rename = "omni")]
    Omni,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Lobe => "lobe",
            Scope::Omni => "omni",
        })
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lobe" => Ok(Scope::Lobe),
            "omni" => Ok(Scope::Omni),
            other => Err(Error::InvalidArgument(format!("unknown scope `{other}`"))),
        }
    }
}

/// One RMS angular spread sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsValue {
    pub metric: Metric,
    pub scope: Scope,
    pub value_deg: f64,
    pub link_id: String,
    pub lobe_index: Option<usize>,
}

/// Power-weighted circular standard deviation of `angles_deg`, in degrees.
pub fn circular_as(angles_deg: &[f64], powers: &[f64]) -> Result<f64> {
    if angles_deg.is_empty() {
        return Err(Error::Empty("angles"));
    }
    if angles_deg.len() != powers.len() {
        return Err(Error::InvalidArgument(format!(
            "{} angles but {} powers",
            angles_deg.len(),
            powers.len()
        )));
    }
    let mut total = 0.0;
    let (mut c, mut s) = (0.0, 0.0);
    let mut theta = Vec::with_capacity(angles_deg.len());
    for (&a, &p) in angles_deg.iter().zip(powers) {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "powers must be > 0, got {p}"
            )));
        }
        let t = wrap_azimuth(a)?.to_radians();
        total += p;
        c += p * t.cos();
        s += p * t.sin();
        theta.push(t);
    }
    let direct = c.hypot(s) / total;
    if direct < 0.5 {
        // Small resultants are accurate straight from the vector sum.
        if direct < RESULTANT_FLOOR {
            return Err(Error::DegenerateSpread { resultant: direct });
        }
        return Ok((-2.0 * direct.ln()).sqrt().to_degrees());
    }
    // Re-centre on the mean direction so 1 - R is formed without cancellation:
    // R^2 = (1 - d)^2 + q^2 with d = sum p (1 - cos(t - m)) / P, q = sum p sin(t - m) / P.
    let mean = s.atan2(c);
    let (mut d, mut q) = (0.0, 0.0);
    for (t, p) in theta.iter().zip(powers) {
        let x = t - mean;
        let h = (x / 2.0).sin();
        d += p * 2.0 * h * h;
        q += p * x.sin();
    }
    d /= total;
    q /= total;
    let r2_minus_1 = -2.0 * d + d * d + q * q;
    let resultant = (1.0 + r2_minus_1).max(0.0).sqrt();
    if resultant < RESULTANT_FLOOR {
        return Err(Error::DegenerateSpread { resultant });
    }
    // -2 ln R = -ln(R^2)
    let spread_sq = -r2_minus_1.ln_1p();
    if spread_sq <= ZERO_SPREAD_RAD * ZERO_SPREAD_RAD {
        return Ok(0.0);
    }
    Ok(spread_sq.sqrt().to_degrees())
}

fn member_angles(lobes: &[&SpatialLobe], metric: Metric) -> (Vec<f64>, Vec<f64>) {
    let mut angles = Vec::new();
    let mut powers = Vec::new();
    for lobe in lobes {
        for m in &lobe.members {
            angles.push(if metric.is_zenith() {
                lobe.zenith_deg
            } else {
                m.azimuth_deg
            });
            powers.push(m.power_mw);
        }
    }
    (angles, powers)
}

/// Spread over the pooled members of every lobe. Zenith metrics use each
/// member's elevation-cut zenith angle.
pub fn omni_as(link_id: &str, lobes: &[SpatialLobe], metric: Metric) -> Result<AsValue> {
    let refs: Vec<&SpatialLobe> = lobes.iter().collect();
    let (angles, powers) = member_angles(&refs, metric);
    Ok(AsValue {
        metric,
        scope: Scope::Omni,
        value_deg: circular_as(&angles, &powers)?,
        link_id: link_id.to_string(),
        lobe_index: None,
    })
}

pub fn lobe_as(link_id: &str, lobe: &SpatialLobe, metric: Metric) -> Result<AsValue> {
    let (angles, powers) = member_angles(&[lobe], metric);
    Ok(AsValue {
        metric,
        scope: Scope::Lobe,
        value_deg: circular_as(&angles, &powers)?,
        link_id: link_id.to_string(),
        lobe_index: Some(lobe.lobe_index),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalFit {
    pub mu_lg: f64,
    pub sigma_lg: f64,
}

/// Mean and population standard deviation of `log10(values)`.
pub fn lognormal_fit(values_deg: &[f64]) -> Result<LogNormalFit> {
    if values_deg.is_empty() {
        return Err(Error::Empty("angular spread samples"));
    }
    let mut logs = Vec::with_capacity(values_deg.len());
    for &v in values_deg {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "log-normal samples must be > 0, got {v}"
            )));
        }
        logs.push(v.log10());
    }
    let n = logs.len() as f64;
    // shifted by the first sample so constant input gives exactly sigma = 0
    let shift = logs[0];
    let mean_dev = logs.iter().map(|x| x - shift).sum::<f64>() / n;
    let mu = shift + mean_dev;
    let var = logs
        .iter()
        .map(|x| (x - shift - mean_dev).powi(2))
        .sum::<f64>()
        / n;
    Ok(LogNormalFit {
        mu_lg: mu,
        sigma_lg: var.sqrt(),
    })
}

/// `10^(mu + sigma^2 / 2)`, the mean of the log-normal law in degrees.
pub fn lognormal_expectation_deg(mu_lg: f64, sigma_lg: f64) -> Result<f64> {
    if !mu_lg.is_finite() {
        return Err(Error::NonFinite {
            what: "mu_lg",
            value: mu_lg,
        });
    }
    if !sigma_lg.is_finite() {
        return Err(Error::NonFinite {
            what: "sigma_lg",
            value: sigma_lg,
        });
    }
    if sigma_lg < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sigma_lg must be >= 0, got {sigma_lg}"
        )));
    }
    Ok(10f64.powf(mu_lg + sigma_lg * sigma_lg / 2.0))
}

/// Right-continuous empirical CDF: one `(value, P[X <= value])` point per
/// distinct value, in ascending order.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::Empty("CDF samples"));
    }
    if let Some(&v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "CDF sample",
            value: v,
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = p,
            _ => out.push((*v, p)),
        }
    }
    Ok(out)
}

/// Log-normal summary of one metric for one condition, scope and frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogNormalSummary {
    pub metric: Metric,
    pub scope: Scope,
    pub condition: Condition,
    pub frequency_ghz: f64,
    pub mu_lg: f64,
    pub sigma_lg: f64,
    pub expectation_deg: f64,
    pub n_samples: usize,
}

impl LogNormalSummary {
    pub fn new(
        metric: Metric,
        scope: Scope,
        condition: Condition,
        frequency_ghz: f64,
        mu_lg: f64,
        sigma_lg: f64,
        n_samples: usize,
    ) -> Result<Self> {
        Ok(Self {
            metric,
            scope,
            condition,
            frequency_ghz,
            mu_lg,
            sigma_lg,
            expectation_deg: lognormal_expectation_deg(mu_lg, sigma_lg)?,
            n_samples,
        })
    }

    /// Fits the non-zero samples; zero spreads (single-direction lobes) have
    /// no logarithm and are dropped. Returns the summary and the number of
    /// samples dropped.
    pub fn from_samples(
        metric: Metric,
        scope: Scope,
        condition: Condition,
        frequency_ghz: f64,
        values_deg: &[f64],
    ) -> Result<(Self, usize)> {
        let kept: Vec<f64> = values_deg.iter().copied().filter(|v| *v != 0.0).collect();
        let fit = lognormal_fit(&kept)?;
        let s = Self::new(
            metric,
            scope,
            condition,
            frequency_ghz,
            fit.mu_lg,
            fit.sigma_lg,
            kept.len(),
        )?;
        Ok((s, values_deg.len() - kept.len()))
    }
}
