//! Domain model shared by every stage of the pipeline.
//!
//! Angle conventions:
//!
//! * azimuths are compass-agnostic degrees in `[0, 360)`; any value is
//!   wrapped on construction, and circular arithmetic only goes through
//!   [`wrap_azimuth`] and [`circular_distance`];
//! * zenith angles are degrees in `[0, 180]` with `90` at the horizon
//!   (antenna boresight elevation); values outside are rejected.
//!
//! Powers are carried in dBm at the record level and in linear mW once a
//! power angular spectrum is built. A direction whose received power fell
//! below the noise floor carries `None` rather than a sentinel dBm value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boresight (horizon) zenith angle in degrees.
pub const BORESIGHT_ZENITH_DEG: f64 = 90.0;

fn finite(what: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { what, value })
    }
}

/// Wraps any finite angle into `[0, 360)`.
pub fn wrap_azimuth(deg: f64) -> Result<f64> {
    let r = finite("azimuth", deg)?.rem_euclid(360.0);
    // rem_euclid of a tiny negative number rounds up to exactly 360.
    Ok(if r >= 360.0 { 0.0 } else { r })
}

/// Shortest angular separation on the circle, in `[0, 180]`.
pub fn circular_distance(a_deg: f64, b_deg: f64) -> Result<f64> {
    let a = finite("azimuth", a_deg)?;
    let b = finite("azimuth", b_deg)?;
    let d = (a - b).abs() % 360.0;
    Ok(d.min(360.0 - d))
}

pub fn db_to_linear(db: f64) -> Result<f64> {
    Ok(10f64.powf(finite("power (dB)", db)? / 10.0))
}

pub fn linear_to_db(linear: f64) -> Result<f64> {
    let x = finite("power (linear)", linear)?;
    if x <= 0.0 {
        return Err(Error::NonPositivePower(x));
    }
    Ok(10.0 * x.log10())
}

/// Validated zenith angle.
pub fn check_zenith(deg: f64) -> Result<f64> {
    let z = finite("zenith", deg)?;
    if !(0.0..=180.0).contains(&z) {
        return Err(Error::ZenithOutOfRange(z));
    }
    Ok(z)
}

/// A pointing direction or a propagation direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    azimuth_deg: f64,
    zenith_deg: f64,
}

impl Direction {
    pub fn new(azimuth_deg: f64, zenith_deg: f64) -> Result<Self> {
        Ok(Self {
            azimuth_deg: wrap_azimuth(azimuth_deg)?,
            zenith_deg: check_zenith(zenith_deg)?,
        })
    }

    /// Direction on the horizon at the given azimuth.
    pub fn horizon(azimuth_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg, BORESIGHT_ZENITH_DEG)
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    pub fn zenith_deg(&self) -> f64 {
        self.zenith_deg
    }
}

/// Line-of-sight condition of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "LOS")]
    Los,
    #[serde(rename = "NLOS")]
    Nlos,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::Los, Condition::Nlos];
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Los => "LOS",
            Condition::Nlos => "NLOS",
        })
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LOS" => Ok(Condition::Los),
            "NLOS" => Ok(Condition::Nlos),
            other => Err(Error::InvalidArgument(format!(
                "condition must be LOS or NLOS, got `{other}`"
            ))),
        }
    }
}

/// Which end of the link a power angular spectrum describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Plane {
    /// Arrival directions, seen by the receiver.
    #[serde(rename = "AOA")]
    Aoa,
    /// Departure directions, seen by the transmitter.
    #[serde(rename = "AOD")]
    Aod,
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Plane::Aoa => "AOA",
            Plane::Aod => "AOD",
        })
    }
}

/// One multipath component: `a * exp(j*phase)` at delay `tau`, leaving the
/// transmitter along `departure` and reaching the receiver along `arrival`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subpath {
    /// Linear voltage magnitude.
    pub amplitude: f64,
    pub phase_rad: f64,
    pub delay_ns: f64,
    pub departure: Direction,
    pub arrival: Direction,
}

impl Subpath {
    pub fn new(
        amplitude: f64,
        phase_rad: f64,
        delay_ns: f64,
        departure: Direction,
        arrival: Direction,
    ) -> Result<Self> {
        let amplitude = finite("amplitude", amplitude)?;
        if amplitude < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "amplitude must be >= 0, got {amplitude}"
            )));
        }
        let delay_ns = finite("delay", delay_ns)?;
        if delay_ns < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "delay must be >= 0 ns, got {delay_ns}"
            )));
        }
        Ok(Self {
            amplitude,
            phase_rad: finite("phase", phase_rad)?,
            delay_ns,
            departure,
            arrival,
        })
    }

    /// Builds a zero-phase subpath from its power in mW.
    pub fn from_power(
        power_mw: f64,
        delay_ns: f64,
        departure: Direction,
        arrival: Direction,
    ) -> Result<Self> {
        let p = finite("subpath power", power_mw)?;
        if p < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "subpath power must be >= 0 mW, got {p}"
            )));
        }
        Self::new(p.sqrt(), 0.0, delay_ns, departure, arrival)
    }

    /// Power in mW, `amplitude^2`.
    pub fn power_linear(&self) -> f64 {
        self.amplitude * self.amplitude
    }
}

/// Subpaths sharing a time cluster, ordered by delay.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeCluster {
    subpaths: Vec<Subpath>,
}

impl TimeCluster {
    pub fn new(mut subpaths: Vec<Subpath>) -> Result<Self> {
        if subpaths.is_empty() {
            return Err(Error::Empty("time cluster"));
        }
        subpaths.sort_by(|a, b| a.delay_ns.total_cmp(&b.delay_ns));
        Ok(Self { subpaths })
    }

    pub fn subpaths(&self) -> &[Subpath] {
        &self.subpaths
    }
}

/// Discrete double-directional channel impulse response of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleDirectionalCir {
    pub link_id: String,
    pub frequency_ghz: f64,
    pub condition: Condition,
    clusters: Vec<TimeCluster>,
}

impl DoubleDirectionalCir {
    pub fn new(
        link_id: impl Into<String>,
        frequency_ghz: f64,
        condition: Condition,
        clusters: Vec<TimeCluster>,
    ) -> Result<Self> {
        let f = finite("frequency", frequency_ghz)?;
        if f <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "frequency must be > 0 GHz, got {f}"
            )));
        }
        if clusters.is_empty() {
            return Err(Error::Empty("impulse response clusters"));
        }
        Ok(Self {
            link_id: link_id.into(),
            frequency_ghz: f,
            condition,
            clusters,
        })
    }

    pub fn clusters(&self) -> &[TimeCluster] {
        &self.clusters
    }

    pub fn subpaths(&self) -> impl Iterator<Item = &Subpath> {
        self.clusters.iter().flat_map(|c| c.subpaths.iter())
    }
}

/// One dwell of the sounder: TX and RX pointing directions and the power
/// received there.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalRecord {
    pub link_id: String,
    pub frequency_ghz: f64,
    pub condition: Condition,
    pub tx: Direction,
    pub rx: Direction,
    /// Received power in dBm, `None` when below the noise floor.
    pub power_dbm: Option<f64>,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
}

impl DirectionalRecord {
    /// Pointing direction of the end that a PAS on `plane` is indexed by.
    pub fn direction(&self, plane: Plane) -> Direction {
        match plane {
            Plane::Aoa => self.rx,
            Plane::Aod => self.tx,
        }
    }

    pub fn power_mw(&self) -> Option<f64> {
        self.power_dbm.map(|p| 10f64.powf(p / 10.0))
    }
}
