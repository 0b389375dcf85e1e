//! Power angular spectrum construction.
//!
//! Directional records for one link are gain-corrected, snapped onto a
//! regular azimuth grid per elevation cut, and the gaps between
//! circularly-adjacent measured directions are filled by linear
//! interpolation in mW. Elevation cuts are independent planes; nothing is
//! interpolated across zenith.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{db_to_linear, DirectionalRecord, Plane};

/// Default azimuth grid resolution, one degree.
pub const DEFAULT_RESOLUTION_DEG: f64 = 1.0;

/// Zenith angles closer than this are treated as the same elevation cut.
const ZENITH_KEY_SCALE: f64 = 1e6;

/// Which antenna gains to take out of a record's power.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainRemoval {
    /// Receive gain only.
    Rx,
    /// Transmit gain only.
    Tx,
    /// Both gains, giving isotropic-equivalent received power.
    Both,
}

impl GainRemoval {
    pub fn for_plane(plane: Plane) -> Self {
        match plane {
            Plane::Aoa => GainRemoval::Rx,
            Plane::Aod => GainRemoval::Tx,
        }
    }
}

/// Subtracts antenna gains from the recorded power and zeroes the removed
/// gain fields. Below-noise records pass through still flagged absent.
pub fn remove_antenna_gain(record: &DirectionalRecord, removal: GainRemoval) -> DirectionalRecord {
    let mut out = record.clone();
    let (tx, rx) = match removal {
        GainRemoval::Rx => (0.0, record.rx_gain_dbi),
        GainRemoval::Tx => (record.tx_gain_dbi, 0.0),
        GainRemoval::Both => (record.tx_gain_dbi, record.rx_gain_dbi),
    };
    out.power_dbm = record.power_dbm.map(|p| p - tx - rx);
    if matches!(removal, GainRemoval::Tx | GainRemoval::Both) {
        out.tx_gain_dbi = 0.0;
    }
    if matches!(removal, GainRemoval::Rx | GainRemoval::Both) {
        out.rx_gain_dbi = 0.0;
    }
    out
}

/// Azimuth grid of one elevation cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElevationCut {
    pub zenith_deg: f64,
    /// Power per bin in mW; `None` where nothing was measured or
    /// interpolated, or the measurement was below the noise floor.
    pub bins: Vec<Option<f64>>,
    /// `true` for bins holding a direct measurement (present or not).
    pub measured: Vec<bool>,
}

impl ElevationCut {
    pub fn peak(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in self.bins.iter().enumerate() {
            if let Some(p) = *p {
                // strict > keeps the lowest azimuth on ties
                if best.is_none_or(|(_, b)| p > b) {
                    best = Some((i, p));
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAngularSpectrum {
    pub link_id: String,
    pub plane: Plane,
    pub resolution_deg: f64,
    /// Cuts sorted by ascending zenith.
    pub cuts: Vec<ElevationCut>,
}

impl PowerAngularSpectrum {
    pub fn bin_count(&self) -> usize {
        self.cuts.first().map_or_else(
            || grid_size(self.resolution_deg).unwrap_or(0),
            |c| c.bins.len(),
        )
    }

    pub fn bin_azimuth(&self, bin: usize) -> f64 {
        bin as f64 * self.resolution_deg
    }

    /// Highest present bin power over all cuts.
    pub fn peak_power(&self) -> Option<f64> {
        self.cuts
            .iter()
            .filter_map(|c| c.peak().map(|(_, p)| p))
            .reduce(f64::max)
    }

    /// Synthetic records reproducing exactly the measured bins (gain-free).
    pub fn measured_records(&self, template: &DirectionalRecord) -> Vec<DirectionalRecord> {
        let mut out = Vec::new();
        for cut in &self.cuts {
            for (i, measured) in cut.measured.iter().enumerate() {
                if !measured {
                    continue;
                }
                let dir = crate::model::Direction::new(self.bin_azimuth(i), cut.zenith_deg)
                    .expect("grid directions are valid");
                let mut r = template.clone();
                r.link_id = self.link_id.clone();
                match self.plane {
                    Plane::Aoa => r.rx = dir,
                    Plane::Aod => r.tx = dir,
                }
                r.power_dbm = cut.bins[i].map(|p| 10.0 * p.log10());
                r.tx_gain_dbi = 0.0;
                r.rx_gain_dbi = 0.0;
                out.push(r);
            }
        }
        out
    }
}

fn grid_size(resolution_deg: f64) -> Result<usize> {
    if !(resolution_deg.is_finite() && resolution_deg > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "resolution must be > 0 deg, got {resolution_deg}"
        )));
    }
    let n = (360.0 / resolution_deg).round();
    if n < 1.0 || (n * resolution_deg - 360.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "resolution {resolution_deg} deg does not divide 360"
        )));
    }
    Ok(n as usize)
}

pub(crate) fn zenith_key(zenith_deg: f64) -> i64 {
    (zenith_deg * ZENITH_KEY_SCALE).round() as i64
}

/// Collapses records that share a pointing direction on `plane` into one,
/// keeping the strongest dwell over the other end's pointing directions.
///
/// A full sweep visits every RX direction once per TX pointing (and vice
/// versa); this is the reduction that turns it into one sample per
/// direction. Present powers beat below-noise ones; ties keep the first
/// record in canonical (zenith, azimuth) order.
pub fn project_plane(records: &[DirectionalRecord], plane: Plane) -> Vec<DirectionalRecord> {
    let mut best: BTreeMap<(i64, i64), DirectionalRecord> = BTreeMap::new();
    for r in records {
        let d = r.direction(plane);
        let key = (zenith_key(d.zenith_deg()), zenith_key(d.azimuth_deg()));
        let cand = remove_antenna_gain(r, GainRemoval::Both);
        match best.get(&key) {
            Some(cur) => {
                let better = match (cand.power_dbm, cur.power_dbm) {
                    (Some(a), Some(b)) => a > b,
                    (Some(_), None) => true,
                    _ => false,
                };
                if better {
                    best.insert(key, cand);
                }
            }
            None => {
                best.insert(key, cand);
            }
        }
    }
    best.into_values().collect()
}

/// Builds the gridded PAS of `plane` from records with unique pointing
/// directions on that plane. Both antenna gains are removed first, so bins
/// carry isotropic-equivalent power.
pub fn synthesize_pas(
    records: &[DirectionalRecord],
    plane: Plane,
    resolution_deg: f64,
) -> Result<PowerAngularSpectrum> {
    let first = records.first().ok_or(Error::Empty("directional records"))?;
    let n = grid_size(resolution_deg)?;
    for r in &records[1..] {
        if r.link_id != first.link_id {
            return Err(Error::MixedRecords {
                what: "links",
                first: first.link_id.clone(),
                second: r.link_id.clone(),
            });
        }
        if r.frequency_ghz != first.frequency_ghz {
            return Err(Error::MixedRecords {
                what: "frequencies",
                first: first.frequency_ghz.to_string(),
                second: r.frequency_ghz.to_string(),
            });
        }
    }
    if records.iter().all(|r| r.power_dbm.is_none()) {
        return Err(Error::NoPresentPower);
    }

    let mut cuts: BTreeMap<i64, ElevationCut> = BTreeMap::new();
    for r in records {
        let dir = r.direction(plane);
        let cut = cuts
            .entry(zenith_key(dir.zenith_deg()))
            .or_insert_with(|| ElevationCut {
                zenith_deg: dir.zenith_deg(),
                bins: vec![None; n],
                measured: vec![false; n],
            });
        let bin = (dir.azimuth_deg() / resolution_deg).round() as usize % n;
        if cut.measured[bin] {
            return Err(Error::DuplicateDirection {
                azimuth_deg: bin as f64 * resolution_deg,
                zenith_deg: dir.zenith_deg(),
            });
        }
        cut.measured[bin] = true;
        cut.bins[bin] = remove_antenna_gain(r, GainRemoval::Both)
            .power_dbm
            .map(db_to_linear)
            .transpose()?;
    }

    let mut cuts: Vec<ElevationCut> = cuts.into_values().collect();
    for cut in &mut cuts {
        interpolate_cut(cut);
    }
    Ok(PowerAngularSpectrum {
        link_id: first.link_id.clone(),
        plane,
        resolution_deg,
        cuts,
    })
}

/// Fills bins strictly between each pair of circularly-adjacent measured
/// bins, when both endpoints hold a present power.
fn interpolate_cut(cut: &mut ElevationCut) {
    let n = cut.bins.len();
    let measured: Vec<usize> = (0..n).filter(|&i| cut.measured[i]).collect();
    if measured.len() < 2 {
        return;
    }
    for (k, &a) in measured.iter().enumerate() {
        let b = measured[(k + 1) % measured.len()];
        let (Some(pa), Some(pb)) = (cut.bins[a], cut.bins[b]) else {
            continue;
        };
        let gap = (b + n - a) % n;
        for step in 1..gap {
            let t = step as f64 / gap as f64;
            cut.bins[(a + step) % n] = Some(pa + (pb - pa) * t);
        }
    }
}

/// Linear sum of all measured (never interpolated) bin powers, in mW.
pub fn total_omni_power(pas_set: &[PowerAngularSpectrum]) -> Result<f64> {
    if pas_set.is_empty() {
        return Err(Error::Empty("power angular spectra"));
    }
    let mut any = false;
    let mut total = 0.0;
    for pas in pas_set {
        for cut in &pas.cuts {
            for (p, m) in cut.bins.iter().zip(&cut.measured) {
                if let (Some(p), true) = (p, m) {
                    total += p;
                    any = true;
                }
            }
        }
    }
    if any {
        Ok(total)
    } else {
        Err(Error::NoPresentPower)
    }
}
