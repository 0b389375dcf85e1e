//! Spatial lobe detection on a power angular spectrum.
//!
//! A lobe is a maximal run of circularly-contiguous azimuth bins, within one
//! elevation cut, whose power is at or above the spatial lobe threshold
//! (SLT). Absent bins end a lobe exactly like weak ones. Runs crossing
//! 0/360 deg form a single lobe.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::db_to_linear;
use crate::pas::PowerAngularSpectrum;

/// Default threshold below the PAS peak, in dB.
pub const DEFAULT_THRESHOLD_DB: f64 = 10.0;

/// One grid direction inside a lobe. Serialized as `[azimuth_deg, power_mw]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct LobeMember {
    pub azimuth_deg: f64,
    pub power_mw: f64,
}

impl From<(f64, f64)> for LobeMember {
    fn from((azimuth_deg, power_mw): (f64, f64)) -> Self {
        Self {
            azimuth_deg,
            power_mw,
        }
    }
}

impl From<LobeMember> for (f64, f64) {
    fn from(m: LobeMember) -> Self {
        (m.azimuth_deg, m.power_mw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialLobe {
    pub lobe_index: usize,
    /// Elevation cut the lobe was found in.
    pub zenith_deg: f64,
    /// First bin of the arc, walking in increasing azimuth.
    pub start_deg: f64,
    /// Last bin of the arc (inclusive); may be numerically below `start_deg`
    /// when the arc wraps through 0 deg.
    pub end_deg: f64,
    pub peak_power_mw: f64,
    /// Every grid bin of the arc from start to end, interpolated bins included.
    pub members: Vec<LobeMember>,
}

impl SpatialLobe {
    /// Builds a lobe from members listed from start to end of the arc.
    /// Members must sit on consecutive bins of a `resolution_deg` grid.
    pub fn from_members(
        zenith_deg: f64,
        members: Vec<LobeMember>,
        resolution_deg: f64,
    ) -> Result<Self> {
        crate::model::check_zenith(zenith_deg)?;
        let first = members.first().ok_or(Error::Empty("lobe members"))?;
        for w in members.windows(2) {
            let step = (w[1].azimuth_deg - w[0].azimuth_deg).rem_euclid(360.0);
            if (step - resolution_deg).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "lobe members not contiguous: {} -> {}",
                    w[0].azimuth_deg, w[1].azimuth_deg
                )));
            }
        }
        if members.len() as f64 * resolution_deg > 360.0 + 1e-9 {
            return Err(Error::InvalidArgument(
                "lobe wraps past a full circle".into(),
            ));
        }
        let mut peak = f64::NEG_INFINITY;
        for m in &members {
            if !(m.power_mw.is_finite() && m.power_mw > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "lobe member power must be > 0 mW, got {}",
                    m.power_mw
                )));
            }
            peak = peak.max(m.power_mw);
        }
        Ok(Self {
            lobe_index: 0,
            zenith_deg,
            start_deg: first.azimuth_deg,
            end_deg: members
                .last()
                .map(|m| m.azimuth_deg)
                .unwrap_or(first.azimuth_deg),
            peak_power_mw: peak,
            members,
        })
    }

    /// Azimuth of the strongest member, lowest azimuth on ties.
    pub fn peak_azimuth_deg(&self) -> f64 {
        self.members
            .iter()
            .filter(|m| m.power_mw == self.peak_power_mw)
            .map(|m| m.azimuth_deg)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_power_mw(&self) -> f64 {
        self.members.iter().map(|m| m.power_mw).sum()
    }
}

/// Sorts lobes by descending peak power (ties: lower peak azimuth, then
/// lower zenith) and renumbers `lobe_index` from zero.
pub fn order_lobes(lobes: &mut [SpatialLobe]) {
    lobes.sort_by(|a, b| {
        b.peak_power_mw
            .total_cmp(&a.peak_power_mw)
            .then(a.peak_azimuth_deg().total_cmp(&b.peak_azimuth_deg()))
            .then(a.zenith_deg.total_cmp(&b.zenith_deg))
    });
    for (i, l) in lobes.iter_mut().enumerate() {
        l.lobe_index = i;
    }
}

/// Power `threshold_db` below the PAS peak, in mW.
pub fn spatial_lobe_threshold(pas: &PowerAngularSpectrum, threshold_db: f64) -> Result<f64> {
    if !(threshold_db.is_finite() && threshold_db > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be > 0 dB, got {threshold_db}"
        )));
    }
    let peak = pas.peak_power().ok_or(Error::NoPresentPower)?;
    Ok(peak / db_to_linear(threshold_db)?)
}

/// Maximal above-threshold arcs of every elevation cut, strongest first.
pub fn segment_lobes(pas: &PowerAngularSpectrum, slt_mw: f64) -> Result<Vec<SpatialLobe>> {
    if !(slt_mw.is_finite() && slt_mw > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lobe threshold must be > 0 mW, got {slt_mw}"
        )));
    }
    let mut lobes = Vec::new();
    for cut in &pas.cuts {
        let n = cut.bins.len();
        let above: Vec<bool> = cut
            .bins
            .iter()
            .map(|b| b.is_some_and(|p| p >= slt_mw))
            .collect();
        let member = |i: usize| LobeMember {
            azimuth_deg: pas.bin_azimuth(i),
            power_mw: cut.bins[i].expect("above-threshold bins are present"),
        };
        let mut runs: Vec<Vec<usize>> = Vec::new();
        match above.iter().position(|a| !a) {
            None => {
                let (start, _) = cut.peak().expect("all bins present");
                runs.push((0..n).map(|k| (start + k) % n).collect());
            }
            Some(gap) => {
                let mut current = Vec::new();
                for k in 1..=n {
                    let i = (gap + k) % n;
                    if above[i] {
                        current.push(i);
                    } else if !current.is_empty() {
                        runs.push(std::mem::take(&mut current));
                    }
                }
            }
        }
        for run in runs {
            let members: Vec<LobeMember> = run.into_iter().map(member).collect();
            lobes.push(SpatialLobe::from_members(
                cut.zenith_deg,
                members,
                pas.resolution_deg,
            )?);
        }
    }
    order_lobes(&mut lobes);
    Ok(lobes)
}

/// Number of lobes at `threshold_db` below the peak.
pub fn count_lobes(pas: &PowerAngularSpectrum, threshold_db: f64) -> Result<usize> {
    let slt = spatial_lobe_threshold(pas, threshold_db)?;
    Ok(segment_lobes(pas, slt)?.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Plane;
    use crate::pas::ElevationCut;

    pub(crate) fn pas_from_bins(bins: Vec<Option<f64>>) -> PowerAngularSpectrum {
        let n = bins.len();
        PowerAngularSpectrum {
            link_id: "L".into(),
            plane: Plane::Aoa,
            resolution_deg: 360.0 / n as f64,
            cuts: vec![ElevationCut {
                zenith_deg: 90.0,
                measured: bins.iter().map(|b| b.is_some()).collect(),
                bins,
            }],
        }
    }

    #[test]
    fn threshold_examples() {
        let mut bins = vec![None; 360];
        bins[3] = Some(1e-6);
        let pas = pas_from_bins(bins);
        let slt = spatial_lobe_threshold(&pas, 10.0).unwrap();
        assert!((10.0 * slt.log10() - (-70.0)).abs() < 1e-9);
        let mut bins = vec![None; 360];
        bins[0] = Some(1.0);
        let pas = pas_from_bins(bins);
        assert!((spatial_lobe_threshold(&pas, 10.0).unwrap() - 0.1).abs() < 1e-15);
        assert!((spatial_lobe_threshold(&pas, 3.0).unwrap() - 0.501187).abs() < 1e-6);
        assert!(spatial_lobe_threshold(&pas, 0.0).is_err());
        assert!(spatial_lobe_threshold(&pas_from_bins(vec![None; 360]), 10.0).is_err());
    }

    #[test]
    fn single_bin_lobe() {
        let mut bins = vec![Some(0.001); 360];
        bins[0] = Some(1.0);
        let pas = pas_from_bins(bins);
        let lobes = segment_lobes(&pas, 0.1).unwrap();
        assert_eq!(lobes.len(), 1);
        assert_eq!(lobes[0].members.len(), 1);
        assert_eq!(lobes[0].start_deg, 0.0);
        assert_eq!(count_lobes(&pas, 10.0).unwrap(), 1);
    }

    #[test]
    fn wraparound_lobe() {
        let mut bins = vec![Some(0.01); 360];
        for i in (350..360).chain(0..=10) {
            bins[i] = Some(1.0);
        }
        let pas = pas_from_bins(bins);
        let lobes = segment_lobes(&pas, 0.1).unwrap();
        assert_eq!(lobes.len(), 1);
        assert_eq!(lobes[0].members.len(), 21);
        assert_eq!(lobes[0].start_deg, 350.0);
        assert_eq!(lobes[0].end_deg, 10.0);
        assert_eq!(count_lobes(&pas, 10.0).unwrap(), 1);
    }

    #[test]
    fn full_circle_starts_at_peak() {
        let mut bins = vec![Some(0.5); 360];
        bins[200] = Some(1.0);
        let lobes = segment_lobes(&pas_from_bins(bins), 0.1).unwrap();
        assert_eq!(lobes.len(), 1);
        assert_eq!(lobes[0].members.len(), 360);
        assert_eq!(lobes[0].start_deg, 200.0);
        assert_eq!(lobes[0].end_deg, 199.0);
    }

    #[test]
    fn two_separated_arcs() {
        let mut bins = vec![Some(0.01); 360];
        bins[20..30].fill(Some(0.5));
        bins[100..105].fill(Some(1.0));
        bins[60] = None;
        let pas = pas_from_bins(bins);
        let lobes = segment_lobes(&pas, 0.1).unwrap();
        assert_eq!(lobes.len(), 2);
        assert_eq!(lobes[0].start_deg, 100.0);
        assert_eq!(lobes[0].lobe_index, 0);
        assert_eq!(lobes[1].members.len(), 10);
        assert_eq!(count_lobes(&pas, 10.0).unwrap(), 2);
    }

    #[test]
    fn threshold_is_inclusive_and_absent_ends_lobes() {
        let mut bins = vec![None; 360];
        bins[10] = Some(0.1);
        bins[11] = Some(1.0);
        bins[13] = Some(1.0);
        let lobes = segment_lobes(&pas_from_bins(bins), 0.1).unwrap();
        assert_eq!(lobes.len(), 2);
        assert_eq!(lobes.iter().map(|l| l.members.len()).sum::<usize>(), 3);
        // equal peaks: lower azimuth first
        assert_eq!(lobes[0].start_deg, 10.0);
    }

    #[test]
    fn from_members_validates() {
        let m = |a: f64| LobeMember {
            azimuth_deg: a,
            power_mw: 1.0,
        };
        assert!(SpatialLobe::from_members(90.0, vec![], 1.0).is_err());
        assert!(SpatialLobe::from_members(90.0, vec![m(0.0), m(2.0)], 1.0).is_err());
        let l = SpatialLobe::from_members(90.0, vec![m(359.0), m(0.0), m(1.0)], 1.0).unwrap();
        assert_eq!((l.start_deg, l.end_deg), (359.0, 1.0));
        assert!(SpatialLobe::from_members(
            90.0,
            vec![LobeMember {
                azimuth_deg: 0.0,
                power_mw: 0.0
            }],
            1.0
        )
        .is_err());
    }

    #[test]
    fn json_shape() {
        let l = SpatialLobe::from_members(
            90.0,
            vec![LobeMember {
                azimuth_deg: 5.0,
                power_mw: 0.25,
            }],
            1.0,
        )
        .unwrap();
        let v = serde_json::to_value(&l).unwrap();
        assert_eq!(v["members"][0], serde_json::json!([5.0, 0.25]));
        assert_eq!(v["peak_power_mw"], 0.25);
        let back: SpatialLobe = serde_json::from_value(v).unwrap();
        assert_eq!(back, l);
    }
}
