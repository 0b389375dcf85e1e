//! Forward model of the directional channel sounder.
//!
//! A [`SyntheticEnvironment`] holds ground-truth subpaths. Each dwell sums
//! subpath powers non-coherently through the TX and RX horn patterns and
//! flags the result below-noise when it does not clear the noise floor.
//! [`run_procedure`] replays the measurement procedure on top of that:
//! strongest-direction search, rapid AOD scan, then HPBW-stepped RX azimuth
//! sweeps at several RX elevations for each TX tilt.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    circular_distance, linear_to_db, wrap_azimuth, Condition, Direction, DirectionalRecord,
    Subpath, BORESIGHT_ZENITH_DEG,
};

pub const DEFAULT_NOISE_FLOOR_DBM: f64 = -100.0;
pub const DEFAULT_SIGNIFICANCE_MARGIN_DB: f64 = 20.0;
pub const DEFAULT_SIDELOBE_FLOOR_DB: f64 = 30.0;

/// Horn gain for a carrier frequency, when it is one of the two campaign bands.
pub fn default_gain_dbi(frequency_ghz: f64) -> Option<f64> {
    if (frequency_ghz - 6.75).abs() < 1e-9 {
        Some(15.0)
    } else if (frequency_ghz - 16.95).abs() < 1e-9 {
        Some(20.0)
    } else {
        None
    }
}

/// Gaussian-mainlobe horn with a flat sidelobe floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaModel {
    pub boresight_gain_dbi: f64,
    pub hpbw_az_deg: f64,
    pub hpbw_el_deg: f64,
    /// Floor level in dB below boresight.
    pub sidelobe_floor_db: f64,
}

impl AntennaModel {
    pub fn new(
        boresight_gain_dbi: f64,
        hpbw_az_deg: f64,
        hpbw_el_deg: f64,
        sidelobe_floor_db: f64,
    ) -> Result<Self> {
        let m = Self {
            boresight_gain_dbi,
            hpbw_az_deg,
            hpbw_el_deg,
            sidelobe_floor_db,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.boresight_gain_dbi.is_finite() {
            return Err(Error::NonFinite {
                what: "boresight gain",
                value: self.boresight_gain_dbi,
            });
        }
        for (what, v) in [
            ("hpbw_az_deg", self.hpbw_az_deg),
            ("hpbw_el_deg", self.hpbw_el_deg),
            ("sidelobe_floor_db", self.sidelobe_floor_db),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{what} must be > 0, got {v}"
                )));
            }
        }
        if self.hpbw_az_deg > 360.0 || self.hpbw_el_deg > 180.0 {
            return Err(Error::InvalidArgument(format!(
                "beamwidth {}x{} deg exceeds the sphere",
                self.hpbw_az_deg, self.hpbw_el_deg
            )));
        }
        Ok(())
    }
}

/// Gain in dBi at an angular offset from boresight.
pub fn antenna_gain_db(offset_az_deg: f64, offset_el_deg: f64, model: &AntennaModel) -> f64 {
    let u = offset_az_deg / model.hpbw_az_deg;
    let v = offset_el_deg / model.hpbw_el_deg;
    let rolloff = (12.0 * (u * u + v * v)).min(model.sidelobe_floor_db);
    model.boresight_gain_dbi - rolloff
}

/// TX and RX horns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Antennas {
    pub tx: AntennaModel,
    pub rx: AntennaModel,
}

impl Antennas {
    /// Same horn at both ends.
    pub fn symmetric(model: AntennaModel) -> Self {
        Self {
            tx: model,
            rx: model,
        }
    }
}

/// Ground-truth multipath of one link.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEnvironment {
    pub link_id: String,
    pub frequency_ghz: f64,
    pub condition: Condition,
    pub noise_floor_dbm: f64,
    pub truth_subpaths: Vec<Subpath>,
}

impl SyntheticEnvironment {
    pub fn new(
        link_id: impl Into<String>,
        frequency_ghz: f64,
        condition: Condition,
        noise_floor_dbm: f64,
        truth_subpaths: Vec<Subpath>,
    ) -> Result<Self> {
        if !noise_floor_dbm.is_finite() {
            return Err(Error::NonFinite {
                what: "noise floor",
                value: noise_floor_dbm,
            });
        }
        if !(frequency_ghz.is_finite() && frequency_ghz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "frequency must be > 0 GHz, got {frequency_ghz}"
            )));
        }
        Ok(Self {
            link_id: link_id.into(),
            frequency_ghz,
            condition,
            noise_floor_dbm,
            truth_subpaths,
        })
    }
}

/// Received power of one dwell. The per-subpath contributions are summed in
/// sorted order so the result does not depend on subpath order.
pub fn measure_direction(
    env: &SyntheticEnvironment,
    tx_dir: Direction,
    rx_dir: Direction,
    antennas: &Antennas,
) -> DirectionalRecord {
    let mut contributions: Vec<f64> = env
        .truth_subpaths
        .iter()
        .map(|sp| {
            let g_tx = pattern_db(sp.departure, tx_dir, &antennas.tx);
            let g_rx = pattern_db(sp.arrival, rx_dir, &antennas.rx);
            sp.power_linear() * 10f64.powf((g_tx + g_rx) / 10.0)
        })
        .collect();
    contributions.sort_by(f64::total_cmp);
    let total: f64 = contributions.iter().sum();
    let floor_mw = 10f64.powf(env.noise_floor_dbm / 10.0);
    let power_dbm = if total > floor_mw {
        linear_to_db(total).ok()
    } else {
        None
    };
    DirectionalRecord {
        link_id: env.link_id.clone(),
        frequency_ghz: env.frequency_ghz,
        condition: env.condition,
        tx: tx_dir,
        rx: rx_dir,
        power_dbm,
        tx_gain_dbi: antennas.tx.boresight_gain_dbi,
        rx_gain_dbi: antennas.rx.boresight_gain_dbi,
    }
}

fn pattern_db(path: Direction, pointing: Direction, model: &AntennaModel) -> f64 {
    // Both azimuths are already wrapped, so the distance cannot fail.
    let d_az = circular_distance(path.azimuth_deg(), pointing.azimuth_deg()).unwrap_or(180.0);
    let d_el = path.zenith_deg() - pointing.zenith_deg();
    antenna_gain_db(d_az, d_el, model)
}

/// RX elevation cuts swept for one TX tilt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiltPlan {
    /// TX downtilt in units of the TX elevation HPBW (positive tilts down).
    pub tx_downtilt_hpbw: f64,
    /// RX elevation offsets in units of the RX elevation HPBW
    /// (positive tilts up).
    pub rx_cuts_hpbw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub search_step_deg: f64,
    /// Half-width of the zenith refinement around the horizon.
    pub elevation_search_span_deg: f64,
    pub significance_margin_db: f64,
    pub tilts: Vec<TiltPlan>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            search_step_deg: 1.0,
            elevation_search_span_deg: 20.0,
            significance_margin_db: DEFAULT_SIGNIFICANCE_MARGIN_DB,
            tilts: vec![
                TiltPlan {
                    tx_downtilt_hpbw: 0.0,
                    rx_cuts_hpbw: vec![0.0, 1.0, -1.0],
                },
                TiltPlan {
                    tx_downtilt_hpbw: 1.0,
                    rx_cuts_hpbw: vec![0.0, -1.0],
                },
            ],
        }
    }
}

impl SweepConfig {
    /// A single TX tilt and a single RX cut, both at boresight.
    pub fn boresight_only() -> Self {
        Self {
            tilts: vec![TiltPlan {
                tx_downtilt_hpbw: 0.0,
                rx_cuts_hpbw: vec![0.0],
            }],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        step_count(self.search_step_deg)?;
        if !(self.elevation_search_span_deg.is_finite() && self.elevation_search_span_deg >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "elevation search span must be >= 0, got {}",
                self.elevation_search_span_deg
            )));
        }
        if !(self.significance_margin_db.is_finite() && self.significance_margin_db >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "significance margin must be >= 0 dB, got {}",
                self.significance_margin_db
            )));
        }
        if self.tilts.is_empty() || self.tilts.iter().any(|t| t.rx_cuts_hpbw.is_empty()) {
            return Err(Error::Empty("sweep tilts or RX cuts"));
        }
        let offsets = self.tilts.iter().flat_map(|t| {
            std::iter::once(t.tx_downtilt_hpbw).chain(t.rx_cuts_hpbw.iter().copied())
        });
        for o in offsets {
            if !o.is_finite() {
                return Err(Error::NonFinite {
                    what: "tilt offset",
                    value: o,
                });
            }
        }
        Ok(())
    }
}

/// Number of equal steps around the circle for a nominal step size:
/// `round(360 / step)`, at least one.
pub fn step_count(step_deg: f64) -> Result<usize> {
    if !(step_deg.is_finite() && step_deg > 0.0 && step_deg <= 360.0) {
        return Err(Error::InvalidArgument(format!(
            "angular step must be in (0, 360], got {step_deg}"
        )));
    }
    Ok(((360.0 / step_deg).round() as usize).max(1))
}

fn ring(start_deg: f64, nominal_step_deg: f64) -> Result<Vec<f64>> {
    let n = step_count(nominal_step_deg)?;
    let step = 360.0 / n as f64;
    (0..n)
        .map(|k| wrap_azimuth(start_deg + k as f64 * step))
        .collect()
}

fn zenith_span(center: f64, span: f64, step: f64) -> Vec<f64> {
    let k = (span / step).floor() as i64;
    (-k..=k)
        .map(|i| center + i as f64 * step)
        .filter(|z| (0.0..=180.0).contains(z))
        .collect()
}

fn clamp_zenith(z: f64) -> f64 {
    z.clamp(0.0, 180.0)
}

/// Result of one run of the measurement procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcedureOutput {
    /// Dwells of the strongest-direction search, in execution order.
    pub search: Vec<DirectionalRecord>,
    /// HPBW-stepped RX sweeps, canonically sorted.
    pub sweeps: Vec<DirectionalRecord>,
    pub strongest_tx: Direction,
    pub strongest_rx: Direction,
    /// Azimuths of the significant AODs, strongest first.
    pub significant_aods: Vec<f64>,
}

impl ProcedureOutput {
    /// Search dwells followed by sweep dwells.
    pub fn all_records(&self) -> Vec<DirectionalRecord> {
        self.search.iter().chain(&self.sweeps).cloned().collect()
    }
}

struct Dwell<'a> {
    env: &'a SyntheticEnvironment,
    antennas: &'a Antennas,
    log: Vec<DirectionalRecord>,
}

impl Dwell<'_> {
    fn measure(&mut self, tx: Direction, rx: Direction) -> Option<f64> {
        let r = measure_direction(self.env, tx, rx, self.antennas);
        let p = r.power_dbm;
        self.log.push(r);
        p
    }

    /// Measures each candidate and returns the index of the strongest;
    /// ties keep the first, an all-absent sweep keeps index 0.
    fn argmax(&mut self, candidates: &[(Direction, Direction)]) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &(tx, rx)) in candidates.iter().enumerate() {
            if let Some(p) = self.measure(tx, rx) {
                if p > best.1 {
                    best = (i, p);
                }
            }
        }
        best.0
    }
}

fn dir(az: f64, zen: f64) -> Result<Direction> {
    Direction::new(az, clamp_zenith(zen))
}

/// Runs the full procedure on one environment.
///
/// The strongest-direction search runs once, at the untilted TX, and its
/// result anchors every later sweep:
///
/// 1. joint TX x RX azimuth scan at HPBW steps on the horizon;
/// 2. 1-degree refinements of TX azimuth, RX azimuth, TX zenith and RX zenith.
///
/// The rapid AOD scan steps the TX by its HPBW from the strongest AOD and
/// keeps each AOD whose best RX power over an HPBW-stepped RX scan is within
/// the significance margin of the strongest. Its dwells are not emitted.
pub fn run_procedure(
    env: &SyntheticEnvironment,
    config: &SweepConfig,
    antennas: &Antennas,
) -> Result<ProcedureOutput> {
    config.validate()?;
    antennas.tx.validate()?;
    antennas.rx.validate()?;
    let mut dwell = Dwell {
        env,
        antennas,
        log: Vec::new(),
    };
    let h = BORESIGHT_ZENITH_DEG;

    // 1. coarse joint scan
    let tx_ring = ring(0.0, antennas.tx.hpbw_az_deg)?;
    let rx_ring = ring(0.0, antennas.rx.hpbw_az_deg)?;
    let mut pairs = Vec::with_capacity(tx_ring.len() * rx_ring.len());
    for &t in &tx_ring {
        for &r in &rx_ring {
            pairs.push((dir(t, h)?, dir(r, h)?));
        }
    }
    let (mut tx, mut rx) = pairs[dwell.argmax(&pairs)];

    // 2. one-degree refinements
    let fine = ring(0.0, config.search_step_deg)?;
    let cands: Vec<_> = fine
        .iter()
        .map(|&a| Ok((dir(a, tx.zenith_deg())?, rx)))
        .collect::<Result<_>>()?;
    tx = cands[dwell.argmax(&cands)].0;
    let cands: Vec<_> = fine
        .iter()
        .map(|&a| Ok((tx, dir(a, rx.zenith_deg())?)))
        .collect::<Result<_>>()?;
    rx = cands[dwell.argmax(&cands)].1;
    let zs = zenith_span(h, config.elevation_search_span_deg, config.search_step_deg);
    let cands: Vec<_> = zs
        .iter()
        .map(|&z| Ok((dir(tx.azimuth_deg(), z)?, rx)))
        .collect::<Result<_>>()?;
    tx = cands[dwell.argmax(&cands)].0;
    let cands: Vec<_> = zs
        .iter()
        .map(|&z| Ok((tx, dir(rx.azimuth_deg(), z)?)))
        .collect::<Result<_>>()?;
    rx = cands[dwell.argmax(&cands)].1;
    let search = std::mem::take(&mut dwell.log);

    // rapid AOD scan
    let aod_ring = ring(tx.azimuth_deg(), antennas.tx.hpbw_az_deg)?;
    let rx_scan = ring(rx.azimuth_deg(), antennas.rx.hpbw_az_deg)?;
    let mut aod_power = Vec::with_capacity(aod_ring.len());
    for &a in &aod_ring {
        let t = dir(a, tx.zenith_deg())?;
        let mut best: Option<f64> = None;
        for &r in &rx_scan {
            if let Some(p) = dwell.measure(t, dir(r, rx.zenith_deg())?) {
                best = Some(best.map_or(p, |b: f64| b.max(p)));
            }
        }
        aod_power.push((a, best));
    }
    dwell.log.clear();
    let strongest = aod_power
        .iter()
        .filter_map(|(_, p)| *p)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut significant: Vec<(f64, f64)> = aod_power
        .iter()
        .filter_map(|&(a, p)| p.map(|p| (a, p)))
        .filter(|&(_, p)| p >= strongest - config.significance_margin_db)
        .collect();
    significant.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.total_cmp(&y.0)));
    let mut significant_aods: Vec<f64> = significant.iter().map(|s| s.0).collect();
    if significant_aods.is_empty() {
        // Nothing above noise: sweep the search result anyway.
        significant_aods.push(tx.azimuth_deg());
    }

    // HPBW-stepped RX sweeps
    for tilt in &config.tilts {
        let tx_zen = tx.zenith_deg() + tilt.tx_downtilt_hpbw * antennas.tx.hpbw_el_deg;
        for &aod in &significant_aods {
            let t = dir(aod, tx_zen)?;
            for &cut in &tilt.rx_cuts_hpbw {
                let rx_zen = rx.zenith_deg() - cut * antennas.rx.hpbw_el_deg;
                for &r in &rx_scan {
                    dwell.measure(t, dir(r, rx_zen)?);
                }
            }
        }
    }
    let mut sweeps = std::mem::take(&mut dwell.log);
    sort_records(&mut sweeps);

    Ok(ProcedureOutput {
        search,
        sweeps,
        strongest_tx: tx,
        strongest_rx: rx,
        significant_aods,
    })
}

/// Canonical order: link, then TX zenith, TX azimuth, RX zenith, RX azimuth.
pub fn sort_records(records: &mut [DirectionalRecord]) {
    records.sort_by(|a, b| {
        a.link_id
            .cmp(&b.link_id)
            .then(a.tx.zenith_deg().total_cmp(&b.tx.zenith_deg()))
            .then(a.tx.azimuth_deg().total_cmp(&b.tx.azimuth_deg()))
            .then(a.rx.zenith_deg().total_cmp(&b.rx.zenith_deg()))
            .then(a.rx.azimuth_deg().total_cmp(&b.rx.azimuth_deg()))
    });
}

/// Runs many environments in parallel; output order follows input order.
pub fn run_procedures(
    envs: &[SyntheticEnvironment],
    config: &SweepConfig,
    antennas: &Antennas,
) -> Result<Vec<ProcedureOutput>> {
    envs.par_iter()
        .map(|e| run_procedure(e, config, antennas).map_err(|err| err.for_link(&e.link_id)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn horn() -> AntennaModel {
        AntennaModel::new(15.0, 10.0, 10.0, 30.0).unwrap()
    }

    fn env(paths: &[(f64, f64, f64)]) -> SyntheticEnvironment {
        let sps = paths
            .iter()
            .map(|&(p, aod, aoa)| {
                Subpath::from_power(
                    p,
                    0.0,
                    Direction::horizon(aod).unwrap(),
                    Direction::horizon(aoa).unwrap(),
                )
                .unwrap()
            })
            .collect();
        SyntheticEnvironment::new("L1", 6.75, Condition::Los, DEFAULT_NOISE_FLOOR_DBM, sps).unwrap()
    }

    #[test]
    fn gain_examples() {
        let m = horn();
        assert_eq!(antenna_gain_db(0.0, 0.0, &m), 15.0);
        assert!((antenna_gain_db(5.0, 0.0, &m) - 12.0).abs() < 1e-12);
        assert_eq!(antenna_gain_db(100.0, 0.0, &m), -15.0);
        assert!(AntennaModel::new(15.0, 0.0, 10.0, 30.0).is_err());
        assert!(AntennaModel::new(15.0, 10.0, 10.0, 0.0).is_err());
    }

    #[test]
    fn measure_examples() {
        let a = Antennas::symmetric(horn());
        let h = |az| Direction::horizon(az).unwrap();
        let empty = env(&[]);
        assert_eq!(
            measure_direction(&empty, h(0.0), h(0.0), &a).power_dbm,
            None
        );
        let one = env(&[(1e-6, 30.0, 200.0)]);
        let aligned = measure_direction(&one, h(30.0), h(200.0), &a)
            .power_dbm
            .unwrap();
        assert!((aligned - (-60.0 + 30.0)).abs() < 1e-9);
        let off = measure_direction(&one, h(30.0), h(205.0), &a)
            .power_dbm
            .unwrap();
        assert!((aligned - off - 3.0).abs() < 1e-9);
        let r = measure_direction(&one, h(30.0), h(200.0), &a);
        assert_eq!((r.tx_gain_dbi, r.rx_gain_dbi), (15.0, 15.0));
    }

    #[test]
    fn single_subpath_localised() {
        let e = env(&[(1e-6, 123.4, 287.6)]);
        let out = run_procedure(&e, &SweepConfig::default(), &Antennas::symmetric(horn())).unwrap();
        assert!(circular_distance(out.strongest_tx.azimuth_deg(), 123.4).unwrap() <= 1.0);
        assert!(circular_distance(out.strongest_rx.azimuth_deg(), 287.6).unwrap() <= 1.0);
        assert_eq!(out.strongest_tx.zenith_deg(), 90.0);
        // the strongest AOD plus the two neighbouring HPBW steps at -12 dB
        assert_eq!(out.significant_aods.len(), 3);
        assert_eq!(out.significant_aods[0], out.strongest_tx.azimuth_deg());
    }

    #[test]
    fn record_count_one_cut_one_tilt() {
        let e = env(&[(1e-6, 0.0, 40.0), (1e-7, 100.0, 250.0)]);
        let a = Antennas::symmetric(horn());
        let out = run_procedure(&e, &SweepConfig::boresight_only(), &a).unwrap();
        assert_eq!(out.sweeps.len(), out.significant_aods.len() * 36);
        assert_eq!(
            out.all_records().len(),
            out.search.len() + out.significant_aods.len() * 36
        );
        // 36x36 joint scan, 2 x 360 azimuth, 2 x 41 zenith refinements
        assert_eq!(out.search.len(), 1296 + 720 + 82);
        let margin = SweepConfig {
            significance_margin_db: 5.0,
            ..SweepConfig::boresight_only()
        };
        let out = run_procedure(&e, &margin, &a).unwrap();
        assert_eq!(out.significant_aods.len(), 1);
        assert_eq!(out.sweeps.len(), 36);
    }

    #[test]
    fn empty_environment_is_all_below_noise() {
        let out = run_procedure(
            &env(&[]),
            &SweepConfig::default(),
            &Antennas::symmetric(horn()),
        )
        .unwrap();
        assert!(out.all_records().iter().all(|r| r.power_dbm.is_none()));
        assert_eq!(out.significant_aods.len(), 1);
    }

    #[test]
    fn permutation_invariant_and_deterministic() {
        let a = Antennas::symmetric(horn());
        let p = [
            (1e-6, 10.0, 40.0),
            (3e-7, 100.0, 250.0),
            (2e-7, 200.0, 60.0),
        ];
        let mut q = p;
        q.reverse();
        let x = run_procedure(&env(&p), &SweepConfig::default(), &a).unwrap();
        let y = run_procedure(&env(&q), &SweepConfig::default(), &a).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn doubling_powers_doubles_records() {
        let a = Antennas::symmetric(horn());
        let p = [(1e-6, 10.0, 40.0), (3e-7, 100.0, 250.0)];
        let d: Vec<_> = p.iter().map(|&(w, x, y)| (2.0 * w, x, y)).collect();
        let x = run_procedure(&env(&p), &SweepConfig::default(), &a).unwrap();
        let y = run_procedure(&env(&d), &SweepConfig::default(), &a).unwrap();
        for (r, s) in x.sweeps.iter().zip(&y.sweeps) {
            assert_eq!((r.tx, r.rx), (s.tx, s.rx));
            if let (Some(pr), Some(ps)) = (r.power_mw(), s.power_mw()) {
                assert!((ps / pr - 2.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn step_rounding() {
        assert_eq!(step_count(10.0).unwrap(), 36);
        assert_eq!(step_count(7.0).unwrap(), 51);
        assert_eq!(step_count(360.0).unwrap(), 1);
        assert!(step_count(0.0).is_err());
        let r = ring(355.0, 90.0).unwrap();
        assert_eq!(r, vec![355.0, 85.0, 175.0, 265.0]);
    }
}
