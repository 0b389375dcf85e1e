//! Monte Carlo link ensembles with prescribed log-normal angular spreads.
//!
//! Each link draws one target per metric from `10^(mu + sigma z)` and builds
//! AOA lobes for the (ASA, ZSA) pair and AOD lobes for (ASD, ZSD).
//!
//! Azimuth: lobes sit on the 1-degree grid mirror-symmetrically about a
//! random anchor, so the mean resultant lies on the anchor axis and equals
//! `C = sum w cos(o) / sum w` over member offsets `o`. Member levels carry a
//! tilt of `t` dB times a profile affine in `cos(o)`; `C` is strictly
//! increasing in `t`, so once a layout brackets the target resultant the
//! tilt is found by bisection. Layouts are
//! scanned by growing an angular scale; a layout that never brackets the
//! target is rejected and redrawn.
//!
//! Zenith: every lobe is copied to the cuts `90 - d` and `90 + d` with half
//! its power. The pooled zenith resultant is then `cos d`, so
//! `d = acos(exp(-Z^2 / 2))` meets the zenith target exactly while leaving
//! the azimuth distribution untouched.
//!
//! RNG: ChaCha8 seeded from the spec seed, with link `i` on stream `i`, so
//! links can be generated in any order or in parallel.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lobes::{order_lobes, LobeMember, SpatialLobe};
use crate::model::{wrap_azimuth, Condition, Direction, DirectionalRecord, BORESIGHT_ZENITH_DEG};
use crate::stats::{circular_as, omni_as, Metric};

/// Adjustment steps allowed per layout before it is rejected.
pub const MAX_ITERATIONS: usize = 1000;
/// Accepted mismatch between a target and the re-measured omni spread.
pub const TOLERANCE_DEG: f64 = 0.1;
/// Smallest mean resultant a construction may aim for.
pub const MIN_RESULTANT: f64 = 1e-10;
/// Power of the strongest AOA x AOD dwell in emitted records.
pub const REFERENCE_POWER_DBM: f64 = -40.0;

const MAX_LAYOUTS: usize = 20;
const MAX_TARGET_DRAWS: usize = 100;
const TILT_DB: f64 = 2.0;
/// Per-lobe level offset and in-lobe taper, each spanning this many dB.
/// With the tilt, member levels stay within 9 dB of each other.
const BASE_SPAN_DB: f64 = 2.5;
const BISECT_TOL_DEG: f64 = 1e-9;

/// Draws one spread `10^(mu + sigma z)` with `z` standard normal.
pub fn draw_as_target<R: Rng + ?Sized>(rng: &mut R, mu_lg: f64, sigma_lg: f64) -> Result<f64> {
    check_law(mu_lg, sigma_lg)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(10f64.powf(mu_lg + sigma_lg * z))
}

fn check_law(mu_lg: f64, sigma_lg: f64) -> Result<()> {
    if !mu_lg.is_finite() {
        return Err(Error::NonFinite {
            what: "mu_lg",
            value: mu_lg,
        });
    }
    if !(sigma_lg.is_finite() && sigma_lg >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sigma_lg must be >= 0, got {sigma_lg}"
        )));
    }
    Ok(())
}

/// Spread of two equal-power directions `sep` degrees apart, inverted:
/// the separation that yields `target_deg`.
pub fn equal_pair_separation_deg(target_deg: f64) -> Result<f64> {
    let r = target_resultant(target_deg)?;
    Ok(2.0 * r.acos().to_degrees())
}

fn target_resultant(target_deg: f64) -> Result<f64> {
    if !(target_deg.is_finite() && target_deg >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "target spread must be >= 0, got {target_deg}"
        )));
    }
    let a = target_deg.to_radians();
    let r = (-a * a / 2.0).exp();
    if r < MIN_RESULTANT {
        let max = (-2.0 * MIN_RESULTANT.ln()).sqrt().to_degrees();
        return Err(Error::UnreachableTarget {
            target_deg,
            reason: format!("above the largest constructible spread {max:.2} deg"),
        });
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy)]
struct Shape {
    /// Position of a pair in `(0, 1)` of the scale, or width fraction for
    /// a lone centre lobe.
    pos: f64,
    width: f64,
    level_db: f64,
    taper_db: f64,
}

#[derive(Debug, Clone)]
struct Layout {
    lobe_count: usize,
    center: Option<Shape>,
    /// Sorted by position.
    pairs: Vec<Shape>,
}

/// Member offsets (degrees from the anchor) and base levels of one lobe.
type LobeOffsets = Vec<(i64, f64)>;

impl Layout {
    fn draw<R: Rng + ?Sized>(rng: &mut R, lobe_count: usize) -> Self {
        let shape = |rng: &mut R| Shape {
            pos: rng.random::<f64>(),
            width: rng.random::<f64>(),
            level_db: -BASE_SPAN_DB * rng.random::<f64>(),
            taper_db: BASE_SPAN_DB * rng.random::<f64>(),
        };
        let center = (lobe_count % 2 == 1).then(|| shape(rng));
        let mut pairs: Vec<Shape> = (0..lobe_count / 2).map(|_| shape(rng)).collect();
        pairs.sort_by(|a, b| a.pos.total_cmp(&b.pos));
        Self {
            lobe_count,
            center,
            pairs,
        }
    }

    /// Lobes at angular scale `scale_deg`, or `None` when lobes would
    /// touch, overlap or wrap onto their mirror image.
    fn lobes(&self, scale_deg: usize) -> Option<Vec<LobeOffsets>> {
        let s = scale_deg as f64;
        let mut out = Vec::with_capacity(self.lobe_count);
        let mut reach: i64 = -1;
        if let Some(c) = self.center {
            let h = if self.lobe_count == 1 {
                // A lone lobe must be able to cover most of the circle.
                ((0.9 + 0.1 * c.width) * s).floor().min(179.0) as i64
            } else {
                (c.width * s / (2 * self.lobe_count) as f64).floor() as i64
            };
            out.push(offsets(0, h, &c));
            reach = h;
        }
        for p in &self.pairs {
            let c = (p.pos * s).round() as i64;
            let h = (p.width * s / (2 * self.lobe_count) as f64).floor() as i64;
            if c - h < reach + 2 || c + h > 179 {
                return None;
            }
            let right = offsets(c, h, p);
            let left = right.iter().rev().map(|&(o, b)| (-o, b)).collect();
            out.push(right);
            out.push(left);
            reach = c + h;
        }
        Some(out)
    }
}

fn offsets(center: i64, half: i64, shape: &Shape) -> LobeOffsets {
    (center - half..=center + half)
        .map(|o| {
            let x = (o - center) as f64 / (half + 1) as f64;
            (o, shape.level_db - shape.taper_db * x * x)
        })
        .collect()
}

/// Tilt profile in `[-1, 1]`, affine in `cos(o)` over the layout's members.
/// Being affine in the cosine keeps the resultant monotone in the tilt.
fn tilt_profile(lobes: &[LobeOffsets]) -> impl Fn(i64) -> f64 {
    let cos_min = lobes
        .iter()
        .flatten()
        .map(|&(o, _)| (o as f64).to_radians().cos())
        .fold(1.0, f64::min);
    let span = 1.0 - cos_min;
    move |o| {
        if span <= 0.0 {
            0.0
        } else {
            2.0 * ((o as f64).to_radians().cos() - cos_min) / span - 1.0
        }
    }
}

fn weight(base_db: f64, tilt_db: f64, profile: f64) -> f64 {
    10f64.powf((base_db + tilt_db * profile) / 10.0)
}

/// Signed mean resultant along the anchor axis.
fn axial_resultant(lobes: &[LobeOffsets], tilt_db: f64) -> f64 {
    let g = tilt_profile(lobes);
    let (mut num, mut den) = (0.0, 0.0);
    for &(o, b) in lobes.iter().flatten() {
        let w = weight(b, tilt_db, g(o));
        num += w * (o as f64).to_radians().cos();
        den += w;
    }
    num / den
}

fn spread_of(resultant: f64) -> f64 {
    (-2.0 * resultant.ln()).sqrt().to_degrees()
}

/// Azimuth-plane members, with member power normalised to a unit peak.
type Arcs = Vec<Vec<LobeMember>>;

fn solve_layout(
    layout: &Layout,
    target_deg: f64,
    r_target: f64,
    anchor: f64,
) -> Result<Option<Arcs>> {
    let mut iterations = 0;
    for scale in 0..=180 {
        iterations += 1;
        if iterations > MAX_ITERATIONS {
            return Ok(None);
        }
        let Some(lobes) = layout.lobes(scale) else {
            continue;
        };
        let (c_lo, c_hi) = (
            axial_resultant(&lobes, -TILT_DB),
            axial_resultant(&lobes, TILT_DB),
        );
        if !(c_lo <= r_target && r_target <= c_hi) {
            continue;
        }
        let (mut lo, mut hi) = (-TILT_DB, TILT_DB);
        let mut tilt = hi;
        loop {
            let c = axial_resultant(&lobes, tilt);
            if c > 0.0 && (spread_of(c) - target_deg).abs() < BISECT_TOL_DEG {
                break;
            }
            iterations += 1;
            if iterations > MAX_ITERATIONS || hi - lo <= f64::EPSILON * TILT_DB {
                break;
            }
            if c < r_target {
                lo = tilt;
            } else {
                hi = tilt;
            }
            tilt = 0.5 * (lo + hi);
        }
        let arcs = materialise(&lobes, tilt, anchor)?;
        let (angles, powers): (Vec<f64>, Vec<f64>) = arcs
            .iter()
            .flatten()
            .map(|m| (m.azimuth_deg, m.power_mw))
            .unzip();
        match circular_as(&angles, &powers) {
            Ok(v) if (v - target_deg).abs() <= TOLERANCE_DEG => return Ok(Some(arcs)),
            _ => return Ok(None),
        }
    }
    Ok(None)
}

fn materialise(lobes: &[LobeOffsets], tilt_db: f64, anchor: f64) -> Result<Arcs> {
    let g = tilt_profile(lobes);
    let mut arcs: Arcs = lobes
        .iter()
        .map(|lobe| {
            lobe.iter()
                .map(|&(o, b)| {
                    Ok(LobeMember {
                        azimuth_deg: wrap_azimuth(anchor + o as f64)?,
                        power_mw: weight(b, tilt_db, g(o)),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let peak = arcs
        .iter()
        .flatten()
        .map(|m| m.power_mw)
        .fold(0.0, f64::max);
    for m in arcs.iter_mut().flatten() {
        m.power_mw /= peak;
    }
    Ok(arcs)
}

/// Builds lobes whose pooled omni spreads hit the azimuth and zenith targets.
///
/// Azimuth is matched within [`TOLERANCE_DEG`] (in practice to about 1e-9
/// deg); zenith is matched in closed form. A zero azimuth target is only
/// reachable with one single-member lobe.
pub fn generate_link<R: Rng + ?Sized>(
    rng: &mut R,
    azimuth_target_deg: f64,
    zenith_target_deg: f64,
    lobe_count: usize,
) -> Result<Vec<SpatialLobe>> {
    if lobe_count == 0 {
        return Err(Error::InvalidArgument("lobe_count must be >= 1".into()));
    }
    let r_az = target_resultant(azimuth_target_deg)?;
    let r_zen = target_resultant(zenith_target_deg)?;
    let anchor = rng.random_range(0..360) as f64;

    let arcs = if azimuth_target_deg == 0.0 {
        if lobe_count != 1 {
            return Err(Error::UnreachableTarget {
                target_deg: 0.0,
                reason: format!("zero spread needs a single-member lobe, not {lobe_count} lobes"),
            });
        }
        vec![vec![LobeMember {
            azimuth_deg: anchor,
            power_mw: 1.0,
        }]]
    } else {
        let mut found = None;
        for _ in 0..MAX_LAYOUTS {
            let layout = Layout::draw(rng, lobe_count);
            if let Some(arcs) = solve_layout(&layout, azimuth_target_deg, r_az, anchor)? {
                found = Some(arcs);
                break;
            }
        }
        found.ok_or_else(|| Error::UnreachableTarget {
            target_deg: azimuth_target_deg,
            reason: format!(
                "no layout of {lobe_count} lobes bracketed it after {MAX_LAYOUTS} draws"
            ),
        })?
    };

    let d = r_zen.acos().to_degrees();
    let cuts: Vec<(f64, f64)> = if d < 1e-6 {
        vec![(BORESIGHT_ZENITH_DEG, 1.0)]
    } else {
        vec![
            (BORESIGHT_ZENITH_DEG - d, 0.5),
            (BORESIGHT_ZENITH_DEG + d, 0.5),
        ]
    };
    let mut lobes = Vec::with_capacity(arcs.len() * cuts.len());
    for &(zenith, share) in &cuts {
        for arc in &arcs {
            let members = arc
                .iter()
                .map(|m| LobeMember {
                    azimuth_deg: m.azimuth_deg,
                    power_mw: m.power_mw * share,
                })
                .collect();
            lobes.push(SpatialLobe::from_members(zenith, members, 1.0)?);
        }
    }
    order_lobes(&mut lobes);
    Ok(lobes)
}

/// `(mu, sigma)` of `log10(AS / 1 deg)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogNormalTarget {
    pub mu_lg: f64,
    pub sigma_lg: f64,
}

fn default_lobe_range() -> [usize; 2] {
    [1, 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub n_links: usize,
    pub condition: Condition,
    pub frequency_ghz: f64,
    pub seed: u64,
    /// One law per metric; all four are required.
    pub targets: BTreeMap<Metric, LogNormalTarget>,
    /// Inclusive range of lobe counts per plane.
    #[serde(default = "default_lobe_range")]
    pub lobe_count_range: [usize; 2],
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_links == 0 {
            return Err(Error::InvalidArgument("n_links must be >= 1".into()));
        }
        if !(self.frequency_ghz.is_finite() && self.frequency_ghz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "frequency must be > 0 GHz, got {}",
                self.frequency_ghz
            )));
        }
        for m in Metric::ALL {
            let t = self.targets.get(&m).ok_or_else(|| {
                Error::InvalidArgument(format!("ensemble spec is missing a {m} target"))
            })?;
            check_law(t.mu_lg, t.sigma_lg)?;
        }
        let [lo, hi] = self.lobe_count_range;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidArgument(format!(
                "lobe_count_range must satisfy 1 <= lo <= hi, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    fn target(&self, m: Metric) -> LogNormalTarget {
        self.targets[&m]
    }
}

/// Drawn omni spreads of one link, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkTargets {
    pub asa_deg: f64,
    pub asd_deg: f64,
    pub zsa_deg: f64,
    pub zsd_deg: f64,
}

impl LinkTargets {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Asa => self.asa_deg,
            Metric::Asd => self.asd_deg,
            Metric::Zsa => self.zsa_deg,
            Metric::Zsd => self.zsd_deg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedLink {
    pub link_id: String,
    pub targets: LinkTargets,
    /// Target draws discarded as unconstructible before these targets.
    pub redraws: usize,
    pub aoa_lobes: Vec<SpatialLobe>,
    pub aod_lobes: Vec<SpatialLobe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub spec: EnsembleSpec,
    pub links: Vec<GeneratedLink>,
}

pub fn link_id(index: usize) -> String {
    format!("link-{index:04}")
}

/// Link `index` of the ensemble, independent of every other link.
pub fn generate_ensemble_link(spec: &EnsembleSpec, index: usize) -> Result<GeneratedLink> {
    let id = link_id(index);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let [lo, hi] = spec.lobe_count_range;
    let mut last_err = None;
    for redraws in 0..MAX_TARGET_DRAWS {
        let mut draw = |m: Metric| {
            let t = spec.target(m);
            draw_as_target(&mut rng, t.mu_lg, t.sigma_lg)
        };
        let targets = LinkTargets {
            asa_deg: draw(Metric::Asa)?,
            asd_deg: draw(Metric::Asd)?,
            zsa_deg: draw(Metric::Zsa)?,
            zsd_deg: draw(Metric::Zsd)?,
        };
        let n_aoa = rng.random_range(lo..=hi);
        let n_aod = rng.random_range(lo..=hi);
        let planes = plane_with_fallback(&mut rng, targets.asa_deg, targets.zsa_deg, n_aoa)
            .and_then(|aoa| {
                plane_with_fallback(&mut rng, targets.asd_deg, targets.zsd_deg, n_aod)
                    .map(|aod| (aoa, aod))
            });
        match planes {
            Ok((aoa_lobes, aod_lobes)) => {
                return Ok(GeneratedLink {
                    link_id: id,
                    targets,
                    redraws,
                    aoa_lobes,
                    aod_lobes,
                })
            }
            Err(e @ Error::UnreachableTarget { .. }) => {
                log::debug!("{id}: redrawing targets: {e}");
                last_err = Some(e);
            }
            Err(e) => return Err(e.for_link(&id)),
        }
    }
    Err(last_err
        .unwrap_or(Error::Empty("target draws"))
        .for_link(&id))
}

/// Tries `lobe_count`, then fewer lobes down to one.
fn plane_with_fallback<R: Rng + ?Sized>(
    rng: &mut R,
    az_deg: f64,
    zen_deg: f64,
    lobe_count: usize,
) -> Result<Vec<SpatialLobe>> {
    let mut err = None;
    for n in (1..=lobe_count).rev() {
        match generate_link(rng, az_deg, zen_deg, n) {
            Ok(l) => return Ok(l),
            Err(e @ Error::UnreachableTarget { .. }) => err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(err.unwrap_or(Error::Empty("lobe counts")))
}

/// Generates every link in parallel; the result equals sequential generation.
pub fn generate_ensemble(spec: &EnsembleSpec) -> Result<Ensemble> {
    spec.validate()?;
    let links = (0..spec.n_links)
        .into_par_iter()
        .map(|i| generate_ensemble_link(spec, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        spec: spec.clone(),
        links,
    })
}

fn peak_direction(lobes: &[SpatialLobe]) -> Result<(Direction, f64)> {
    let top = lobes.first().ok_or(Error::Empty("lobes"))?;
    Ok((
        Direction::new(top.peak_azimuth_deg(), top.zenith_deg)?,
        top.peak_power_mw,
    ))
}

impl GeneratedLink {
    /// Cross-sweep records: AOA dwells with the TX on the AOD peak and AOD
    /// dwells with the RX on the AOA peak. Each lobe is fenced by
    /// below-noise dwells on its two neighbouring bins so interpolation
    /// cannot bridge lobes. Gains are zero.
    pub fn records(
        &self,
        frequency_ghz: f64,
        condition: Condition,
    ) -> Result<Vec<DirectionalRecord>> {
        let (aoa_peak, aoa_max) = peak_direction(&self.aoa_lobes)?;
        let (aod_peak, aod_max) = peak_direction(&self.aod_lobes)?;
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut push = |tx: Direction, rx: Direction, p: Option<f64>| {
            let key = (
                tx.azimuth_deg().to_bits(),
                tx.zenith_deg().to_bits(),
                rx.azimuth_deg().to_bits(),
                rx.zenith_deg().to_bits(),
            );
            if seen.insert(key) {
                out.push(DirectionalRecord {
                    link_id: self.link_id.clone(),
                    frequency_ghz,
                    condition,
                    tx,
                    rx,
                    power_dbm: p,
                    tx_gain_dbi: 0.0,
                    rx_gain_dbi: 0.0,
                });
            }
        };
        for (lobes, max, is_aoa) in [
            (&self.aoa_lobes, aoa_max, true),
            (&self.aod_lobes, aod_max, false),
        ] {
            for lobe in lobes {
                let mut dwells: Vec<(f64, Option<f64>)> = lobe
                    .members
                    .iter()
                    .map(|m| {
                        (
                            m.azimuth_deg,
                            Some(REFERENCE_POWER_DBM + 10.0 * (m.power_mw / max).log10()),
                        )
                    })
                    .collect();
                if lobe.members.len() < 360 {
                    dwells.push((wrap_azimuth(lobe.start_deg - 1.0)?, None));
                    dwells.push((wrap_azimuth(lobe.end_deg + 1.0)?, None));
                }
                for (az, p) in dwells {
                    let d = Direction::new(az, lobe.zenith_deg)?;
                    if is_aoa {
                        push(aod_peak, d, p);
                    } else {
                        push(d, aoa_peak, p);
                    }
                }
            }
        }
        crate::sounder::sort_records(&mut out);
        Ok(out)
    }
}

impl Ensemble {
    pub fn records(&self) -> Result<Vec<DirectionalRecord>> {
        let mut all = Vec::new();
        for link in &self.links {
            all.extend(link.records(self.spec.frequency_ghz, self.spec.condition)?);
        }
        Ok(all)
    }

    /// Re-measured omni spreads of every link for `metric`.
    pub fn omni_spreads(&self, metric: Metric) -> Result<Vec<f64>> {
        self.links
            .iter()
            .map(|l| {
                let lobes = match metric.plane() {
                    crate::model::Plane::Aoa => &l.aoa_lobes,
                    crate::model::Plane::Aod => &l.aod_lobes,
                };
                omni_as(&l.link_id, lobes, metric).map(|v| v.value_deg)
            })
            .collect()
    }
}
