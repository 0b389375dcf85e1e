//! Pipeline orchestration behind the command-line tools.
//!
//! Per link: project each plane over the other end's pointings, build the
//! PAS, threshold it, segment lobes and take omni and lobe spreads. Links run
//! in parallel; results are gathered in link-id order and every output is
//! written single-threaded, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::io::{self, SpreadRow};
use crate::lobes::{segment_lobes, spatial_lobe_threshold, SpatialLobe, DEFAULT_THRESHOLD_DB};
use crate::model::{Condition, DirectionalRecord, Plane};
use crate::pas::{project_plane, synthesize_pas, PowerAngularSpectrum, DEFAULT_RESOLUTION_DEG};
use crate::sounder::ProcedureOutput;
use crate::stats::{empirical_cdf, lobe_as, omni_as, AsValue, LogNormalSummary, Metric, Scope};
use crate::tgpp::{TgppComparison, TgppParamTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub threshold_db: f64,
    pub resolution_deg: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            threshold_db: DEFAULT_THRESHOLD_DB,
            resolution_deg: DEFAULT_RESOLUTION_DEG,
        }
    }
}

/// Machine-readable summary format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaneAnalysis {
    pub slt_mw: f64,
    pub pas: PowerAngularSpectrum,
    pub lobes: Vec<SpatialLobe>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkAnalysis {
    pub link_id: String,
    pub frequency_ghz: f64,
    pub condition: Condition,
    pub aoa: PlaneAnalysis,
    pub aod: PlaneAnalysis,
    #[serde(skip)]
    pub spreads: Vec<AsValue>,
}

impl LinkAnalysis {
    pub fn plane(&self, plane: Plane) -> &PlaneAnalysis {
        match plane {
            Plane::Aoa => &self.aoa,
            Plane::Aod => &self.aod,
        }
    }

    pub fn omni(&self, metric: Metric) -> Option<f64> {
        self.spreads
            .iter()
            .find(|v| v.metric == metric && v.scope == Scope::Omni)
            .map(|v| v.value_deg)
    }
}

/// Splits records by link id (sorted). A link must not mix frequencies or
/// conditions.
pub fn group_links(records: &[DirectionalRecord]) -> Result<Vec<Vec<DirectionalRecord>>> {
    if records.is_empty() {
        return Err(Error::Empty("no links in input"));
    }
    let mut by_link: BTreeMap<&str, Vec<DirectionalRecord>> = BTreeMap::new();
    for r in records {
        let group = by_link.entry(&r.link_id).or_default();
        if let Some(first) = group.first() {
            if first.condition != r.condition {
                return Err(Error::MixedRecords {
                    what: "conditions",
                    first: first.condition.to_string(),
                    second: r.condition.to_string(),
                }
                .for_link(&r.link_id));
            }
        }
        group.push(r.clone());
    }
    Ok(by_link.into_values().collect())
}

fn analyze_plane(
    records: &[DirectionalRecord],
    plane: Plane,
    cfg: &PipelineConfig,
) -> Result<PlaneAnalysis> {
    let projected = project_plane(records, plane);
    let pas = synthesize_pas(&projected, plane, cfg.resolution_deg)?;
    let slt_mw = spatial_lobe_threshold(&pas, cfg.threshold_db)?;
    let lobes = segment_lobes(&pas, slt_mw)?;
    Ok(PlaneAnalysis { slt_mw, pas, lobes })
}

/// Runs one link (records of a single link) through the whole chain.
///
/// Lobes live in a single elevation cut, so their zenith spreads are zero
/// by construction; only azimuth lobe spreads are reported.
pub fn analyze_link(records: &[DirectionalRecord], cfg: &PipelineConfig) -> Result<LinkAnalysis> {
    let first = records.first().ok_or(Error::Empty("directional records"))?;
    let link = first.link_id.as_str();
    let run = || -> Result<LinkAnalysis> {
        let aoa = analyze_plane(records, Plane::Aoa, cfg)?;
        let aod = analyze_plane(records, Plane::Aod, cfg)?;
        let mut spreads = Vec::new();
        for metric in Metric::ALL {
            let lobes = match metric.plane() {
                Plane::Aoa => &aoa.lobes,
                Plane::Aod => &aod.lobes,
            };
            spreads.push(omni_as(link, lobes, metric)?);
            if !metric.is_zenith() {
                for lobe in lobes {
                    spreads.push(lobe_as(link, lobe, metric)?);
                }
            }
        }
        Ok(LinkAnalysis {
            link_id: link.to_string(),
            frequency_ghz: first.frequency_ghz,
            condition: first.condition,
            aoa,
            aod,
            spreads,
        })
    };
    run().map_err(|e| e.for_link(link))
}

/// Empirical CDF of one group of spreads.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfSeries {
    pub metric: Metric,
    pub scope: Scope,
    pub condition: Condition,
    pub frequency_ghz: f64,
    pub points: Vec<(f64, f64)>,
}

impl CdfSeries {
    pub fn file_name(&self) -> String {
        format!(
            "cdf_{}GHz_{}_{}_{}.csv",
            self.frequency_ghz, self.condition, self.scope, self.metric
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsReport {
    pub links: Vec<LinkAnalysis>,
    pub spreads: Vec<SpreadRow>,
    pub summaries: Vec<LogNormalSummary>,
    pub cdfs: Vec<CdfSeries>,
}

/// Groups key: frequency bits sort correctly for positive frequencies.
type GroupKey = (u64, Condition, Metric, Scope);

pub fn run_stats(records: &[DirectionalRecord], cfg: &PipelineConfig) -> Result<StatsReport> {
    let groups = group_links(records)?;
    let links = groups
        .par_iter()
        .map(|g| analyze_link(g, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut spreads = Vec::new();
    let mut samples: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    for link in &links {
        for v in &link.spreads {
            samples
                .entry((
                    link.frequency_ghz.to_bits(),
                    link.condition,
                    v.metric,
                    v.scope,
                ))
                .or_default()
                .push(v.value_deg);
            spreads.push(SpreadRow {
                frequency_ghz: link.frequency_ghz,
                condition: link.condition,
                value: v.clone(),
            });
        }
    }

    let mut summaries = Vec::new();
    let mut cdfs = Vec::new();
    for ((f_bits, condition, metric, scope), values) in samples {
        let frequency_ghz = f64::from_bits(f_bits);
        cdfs.push(CdfSeries {
            metric,
            scope,
            condition,
            frequency_ghz,
            points: empirical_cdf(&values)?,
        });
        if values.iter().all(|v| *v == 0.0) {
            log::warn!(
                "{metric} {scope} {condition} at {frequency_ghz} GHz: every spread is zero, no log-normal fit"
            );
            continue;
        }
        let (s, dropped) =
            LogNormalSummary::from_samples(metric, scope, condition, frequency_ghz, &values)?;
        if dropped > 0 {
            log::warn!(
                "{metric} {scope} {condition} at {frequency_ghz} GHz: {dropped} zero spreads left out of the fit"
            );
        }
        summaries.push(s);
    }
    Ok(StatsReport {
        links,
        spreads,
        summaries,
        cdfs,
    })
}

/// Compares every omni summary with the model. `frequency_ghz`, when given,
/// must match the summary rows; lobe rows have no model counterpart and
/// are skipped.
pub fn run_compare3gpp(
    summaries: &[LogNormalSummary],
    table: &TgppParamTable,
    frequency_ghz: Option<f64>,
) -> Result<Vec<TgppComparison>> {
    let mut out = Vec::new();
    for s in summaries {
        if s.scope != Scope::Omni {
            log::info!("skipping lobe-scoped {} {} row", s.metric, s.condition);
            continue;
        }
        out.push(table.compare(s, frequency_ghz.unwrap_or(s.frequency_ghz))?);
    }
    if out.is_empty() {
        return Err(Error::Empty("omni summary rows"));
    }
    Ok(out)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes the stats outputs into `dir` and returns the paths written:
/// the summary (CSV or JSON), per-link spreads, one CDF file per group
/// and the per-link PAS and lobes.
pub fn write_stats(report: &StatsReport, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    let summary = match format {
        ReportFormat::Csv => {
            let p = dir.join("summary.csv");
            io::save_with(&p, |f| io::write_summaries(f, &report.summaries))?;
            p
        }
        ReportFormat::Json => {
            let p = dir.join("summary.json");
            io::save_with(&p, |f| io::write_json(f, &report.summaries))?;
            p
        }
    };
    written.push(summary);
    let p = dir.join("spreads.csv");
    io::save_with(&p, |f| io::write_spreads(f, &report.spreads))?;
    written.push(p);
    let cdf_dir = dir.join("cdf");
    ensure_dir(&cdf_dir)?;
    for c in &report.cdfs {
        let p = cdf_dir.join(c.file_name());
        io::save_with(&p, |f| io::write_cdf(f, &c.points))?;
        written.push(p);
    }
    let p = dir.join("lobes.json");
    io::save_with(&p, |f| io::write_json(f, &report.links))?;
    written.push(p);
    Ok(written)
}

/// Writes the CDF files only.
pub fn write_cdfs(report: &StatsReport, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    for c in &report.cdfs {
        let p = dir.join(c.file_name());
        io::save_with(&p, |f| io::write_cdf(f, &c.points))?;
        written.push(p);
    }
    Ok(written)
}

pub fn write_comparisons(
    rows: &[TgppComparison],
    dir: &Path,
    format: ReportFormat,
) -> Result<PathBuf> {
    ensure_dir(dir)?;
    match format {
        ReportFormat::Csv => {
            let p = dir.join("comparison.csv");
            io::save_with(&p, |f| io::write_comparisons(f, rows))?;
            Ok(p)
        }
        ReportFormat::Json => {
            let p = dir.join("comparison.json");
            io::save_with(&p, |f| io::write_json(f, rows))?;
            Ok(p)
        }
    }
}

/// Writes `records.csv` (HPBW sweeps) and `search.csv` (search dwells).
pub fn write_simulation(outputs: &[ProcedureOutput], dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let sweeps: Vec<DirectionalRecord> = outputs
        .iter()
        .flat_map(|o| o.sweeps.iter().cloned())
        .collect();
    let search: Vec<DirectionalRecord> = outputs
        .iter()
        .flat_map(|o| o.search.iter().cloned())
        .collect();
    let records = dir.join("records.csv");
    io::save_records(&records, &sweeps)?;
    let search_path = dir.join("search.csv");
    io::save_records(&search_path, &search)?;
    Ok(vec![records, search_path])
}

/// Writes `records.csv`, the generated lobes (`lobes.json`) and the drawn
/// targets (`truth.json`).
pub fn write_ensemble(ensemble: &Ensemble, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let records = dir.join("records.csv");
    io::save_records(&records, &ensemble.records()?)?;
    let lobes = dir.join("lobes.json");
    io::save_with(&lobes, |f| io::write_json(f, ensemble))?;
    #[derive(Serialize)]
    struct Truth<'a> {
        link_id: &'a str,
        asa_deg: f64,
        asd_deg: f64,
        zsa_deg: f64,
        zsd_deg: f64,
        redraws: usize,
    }
    let truth: Vec<Truth<'_>> = ensemble
        .links
        .iter()
        .map(|l| Truth {
            link_id: &l.link_id,
            asa_deg: l.targets.asa_deg,
            asd_deg: l.targets.asd_deg,
            zsa_deg: l.targets.zsa_deg,
            zsd_deg: l.targets.zsd_deg,
            redraws: l.redraws,
        })
        .collect();
    let truth_path = dir.join("truth.json");
    io::save_with(&truth_path, |f| io::write_json(f, &truth))?;
    Ok(vec![records, lobes, truth_path])
}

/// Human-readable summary table, degrees to two decimals.
pub fn summary_table(rows: &[LogNormalSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<6} {:<5} {:<5} {:>9} {:>7} {:>7} {:>9} {:>6}",
        "metric", "scope", "cond", "freq_ghz", "mu_lg", "sigma", "E_deg", "n"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<6} {:<5} {:<5} {:>9.2} {:>7.2} {:>7.2} {:>9.2} {:>6}",
            r.metric.to_string(),
            r.scope.to_string(),
            r.condition.to_string(),
            r.frequency_ghz,
            r.mu_lg,
            r.sigma_lg,
            r.expectation_deg,
            r.n_samples
        );
    }
    s
}

pub fn comparison_table(rows: &[TgppComparison]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<6} {:<5} {:>9} {:>9} {:>9} {:>9}",
        "metric", "cond", "freq_ghz", "E_meas", "E_3gpp", "delta"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<6} {:<5} {:>9.2} {:>9.2} {:>9.2} {:>9.2}",
            r.metric.to_string(),
            r.condition.to_string(),
            r.frequency_ghz,
            r.measured_expectation_deg,
            r.tgpp_expectation_deg,
            r.delta_deg
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Direction;
    use crate::model::Subpath;
    use crate::sounder::{
        run_procedure, AntennaModel, Antennas, SweepConfig, SyntheticEnvironment,
    };

    fn simulate(paths: &[(f64, f64, f64)], link: &str) -> Vec<DirectionalRecord> {
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
        let env = SyntheticEnvironment::new(link, 6.75, Condition::Los, -100.0, sps).unwrap();
        let a = Antennas::symmetric(AntennaModel::new(15.0, 10.0, 10.0, 30.0).unwrap());
        run_procedure(&env, &SweepConfig::default(), &a)
            .unwrap()
            .sweeps
    }

    #[test]
    fn single_subpath_pipeline() {
        let recs = simulate(&[(1e-6, 40.0, 220.0)], "L1");
        let a = analyze_link(&recs, &PipelineConfig::default()).unwrap();
        assert_eq!(a.aoa.lobes.len(), 1);
        assert_eq!(a.aod.lobes.len(), 1);
        let asa = a.omni(Metric::Asa).unwrap();
        assert!(asa > 0.0 && asa <= 10.0, "{asa}");
        assert_eq!(a.aoa.lobes[0].peak_azimuth_deg(), 220.0);
    }

    #[test]
    fn stats_groups_and_fits() {
        let mut recs = simulate(&[(1e-6, 40.0, 220.0)], "L1");
        recs.extend(simulate(&[(1e-6, 10.0, 20.0), (1e-6, 100.0, 120.0)], "L2"));
        let r = run_stats(&recs, &PipelineConfig::default()).unwrap();
        assert_eq!(r.links.len(), 2);
        assert!(r
            .summaries
            .iter()
            .any(|s| s.metric == Metric::Asa && s.scope == Scope::Omni && s.n_samples == 2));
        // one CDF per (metric, scope) group present
        assert_eq!(r.cdfs.len(), 6);
        assert!(run_stats(&[], &PipelineConfig::default()).is_err());
    }

    #[test]
    fn errors_name_the_link() {
        let mut recs = simulate(&[(1e-6, 40.0, 220.0)], "bad");
        for r in &mut recs {
            r.power_dbm = None;
        }
        let e = run_stats(&recs, &PipelineConfig::default()).unwrap_err();
        assert!(e.to_string().starts_with("link bad:"), "{e}");
    }

    #[test]
    fn compare_skips_lobe_rows() {
        let rows = vec![
            LogNormalSummary::new(
                Metric::Asa,
                Scope::Lobe,
                Condition::Los,
                6.75,
                1.02,
                0.15,
                5,
            )
            .unwrap(),
            LogNormalSummary::new(
                Metric::Asa,
                Scope::Omni,
                Condition::Los,
                6.75,
                1.61,
                0.22,
                5,
            )
            .unwrap(),
        ];
        let c = run_compare3gpp(&rows, TgppParamTable::builtin(), None).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c[0].delta_deg.abs() < 0.3);
        let far = vec![LogNormalSummary::new(
            Metric::Asa,
            Scope::Omni,
            Condition::Los,
            120.0,
            1.0,
            0.1,
            1,
        )
        .unwrap()];
        assert!(matches!(
            run_compare3gpp(&far, TgppParamTable::builtin(), None),
            Err(Error::FrequencyOutOfRange(_))
        ));
    }

    #[test]
    fn tables_use_two_decimals() {
        let rows = vec![LogNormalSummary::new(
            Metric::Asa,
            Scope::Omni,
            Condition::Los,
            6.75,
            1.54,
            0.39,
            3,
        )
        .unwrap()];
        let t = summary_table(&rows);
        assert!(t.contains("41.31"), "{t}");
    }
}
