//! End-to-end runs of the `lobescope` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lobescope::io::{parse_spreads, read_summaries};
use lobescope::{Metric, Scope};
use tempfile::TempDir;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(rel)
}

fn lobescope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lobescope"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("spawn lobescope")
}

fn ok(args: &[&str]) -> Output {
    let out = lobescope(args);
    assert!(
        out.status.success(),
        "lobescope {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fails(args: &[&str]) -> String {
    let out = lobescope(args);
    assert!(
        !out.status.success(),
        "lobescope {args:?} unexpectedly succeeded"
    );
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Relative paths of every file under `root`, sorted.
fn tree(root: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

/// Set `LOBESCOPE_BLESS=1` to rewrite the frozen files after an intended
/// change in output.
fn assert_same_tree(got: &Path, want: &Path) {
    if std::env::var_os("LOBESCOPE_BLESS").is_some() {
        let _ = fs::remove_dir_all(want);
        for rel in tree(got) {
            let dst = want.join(&rel);
            fs::create_dir_all(dst.parent().unwrap()).unwrap();
            fs::copy(got.join(&rel), dst).unwrap();
        }
        return;
    }
    assert_eq!(tree(got), tree(want), "file sets differ");
    for rel in tree(want) {
        let (a, b) = (
            fs::read(got.join(&rel)).unwrap(),
            fs::read(want.join(&rel)).unwrap(),
        );
        assert!(a == b, "{} differs from the frozen copy", rel.display());
    }
}

#[test]
fn golden_simulation_is_frozen() {
    let tmp = TempDir::new().unwrap();
    let env = data("golden/environments.json");
    ok(&[
        "simulate",
        "--input",
        s(&env),
        "--output-dir",
        s(tmp.path()),
        "--hpbw-az",
        "30",
        "--hpbw-el",
        "30",
    ]);
    let got = fs::read(tmp.path().join("records.csv")).unwrap();
    let want = data("golden/records.csv");
    if std::env::var_os("LOBESCOPE_BLESS").is_some() {
        fs::write(&want, &got).unwrap();
    }
    assert!(
        got == fs::read(want).unwrap(),
        "simulated records differ from the frozen copy"
    );
}

#[test]
fn golden_stats_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let records = data("golden/records.csv");
    let out = ok(&[
        "stats",
        "--input",
        s(&records),
        "--output-dir",
        s(tmp.path()),
        "--resolution-deg",
        "10",
    ]);
    assert_same_tree(tmp.path(), &data("golden/expected"));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("metric"));
    assert!(table.contains("ASA    omni  LOS        6.75"));
}

#[test]
fn single_subpath_gives_one_lobe_within_the_beamwidth() {
    let tmp = TempDir::new().unwrap();
    let env = tmp.path().join("env.json");
    fs::write(
        &env,
        r#"{"link_id": "a", "frequency_ghz": 16.95, "condition": "LOS", "subpaths": [
            {"power_mw": 1e-6, "delay_ns": 10, "aod_deg": 45, "zod_deg": 90, "aoa_deg": 200, "zoa_deg": 90}]}"#,
    )
    .unwrap();
    let sim = tmp.path().join("sim");
    let st = tmp.path().join("stats");
    ok(&[
        "simulate",
        "--input",
        s(&env),
        "--output-dir",
        s(&sim),
        "--hpbw-az",
        "15",
        "--hpbw-el",
        "15",
    ]);
    ok(&[
        "stats",
        "--input",
        s(&sim.join("records.csv")),
        "--output-dir",
        s(&st),
    ]);

    let text = fs::read_to_string(st.join("spreads.csv")).unwrap();
    let spreads = parse_spreads(text.as_bytes(), "spreads").unwrap();
    for m in Metric::ALL {
        assert!(
            spreads
                .iter()
                .any(|r| r.value.metric == m && r.value.scope == Scope::Omni),
            "no omni {m} row"
        );
    }
    let lobes = |m: Metric| {
        spreads
            .iter()
            .filter(|r| r.value.metric == m && r.value.scope == Scope::Lobe)
            .count()
    };
    assert_eq!((lobes(Metric::Asa), lobes(Metric::Asd)), (1, 1));
    let asa = spreads
        .iter()
        .find(|r| r.value.metric == Metric::Asa && r.value.scope == Scope::Omni)
        .unwrap();
    assert!(asa.value.value_deg <= 15.0, "ASA {}", asa.value.value_deg);
}

fn comparison_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn compare3gpp_reproduces_reference_delta() {
    let tmp = TempDir::new().unwrap();
    let summary = tmp.path().join("summary.csv");
    fs::write(
        &summary,
        "metric,scope,condition,frequency_ghz,mu_lg,sigma_lg,expectation_deg,n_samples\n\
         ZSA,omni,NLOS,6.75,1.01,0.29,11.27,20\n\
         ASA,lobe,NLOS,6.75,1.42,0.29,28.98,40\n",
    )
    .unwrap();
    ok(&[
        "compare3gpp",
        "--input",
        s(&summary),
        "--output-dir",
        s(tmp.path()),
    ]);
    let rows = comparison_rows(&tmp.path().join("comparison.csv"));
    assert_eq!(rows.len(), 1, "lobe rows have no model counterpart");
    let delta: f64 = rows[0][9].parse().unwrap();
    assert!((delta - 18.54).abs() <= 0.05, "delta {delta}");
}

#[test]
fn compare3gpp_against_itself_is_zero() {
    let tmp = TempDir::new().unwrap();
    let summary = tmp.path().join("summary.csv");
    // model parameters at 6.75 GHz, ASD NLOS, as the 3GPP columns round them
    fs::write(
        &summary,
        "metric,scope,condition,frequency_ghz,mu_lg,sigma_lg,expectation_deg,n_samples\n\
         ASD,omni,NLOS,6.75,1.62,0.25,0,1\n",
    )
    .unwrap();
    ok(&[
        "compare3gpp",
        "--input",
        s(&summary),
        "--output-dir",
        s(tmp.path()),
        "--format",
        "csv",
    ]);
    let rows = comparison_rows(&tmp.path().join("comparison.csv"));
    let delta: f64 = rows[0][9].parse().unwrap();
    assert!(delta.abs() < 1e-9, "delta {delta}");
}

#[test]
fn compare3gpp_rejects_out_of_range_frequency() {
    let tmp = TempDir::new().unwrap();
    let summary = tmp.path().join("summary.csv");
    fs::write(
        &summary,
        "metric,scope,condition,frequency_ghz,mu_lg,sigma_lg,expectation_deg,n_samples\n\
         ASA,omni,LOS,120,1.5,0.3,0,1\n",
    )
    .unwrap();
    let err = fails(&[
        "compare3gpp",
        "--input",
        s(&summary),
        "--output-dir",
        s(tmp.path()),
    ]);
    assert!(err.contains("120"), "{err}");
}

const ZERO_SIGMA_SPEC: &str = r#"{
  "n_links": 12, "condition": "NLOS", "frequency_ghz": 6.75, "seed": 11,
  "targets": {
    "ASA": {"mu_lg": 1.4, "sigma_lg": 0.0}, "ASD": {"mu_lg": 1.2, "sigma_lg": 0.0},
    "ZSA": {"mu_lg": 0.9, "sigma_lg": 0.0}, "ZSD": {"mu_lg": 0.7, "sigma_lg": 0.0}
  }
}"#;

#[test]
fn constant_ensemble_fits_zero_sigma() {
    let tmp = TempDir::new().unwrap();
    let spec = tmp.path().join("spec.json");
    fs::write(&spec, ZERO_SIGMA_SPEC).unwrap();
    let ens = tmp.path().join("ens");
    let st = tmp.path().join("stats");
    ok(&["ensemble", "--input", s(&spec), "--output-dir", s(&ens)]);
    ok(&[
        "stats",
        "--input",
        s(&ens.join("records.csv")),
        "--output-dir",
        s(&st),
    ]);
    let summaries = read_summaries(&st.join("summary.csv")).unwrap();
    let omni: Vec<_> = summaries
        .iter()
        .filter(|r| r.scope == Scope::Omni)
        .collect();
    assert_eq!(omni.len(), 4);
    for r in omni {
        assert!(r.sigma_lg.abs() < 1e-9, "{} sigma {}", r.metric, r.sigma_lg);
        assert_eq!(r.n_samples, 12);
    }
}

#[test]
fn ensemble_is_deterministic_per_seed() {
    let tmp = TempDir::new().unwrap();
    let spec = tmp.path().join("spec.json");
    fs::write(
        &spec,
        ZERO_SIGMA_SPEC.replace("\"sigma_lg\": 0.0", "\"sigma_lg\": 0.2"),
    )
    .unwrap();
    let run = |dir: &str, seed: &str| {
        let out = tmp.path().join(dir);
        ok(&[
            "ensemble",
            "--input",
            s(&spec),
            "--output-dir",
            s(&out),
            "--seed",
            seed,
        ]);
        out
    };
    let (a, b, c) = (run("a", "5"), run("b", "5"), run("c", "6"));
    assert_same_tree(&a, &b);
    assert_ne!(
        fs::read(a.join("records.csv")).unwrap(),
        fs::read(c.join("records.csv")).unwrap()
    );
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("run.toml");
    let out_cfg = tmp.path().join("from-config");
    fs::write(
        &config,
        format!(
            "input = {:?}\noutput_dir = {:?}\nformat = \"json\"\nresolution_deg = 10.0\n",
            data("golden/records.csv"),
            out_cfg
        ),
    )
    .unwrap();
    ok(&["stats", "--config", s(&config)]);
    assert!(out_cfg.join("summary.json").is_file());

    let out_flag = tmp.path().join("from-flags");
    ok(&[
        "stats",
        "--config",
        s(&config),
        "--output-dir",
        s(&out_flag),
        "--format",
        "csv",
    ]);
    assert!(out_flag.join("summary.csv").is_file());
    assert!(!out_flag.join("summary.json").exists());
    // resolution still comes from the file, so the summary matches the golden one
    assert_eq!(
        fs::read(out_flag.join("summary.csv")).unwrap(),
        fs::read(data("golden/expected/summary.csv")).unwrap()
    );
}

#[test]
fn unknown_config_key_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let config = tmp.path().join("run.toml");
    fs::write(&config, "treshold_db = 6.0\n").unwrap();
    let records = data("golden/records.csv");
    let err = fails(&[
        "stats",
        "--config",
        s(&config),
        "--input",
        s(&records),
        "--output-dir",
        s(tmp.path()),
    ]);
    assert!(err.contains("treshold_db"), "{err}");
}

#[test]
fn header_only_records_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let records = tmp.path().join("records.csv");
    fs::write(
        &records,
        "link_id,frequency_ghz,condition,tx_az_deg,tx_el_deg,rx_az_deg,rx_el_deg,power_dbm,tx_gain_dbi,rx_gain_dbi\n",
    )
    .unwrap();
    fails(&[
        "stats",
        "--input",
        s(&records),
        "--output-dir",
        s(&tmp.path().join("out")),
    ]);
}

#[test]
fn missing_power_column_names_the_column() {
    let tmp = TempDir::new().unwrap();
    let records = tmp.path().join("records.csv");
    fs::write(
        &records,
        "link_id,frequency_ghz,condition,tx_az_deg,tx_el_deg,rx_az_deg,rx_el_deg,tx_gain_dbi,rx_gain_dbi\n\
         a,6.75,LOS,0,90,0,90,15,15\n",
    )
    .unwrap();
    let err = fails(&[
        "stats",
        "--input",
        s(&records),
        "--output-dir",
        s(&tmp.path().join("out")),
    ]);
    assert!(err.contains("power_dbm"), "{err}");
}

#[test]
fn simulate_requires_beamwidths() {
    let tmp = TempDir::new().unwrap();
    let err = fails(&[
        "simulate",
        "--input",
        s(&data("golden/environments.json")),
        "--output-dir",
        s(tmp.path()),
        "--hpbw-az",
        "10",
    ]);
    assert!(err.contains("hpbw"), "{err}");
}

#[test]
fn missing_input_fails_before_running() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    fails(&[
        "cdf",
        "--input",
        s(&tmp.path().join("nope.csv")),
        "--output-dir",
        s(&out),
    ]);
    assert!(!out.exists());
}

#[test]
fn cdf_writes_only_cdf_files() {
    let tmp = TempDir::new().unwrap();
    ok(&[
        "cdf",
        "--input",
        s(&data("golden/records.csv")),
        "--output-dir",
        s(tmp.path()),
        "--resolution-deg",
        "10",
    ]);
    let files = tree(tmp.path());
    assert_eq!(files.len(), 18);
    for f in files {
        let name = f.to_str().unwrap();
        assert!(name.starts_with("cdf_"), "{name}");
        assert_eq!(
            fs::read(tmp.path().join(&f)).unwrap(),
            fs::read(data("golden/expected/cdf").join(&f)).unwrap()
        );
    }
}
