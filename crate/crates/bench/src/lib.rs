//! Fixed inputs shared by the benchmarks.

use lobescope::ensemble::{EnsembleSpec, LogNormalTarget};
use lobescope::model::{Direction, Subpath};
use lobescope::sounder::{AntennaModel, Antennas, SyntheticEnvironment};
use lobescope::Condition;
use lobescope::Metric;

/// NLOS ensemble at 16.95 GHz with moderate spreads.
pub fn ensemble_spec(n_links: usize) -> EnsembleSpec {
    let law = |mu_lg, sigma_lg| LogNormalTarget { mu_lg, sigma_lg };
    EnsembleSpec {
        n_links,
        condition: Condition::Nlos,
        frequency_ghz: 16.95,
        seed: 1,
        targets: [
            (Metric::Asa, law(1.4, 0.25)),
            (Metric::Asd, law(1.2, 0.2)),
            (Metric::Zsa, law(0.9, 0.2)),
            (Metric::Zsd, law(0.8, 0.15)),
        ]
        .into_iter()
        .collect(),
        lobe_count_range: [1, 3],
    }
}

/// Three-path environment and 10 deg horns.
pub fn environment() -> (SyntheticEnvironment, Antennas) {
    let sp = |p, aod, aoa| {
        Subpath::from_power(
            p,
            0.0,
            Direction::horizon(aod).unwrap(),
            Direction::horizon(aoa).unwrap(),
        )
        .unwrap()
    };
    let env = SyntheticEnvironment::new(
        "bench",
        6.75,
        Condition::Nlos,
        -100.0,
        vec![
            sp(1e-6, 30.0, 200.0),
            sp(4e-7, 95.0, 260.0),
            sp(1e-7, 300.0, 20.0),
        ],
    )
    .unwrap();
    (
        env,
        Antennas::symmetric(AntennaModel::new(15.0, 10.0, 10.0, 30.0).unwrap()),
    )
}

/// Angles and powers of `n` components spread over the circle.
pub fn components(n: usize) -> (Vec<f64>, Vec<f64>) {
    let angles = (0..n).map(|i| (i as f64 * 137.5) % 360.0).collect();
    let powers = (0..n).map(|i| 1.0 / (1.0 + (i % 17) as f64)).collect();
    (angles, powers)
}
