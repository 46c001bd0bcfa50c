//! Fixed workloads shared by the benchmarks.

use std::f64::consts::TAU;

use transfer_core::{DiscreteMeasure, GridFunction, MapModel, ModulusSpec, TransferOperator};

/// Positions spread by the golden-ratio rotation, deterministic and
/// without clustering.
pub fn rotation_points(n: usize, offset: f64) -> Vec<f64> {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    (0..n).map(|i| (offset + i as f64 * phi).fract()).collect()
}

/// Equal-mass measures with `n` atoms each.
pub fn measure_pair(n: usize) -> (DiscreteMeasure, DiscreteMeasure) {
    let mu = DiscreteMeasure::uniform(&rotation_points(n, 0.1)).expect("valid atoms");
    let nu = DiscreteMeasure::uniform(&rotation_points(n, 0.37)).expect("valid atoms");
    (mu, nu)
}

/// Measures with unequal masses, so the flow solver is used.
pub fn weighted_pair(n: usize) -> (DiscreteMeasure, DiscreteMeasure) {
    let build = |offset: f64| {
        let pts = rotation_points(n, offset);
        let raw: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (i as f64).sin()).collect();
        let total: f64 = raw.iter().sum();
        DiscreteMeasure::new(pts.into_iter().zip(raw.iter().map(|m| m / total)).collect())
            .expect("valid atoms")
    };
    (build(0.1), build(0.37))
}

pub fn pm_operator(q: f64, n: usize) -> (MapModel, TransferOperator) {
    let map = MapModel::pm(q).expect("valid q");
    let potential = |x: f64| 0.5 * (TAU * x).cos();
    let op = TransferOperator::new(&map, &potential, n).expect("valid grid");
    (map, op)
}

pub fn smooth_observable(n: usize) -> GridFunction {
    GridFunction::from_fn(n, |x| (TAU * x).sin() + 0.3 * (2.0 * TAU * x).cos())
}

pub fn holder_02() -> ModulusSpec {
    ModulusSpec::new(0.2, 0.0).expect("valid modulus")
}
