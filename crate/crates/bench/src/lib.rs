//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use brls_core::{synthesize_data, DenseOperator, ExperimentSpec, ModelKind, SyntheticExperiment};

/// Default desk experiment: 60x200 grid, 30 shots.
pub fn desk() -> SyntheticExperiment {
    synthesize_data(&ExperimentSpec::default()).expect("default spec is valid")
}

/// A quarter-size layered survey for solver timings.
pub fn small_spec() -> ExperimentSpec {
    ExperimentSpec {
        model: ModelKind::Layered {
            interfaces: vec![10, 20],
            velocities: vec![1500.0, 1800.0, 2100.0],
        },
        nz: 30,
        nx: 80,
        n_shots: 10,
        first_shot: 29,
        shot_interval: 4,
        n_receivers: 30,
        n_t: 128,
        ..ExperimentSpec::default()
    }
}

pub fn small() -> SyntheticExperiment {
    synthesize_data(&small_spec()).expect("small spec is valid")
}

/// Deterministic well-conditioned dense system.
pub fn dense_system(rows: usize, cols: usize) -> (Arc<DenseOperator>, Vec<f64>) {
    let entries = (0..rows * cols)
        .map(|i| {
            ((i * 7919 % 1009) as f64 / 1009.0) - 0.5 + if i % (cols + 1) == 0 { 2.0 } else { 0.0 }
        })
        .collect();
    let a = DenseOperator::new(rows, cols, entries).expect("sizes agree");
    let d = (0..rows).map(|i| (i as f64 * 0.37).sin()).collect();
    (Arc::new(a), d)
}
