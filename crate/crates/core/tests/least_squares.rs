use std::sync::Arc;

use brls_core::rls::{brls_solve, rls_init, rls_update_block, rls_update_rank1_mil, DataBlock};
use brls_core::{cgls, closed_form_ls, make_window_plan, CgConfig, DenseOperator, LinearOperator};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseOperator {
    let entries = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    DenseOperator::new(rows, cols, entries).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

#[test]
fn cgls_agrees_with_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..30 {
        let m = rng.random_range(2..=15);
        let n = m + rng.random_range(5..=20);
        let a = random_matrix(&mut rng, n, m);
        let d = random_vec(&mut rng, n);
        for lambda in [0.0, 0.1, 1.0] {
            let cg = CgConfig::new(10 * m, 1e-14, lambda).unwrap();
            let (x, report) = cgls(&a, &d, &cg, None).unwrap();
            let oracle = closed_form_ls(&a, &d, lambda).unwrap();
            let err = rel_err(&x, &oracle);
            assert!(err < 1e-8, "trial {trial} lambda {lambda}: {err:e}");
            for w in report.objective_history.windows(2) {
                assert!(
                    w[1] <= w[0] * (1.0 + 1e-12),
                    "objective rose: {:?}",
                    report.objective_history
                );
            }
        }
    }
}

#[test]
fn cgls_needs_at_most_m_plus_few_iterations() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let m = rng.random_range(2..=12);
        let a = random_matrix(&mut rng, m + 10, m);
        let d = random_vec(&mut rng, m + 10);
        let cg = CgConfig::new(200, 1e-10, 0.0).unwrap();
        let (_, report) = cgls(&a, &d, &cg, None).unwrap();
        assert!(report.converged);
        assert!(
            report.iterations_run <= m + 3,
            "{} iterations for m = {m}",
            report.iterations_run
        );
    }
}

#[test]
fn preconditioned_cgls_reaches_same_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let a = random_matrix(&mut rng, 30, 8);
    let d = random_vec(&mut rng, 30);
    let diag: Vec<f64> = (0..8).map(|_| rng.random_range(0.5..2.0)).collect();
    let cg = CgConfig::new(100, 1e-13, 0.1)
        .unwrap()
        .with_preconditioner(diag)
        .unwrap();
    let (x, _) = cgls(&a, &d, &cg, None).unwrap();
    let oracle = closed_form_ls(&a, &d, 0.1).unwrap();
    assert!(rel_err(&x, &oracle) < 1e-8);
}

/// Random full-rank system split into an initial block and one update block.
fn split_system(rng: &mut ChaCha8Rng) -> (DenseOperator, Vec<f64>, DenseOperator, Vec<f64>) {
    let m = rng.random_range(1..=20);
    let n0 = m + rng.random_range(1..=10);
    let n1 = rng.random_range(1..=10);
    let a0 = random_matrix(rng, n0, m);
    let a1 = random_matrix(rng, n1, m);
    let d0 = random_vec(rng, n0);
    let d1 = random_vec(rng, n1);
    (a0, d0, a1, d1)
}

#[test]
fn block_recursion_equals_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..100 {
        let (a0, d0, a1, d1) = split_system(&mut rng);
        let state = rls_update_block(&rls_init(&a0, &d0, 0.0).unwrap(), &a1, &d1).unwrap();
        let stacked = DenseOperator::stack(&a0, &a1).unwrap();
        let data: Vec<f64> = d0.iter().chain(&d1).copied().collect();
        let batch = closed_form_ls(&stacked, &data, 0.0).unwrap();
        let err = rel_err(&state.estimate_vec(), &batch);
        assert!(err < 1e-9, "trial {trial}: {err:e}");
    }
}

#[test]
fn rank_one_updates_equal_block_update() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for trial in 0..100 {
        let (a0, d0, a1, d1) = split_system(&mut rng);
        let start = rls_init(&a0, &d0, 0.0).unwrap();
        let block = rls_update_block(&start, &a1, &d1).unwrap();
        let mut rows = start;
        for (i, &v) in d1.iter().enumerate() {
            rows = rls_update_rank1_mil(&rows, a1.row(i), v).unwrap();
        }
        let err = rel_err(&rows.estimate_vec(), &block.estimate_vec());
        assert!(err < 1e-10, "trial {trial}: {err:e}");
    }
}

#[test]
fn p_matrix_is_inverse_normal_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..50 {
        let (a0, d0, a1, d1) = split_system(&mut rng);
        let state = rls_update_block(&rls_init(&a0, &d0, 0.0).unwrap(), &a1, &d1).unwrap();
        let stacked = DenseOperator::stack(&a0, &a1).unwrap().to_matrix();
        let normal: DMatrix<f64> = stacked.transpose() * &stacked;
        let product = &state.p_matrix * normal;
        let m = product.nrows();
        let err = (product - DMatrix::identity(m, m)).norm() / (m as f64).sqrt();
        assert!(err < 1e-8, "{err:e}");
    }
}

fn row_blocks(a: &DenseOperator, d: &[f64], rows_per_block: usize) -> Vec<DataBlock> {
    (0..a.rows())
        .step_by(rows_per_block)
        .enumerate()
        .map(|(i, r0)| {
            let r1 = (r0 + rows_per_block).min(a.rows());
            let rows: Vec<Vec<f64>> = (r0..r1).map(|r| a.row(r).to_vec()).collect();
            let op = DenseOperator::from_rows(&rows).unwrap();
            DataBlock::new(i, Arc::new(op), d[r0..r1].to_vec()).unwrap()
        })
        .collect()
}

#[test]
fn single_window_plan_is_batch_cgls() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let a = random_matrix(&mut rng, 40, 12);
    let d = random_vec(&mut rng, 40);
    let blocks = row_blocks(&a, &d, 4);
    let plan = make_window_plan(blocks.len(), blocks.len(), 1).unwrap();
    let cg = CgConfig::new(100, 1e-12, 0.0).unwrap();
    let out = brls_solve(&blocks, &plan, &cg, false).unwrap();
    let (batch, _) = cgls(&a, &d, &cg, None).unwrap();
    assert!(rel_err(&out.model, &batch) < 1e-8);
}

#[test]
fn windows_recover_consistent_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let truth = random_vec(&mut rng, 10);
    let a = random_matrix(&mut rng, 60, 10);
    let d = a.apply_forward(&truth).unwrap();
    let blocks = row_blocks(&a, &d, 6);
    let plan = make_window_plan(blocks.len(), 3, 2).unwrap();
    let cg = CgConfig::new(200, 1e-13, 0.0).unwrap();
    let out = brls_solve(&blocks, &plan, &cg, true).unwrap();
    for (w, model) in out.window_models.iter().enumerate() {
        assert!(rel_err(model, &truth) < 1e-8, "window {w}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn recursion_matches_batch_for_any_split(seed in any::<u64>(), lambda in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a0, d0, a1, d1) = split_system(&mut rng);
        let state = rls_update_block(&rls_init(&a0, &d0, lambda).unwrap(), &a1, &d1).unwrap();
        let stacked = DenseOperator::stack(&a0, &a1).unwrap();
        let data: Vec<f64> = d0.iter().chain(&d1).copied().collect();
        let batch = closed_form_ls(&stacked, &data, lambda).unwrap();
        prop_assert!(rel_err(&state.estimate_vec(), &batch) < 1e-8);
    }
}
