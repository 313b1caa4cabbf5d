//! Matrix-free block-row recursion over sliding windows.
//!
//! Window `t` holds the operators and data of `q` consecutive blocks. Moving to
//! the next window drops the `k` oldest blocks and appends `k` new ones; the
//! only thing carried across is the current model estimate. Each window solves
//! for a correction against the part of its data the previous estimate does
//! not explain:
//!
//! ```text
//! Δm = argmin ‖A(t) Δm − (d(t) − A(t) m_prev)‖² + λ‖Δm‖²,   m = m_prev + Δm
//! ```
//!
//! using CGLS from zero, which never needs `A(t)ᵀA(t)` explicitly.

use crate::error::{check_len, Error, Result};
use crate::linop::{norm, stack_rows, SharedOperator};
use crate::solver::{cgls_scaled, CgConfig, CgReport};

use super::plan::WindowPlan;

/// One group of rows of the full system: a shot's operator and its traces.
#[derive(Clone)]
pub struct DataBlock {
    pub block_index: usize,
    pub operator: SharedOperator,
    pub data: Vec<f64>,
}

impl std::fmt::Debug for DataBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DataBlock")
            .field("block_index", &self.block_index)
            .field("model_dim", &self.operator.model_dim())
            .field("data_len", &self.data.len())
            .finish()
    }
}

impl DataBlock {
    pub fn new(block_index: usize, operator: SharedOperator, data: Vec<f64>) -> Result<Self> {
        check_len("data block", operator.data_dim(), data.len())?;
        Ok(Self {
            block_index,
            operator,
            data,
        })
    }
}

/// How each window's solve is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartPolicy {
    /// Solve for a correction to the previous window's estimate.
    #[default]
    Warm,
    /// Ignore the previous estimate and solve every window from zero.
    Cold,
}

#[derive(Debug, Clone, Default)]
pub struct BrlsOptions {
    pub start: StartPolicy,
    /// Keep the estimate after every window.
    pub record_history: bool,
}

#[derive(Debug, Clone)]
pub struct BrlsOutcome {
    /// Estimate after the last window.
    pub model: Vec<f64>,
    pub reports: Vec<CgReport>,
    /// Per-window estimates, empty unless history was requested.
    pub window_models: Vec<Vec<f64>>,
    /// Windows whose operator was identically zero and were passed over.
    pub skipped: Vec<usize>,
}

impl BrlsOutcome {
    pub fn iterations(&self) -> Vec<usize> {
        self.reports.iter().map(|r| r.iterations_run).collect()
    }
}

/// Stacks blocks into one operator and one data vector.
pub fn assemble(blocks: &[DataBlock]) -> Result<(SharedOperator, Vec<f64>)> {
    let ops = blocks.iter().map(|b| b.operator.clone()).collect();
    let op = stack_rows(ops)?;
    let data = blocks.iter().flat_map(|b| b.data.iter().copied()).collect();
    Ok((std::sync::Arc::new(op), data))
}

pub fn brls_solve(
    blocks: &[DataBlock],
    plan: &WindowPlan,
    cg: &CgConfig,
    record_history: bool,
) -> Result<BrlsOutcome> {
    brls_solve_with(
        blocks,
        plan,
        cg,
        &BrlsOptions {
            start: StartPolicy::Warm,
            record_history,
        },
    )
}

pub fn brls_solve_with(
    blocks: &[DataBlock],
    plan: &WindowPlan,
    cg: &CgConfig,
    options: &BrlsOptions,
) -> Result<BrlsOutcome> {
    cg.validate()?;
    check_len(
        "blocks covered by window plan",
        plan.total_blocks,
        blocks.len(),
    )?;
    let model_dim = blocks[0].operator.model_dim();
    for b in blocks {
        check_len("data block model_dim", model_dim, b.operator.model_dim())?;
    }

    let mut model = vec![0.0; model_dim];
    let mut outcome = BrlsOutcome {
        model: Vec::new(),
        reports: Vec::with_capacity(plan.len()),
        window_models: Vec::new(),
        skipped: Vec::new(),
    };

    for (w, &(start, end)) in plan.windows.iter().enumerate() {
        let (op, data) = assemble(&blocks[start..=end])?;
        let wrap = |e: Error| Error::Window {
            window: w,
            source: Box::new(e),
        };

        if op.is_zero() {
            outcome.skipped.push(w);
            outcome.reports.push(CgReport {
                iterations_run: 0,
                normal_residual_history: vec![0.0],
                objective_history: vec![0.0],
                converged: true,
            });
            if options.record_history {
                outcome.window_models.push(model.clone());
            }
            continue;
        }

        // The tolerance is measured against the window's own data so warm and
        // cold solves chase the same target.
        let reference = norm(&op.apply_adjoint(&data).map_err(wrap)?);
        let (target, previous) = match options.start {
            StartPolicy::Warm => {
                let predicted = op.apply_forward(&model).map_err(wrap)?;
                let residual: Vec<f64> = data.iter().zip(&predicted).map(|(d, p)| d - p).collect();
                (residual, Some(&model))
            }
            StartPolicy::Cold => (data, None),
        };
        let (correction, report) =
            cgls_scaled(op.as_ref(), &target, cg, None, Some(reference)).map_err(wrap)?;

        model = match previous {
            Some(prev) => prev.iter().zip(&correction).map(|(m, dm)| m + dm).collect(),
            None => correction,
        };
        outcome.reports.push(report);
        if options.record_history {
            outcome.window_models.push(model.clone());
        }
    }

    outcome.model = model;
    Ok(outcome)
}
