//! Recursive least squares, dense and matrix-free.

mod block;
mod dense;
mod plan;

pub use block::{
    assemble, brls_solve, brls_solve_with, BrlsOptions, BrlsOutcome, DataBlock, StartPolicy,
};
pub use dense::{rls_init, rls_update_block, rls_update_rank1_mil, RlsState};
pub use plan::{make_window_plan, WindowPlan};
