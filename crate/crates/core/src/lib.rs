//! Block-row recursive least-squares imaging.
//!
//! Matrix-free operators ([`linop`]), a regularized CGLS solver ([`solver`]),
//! explicit and matrix-free recursive least squares over sliding windows of
//! data blocks ([`rls`]), and a split-step shot-profile Born modeling /
//! migration pair ([`wem`]) to drive them. [`synth`] builds desk-scale
//! experiments, [`metrics`] scores the resulting images.

pub mod error;
pub mod grid;
pub mod gridfile;
pub mod linop;
pub mod metrics;
pub mod render;
pub mod rls;
pub mod solver;
pub mod synth;
pub mod wem;

pub use error::{Error, Result};
pub use grid::Grid2D;
pub use linop::{
    dot_test, stack_rows, DenseOperator, DotTest, IdentityOperator, LinearOperator, SharedOperator,
    SignFlippedAdjoint, StackedOperator,
};
pub use metrics::{data_misfit, model_error, DepthBandPass, Method, RunReport};
pub use rls::{
    brls_solve, make_window_plan, BrlsOutcome, DataBlock, RlsState, StartPolicy, WindowPlan,
};
pub use solver::{cgls, closed_form_ls, CgConfig, CgReport};
pub use synth::{synthesize_data, ExperimentSpec, ModelKind, SyntheticExperiment};
pub use wem::{
    AcquisitionGeometry, Band, Reflectivity, ShotGather, ShotOperator, Survey, VelocityModel,
    Wavelet,
};
