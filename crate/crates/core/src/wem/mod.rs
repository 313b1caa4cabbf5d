//! Wave-equation migration and de-migration operators.

mod extrapolate;
mod operator;
mod wavelet;

pub use extrapolate::{
    split_step_extrapolate, Direction, LateralTransform, SlownessRow, StepFactors,
};
pub use operator::{
    padded_width, shot_operator, survey_adjoint, survey_forward, AcquisitionGeometry, Band,
    Reflectivity, ShotGather, ShotOperator, Survey, VelocityModel,
};
pub use wavelet::{ricker, Wavelet};
