//! Split-step Fourier depth extrapolation.
//!
//! One depth step of the causal extrapolator is
//!
//! ```text
//! E = C · F⁻¹ · Φ · F
//! Φ(kx) = exp(−i kz dz) for kx² ≤ (ω s_ref)², 0 otherwise,  kz = sqrt((ω s_ref)² − kx²)
//! C(x)  = exp(−i ω (s(x) − s_ref) dz)
//! ```
//!
//! with `s_ref` the mean slowness of the row. The reverse step applies the
//! conjugate factors in the opposite order, `Eᴴ = F⁻¹ · Φ̄ · F · C̄`, which is
//! simultaneously the exact adjoint of `E` and its inverse on propagating
//! wavenumbers. Evanescent wavenumbers are zeroed in both directions.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Causal step: phases `e^{−i…}`, delays the field by one slab.
    Down,
    /// Adjoint (and propagating-wave inverse) of `Down`.
    Up,
}

/// Lateral FFT plans and wavenumbers for one padded width.
#[derive(Clone)]
pub struct LateralTransform {
    n: usize,
    kx2: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl std::fmt::Debug for LateralTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LateralTransform")
            .field("n", &self.n)
            .finish()
    }
}

impl LateralTransform {
    pub fn new(n: usize, dx: f64) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let dk = 2.0 * PI / (n as f64 * dx);
        let kx2 = (0..n)
            .map(|j| {
                let signed = if j <= n / 2 {
                    j as f64
                } else {
                    j as f64 - n as f64
                };
                (signed * dk).powi(2)
            })
            .collect();
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            kx2,
            forward,
            inverse,
            scratch_len,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn scratch(&self) -> Vec<Complex64> {
        vec![Complex64::default(); self.scratch_len]
    }
}

/// Slowness of one depth row, split into reference and residual parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SlownessRow {
    pub reference: f64,
    pub residual: Vec<f64>,
}

impl SlownessRow {
    pub fn from_velocity(velocity_row: &[f64]) -> Self {
        let slowness: Vec<f64> = velocity_row.iter().map(|v| 1.0 / v).collect();
        Self::from_slowness(&slowness)
    }

    pub fn from_slowness(slowness: &[f64]) -> Self {
        let reference = slowness.iter().sum::<f64>() / slowness.len() as f64;
        Self {
            reference,
            residual: slowness.iter().map(|s| s - reference).collect(),
        }
    }
}

/// Per-frequency, per-depth phase factors, precomputed once per operator.
#[derive(Debug, Clone)]
pub struct StepFactors {
    /// `Φ/n` over wavenumbers, already divided by the FFT length.
    spectral: Vec<Complex64>,
    /// `C` over lateral samples; `None` when the residual slowness vanishes.
    correction: Option<Vec<Complex64>>,
}

impl StepFactors {
    pub fn new(transform: &LateralTransform, row: &SlownessRow, omega: f64, dz: f64) -> Self {
        let k2 = (omega * row.reference).powi(2);
        let inv_n = 1.0 / transform.n as f64;
        let spectral = transform
            .kx2
            .iter()
            .map(|&kx2| {
                if kx2 <= k2 {
                    Complex64::from_polar(inv_n, -(k2 - kx2).sqrt() * dz)
                } else {
                    Complex64::default()
                }
            })
            .collect();
        let correction = if row.residual.iter().all(|&r| r == 0.0) {
            None
        } else {
            Some(
                row.residual
                    .iter()
                    .map(|&ds| Complex64::from_polar(1.0, -omega * ds * dz))
                    .collect(),
            )
        };
        Self {
            spectral,
            correction,
        }
    }

    /// Extrapolates `field` one slab in place.
    pub fn apply(
        &self,
        transform: &LateralTransform,
        field: &mut [Complex64],
        direction: Direction,
        scratch: &mut [Complex64],
    ) {
        match direction {
            Direction::Down => {
                transform.forward.process_with_scratch(field, scratch);
                for (f, p) in field.iter_mut().zip(&self.spectral) {
                    *f *= p;
                }
                transform.inverse.process_with_scratch(field, scratch);
                if let Some(c) = &self.correction {
                    for (f, p) in field.iter_mut().zip(c) {
                        *f *= p;
                    }
                }
            }
            Direction::Up => {
                if let Some(c) = &self.correction {
                    for (f, p) in field.iter_mut().zip(c) {
                        *f *= p.conj();
                    }
                }
                transform.forward.process_with_scratch(field, scratch);
                for (f, p) in field.iter_mut().zip(&self.spectral) {
                    *f *= p.conj();
                }
                transform.inverse.process_with_scratch(field, scratch);
            }
        }
    }
}

/// One split-step extrapolation of a lateral field at angular frequency `omega`.
///
/// `velocity_row` gives the velocity under every sample of `field` (including
/// any padding); the reference slowness is its mean slowness.
pub fn split_step_extrapolate(
    field: &[Complex64],
    velocity_row: &[f64],
    dx: f64,
    dz: f64,
    omega: f64,
    direction: Direction,
) -> Result<Vec<Complex64>> {
    check_len("extrapolated field", velocity_row.len(), field.len())?;
    let transform = LateralTransform::new(field.len(), dx);
    let factors = StepFactors::new(
        &transform,
        &SlownessRow::from_velocity(velocity_row),
        omega,
        dz,
    );
    let mut out = field.to_vec();
    let mut scratch = transform.scratch();
    factors.apply(&transform, &mut out, direction, &mut scratch);
    Ok(out)
}
