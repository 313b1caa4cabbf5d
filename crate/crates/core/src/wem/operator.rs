//! Shot-profile Born modeling and migration with split-step extrapolation.
//!
//! For each frequency `ω` in the band, one shot's forward (de-migration) is
//!
//! 1. inject the wavelet spectrum `W(ω)` at the source position,
//! 2. extrapolate that source field down through every depth slab,
//! 3. multiply it by the reflectivity at each depth to form secondary sources,
//! 4. carry the accumulated scattered field up to the surface, slab by slab,
//! 5. sample it at the receivers,
//!
//! and the traces are the real inverse DFT over the band,
//! `d(t) = (2/nt) Re Σ_ω D(ω) e^{iωt}`. The adjoint runs the chain backwards
//! with every step replaced by its adjoint, which makes it the split-step
//! shot-profile migration with a zero-lag cross-correlation imaging condition.
//!
//! Model vectors are reflectivity grids (depth fastest); data vectors are a
//! shot's traces (time fastest, one trace per receiver).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::linop::{LinearOperator, SharedOperator, StackedOperator};

use super::extrapolate::{Direction, LateralTransform, SlownessRow, StepFactors};
use super::wavelet::Wavelet;

/// Propagation velocity in m/s on a (depth, lateral) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityModel {
    pub grid: Grid2D,
}

impl VelocityModel {
    pub fn new(grid: Grid2D) -> Result<Self> {
        if grid.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("velocities must be positive and finite"));
        }
        Ok(Self { grid })
    }

    pub fn nz(&self) -> usize {
        self.grid.n1
    }

    pub fn nx(&self) -> usize {
        self.grid.n2
    }

    pub fn dz(&self) -> f64 {
        self.grid.d1
    }

    pub fn dx(&self) -> f64 {
        self.grid.d2
    }

    pub fn min(&self) -> f64 {
        self.grid
            .values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.grid.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.grid.values.iter().sum::<f64>() / self.grid.len() as f64
    }
}

/// Dimensionless reflectivity on the velocity grid.
pub type Reflectivity = Grid2D;

/// Source and receiver layout; all positions are lateral grid indices.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionGeometry {
    pub shot_positions: Vec<usize>,
    /// Receiver offsets relative to the shot, in grid cells.
    pub receiver_offsets: Vec<isize>,
    pub n_t: usize,
    pub dt: f64,
}

impl AcquisitionGeometry {
    /// Off-end spread with receivers trailing to the left of the source,
    /// nearest at zero offset.
    pub fn off_end(
        shot_positions: Vec<usize>,
        receivers: usize,
        spacing: usize,
        n_t: usize,
        dt: f64,
    ) -> Self {
        let receiver_offsets = (0..receivers).map(|r| -((r * spacing) as isize)).collect();
        Self {
            shot_positions,
            receiver_offsets,
            n_t,
            dt,
        }
    }

    pub fn receivers_per_shot(&self) -> usize {
        self.receiver_offsets.len()
    }

    pub fn n_shots(&self) -> usize {
        self.shot_positions.len()
    }

    pub fn receiver_positions(&self, shot: usize) -> Vec<usize> {
        let s = self.shot_positions[shot] as isize;
        self.receiver_offsets
            .iter()
            .map(|o| (s + o) as usize)
            .collect()
    }

    pub fn validate(&self, nx: usize) -> Result<()> {
        if self.shot_positions.is_empty() || self.receiver_offsets.is_empty() {
            return Err(Error::invalid(
                "geometry needs at least one shot and one receiver",
            ));
        }
        if self.n_t < 2 || !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("recording needs n_t >= 2 and dt > 0"));
        }
        for (i, &s) in self.shot_positions.iter().enumerate() {
            if s >= nx {
                return Err(Error::invalid(format!(
                    "shot {i} at x={s} is outside 0..{nx}"
                )));
            }
            for &o in &self.receiver_offsets {
                let r = s as isize + o;
                if r < 0 || r >= nx as isize {
                    return Err(Error::invalid(format!(
                        "receiver at offset {o} of shot {i} (x={r}) is outside 0..{nx}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Recorded traces of one shot: `n_receivers × n_t`, time fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotGather {
    pub shot_index: usize,
    pub traces: Grid2D,
}

/// Temporal frequency band in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub f_min: f64,
    pub f_max: f64,
}

impl Band {
    pub fn new(f_min: f64, f_max: f64) -> Self {
        Self { f_min, f_max }
    }

    /// DFT bins of an `n_t`-sample record whose frequencies lie in the band.
    pub fn bins(&self, n_t: usize, dt: f64) -> Result<Vec<usize>> {
        let nyquist = 0.5 / dt;
        if !(self.f_min > 0.0 && self.f_min <= self.f_max && self.f_max < nyquist) {
            return Err(Error::invalid(format!(
                "band [{}, {}] Hz must satisfy 0 < f_min <= f_max < Nyquist = {nyquist} Hz",
                self.f_min, self.f_max
            )));
        }
        let df = 1.0 / (n_t as f64 * dt);
        let lo = (self.f_min / df).ceil() as usize;
        let hi = (self.f_max / df).floor() as usize;
        let bins: Vec<usize> = (lo.max(1)..=hi).filter(|&j| 2 * j < n_t).collect();
        if bins.is_empty() {
            return Err(Error::invalid("frequency band contains no DFT bins"));
        }
        Ok(bins)
    }
}

/// Smallest power of two at least 1.5 times the grid width.
pub fn padded_width(nx: usize) -> usize {
    (nx + nx.div_ceil(2)).next_power_of_two()
}

/// Frequency-domain state shared by every shot of a survey.
struct Medium {
    nz: usize,
    nx: usize,
    npad: usize,
    dz: f64,
    transform: LateralTransform,
    rows: Vec<SlownessRow>,
    n_t: usize,
    /// Angular frequencies of the band bins.
    omegas: Vec<f64>,
    /// Wavelet spectrum at each band frequency.
    source: Vec<Complex64>,
    /// `(2/nt) e^{iω_j t}` indexed `[j * n_t + t]`.
    synthesis: Vec<Complex64>,
}

impl Medium {
    fn new(
        velocity: &VelocityModel,
        geometry: &AcquisitionGeometry,
        wavelet: &Wavelet,
        band: Band,
    ) -> Result<Self> {
        let (nz, nx) = (velocity.nz(), velocity.nx());
        geometry.validate(nx)?;
        if (wavelet.dt - geometry.dt).abs() > 1e-12 * geometry.dt {
            return Err(Error::invalid(format!(
                "wavelet dt {} differs from recording dt {}",
                wavelet.dt, geometry.dt
            )));
        }
        let bins = band.bins(geometry.n_t, geometry.dt)?;
        let npad = padded_width(nx);
        let transform = LateralTransform::new(npad, velocity.dx());

        let rows = (0..nz)
            .map(|iz| {
                let mut slowness: Vec<f64> =
                    velocity.grid.row(iz).iter().map(|v| 1.0 / v).collect();
                let mean = slowness.iter().sum::<f64>() / nx as f64;
                slowness.resize(npad, mean);
                SlownessRow::from_slowness(&slowness)
            })
            .collect();

        let n_t = geometry.n_t;
        let period = n_t as f64 * geometry.dt;
        let omegas: Vec<f64> = bins.iter().map(|&j| 2.0 * PI * j as f64 / period).collect();
        let source = omegas.iter().map(|&w| wavelet.spectrum(w)).collect();
        let scale = 2.0 / n_t as f64;
        let mut synthesis = Vec::with_capacity(bins.len() * n_t);
        for &j in &bins {
            for t in 0..n_t {
                // Reduce the phase index modulo n_t to keep the argument small.
                let phase = 2.0 * PI * ((j * t) % n_t) as f64 / n_t as f64;
                synthesis.push(Complex64::from_polar(scale, phase));
            }
        }
        Ok(Self {
            nz,
            nx,
            npad,
            dz: velocity.dz(),
            transform,
            rows,
            n_t,
            omegas,
            source,
            synthesis,
        })
    }

    fn step_factors(&self, omega: f64) -> Vec<StepFactors> {
        self.rows
            .iter()
            .map(|row| StepFactors::new(&self.transform, row, omega, self.dz))
            .collect()
    }
}

/// Shared setup for all shots of one survey.
#[derive(Clone)]
pub struct Survey {
    medium: Arc<Medium>,
    geometry: AcquisitionGeometry,
    dz: f64,
    dx: f64,
}

impl std::fmt::Debug for Survey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Survey")
            .field("nz", &self.medium.nz)
            .field("nx", &self.medium.nx)
            .field("npad", &self.medium.npad)
            .field("frequencies", &self.medium.omegas.len())
            .field("shots", &self.geometry.n_shots())
            .finish()
    }
}

impl Survey {
    pub fn new(
        velocity: &VelocityModel,
        geometry: &AcquisitionGeometry,
        wavelet: &Wavelet,
        band: Band,
    ) -> Result<Self> {
        let medium = Medium::new(velocity, geometry, wavelet, band)?;
        Ok(Self {
            medium: Arc::new(medium),
            geometry: geometry.clone(),
            dz: velocity.dz(),
            dx: velocity.dx(),
        })
    }

    pub fn geometry(&self) -> &AcquisitionGeometry {
        &self.geometry
    }

    pub fn model_dim(&self) -> usize {
        self.medium.nz * self.medium.nx
    }

    pub fn n_frequencies(&self) -> usize {
        self.medium.omegas.len()
    }

    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.medium.omegas.iter().map(|w| w / (2.0 * PI)).collect()
    }

    pub fn padded_width(&self) -> usize {
        self.medium.npad
    }

    pub fn shot_operator(&self, shot_index: usize) -> Result<ShotOperator> {
        if shot_index >= self.geometry.n_shots() {
            return Err(Error::invalid(format!(
                "shot index {shot_index} out of range 0..{}",
                self.geometry.n_shots()
            )));
        }
        Ok(ShotOperator {
            medium: self.medium.clone(),
            shot_index,
            source_x: self.geometry.shot_positions[shot_index],
            receivers: self.geometry.receiver_positions(shot_index),
        })
    }

    pub fn shot_operators(&self) -> Vec<SharedOperator> {
        (0..self.geometry.n_shots())
            .map(|i| Arc::new(self.shot_operator(i).expect("index in range")) as SharedOperator)
            .collect()
    }

    pub fn survey_operator(&self) -> StackedOperator {
        crate::linop::stack_rows(self.shot_operators()).expect("shots share the model grid")
    }

    pub fn empty_model(&self) -> Reflectivity {
        Grid2D::filled(self.medium.nz, self.medium.nx, self.dz, self.dx, 0.0).expect("valid grid")
    }

    fn check_model(&self, reflectivity: &Reflectivity) -> Result<()> {
        if reflectivity.n1 != self.medium.nz || reflectivity.n2 != self.medium.nx {
            return Err(Error::invalid(format!(
                "reflectivity is {}x{}, survey grid is {}x{}",
                reflectivity.n1, reflectivity.n2, self.medium.nz, self.medium.nx
            )));
        }
        Ok(())
    }

    /// Born data for every shot, in acquisition order.
    pub fn forward(&self, reflectivity: &Reflectivity) -> Result<Vec<ShotGather>> {
        self.check_model(reflectivity)?;
        (0..self.geometry.n_shots())
            .map(|i| {
                let op = self.shot_operator(i)?;
                let data = op.apply_forward(&reflectivity.values)?;
                Ok(ShotGather {
                    shot_index: i,
                    traces: Grid2D::new(
                        self.medium.n_t,
                        op.receivers.len(),
                        self.geometry.dt,
                        self.dx,
                        data,
                    )?,
                })
            })
            .collect()
    }

    /// Migration stack: sum of per-shot adjoint images in shot order.
    pub fn adjoint(&self, gathers: &[ShotGather]) -> Result<Reflectivity> {
        if gathers.len() != self.geometry.n_shots() {
            return Err(Error::DimensionMismatch {
                context: "survey gathers",
                expected: self.geometry.n_shots(),
                got: gathers.len(),
            });
        }
        let mut image = self.empty_model();
        for (i, g) in gathers.iter().enumerate() {
            let op = self.shot_operator(i)?;
            let part = op.apply_adjoint(&g.traces.values)?;
            for (m, p) in image.values.iter_mut().zip(&part) {
                *m += p;
            }
        }
        Ok(image)
    }
}

/// Linearized de-migration operator of a single shot.
#[derive(Clone)]
pub struct ShotOperator {
    medium: Arc<Medium>,
    shot_index: usize,
    source_x: usize,
    receivers: Vec<usize>,
}

impl std::fmt::Debug for ShotOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShotOperator")
            .field("shot_index", &self.shot_index)
            .field("source_x", &self.source_x)
            .field("receivers", &self.receivers.len())
            .finish()
    }
}

impl ShotOperator {
    pub fn shot_index(&self) -> usize {
        self.shot_index
    }

    /// Source wavefield at every depth for frequency `j`, padded width.
    fn source_wavefield(
        &self,
        j: usize,
        factors: &[StepFactors],
        scratch: &mut [Complex64],
    ) -> Vec<Vec<Complex64>> {
        let med = &self.medium;
        let mut field = vec![Complex64::default(); med.npad];
        field[self.source_x] = med.source[j];
        let mut out = Vec::with_capacity(med.nz);
        for (iz, f) in factors.iter().enumerate() {
            out.push(field.clone());
            if iz + 1 < med.nz {
                f.apply(&med.transform, &mut field, Direction::Down, scratch);
            }
        }
        out
    }

    /// Receiver spectrum `D(ω_j)` for the reflectivity `model`.
    fn forward_frequency(&self, j: usize, model: &[f64]) -> Vec<Complex64> {
        let med = &self.medium;
        let factors = med.step_factors(med.omegas[j]);
        let mut scratch = med.transform.scratch();
        let source = self.source_wavefield(j, &factors, &mut scratch);

        let mut up = vec![Complex64::default(); med.npad];
        for iz in (0..med.nz).rev() {
            if iz + 1 < med.nz {
                // Same slab as the source step from iz to iz + 1, traversed upward.
                factors[iz].apply(&med.transform, &mut up, Direction::Down, &mut scratch);
            }
            let src = &source[iz];
            for ix in 0..med.nx {
                let r = model[ix * med.nz + iz];
                if r != 0.0 {
                    up[ix] += src[ix] * r;
                }
            }
        }
        self.receivers.iter().map(|&x| up[x]).collect()
    }

    /// Image contribution of receiver spectrum `spectrum` at frequency `j`.
    fn adjoint_frequency(&self, j: usize, spectrum: &[Complex64]) -> Vec<f64> {
        let med = &self.medium;
        let factors = med.step_factors(med.omegas[j]);
        let mut scratch = med.transform.scratch();

        let mut src = vec![Complex64::default(); med.npad];
        src[self.source_x] = med.source[j];
        let mut rcv = vec![Complex64::default(); med.npad];
        for (&x, &s) in self.receivers.iter().zip(spectrum) {
            rcv[x] += s;
        }
        let mut image = vec![0.0; med.nz * med.nx];
        for iz in 0..med.nz {
            for ix in 0..med.nx {
                image[ix * med.nz + iz] = (src[ix].conj() * rcv[ix]).re;
            }
            if iz + 1 < med.nz {
                factors[iz].apply(&med.transform, &mut src, Direction::Down, &mut scratch);
                factors[iz].apply(&med.transform, &mut rcv, Direction::Up, &mut scratch);
            }
        }
        image
    }
}

impl LinearOperator for ShotOperator {
    fn model_dim(&self) -> usize {
        self.medium.nz * self.medium.nx
    }

    fn data_dim(&self) -> usize {
        self.receivers.len() * self.medium.n_t
    }

    fn forward_into(&self, model: &[f64], data: &mut [f64]) {
        let med = &self.medium;
        let spectra: Vec<Vec<Complex64>> = (0..med.omegas.len())
            .into_par_iter()
            .map(|j| self.forward_frequency(j, model))
            .collect();
        let n_t = med.n_t;
        data.par_chunks_mut(n_t).enumerate().for_each(|(r, trace)| {
            trace.fill(0.0);
            for (j, spectrum) in spectra.iter().enumerate() {
                let value = spectrum[r];
                let kernel = &med.synthesis[j * n_t..(j + 1) * n_t];
                for (out, k) in trace.iter_mut().zip(kernel) {
                    *out += (value * k).re;
                }
            }
        });
    }

    fn adjoint_into(&self, data: &[f64], model: &mut [f64]) {
        let med = &self.medium;
        let n_t = med.n_t;
        let images: Vec<Vec<f64>> = (0..med.omegas.len())
            .into_par_iter()
            .map(|j| {
                let kernel = &med.synthesis[j * n_t..(j + 1) * n_t];
                let spectrum: Vec<Complex64> = data
                    .chunks(n_t)
                    .map(|trace| trace.iter().zip(kernel).map(|(&d, k)| k.conj() * d).sum())
                    .collect();
                self.adjoint_frequency(j, &spectrum)
            })
            .collect();
        model.fill(0.0);
        for image in &images {
            for (m, v) in model.iter_mut().zip(image) {
                *m += v;
            }
        }
    }
}

/// Builds the de-migration operator of one shot without keeping a [`Survey`].
pub fn shot_operator(
    velocity: &VelocityModel,
    geometry: &AcquisitionGeometry,
    wavelet: &Wavelet,
    shot_index: usize,
    band: Band,
) -> Result<ShotOperator> {
    Survey::new(velocity, geometry, wavelet, band)?.shot_operator(shot_index)
}

pub fn survey_forward(
    velocity: &VelocityModel,
    geometry: &AcquisitionGeometry,
    wavelet: &Wavelet,
    reflectivity: &Reflectivity,
    band: Band,
) -> Result<Vec<ShotGather>> {
    Survey::new(velocity, geometry, wavelet, band)?.forward(reflectivity)
}

pub fn survey_adjoint(
    velocity: &VelocityModel,
    geometry: &AcquisitionGeometry,
    wavelet: &Wavelet,
    gathers: &[ShotGather],
    band: Band,
) -> Result<Reflectivity> {
    Survey::new(velocity, geometry, wavelet, band)?.adjoint(gathers)
}
