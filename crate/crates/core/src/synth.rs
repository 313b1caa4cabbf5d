//! Synthetic experiments: earth models, acquisition, Born data and noise.
//!
//! The defaults describe a desk-scale survey (30 shots over a 60 × 200 cell
//! layered model) that keeps the 5-shot window with a 3-shot slide. Grid
//! size, record length, band and receiver count are local choices.

use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::gridfile::read_grid;
use crate::rls::{DataBlock, WindowPlan};
use crate::solver::CgConfig;
use crate::wem::{
    ricker, AcquisitionGeometry, Band, Reflectivity, ShotGather, Survey, VelocityModel, Wavelet,
};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Constant {
        velocity: f64,
    },
    /// `velocities[i]` fills depth rows from `interfaces[i-1]` (or 0) up to
    /// but excluding `interfaces[i]`.
    Layered {
        interfaces: Vec<usize>,
        velocities: Vec<f64>,
    },
    /// Background minus a Gaussian anomaly; `radius` is its standard deviation in cells.
    Lens {
        background: f64,
        amplitude: f64,
        center_z: f64,
        center_x: f64,
        radius: f64,
    },
    FromFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub model: ModelKind,
    pub nz: usize,
    pub nx: usize,
    pub dz: f64,
    pub dx: f64,
    pub n_shots: usize,
    pub first_shot: usize,
    /// Shot spacing in cells.
    pub shot_interval: usize,
    pub n_receivers: usize,
    pub receiver_spacing: usize,
    pub f_dom: f64,
    pub dt: f64,
    pub n_t: usize,
    pub wavelet_delay: f64,
    pub band: Band,
    /// Noise standard deviation as a fraction of the clean data RMS.
    pub noise_level: f64,
    pub q: usize,
    pub k: usize,
    pub lambda: f64,
    pub cg_tolerance: f64,
    pub cg_max_iterations: usize,
    pub lsm_iterations: usize,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            model: ModelKind::Layered {
                interfaces: vec![15, 30, 45],
                velocities: vec![1500.0, 1800.0, 2100.0, 2400.0],
            },
            nz: 60,
            nx: 200,
            dz: 10.0,
            dx: 10.0,
            n_shots: 30,
            first_shot: 63,
            shot_interval: 4,
            n_receivers: 60,
            receiver_spacing: 1,
            f_dom: 20.0,
            dt: 0.004,
            n_t: 256,
            wavelet_delay: 0.06,
            band: Band::new(4.0, 40.0),
            noise_level: 0.0,
            q: 5,
            k: 3,
            lambda: 0.0,
            cg_tolerance: 1e-6,
            cg_max_iterations: 100,
            lsm_iterations: 8,
            seed: 1,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nz == 0 || self.nx == 0 || !(self.dz > 0.0) || !(self.dx > 0.0) {
            return Err(Error::invalid(
                "grid dimensions and spacings must be positive",
            ));
        }
        if self.n_shots == 0
            || self.shot_interval == 0
            || self.n_receivers == 0
            || self.receiver_spacing == 0
        {
            return Err(Error::invalid(
                "shot and receiver counts and spacings must be positive",
            ));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(Error::invalid("noise_level must be nonnegative"));
        }
        self.geometry().validate(self.nx)?;
        WindowPlan::new(self.n_shots, self.q, self.k)?;
        self.cg_config()?;
        if self.lsm_iterations == 0 {
            return Err(Error::invalid("lsm_iterations must be at least 1"));
        }
        match &self.model {
            ModelKind::Layered {
                interfaces,
                velocities,
            } => {
                if velocities.len() != interfaces.len() + 1 {
                    return Err(Error::invalid(format!(
                        "{} interfaces need {} layer velocities, got {}",
                        interfaces.len(),
                        interfaces.len() + 1,
                        velocities.len()
                    )));
                }
                if interfaces.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid("layer interfaces must increase strictly"));
                }
            }
            ModelKind::Lens { radius, .. } if !(*radius > 0.0) => {
                return Err(Error::invalid("lens radius must be positive"));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn geometry(&self) -> AcquisitionGeometry {
        let shots = (0..self.n_shots)
            .map(|i| self.first_shot + i * self.shot_interval)
            .collect();
        AcquisitionGeometry::off_end(
            shots,
            self.n_receivers,
            self.receiver_spacing,
            self.n_t,
            self.dt,
        )
    }

    pub fn wavelet(&self) -> Result<Wavelet> {
        ricker(self.f_dom, self.dt, self.n_t, self.wavelet_delay)
    }

    pub fn cg_config(&self) -> Result<CgConfig> {
        CgConfig::new(self.cg_max_iterations, self.cg_tolerance, self.lambda)
    }

    pub fn window_plan(&self) -> Result<WindowPlan> {
        WindowPlan::new(self.n_shots, self.q, self.k)
    }
}

pub fn make_velocity(spec: &ExperimentSpec) -> Result<VelocityModel> {
    let (nz, nx) = (spec.nz, spec.nx);
    let grid = match &spec.model {
        ModelKind::Constant { velocity } => Grid2D::filled(nz, nx, spec.dz, spec.dx, *velocity)?,
        ModelKind::Layered {
            interfaces,
            velocities,
        } => {
            if velocities.len() != interfaces.len() + 1 {
                return Err(Error::invalid(
                    "layered model needs one more velocity than interfaces",
                ));
            }
            let column: Vec<f64> = (0..nz)
                .map(|iz| velocities[interfaces.iter().filter(|&&z| iz >= z).count()])
                .collect();
            let values = (0..nx).flat_map(|_| column.iter().copied()).collect();
            Grid2D::new(nz, nx, spec.dz, spec.dx, values)?
        }
        ModelKind::Lens {
            background,
            amplitude,
            center_z,
            center_x,
            radius,
        } => {
            let mut g = Grid2D::filled(nz, nx, spec.dz, spec.dx, *background)?;
            for ix in 0..nx {
                for iz in 0..nz {
                    let r2 = (iz as f64 - center_z).powi(2) + (ix as f64 - center_x).powi(2);
                    g.set(
                        iz,
                        ix,
                        background - amplitude * (-r2 / (2.0 * radius * radius)).exp(),
                    );
                }
            }
            g
        }
        ModelKind::FromFile(path) => {
            let (g, _) = read_grid(path)?;
            if g.n1 != nz || g.n2 != nx {
                return Err(Error::invalid(format!(
                    "velocity file {} is {}x{}, experiment grid is {nz}x{nx}",
                    path.display(),
                    g.n1,
                    g.n2
                )));
            }
            g
        }
    };
    VelocityModel::new(grid)
}

/// Normal-incidence reflectivity `(v[z+1] − v[z]) / (v[z+1] + v[z])`, zero on the last row.
pub fn reflectivity_from_velocity(velocity: &VelocityModel) -> Reflectivity {
    let g = &velocity.grid;
    let mut r = g.with_values(vec![0.0; g.len()]).expect("same size");
    for ix in 0..g.n2 {
        for iz in 0..g.n1.saturating_sub(1) {
            let (a, b) = (g.get(iz, ix), g.get(iz + 1, ix));
            r.set(iz, ix, (b - a) / (b + a));
        }
    }
    r
}

/// Everything a migration run needs, built from one [`ExperimentSpec`].
#[derive(Debug, Clone)]
pub struct SyntheticExperiment {
    pub velocity: VelocityModel,
    pub truth: Reflectivity,
    pub survey: Survey,
    pub gathers: Vec<ShotGather>,
    pub blocks: Vec<DataBlock>,
}

pub fn make_survey(spec: &ExperimentSpec, velocity: &VelocityModel) -> Result<Survey> {
    Survey::new(velocity, &spec.geometry(), &spec.wavelet()?, spec.band)
}

/// Pairs each gather with its shot operator.
pub fn blocks_from_gathers(survey: &Survey, gathers: &[ShotGather]) -> Result<Vec<DataBlock>> {
    gathers
        .iter()
        .map(|g| {
            let op = survey.shot_operator(g.shot_index)?;
            DataBlock::new(g.shot_index, Arc::new(op), g.traces.values.clone())
        })
        .collect()
}

/// Adds `level · rms(clean) · g`, `g` standard normal from the seeded
/// generator, drawn shot by shot in acquisition order.
pub fn add_noise(gathers: &mut [ShotGather], level: f64, seed: u64) {
    if level == 0.0 {
        return;
    }
    let (sum, count) = gathers.iter().fold((0.0, 0usize), |(s, n), g| {
        (
            s + g.traces.values.iter().map(|v| v * v).sum::<f64>(),
            n + g.traces.len(),
        )
    });
    let rms = if count > 0 {
        (sum / count as f64).sqrt()
    } else {
        0.0
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for g in gathers.iter_mut() {
        for v in g.traces.values.iter_mut() {
            let n: f64 = StandardNormal.sample(&mut rng);
            *v += level * rms * n;
        }
    }
}

pub fn synthesize_data(spec: &ExperimentSpec) -> Result<SyntheticExperiment> {
    spec.validate()?;
    let velocity = make_velocity(spec)?;
    let truth = reflectivity_from_velocity(&velocity);
    synthesize_with_reflectivity(spec, velocity, truth)
}

/// Like [`synthesize_data`] but with a caller-supplied reflectivity.
pub fn synthesize_with_reflectivity(
    spec: &ExperimentSpec,
    velocity: VelocityModel,
    truth: Reflectivity,
) -> Result<SyntheticExperiment> {
    let survey = make_survey(spec, &velocity)?;
    let mut gathers = survey.forward(&truth)?;
    add_noise(&mut gathers, spec.noise_level, spec.seed);
    let blocks = blocks_from_gathers(&survey, &gathers)?;
    Ok(SyntheticExperiment {
        velocity,
        truth,
        survey,
        gathers,
        blocks,
    })
}
