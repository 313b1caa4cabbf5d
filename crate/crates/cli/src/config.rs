//! `key = value` run configuration.
//!
//! UTF-8 text, one pair per line, `#` starts a comment. Unknown keys are
//! rejected so that a typo cannot silently fall back to a default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use brls_core::synth::{ExperimentSpec, ModelKind};
use brls_core::Band;

use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "model_kind",
    "velocity_file",
    "v0",
    "layer_interfaces",
    "layer_velocities",
    "lens_background",
    "lens_amplitude",
    "lens_center_z",
    "lens_center_x",
    "lens_radius",
    "nz",
    "nx",
    "dz",
    "dx",
    "n_shots",
    "first_shot",
    "shot_interval",
    "n_receivers",
    "receiver_spacing",
    "f_dom",
    "dt",
    "nt",
    "wavelet_delay",
    "f_min",
    "f_max",
    "noise_level",
    "q",
    "k",
    "lambda",
    "cg_tolerance",
    "cg_max_iterations",
    "lsm_iterations",
    "seed",
    "dottest_operator",
    "dottest_seeds",
    "identity_dim",
    "corrupt_adjoint",
    "clip_percentile",
];

/// Keys every experiment configuration must set.
const REQUIRED_KEYS: &[&str] = &[
    "model_kind",
    "nz",
    "nx",
    "dz",
    "dx",
    "n_shots",
    "shot_interval",
    "n_receivers",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
    /// Directory of the config file; relative paths inside it resolve here.
    base_dir: PathBuf,
}

/// What `dottest` checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DotTestTarget {
    Wave,
    Identity(usize),
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "line {}: expected `key = value`, got {raw:?}",
                    n + 1
                ))
            })?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::Config(format!(
                    "line {}: unknown key `{key}`",
                    n + 1
                )));
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::Config(format!(
                    "line {}: duplicate key `{key}`",
                    n + 1
                )));
            }
        }
        Ok(Self {
            entries,
            base_dir: PathBuf::new(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::parse(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parse_value<T: FromStr>(&self, key: &str, value: &str) -> Result<T, CliError> {
        value
            .parse()
            .map_err(|_| CliError::Config(format!("key `{key}`: cannot parse {value:?}")))
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let value = self
            .raw(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))?;
        self.parse_value(key, value)
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.raw(key) {
            Some(v) => self.parse_value(key, v),
            None => Ok(default),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError> {
        let value = self
            .raw(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))?;
        value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| self.parse_value(key, s))
            .collect()
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        self.get_or(key, false)
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = PathBuf::from(path);
        if p.is_absolute() {
            p
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn experiment_spec(&self) -> Result<ExperimentSpec, CliError> {
        for key in REQUIRED_KEYS {
            if self.raw(key).is_none() {
                return Err(CliError::Config(format!("missing required key `{key}`")));
            }
        }
        let defaults = ExperimentSpec::default();
        let nz: usize = self.required("nz")?;
        let nx: usize = self.required("nx")?;
        let model = match self.required::<String>("model_kind")?.as_str() {
            "constant" => ModelKind::Constant {
                velocity: self.required("v0")?,
            },
            "layered" => ModelKind::Layered {
                interfaces: self.list("layer_interfaces")?,
                velocities: self.list("layer_velocities")?,
            },
            "lens" => ModelKind::Lens {
                background: self.required("lens_background")?,
                amplitude: self.required("lens_amplitude")?,
                center_z: self.get_or("lens_center_z", nz as f64 / 2.0)?,
                center_x: self.get_or("lens_center_x", nx as f64 / 2.0)?,
                radius: self.get_or("lens_radius", nz as f64 / 6.0)?,
            },
            "file" => ModelKind::FromFile(self.resolve(&self.required::<String>("velocity_file")?)),
            other => {
                return Err(CliError::Config(format!(
                    "model_kind must be constant, layered, lens or file, got `{other}`"
                )))
            }
        };
        let n_receivers: usize = self.required("n_receivers")?;
        let receiver_spacing: usize = self.get_or("receiver_spacing", 1)?;
        let spec = ExperimentSpec {
            model,
            nz,
            nx,
            dz: self.required("dz")?,
            dx: self.required("dx")?,
            n_shots: self.required("n_shots")?,
            first_shot: self.get_or(
                "first_shot",
                n_receivers.saturating_sub(1) * receiver_spacing,
            )?,
            shot_interval: self.required("shot_interval")?,
            n_receivers,
            receiver_spacing,
            f_dom: self.get_or("f_dom", defaults.f_dom)?,
            dt: self.get_or("dt", defaults.dt)?,
            n_t: self.get_or("nt", defaults.n_t)?,
            wavelet_delay: self.get_or("wavelet_delay", defaults.wavelet_delay)?,
            band: Band::new(
                self.get_or("f_min", defaults.band.f_min)?,
                self.get_or("f_max", defaults.band.f_max)?,
            ),
            noise_level: self.get_or("noise_level", defaults.noise_level)?,
            q: self.get_or("q", defaults.q)?,
            k: self.get_or("k", defaults.k)?,
            lambda: self.get_or("lambda", defaults.lambda)?,
            cg_tolerance: self.get_or("cg_tolerance", defaults.cg_tolerance)?,
            cg_max_iterations: self.get_or("cg_max_iterations", defaults.cg_max_iterations)?,
            lsm_iterations: self.get_or("lsm_iterations", defaults.lsm_iterations)?,
            seed: self.get_or("seed", defaults.seed)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dottest_target(&self) -> Result<DotTestTarget, CliError> {
        match self
            .get_or::<String>("dottest_operator", "wave".into())?
            .as_str()
        {
            "wave" => Ok(DotTestTarget::Wave),
            "identity" => Ok(DotTestTarget::Identity(self.required("identity_dim")?)),
            other => Err(CliError::Config(format!(
                "dottest_operator must be wave or identity, got `{other}`"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "
# small layered case
model_kind = layered
layer_interfaces = 10, 20
layer_velocities = 1500, 2000, 2500
nz = 30
nx = 80
dz = 10
dx = 10
n_shots = 6
shot_interval = 4
n_receivers = 30   # off-end, to the left
";

    #[test]
    fn parses_and_defaults() {
        let spec = RunConfig::parse(BASIC).unwrap().experiment_spec().unwrap();
        assert_eq!(spec.nz, 30);
        assert_eq!(spec.first_shot, 29);
        assert_eq!(spec.q, 5);
        assert_eq!(spec.k, 3);
        assert_eq!(spec.lsm_iterations, 8);
        assert_eq!(
            spec.model,
            ModelKind::Layered {
                interfaces: vec![10, 20],
                velocities: vec![1500.0, 2000.0, 2500.0]
            }
        );
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::parse("n_shot = 3\n").unwrap_err();
        assert!(err.to_string().contains("n_shot"));
    }

    #[test]
    fn missing_key_named() {
        let text = BASIC.replace("n_receivers = 30   # off-end, to the left", "");
        let err = RunConfig::parse(&text)
            .unwrap()
            .experiment_spec()
            .unwrap_err();
        assert!(err.to_string().contains("n_receivers"), "{err}");
    }

    #[test]
    fn malformed_lines() {
        assert!(RunConfig::parse("nz 30\n").is_err());
        assert!(RunConfig::parse("nz = 3\nnz = 4\n").is_err());
        let bad = BASIC.replace("nz = 30", "nz = thirty");
        assert!(RunConfig::parse(&bad).unwrap().experiment_spec().is_err());
    }

    #[test]
    fn identity_target() {
        let c = RunConfig::parse("dottest_operator = identity\nidentity_dim = 7\n").unwrap();
        assert_eq!(c.dottest_target().unwrap(), DotTestTarget::Identity(7));
    }
}
