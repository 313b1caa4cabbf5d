//! Data misfit, model error and run reports for comparing imaging methods.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{check_len, Error, Result};
use crate::grid::Grid2D;
use crate::linop::{dot, norm};
use crate::rls::DataBlock;

/// `Σᵢ ‖Aᵢ m − dᵢ‖²`
pub fn data_misfit(blocks: &[DataBlock], model: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for b in blocks {
        let predicted = b.operator.apply_forward(model)?;
        total += predicted
            .iter()
            .zip(&b.data)
            .map(|(p, d)| (p - d).powi(2))
            .sum::<f64>();
    }
    Ok(total)
}

/// Scalar `α = argmin ‖α A m − d‖²` over all blocks, and `α m`.
///
/// Puts an adjoint image on the amplitude scale of the data before its misfit
/// is compared with that of an inverted model.
pub fn scale_to_data(blocks: &[DataBlock], model: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (mut num, mut den) = (0.0, 0.0);
    for b in blocks {
        let predicted = b.operator.apply_forward(model)?;
        num += dot(&predicted, &b.data);
        den += dot(&predicted, &predicted);
    }
    let alpha = if den > 0.0 { num / den } else { 0.0 };
    Ok((alpha, model.iter().map(|m| alpha * m).collect()))
}

/// Vertical band-pass keeping depth wavenumbers `2 f / v` for `f` in the
/// temporal band, with a single representative velocity `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthBandPass {
    /// Cycles per metre.
    pub kz_min: f64,
    pub kz_max: f64,
}

impl DepthBandPass {
    pub fn from_band(f_min: f64, f_max: f64, velocity: f64) -> Self {
        Self {
            kz_min: 2.0 * f_min / velocity,
            kz_max: 2.0 * f_max / velocity,
        }
    }

    /// Filters every column of `grid` (fast axis = depth, spacing `d1`).
    pub fn apply(&self, grid: &Grid2D) -> Grid2D {
        let n = (2 * grid.n1).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let keep: Vec<bool> = (0..n)
            .map(|j| {
                let signed = if j <= n / 2 {
                    j as f64
                } else {
                    n as f64 - j as f64
                };
                let k = signed / (n as f64 * grid.d1);
                k >= self.kz_min && k <= self.kz_max
            })
            .collect();
        let mut out = grid.clone();
        let mut buf = vec![Complex64::default(); n];
        for ix in 0..grid.n2 {
            buf.iter_mut().for_each(|c| *c = Complex64::default());
            for (b, &v) in buf.iter_mut().zip(grid.column(ix)) {
                b.re = v;
            }
            fwd.process(&mut buf);
            for (b, &k) in buf.iter_mut().zip(&keep) {
                if !k {
                    *b = Complex64::default();
                }
            }
            inv.process(&mut buf);
            for (iz, b) in buf.iter().take(grid.n1).enumerate() {
                out.set(iz, ix, b.re / n as f64);
            }
        }
        out
    }
}

/// `‖m − P(truth)‖ / ‖P(truth)‖`, with `P` the optional band-pass.
pub fn model_error(
    model: &[f64],
    truth: &Grid2D,
    projection: Option<&DepthBandPass>,
) -> Result<f64> {
    check_len("model_error model", truth.len(), model.len())?;
    let projected;
    let reference = match projection {
        Some(p) => {
            projected = p.apply(truth);
            &projected.values
        }
        None => &truth.values,
    };
    let scale = norm(reference);
    if scale == 0.0 {
        return Err(Error::ZeroReference);
    }
    let diff: f64 = model
        .iter()
        .zip(reference)
        .map(|(m, t)| (m - t).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(diff / scale)
}

/// Location of the largest `|value|` and its ratio to the largest `|value|`
/// farther than `exclusion` cells (Chebyshev distance) from it.
pub fn peak_to_sidelobe(image: &Grid2D, exclusion: usize) -> ((usize, usize), f64) {
    let mut peak = (0, 0);
    let mut best = f64::NEG_INFINITY;
    for i2 in 0..image.n2 {
        for i1 in 0..image.n1 {
            let v = image.get(i1, i2).abs();
            if v > best {
                best = v;
                peak = (i1, i2);
            }
        }
    }
    let mut side = 0.0f64;
    for i2 in 0..image.n2 {
        for i1 in 0..image.n1 {
            if i1.abs_diff(peak.0) > exclusion || i2.abs_diff(peak.1) > exclusion {
                side = side.max(image.get(i1, i2).abs());
            }
        }
    }
    let ratio = if side > 0.0 {
        best / side
    } else {
        f64::INFINITY
    };
    (peak, ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Adjoint,
    Lsm,
    Brls,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Adjoint => "adjoint",
            Method::Lsm => "lsm",
            Method::Brls => "brls",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjoint" => Ok(Method::Adjoint),
            "lsm" => Ok(Method::Lsm),
            "brls" => Ok(Method::Brls),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub method: Method,
    pub data_misfit: f64,
    /// `None` when no truth model was available.
    pub model_error: Option<f64>,
    pub per_window_iterations: Option<Vec<usize>>,
    pub wall_time: f64,
}

impl RunReport {
    /// `key=value` lines; floats use the shortest representation that parses back exactly.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "method={}\ndata_misfit={:?}\n",
            self.method, self.data_misfit
        );
        if let Some(e) = self.model_error {
            out.push_str(&format!("model_error={e:?}\n"));
        }
        if let Some(iters) = &self.per_window_iterations {
            let list: Vec<String> = iters.iter().map(ToString::to_string).collect();
            out.push_str(&format!("per_window_iterations={}\n", list.join(",")));
        }
        out.push_str(&format!("wall_time={:?}\n", self.wall_time));
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut method = None;
        let mut data_misfit = None;
        let mut model_error = None;
        let mut per_window_iterations = None;
        let mut wall_time = None;
        let float = |key: &str, v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::invalid(format!("report field {key} is not a number: {v:?}")))
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("report line without '=': {line:?}")))?;
            match key {
                "method" => method = Some(value.parse()?),
                "data_misfit" => data_misfit = Some(float(key, value)?),
                "model_error" => model_error = Some(float(key, value)?),
                "wall_time" => wall_time = Some(float(key, value)?),
                "per_window_iterations" => {
                    let list = if value.is_empty() {
                        Vec::new()
                    } else {
                        value
                            .split(',')
                            .map(|v| {
                                v.parse::<usize>().map_err(|_| {
                                    Error::invalid(format!("bad iteration count {v:?}"))
                                })
                            })
                            .collect::<Result<Vec<_>>>()?
                    };
                    per_window_iterations = Some(list);
                }
                other => return Err(Error::invalid(format!("unknown report field {other:?}"))),
            }
        }
        let missing = |k: &str| Error::invalid(format!("report is missing {k}"));
        Ok(Self {
            method: method.ok_or_else(|| missing("method"))?,
            data_misfit: data_misfit.ok_or_else(|| missing("data_misfit"))?,
            model_error,
            per_window_iterations,
            wall_time: wall_time.ok_or_else(|| missing("wall_time"))?,
        })
    }
}
