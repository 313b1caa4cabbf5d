use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Wavelet {
    pub samples: Vec<f64>,
    pub dt: f64,
    pub dominant_frequency: f64,
    pub delay: f64,
}

/// Zero-phase Ricker wavelet `(1 − 2u²) e^{−u²}`, `u = π f (t − delay)`,
/// scaled so the largest sample has magnitude 1.
pub fn ricker(dominant_frequency: f64, dt: f64, n_samples: usize, delay: f64) -> Result<Wavelet> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let nyquist = 0.5 / dt;
    if !(dominant_frequency > 0.0 && dominant_frequency < nyquist) {
        return Err(Error::invalid(format!(
            "dominant frequency {dominant_frequency} Hz must lie in (0, {nyquist}) Hz"
        )));
    }
    if n_samples == 0 || !delay.is_finite() {
        return Err(Error::invalid(
            "ricker needs at least one sample and a finite delay",
        ));
    }
    let mut samples: Vec<f64> = (0..n_samples)
        .map(|i| {
            let u = PI * dominant_frequency * (i as f64 * dt - delay);
            let u2 = u * u;
            (1.0 - 2.0 * u2) * (-u2).exp()
        })
        .collect();
    let peak = samples.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak > 0.0 {
        samples.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(Wavelet {
        samples,
        dt,
        dominant_frequency,
        delay,
    })
}

impl Wavelet {
    /// `Σ_t w[t] e^{−iωt}` at angular frequency `omega`.
    pub fn spectrum(&self, omega: f64) -> Complex64 {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, &w)| w * Complex64::from_polar(1.0, -omega * i as f64 * self.dt))
            .sum()
    }
}
