//! Discrete Fourier transforms on uniform grids, backed by rustfft.
//!
//! Forward: `F(ω) = (1/T) Σ_k x_k e^{+iω(t_k − t_origin)} dt` with `T` the
//! unpadded record length. Inverse: `x(t) = (Δω/2π) Σ_m F_m e^{−iω_m(t − t_origin)}`.
//! Frequencies are two-sided and ascending.

use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::C64;
use crate::propagator::TimeSeries;

/// Ascending angular frequencies of an `n`-point transform with spacing `dt`.
pub fn omega_grid(n: usize, dt: f64) -> Vec<f64> {
    let d = 2.0 * PI / (n as f64 * dt);
    let half = n as i64 / 2;
    (0..n as i64).map(|i| (i - half) as f64 * d).collect()
}

fn signed_index(i: usize, n: usize) -> i64 {
    i as i64 - n as i64 / 2
}

fn wrap(m: i64, n: usize) -> usize {
    m.rem_euclid(n as i64) as usize
}

/// Forward transform of `x` sampled at `t_k = t_first + k·dt`, zero padded to
/// `pad_factor · x.len()` points, with phases referenced to `t_origin`.
pub fn forward(
    x: &[C64],
    dt: f64,
    t_first: f64,
    t_origin: f64,
    pad_factor: usize,
) -> (Vec<f64>, Vec<C64>) {
    let n = (x.len() * pad_factor.max(1)).max(1);
    let mut buf = vec![C64::new(0.0, 0.0); n];
    buf[..x.len()].copy_from_slice(x);
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let omega = omega_grid(n, dt);
    let shift = t_first - t_origin;
    let norm = 1.0 / x.len().max(1) as f64;
    let values = (0..n)
        .map(|i| {
            let m = signed_index(i, n);
            buf[wrap(m, n)] * C64::from_polar(norm, omega[i] * shift)
        })
        .collect();
    (omega, values)
}

/// Continuous-normalized inverse of a two-sided ascending spectrum, evaluated
/// at `t_first + k·dt` for `k ∈ [k_start, k_start + n)`.
pub fn inverse(values: &[C64], dt: f64, t_first: f64, t_origin: f64, k_start: i64) -> Vec<C64> {
    let n = values.len();
    let omega = omega_grid(n, dt);
    let shift = t_first - t_origin;
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        let m = signed_index(i, n);
        buf[wrap(m, n)] = values[i] * C64::from_polar(1.0, -omega[i] * shift);
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / (n as f64 * dt);
    (0..n as i64)
        .map(|j| buf[wrap(k_start + j, n)] * scale)
        .collect()
}

/// Frequency-domain data on a uniform two-sided grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub values: Vec<C64>,
    /// Bins where `values` is meaningful. Invalid bins hold `NaN`.
    pub valid: Vec<bool>,
    /// Reconstruction taper; `0` on invalid bins.
    pub weights: Vec<f64>,
    /// `2π / T` for the unpadded record length `T`.
    pub resolution: f64,
    /// Time sampling of the transformed record.
    pub dt: f64,
    pub t_first: f64,
    pub t_origin: f64,
    pub n_time: usize,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Grid spacing (finer than `resolution` when padded).
    pub fn bin_width(&self) -> f64 {
        if self.omega.len() < 2 {
            return self.resolution;
        }
        self.omega[1] - self.omega[0]
    }

    /// `|value|²` with invalid bins set to zero.
    pub fn power(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.valid)
            .map(|(v, &ok)| if ok { v.norm_sqr() } else { 0.0 })
            .collect()
    }

    pub fn nearest_bin(&self, omega: f64) -> Option<usize> {
        if self.omega.is_empty() {
            return None;
        }
        let i = ((omega - self.omega[0]) / self.bin_width()).round();
        if i < 0.0 || i as usize >= self.omega.len() {
            return None;
        }
        Some(i as usize)
    }

    /// Positive-frequency half, including zero.
    pub fn positive(&self) -> Spectrum {
        let start = self
            .omega
            .iter()
            .position(|&w| w >= -1e-12)
            .unwrap_or(self.omega.len());
        Spectrum {
            omega: self.omega[start..].to_vec(),
            values: self.values[start..].to_vec(),
            valid: self.valid[start..].to_vec(),
            weights: self.weights[start..].to_vec(),
            ..self.clone()
        }
    }
}

/// Transform of a real or complex trace; every bin is valid.
pub fn spectrum_of(series: &TimeSeries<C64>, t_origin: f64, pad_factor: usize) -> Result<Spectrum> {
    if series.len() < 2 {
        return Err(Error::TooFewSamples {
            found: series.len(),
            needed: 2,
        });
    }
    let (omega, values) = forward(
        &series.values,
        series.step,
        series.start,
        t_origin,
        pad_factor,
    );
    let n = omega.len();
    Ok(Spectrum {
        omega,
        values,
        valid: vec![true; n],
        weights: vec![1.0; n],
        resolution: 2.0 * PI / (series.len() as f64 * series.step),
        dt: series.step,
        t_first: series.start,
        t_origin,
        n_time: series.len(),
    })
}

/// Spectrum of a real trace after removing its mean.
pub fn centered_spectrum(series: &TimeSeries, pad_factor: usize) -> Result<Spectrum> {
    let mean = series.values.iter().sum::<f64>() / series.len().max(1) as f64;
    let c = TimeSeries::new(
        series.start,
        series.step,
        series
            .values
            .iter()
            .map(|v| C64::new(v - mean, 0.0))
            .collect(),
        series.label.clone(),
    );
    spectrum_of(&c, series.start, pad_factor)
}
