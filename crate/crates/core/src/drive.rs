//! Pump protocols `h_l(t)`, probe pulses `φ(t)` and the confinement scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_T0: f64 = 6.54;
pub const DEFAULT_TAU_RAMP: f64 = 35.13;
pub const DEFAULT_H_L_MAX: f64 = 0.4;
pub const DEFAULT_PROBE_AMPLITUDE: f64 = 1e-3;
pub const DEFAULT_BROADBAND_SIGMA: f64 = 0.2;
pub const DEFAULT_SELECTIVE_OMEGA: f64 = 2.2;
pub const DEFAULT_SELECTIVE_SIGMA: f64 = 1.5;
/// Half-width of the pulse support in units of `σ`.
pub const PULSE_SUPPORT_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Constant,
    SuddenQuench,
    ExponentialRamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveProtocol {
    pub kind: ProtocolKind,
    #[serde(default)]
    pub h_l_pre: f64,
    #[serde(default)]
    pub h_l_max: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_tau")]
    pub tau_ramp: f64,
}

fn default_tau() -> f64 {
    DEFAULT_TAU_RAMP
}

impl DriveProtocol {
    pub fn constant(h_l: f64) -> Self {
        DriveProtocol {
            kind: ProtocolKind::Constant,
            h_l_pre: h_l,
            h_l_max: h_l,
            t0: 0.0,
            tau_ramp: DEFAULT_TAU_RAMP,
        }
    }

    pub fn sudden_quench(h_l_pre: f64, h_l_post: f64, t0: f64) -> Self {
        DriveProtocol {
            kind: ProtocolKind::SuddenQuench,
            h_l_pre,
            h_l_max: h_l_post,
            t0,
            tau_ramp: DEFAULT_TAU_RAMP,
        }
    }

    pub fn exponential_ramp(h_l_max: f64, t0: f64, tau_ramp: f64) -> Self {
        DriveProtocol {
            kind: ProtocolKind::ExponentialRamp,
            h_l_pre: 0.0,
            h_l_max,
            t0,
            tau_ramp,
        }
    }

    /// Ramp with the default onset and relaxation time.
    pub fn default_ramp(h_l_max: f64) -> Self {
        Self::exponential_ramp(h_l_max, DEFAULT_T0, DEFAULT_TAU_RAMP)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("h_l_pre", self.h_l_pre),
            ("h_l_max", self.h_l_max),
            ("t0", self.t0),
            ("tau_ramp", self.tau_ramp),
        ] {
            if !v.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        if self.kind != ProtocolKind::Constant && self.t0 < 0.0 {
            return Err(Error::config("t0", "must be non-negative"));
        }
        if self.kind == ProtocolKind::ExponentialRamp && self.tau_ramp <= 0.0 {
            return Err(Error::config(
                "tau_ramp",
                "must be positive for exponential_ramp",
            ));
        }
        Ok(())
    }

    /// Times at which `h_l(t)` jumps.
    pub fn discontinuities(&self) -> Vec<f64> {
        match self.kind {
            ProtocolKind::Constant => Vec::new(),
            _ => vec![self.t0],
        }
    }

    /// Field after the pump settles at its peak (`h_l_max`), or the constant
    /// field.
    pub fn post_pump_field(&self) -> f64 {
        match self.kind {
            ProtocolKind::Constant => self.h_l_pre,
            _ => self.h_l_max,
        }
    }
}

/// `h_l(t)`. The ramp decays from `h_l_max` towards `h_l_pre` (zero by
/// default) after `t0`.
pub fn ramp_field(t: f64, protocol: &DriveProtocol) -> f64 {
    match protocol.kind {
        ProtocolKind::Constant => protocol.h_l_pre,
        ProtocolKind::SuddenQuench => {
            if t < protocol.t0 {
                protocol.h_l_pre
            } else {
                protocol.h_l_max
            }
        }
        ProtocolKind::ExponentialRamp => {
            if t < protocol.t0 {
                protocol.h_l_pre
            } else {
                let decay = (-(t - protocol.t0) / protocol.tau_ramp).exp();
                protocol.h_l_pre + (protocol.h_l_max - protocol.h_l_pre) * decay
            }
        }
    }
}

/// Solves `(t0, τ)` of a zero-baseline ramp through two `(t, h_l)` anchors.
pub fn fit_ramp(h_l_max: f64, anchor1: (f64, f64), anchor2: (f64, f64)) -> Result<(f64, f64)> {
    let (t1, h1) = anchor1;
    let (t2, h2) = anchor2;
    let r12 = h1 / h2;
    let r01 = h_l_max / h1;
    if !(r12 > 0.0 && r01 > 0.0) || t2 <= t1 || r12 <= 1.0 {
        return Err(Error::config(
            "anchors",
            "must decay monotonically with a common sign",
        ));
    }
    let tau = (t2 - t1) / r12.ln();
    let t0 = t1 - tau * r01.ln();
    Ok((t0, tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    Gaussian,
    SineGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePulse {
    pub shape: PulseShape,
    #[serde(rename = "amplitude_A")]
    pub amplitude: f64,
    pub center_tp: f64,
    pub width_sigma: f64,
    #[serde(default)]
    pub carrier_omega: f64,
    #[serde(default)]
    pub probe_site: usize,
}

impl ProbePulse {
    /// Narrow Gaussian with the default amplitude and width.
    pub fn broadband(center_tp: f64) -> Self {
        ProbePulse {
            shape: PulseShape::Gaussian,
            amplitude: DEFAULT_PROBE_AMPLITUDE,
            center_tp,
            width_sigma: DEFAULT_BROADBAND_SIGMA,
            carrier_omega: 0.0,
            probe_site: 0,
        }
    }

    /// Sine-Gaussian with the default carrier and width.
    pub fn selective(center_tp: f64) -> Self {
        ProbePulse {
            shape: PulseShape::SineGaussian,
            amplitude: DEFAULT_PROBE_AMPLITUDE,
            center_tp,
            width_sigma: DEFAULT_SELECTIVE_SIGMA,
            carrier_omega: DEFAULT_SELECTIVE_OMEGA,
            probe_site: 0,
        }
    }

    pub fn centered_at(&self, center_tp: f64) -> Self {
        ProbePulse {
            center_tp,
            ..self.clone()
        }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        ProbePulse {
            amplitude,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::config("amplitude_A", "must be positive"));
        }
        if !(self.width_sigma > 0.0 && self.width_sigma.is_finite()) {
            return Err(Error::config("width_sigma", "must be positive"));
        }
        if !self.center_tp.is_finite() || !self.carrier_omega.is_finite() {
            return Err(Error::config("center_tp", "must be finite"));
        }
        Ok(())
    }

    /// `[t_p − 8σ, t_p + 8σ]`; outside it `φ` is treated as exactly zero.
    pub fn support(&self) -> (f64, f64) {
        let half = PULSE_SUPPORT_SIGMAS * self.width_sigma;
        (self.center_tp - half, self.center_tp + half)
    }
}

/// `φ(t)`; zero outside the pulse support.
pub fn probe_value(t: f64, pulse: &ProbePulse) -> f64 {
    let (lo, hi) = pulse.support();
    if t < lo || t > hi {
        return 0.0;
    }
    let x = t - pulse.center_tp;
    let envelope = pulse.amplitude * (-x * x / (2.0 * pulse.width_sigma * pulse.width_sigma)).exp();
    match pulse.shape {
        PulseShape::Gaussian => envelope,
        PulseShape::SineGaussian => envelope * (pulse.carrier_omega * x).sin(),
    }
}

/// Linear confining potential `V(r) = −χ r` between kinks `r` sites apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfinementModel {
    pub chi: f64,
}

impl ConfinementModel {
    pub fn potential(&self, r: f64) -> f64 {
        -self.chi * r
    }
}

/// `χ = 2|h_l|(1 − h_t²)^{1/8}`.
pub fn chi_coupling(h_l: f64, h_t: f64) -> Result<ConfinementModel> {
    if !(h_t.abs() < 1.0) {
        return Err(Error::config(
            "transverse_ht",
            "confinement scale needs |h_t| < 1",
        ));
    }
    Ok(ConfinementModel {
        chi: 2.0 * h_l.abs() * (1.0 - h_t * h_t).powf(0.125),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_definition() {
        let p = DriveProtocol::exponential_ramp(-0.4, 6.54, 35.13);
        assert_eq!(ramp_field(6.0, &p), 0.0);
        assert_eq!(ramp_field(6.54, &p), -0.4);
        assert!((ramp_field(6.54 + 35.13, &p) - (-0.4 / std::f64::consts::E)).abs() < 1e-15);
    }

    #[test]
    fn ramp_reproduces_anchors() {
        let p = DriveProtocol::default_ramp(-0.4);
        assert!((ramp_field(17.12, &p) + 0.296).abs() < 1e-3);
        assert!((ramp_field(42.92, &p) + 0.142).abs() < 1e-3);
    }

    #[test]
    fn fitted_ramp_matches_defaults() {
        let (t0, tau) = fit_ramp(-0.4, (17.12, -0.296), (42.92, -0.142)).unwrap();
        assert!((t0 - DEFAULT_T0).abs() < 1e-2, "{t0}");
        assert!((tau - DEFAULT_TAU_RAMP).abs() < 1e-2, "{tau}");
        assert!(fit_ramp(-0.4, (17.12, 0.296), (42.92, -0.142)).is_err());
    }

    #[test]
    fn quench_and_constant() {
        let q = DriveProtocol::sudden_quench(0.0, 0.3, 2.0);
        assert_eq!(ramp_field(1.999, &q), 0.0);
        assert_eq!(ramp_field(2.0, &q), 0.3);
        assert_eq!(ramp_field(100.0, &DriveProtocol::constant(0.1)), 0.1);
        assert_eq!(q.discontinuities(), vec![2.0]);
    }

    #[test]
    fn protocol_validation() {
        assert!(DriveProtocol::exponential_ramp(0.4, 1.0, 0.0)
            .validate()
            .is_err());
        assert!(DriveProtocol::exponential_ramp(0.4, -1.0, 1.0)
            .validate()
            .is_err());
        assert!(DriveProtocol::default_ramp(0.4).validate().is_ok());
    }

    #[test]
    fn probe_values() {
        let g = ProbePulse::broadband(10.0);
        assert_eq!(probe_value(10.0, &g), 1e-3);
        assert!((probe_value(10.2, &g) - 1e-3 * (-0.5f64).exp()).abs() < 1e-15);
        assert!((probe_value(9.8, &g) - 1e-3 * (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(probe_value(10.0 + 1.61, &g), 0.0);
        let s = ProbePulse::selective(20.0);
        assert_eq!(probe_value(20.0, &s), 0.0);
        assert!(ProbePulse::broadband(1.0)
            .with_amplitude(0.0)
            .validate()
            .is_err());
    }

    #[test]
    fn pulse_tail_below_support_bound() {
        let g = ProbePulse::broadband(0.0);
        let at_edge = g.amplitude * (-PULSE_SUPPORT_SIGMAS.powi(2) / 2.0).exp();
        assert!(at_edge < g.amplitude * 1e-12);
    }

    #[test]
    fn confinement_scale() {
        assert_eq!(chi_coupling(0.0, 0.25).unwrap().chi, 0.0);
        assert!((chi_coupling(0.3, 0.0).unwrap().chi - 0.6).abs() < 1e-15);
        assert!((chi_coupling(0.4, 0.25).unwrap().chi - 0.79357).abs() < 1e-5);
        assert!(chi_coupling(0.4, 1.0).is_err());
        assert_eq!(
            chi_coupling(-0.4, 0.5).unwrap(),
            chi_coupling(0.4, 0.5).unwrap()
        );
    }
}
