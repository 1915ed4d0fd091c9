//! Retarded response from perturbed/unperturbed trajectory pairs, and the
//! exact commutator oracle it is checked against.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::drive::{probe_value, DriveProtocol, ProbePulse, PULSE_SUPPORT_SIGMAS};
use crate::error::{Error, Result};
use crate::fourier::{self, Spectrum};
use crate::krylov::{KrylovOptions, KrylovWorkspace};
use crate::lattice::{SpinChainConfig, StateVector, C64};
use crate::measure::z_expectation;
use crate::parallel::{map_indexed, Execution};
use crate::propagator::{
    EvolutionGrid, Propagator, TimeSeries, DEFAULT_DT_SAMPLE, DEFAULT_DT_STEP,
};

/// Decay of the damped record required at its end.
pub const RECORD_END_DECAY: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingOrigin {
    /// `e^{−(t − t_p)/τ}`.
    #[default]
    ProbeCenter,
    /// `e^{−t/τ}`.
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponseExtractionParams {
    /// Damping time. `None` picks the longest value for which the damped
    /// record decays to [`RECORD_END_DECAY`] at its end.
    pub tau_damp: Option<f64>,
    pub zero_pad_factor: usize,
    pub band_floor: f64,
    /// Width, in decades of `|φ̂|/max`, of the raised-cosine taper used for
    /// time-domain reconstruction, starting at `band_floor`.
    pub taper_decades: f64,
    pub damping_origin: DampingOrigin,
    /// Length of the record after `t_p` used for each extraction.
    pub record_length: f64,
}

impl Default for ResponseExtractionParams {
    fn default() -> Self {
        ResponseExtractionParams {
            tau_damp: None,
            zero_pad_factor: 4,
            band_floor: 1e-3,
            taper_decades: 2.0,
            damping_origin: DampingOrigin::ProbeCenter,
            record_length: 50.0,
        }
    }
}

impl ResponseExtractionParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(tau) = self.tau_damp {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(Error::config("tau_damp", "must be positive"));
            }
        }
        if self.zero_pad_factor < 1 {
            return Err(Error::config("zero_pad_factor", "must be at least 1"));
        }
        if !(self.band_floor > 0.0 && self.band_floor < 1.0) {
            return Err(Error::config("band_floor", "must lie in (0, 1)"));
        }
        if !(self.taper_decades >= 0.0 && self.taper_decades.is_finite()) {
            return Err(Error::config("taper_decades", "must be non-negative"));
        }
        if !(self.record_length > 0.0 && self.record_length.is_finite()) {
            return Err(Error::config("record_length", "must be positive"));
        }
        Ok(())
    }

    pub fn effective_tau(&self) -> f64 {
        self.tau_damp
            .unwrap_or(self.record_length / (1.0 / RECORD_END_DECAY).ln())
    }

    fn damping(&self, t: f64, t_p: f64) -> f64 {
        let origin = match self.damping_origin {
            DampingOrigin::ProbeCenter => t_p,
            DampingOrigin::Absolute => 0.0,
        };
        (-(t - origin) / self.effective_tau()).exp()
    }

    /// Raised-cosine weight from `0` at `band_floor` to `1` at
    /// `band_floor · 10^taper_decades`.
    fn taper(&self, relative: f64) -> f64 {
        if relative < self.band_floor {
            return 0.0;
        }
        if self.taper_decades == 0.0 {
            return 1.0;
        }
        let x = ((relative / self.band_floor).log10() / self.taper_decades).min(1.0);
        0.5 * (1.0 - (PI * x).cos())
    }
}

/// Pointwise `δA(t) = A_perturbed(t) − A_unperturbed(t)`.
pub fn delta_signal(perturbed: &TimeSeries, unperturbed: &TimeSeries) -> Result<TimeSeries> {
    if !perturbed.same_grid(unperturbed) {
        return Err(Error::GridMismatch(format!(
            "{} samples from {} step {} vs {} samples from {} step {}",
            perturbed.len(),
            perturbed.start,
            perturbed.step,
            unperturbed.len(),
            unperturbed.start,
            unperturbed.step
        )));
    }
    if perturbed.label != unperturbed.label {
        return Err(Error::GridMismatch(format!(
            "labels `{}` and `{}` differ",
            perturbed.label, unperturbed.label
        )));
    }
    Ok(TimeSeries::new(
        perturbed.start,
        perturbed.step,
        perturbed
            .values
            .iter()
            .zip(&unperturbed.values)
            .map(|(a, b)| a - b)
            .collect(),
        perturbed.label.clone(),
    ))
}

/// Samples before `t_p` needed to cover the leading half of the pulse.
fn lead_samples(pulse: &ProbePulse, dt: f64) -> usize {
    (PULSE_SUPPORT_SIGMAS * pulse.width_sigma / dt - 1e-9).ceil() as usize
}

fn grid_index(t: f64, start: f64, dt: f64, what: &str) -> Result<usize> {
    let k = (t - start) / dt;
    if k < -1e-9 || (k - k.round()).abs() > 1e-6 {
        return Err(Error::config(
            what,
            format!("{t} is not on the sampling grid"),
        ));
    }
    Ok(k.round() as usize)
}

/// `χ(ω) = FT[δA·d] / FT[φ·d]` on the probe band, with phases referenced to
/// `t_p`. The window runs from the start of the pulse support to
/// `t_p + record_length`.
pub fn extract_chi_omega(
    delta: &TimeSeries,
    pulse: &ProbePulse,
    params: &ResponseExtractionParams,
) -> Result<Spectrum> {
    params.validate()?;
    pulse.validate()?;
    let dt = delta.step;
    let t_p = pulse.center_tp;
    let k_p = grid_index(t_p, delta.start, dt, "center_tp")?;
    let lead = lead_samples(pulse, dt);
    let tail = (params.record_length / dt).round() as usize;
    if k_p < lead {
        return Err(Error::RecordTooShort(format!(
            "record starts at {} but the pulse support starts at {}",
            delta.start,
            t_p - PULSE_SUPPORT_SIGMAS * pulse.width_sigma
        )));
    }
    if k_p + tail >= delta.len() {
        return Err(Error::RecordTooShort(format!(
            "record ends at {} but t_p + record_length = {}",
            delta.end(),
            t_p + params.record_length
        )));
    }
    let end_decay = (-(tail as f64 * dt) / params.effective_tau()).exp();
    if end_decay > RECORD_END_DECAY * (1.0 + 1e-9) {
        return Err(Error::RecordTooShort(format!(
            "damping leaves {end_decay:.3e} of the signal at the record end"
        )));
    }
    let first = k_p - lead;
    let t_first = delta.time(first);
    let n_time = lead + tail + 1;
    let mut num = Vec::with_capacity(n_time);
    let mut den = Vec::with_capacity(n_time);
    for k in 0..n_time {
        let t = t_first + k as f64 * dt;
        let d = params.damping(t, t_p);
        num.push(C64::new(delta.values[first + k] * d, 0.0));
        den.push(C64::new(probe_value(t, pulse) * d, 0.0));
    }
    let pad = params.zero_pad_factor;
    let (omega, num_hat) = fourier::forward(&num, dt, t_first, t_p, pad);
    let (_, den_hat) = fourier::forward(&den, dt, t_first, t_p, pad);
    let peak = den_hat.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::EmptyBand);
    }
    let mut values = Vec::with_capacity(omega.len());
    let mut valid = Vec::with_capacity(omega.len());
    let mut weights = Vec::with_capacity(omega.len());
    for (a, b) in num_hat.iter().zip(&den_hat) {
        let rel = b.norm() / peak;
        if rel >= params.band_floor {
            values.push(a / b);
            valid.push(true);
            weights.push(params.taper(rel));
        } else {
            values.push(C64::new(f64::NAN, f64::NAN));
            valid.push(false);
            weights.push(0.0);
        }
    }
    Ok(Spectrum {
        omega,
        values,
        valid,
        weights,
        resolution: 2.0 * PI / (n_time as f64 * dt),
        dt,
        t_first,
        t_origin: t_p,
        n_time,
    })
}

/// First index, relative to the window start, of the reconstructed period.
fn reconstruction_offset(spec: &Spectrum) -> i64 {
    -((spec.len() - spec.n_time) as i64 / 2)
}

/// Inverse transform of the tapered band. Invalid bins contribute zero.
/// With `demodulation_omega = Some(ω_d)` the spectrum is multiplied by
/// `e^{iω_d t_p}` first.
pub fn chi_time_domain(
    spec: &Spectrum,
    demodulation_omega: Option<f64>,
) -> Result<TimeSeries<C64>> {
    if !spec.valid.iter().any(|&v| v) {
        return Err(Error::EmptyBand);
    }
    let phase = demodulation_omega.map_or(C64::new(1.0, 0.0), |w| {
        C64::from_polar(1.0, w * spec.t_origin)
    });
    let band: Vec<C64> = spec
        .values
        .iter()
        .zip(&spec.valid)
        .zip(&spec.weights)
        .map(|((v, &ok), &w)| {
            if ok && w > 0.0 {
                v * w * phase
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    let k0 = reconstruction_offset(spec);
    let values = fourier::inverse(&band, spec.dt, spec.t_first, spec.t_origin, k0);
    Ok(TimeSeries::new(
        spec.t_first + k0 as f64 * spec.dt,
        spec.dt,
        values,
        "chi_R",
    ))
}

/// Applies the extraction's damping and band taper to an exact `χ(t, t_p)`
/// trace, so it can be compared with [`chi_time_domain`] at equal bandwidth.
pub fn project_onto_band(
    exact: &TimeSeries<C64>,
    spec: &Spectrum,
    params: &ResponseExtractionParams,
) -> Result<TimeSeries<C64>> {
    if (exact.step - spec.dt).abs() > 1e-12 {
        return Err(Error::GridMismatch(format!(
            "step {} vs {}",
            exact.step, spec.dt
        )));
    }
    let first = grid_index(spec.t_first, exact.start, exact.step, "t_first")
        .map_err(|_| Error::GridMismatch("window start is not on the trace grid".into()))?;
    if first + spec.n_time > exact.len() {
        return Err(Error::GridMismatch(
            "trace does not cover the extraction window".into(),
        ));
    }
    let record = spec.n_time as f64 * spec.dt;
    let x: Vec<C64> = (0..spec.n_time)
        .map(|k| {
            let t = spec.t_first + k as f64 * spec.dt;
            exact.values[first + k] * params.damping(t, spec.t_origin)
        })
        .collect();
    let (_, hat) = fourier::forward(
        &x,
        spec.dt,
        spec.t_first,
        spec.t_origin,
        spec.len() / spec.n_time,
    );
    if hat.len() != spec.len() {
        return Err(Error::GridMismatch(
            "padded length differs from the spectrum".into(),
        ));
    }
    let band: Vec<C64> = hat
        .iter()
        .zip(&spec.weights)
        .map(|(v, &w)| v * (w * record))
        .collect();
    let k0 = reconstruction_offset(spec);
    let values = fourier::inverse(&band, spec.dt, spec.t_first, spec.t_origin, k0);
    Ok(TimeSeries::new(
        spec.t_first + k0 as f64 * spec.dt,
        spec.dt,
        values,
        "chi_R_projected",
    ))
}

/// Step and sampling settings shared by a scan's trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanSetup {
    pub dt_step: f64,
    pub dt_sample: f64,
    pub execution: Execution,
    pub krylov: KrylovOptions,
}

impl Default for ScanSetup {
    fn default() -> Self {
        ScanSetup {
            dt_step: DEFAULT_DT_STEP,
            dt_sample: DEFAULT_DT_SAMPLE,
            execution: Execution::Parallel,
            krylov: KrylovOptions::default(),
        }
    }
}

/// `χ(t_p, ω)` on a grid of probe times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMap {
    pub tp_values: Vec<f64>,
    pub omega: Vec<f64>,
    /// One spectrum per probe time, all on `omega`.
    pub columns: Vec<Spectrum>,
    /// `δA(t)` per probe time, on `[t_p − lead, t_p + record_length]`.
    pub deltas: Vec<TimeSeries>,
}

impl ResponseMap {
    /// `(|tp_values|, |omega|)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.tp_values.len(), self.omega.len())
    }

    pub fn chi(&self, i_tp: usize, i_omega: usize) -> C64 {
        self.columns[i_tp].values[i_omega]
    }

    pub fn valid(&self, i_tp: usize, i_omega: usize) -> bool {
        self.columns[i_tp].valid[i_omega]
    }
}

/// Runs one unperturbed trajectory and, for each `t_p`, a perturbed one
/// resumed from a checkpoint just before the pulse; extracts `χ(ω, t_p)` for
/// `Z` on the probe site.
#[allow(clippy::too_many_arguments)]
pub fn pump_probe_scan(
    psi0: &StateVector,
    config: &SpinChainConfig,
    protocol: &DriveProtocol,
    pulse_template: &ProbePulse,
    tp_list: &[f64],
    params: &ResponseExtractionParams,
    setup: &ScanSetup,
) -> Result<ResponseMap> {
    params.validate()?;
    pulse_template.validate()?;
    if tp_list.is_empty() {
        return Err(Error::config("tp_list", "must not be empty"));
    }
    if tp_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("tp_list", "must be strictly increasing"));
    }
    if psi0.n_sites() != config.n_sites {
        return Err(Error::DimensionMismatch {
            expected: config.dim(),
            found: psi0.dim(),
        });
    }
    let grid = EvolutionGrid::new(0.0, 0.0, setup.dt_step, setup.dt_sample)?;
    let stride = grid.stride();
    let dt = setup.dt_step;
    let site = pulse_template.probe_site;
    if site >= config.n_sites {
        return Err(Error::SiteOutOfRange {
            index: site,
            n_sites: config.n_sites,
        });
    }
    let lead = lead_samples(pulse_template, setup.dt_sample);
    let tail = (params.record_length / setup.dt_sample).ceil() as usize;
    let mut tp_steps = Vec::with_capacity(tp_list.len());
    for &t_p in tp_list {
        let s = grid_index(t_p, 0.0, dt, "tp_list")?;
        if s < lead * stride {
            return Err(Error::RecordTooShort(format!(
                "t_p = {t_p} leaves no room for the pulse before t = 0"
            )));
        }
        tp_steps.push(s);
    }
    let window_start: Vec<usize> = tp_steps.iter().map(|s| s - lead * stride).collect();
    let n_window = (lead + tail) * stride;
    let total_steps = tp_steps.last().unwrap() + tail * stride;

    // Unperturbed reference: Z on every step, plus a checkpoint at each window start.
    let reference = Propagator::new(config, protocol, None)?.with_krylov(setup.krylov.clone());
    let mut z_ref = Vec::with_capacity(total_steps + 1);
    let mut checkpoints: Vec<Vec<C64>> = Vec::with_capacity(tp_list.len());
    let mut next = 0;
    let mut psi = psi0.amplitudes().to_vec();
    reference.run(&mut psi, 0.0, dt, 0, total_steps, |k, state| {
        z_ref.push(z_expectation(state, site));
        while next < window_start.len() && window_start[next] == k {
            checkpoints.push(state.to_vec());
            next += 1;
        }
        Ok(())
    })?;

    let results = map_indexed(setup.execution, tp_list.len(), |i| {
        let pulse = pulse_template.centered_at(tp_list[i]);
        let prop =
            Propagator::new(config, protocol, Some(&pulse))?.with_krylov(setup.krylov.clone());
        let mut state = checkpoints[i].clone();
        let mut z = Vec::with_capacity(lead + tail + 1);
        prop.run(&mut state, 0.0, dt, window_start[i], n_window, |k, s| {
            if k % stride == 0 {
                z.push(z_expectation(s, site));
            }
            Ok(())
        })?;
        let base: Vec<f64> = (0..z.len())
            .map(|m| z_ref[window_start[i] + m * stride])
            .collect();
        let start = window_start[i] as f64 * dt;
        let label = format!("Z_{site}");
        let delta = delta_signal(
            &TimeSeries::new(start, setup.dt_sample, z, label.clone()),
            &TimeSeries::new(start, setup.dt_sample, base, label),
        )?;
        let spec = extract_chi_omega(&delta, &pulse, params)?;
        Ok((spec, delta))
    })?;
    let (columns, deltas): (Vec<Spectrum>, Vec<TimeSeries>) = results.into_iter().unzip();
    Ok(ResponseMap {
        tp_values: tp_list.to_vec(),
        omega: columns[0].omega.clone(),
        columns,
        deltas,
    })
}

/// Exact `χ(t, t_p) = −iθ(t − t_p)<ψ0|[Z(t), Z(t_p)]|ψ0>` under the pump-only
/// Hamiltonian, sampled on `t_grid`.
///
/// With `u(t) = U(t,0)ψ0` and `w(t) = U(t,t_p) Z u(t_p)`, the commutator is
/// `X − X*` for `X = <u(t)|Z|w(t)>`, so `χ = 2 Im X`.
pub fn commutator_response_oracle(
    psi0: &StateVector,
    config: &SpinChainConfig,
    protocol: &DriveProtocol,
    probe_site: usize,
    t_grid: &EvolutionGrid,
    t_p: f64,
) -> Result<TimeSeries<C64>> {
    t_grid.validate()?;
    if probe_site >= config.n_sites {
        return Err(Error::SiteOutOfRange {
            index: probe_site,
            n_sites: config.n_sites,
        });
    }
    if psi0.n_sites() != config.n_sites {
        return Err(Error::DimensionMismatch {
            expected: config.dim(),
            found: psi0.dim(),
        });
    }
    let dt = t_grid.dt_step;
    let p_step = grid_index(t_p, t_grid.t_start, dt, "t_p")?;
    let stride = t_grid.stride();
    let n_steps = t_grid.n_steps();
    let prop = Propagator::new(config, protocol, None)?;
    let mask = 1usize << probe_site;
    let apply_z = |x: &[C64]| -> Vec<C64> {
        x.iter()
            .enumerate()
            .map(|(b, a)| if b & mask == 0 { *a } else { -*a })
            .collect()
    };
    let mut u = psi0.amplitudes().to_vec();
    let mut w: Option<Vec<C64>> = None;
    let mut ws = KrylovWorkspace::new();
    let mut values = Vec::with_capacity(t_grid.n_samples());
    for k in 0..=n_steps {
        if k == p_step {
            w = Some(apply_z(&u));
        }
        if k % stride == 0 {
            let chi = match &w {
                Some(w) => {
                    let zu = apply_z(&u);
                    let x: C64 = zu.iter().zip(w).map(|(a, b)| a.conj() * b).sum();
                    C64::new(2.0 * x.im, 0.0)
                }
                None => C64::new(0.0, 0.0),
            };
            values.push(chi);
        }
        if k == n_steps {
            break;
        }
        let t = t_grid.t_start + k as f64 * dt;
        prop.step(&mut u, t, dt, &mut ws)?;
        if let Some(w) = w.as_mut() {
            prop.step(w, t, dt, &mut ws)?;
        }
    }
    Ok(TimeSeries::new(
        t_grid.t_start,
        t_grid.dt_sample,
        values,
        "chi_R_exact",
    ))
}

/// Transform of `χ(t_p, ω_0)` along `t_p` with kernel `e^{iν t_p}`; returns
/// `(Im F(ν))²` as real values.
pub fn tp_spectrum(map: &ResponseMap, omega0: f64) -> Result<Spectrum> {
    const MIN_TP: usize = 8;
    let n = map.tp_values.len();
    if n < MIN_TP {
        return Err(Error::TooFewSamples {
            found: n,
            needed: MIN_TP,
        });
    }
    let step = map.tp_values[1] - map.tp_values[0];
    if map
        .tp_values
        .windows(2)
        .any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(1.0))
    {
        return Err(Error::config(
            "tp_list",
            "t_p spectrum needs uniform spacing",
        ));
    }
    let column = map
        .columns
        .first()
        .and_then(|c| c.nearest_bin(omega0))
        .ok_or_else(|| Error::config("omega0", "outside the frequency grid"))?;
    let mut samples = Vec::with_capacity(n);
    for c in &map.columns {
        if !c.valid[column] {
            return Err(Error::config("omega0", "outside the valid probe band"));
        }
        samples.push(c.values[column]);
    }
    let pad = 4;
    let (nu, f) = fourier::forward(&samples, step, map.tp_values[0], 0.0, pad);
    let len = nu.len();
    Ok(Spectrum {
        omega: nu,
        values: f.iter().map(|v| C64::new(v.im * v.im, 0.0)).collect(),
        valid: vec![true; len],
        weights: vec![1.0; len],
        resolution: 2.0 * PI / (n as f64 * step),
        dt: step,
        t_first: map.tp_values[0],
        t_origin: 0.0,
        n_time: n,
    })
}
