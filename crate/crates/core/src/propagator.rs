//! Time evolution under `H(t) = H_MFIM(h_l(t)) + φ(t) Z_site` with the
//! exponential midpoint rule.

use serde::{Deserialize, Serialize};

use crate::drive::{probe_value, ramp_field, DriveProtocol, ProbePulse};
use crate::error::{Error, Result};
use crate::krylov::{expm_apply, KrylovOptions, KrylovWorkspace};
use crate::lattice::{
    bond_diagonal, l2_norm, LinearOperator, SparseOperator, SpinChainConfig, StateVector, C64,
};
use crate::measure;

pub const DEFAULT_DT_STEP: f64 = 0.01;
pub const DEFAULT_DT_SAMPLE: f64 = 0.05;
const MAX_HALVINGS: u32 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionGrid {
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default = "default_dt_step")]
    pub dt_step: f64,
    #[serde(default = "default_dt_sample")]
    pub dt_sample: f64,
}

fn default_dt_step() -> f64 {
    DEFAULT_DT_STEP
}

fn default_dt_sample() -> f64 {
    DEFAULT_DT_SAMPLE
}

impl EvolutionGrid {
    pub fn new(t_start: f64, t_end: f64, dt_step: f64, dt_sample: f64) -> Result<Self> {
        let grid = EvolutionGrid {
            t_start,
            t_end,
            dt_step,
            dt_sample,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// `[0, t_end]` with the default steps.
    pub fn span(t_end: f64) -> Result<Self> {
        Self::new(0.0, t_end, DEFAULT_DT_STEP, DEFAULT_DT_SAMPLE)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start >= 0.0 && self.t_start.is_finite()) {
            return Err(Error::config("t_start", "must be finite and non-negative"));
        }
        if !(self.t_end >= self.t_start && self.t_end.is_finite()) {
            return Err(Error::config("t_end", "must not precede t_start"));
        }
        if !(self.dt_step > 0.0 && self.dt_step.is_finite()) {
            return Err(Error::config("dt_step", "must be positive"));
        }
        let ratio = (self.dt_sample / self.dt_step).round();
        if ratio < 1.0 || (self.dt_sample - ratio * self.dt_step).abs() > 1e-12 {
            return Err(Error::config(
                "dt_sample",
                "must be a positive integer multiple of dt_step",
            ));
        }
        Ok(())
    }

    /// Integrator steps per sample.
    pub fn stride(&self) -> usize {
        (self.dt_sample / self.dt_step).round() as usize
    }

    pub fn n_samples(&self) -> usize {
        ((self.t_end - self.t_start) / self.dt_sample + 1e-9).floor() as usize + 1
    }

    pub fn n_steps(&self) -> usize {
        (self.n_samples() - 1) * self.stride()
    }

    pub fn sample_time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt_sample
    }
}

/// Uniformly sampled trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries<T = f64> {
    pub start: f64,
    pub step: f64,
    pub values: Vec<T>,
    pub label: String,
}

impl<T> TimeSeries<T> {
    pub fn new(start: f64, step: f64, values: Vec<T>, label: impl Into<String>) -> Self {
        TimeSeries {
            start,
            step,
            values,
            label: label.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| self.time(k)).collect()
    }

    pub fn end(&self) -> f64 {
        self.time(self.values.len().saturating_sub(1))
    }

    /// Same start, step and length within `1e-12`.
    pub fn same_grid<U>(&self, other: &TimeSeries<U>) -> bool {
        self.len() == other.len()
            && (self.start - other.start).abs() <= 1e-12
            && (self.step - other.step).abs() <= 1e-12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    LocalZ(usize),
    Magnetization,
    ConnectedZz(usize, usize),
    /// `<H_MFIM(h_l(t))>`, probe term excluded.
    Energy,
    Norm,
}

impl Observable {
    pub fn label(&self) -> String {
        match *self {
            Observable::LocalZ(i) => format!("Z_{i}"),
            Observable::Magnetization => "M".to_string(),
            Observable::ConnectedZz(i, j) => format!("ZZ_c({i},{j})"),
            Observable::Energy => "E".to_string(),
            Observable::Norm => "norm".to_string(),
        }
    }

    fn check(&self, n_sites: usize) -> Result<()> {
        let sites: &[usize] = match self {
            Observable::LocalZ(i) => std::slice::from_ref(i),
            Observable::ConnectedZz(i, j) => &[*i, *j],
            _ => &[],
        };
        for &s in sites {
            if s >= n_sites {
                return Err(Error::SiteOutOfRange { index: s, n_sites });
            }
        }
        Ok(())
    }
}

/// Mixed-field Ising Hamiltonian with the field-independent parts
/// precomputed, for cheap re-evaluation at each step.
#[derive(Debug, Clone)]
pub struct DrivenHamiltonian {
    n_sites: usize,
    coupling_j: f64,
    transverse_ht: f64,
    bonds: Vec<f64>,
}

impl DrivenHamiltonian {
    pub fn new(config: &SpinChainConfig) -> Result<Self> {
        config.validate()?;
        Ok(DrivenHamiltonian {
            n_sites: config.n_sites,
            coupling_j: config.coupling_j,
            transverse_ht: config.transverse_ht,
            bonds: bond_diagonal(config),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// `H_MFIM(h_l) + φ Z_site`.
    pub fn at(&self, h_l: f64, probe: Option<(usize, f64)>) -> InstantHamiltonian<'_> {
        let (site, phi) = probe.unwrap_or((0, 0.0));
        InstantHamiltonian {
            base: self,
            h_l,
            site,
            phi,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct InstantHamiltonian<'a> {
    base: &'a DrivenHamiltonian,
    h_l: f64,
    site: usize,
    phi: f64,
}

impl InstantHamiltonian<'_> {
    #[inline]
    fn diagonal(&self, b: usize) -> f64 {
        let n = self.base.n_sites as f64;
        let m = n - 2.0 * b.count_ones() as f64;
        let z = if (b >> self.site) & 1 == 0 { 1.0 } else { -1.0 };
        self.base.bonds[b] - self.base.coupling_j * self.h_l * m + self.phi * z
    }

    pub fn expectation(&self, x: &[C64]) -> f64 {
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        self.apply_into(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

impl LinearOperator for InstantHamiltonian<'_> {
    fn dim(&self) -> usize {
        1 << self.base.n_sites
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let off = -self.base.coupling_j * self.base.transverse_ht;
        let n = self.base.n_sites;
        for (b, yb) in y.iter_mut().enumerate() {
            let mut acc = x[b] * self.diagonal(b);
            if off != 0.0 {
                let mut flips = C64::new(0.0, 0.0);
                for i in 0..n {
                    flips += x[b ^ (1 << i)];
                }
                acc += flips * off;
            }
            *yb = acc;
        }
    }
}

/// `psi ← exp(−i H_mid dt) psi` by a Krylov exponential.
pub fn step_midpoint(psi: &StateVector, h_mid: &SparseOperator, dt: f64) -> Result<StateVector> {
    if h_mid.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: h_mid.dim(),
            found: psi.dim(),
        });
    }
    let mut x = psi.amplitudes().to_vec();
    expm_apply(
        h_mid,
        &mut x,
        dt,
        &KrylovOptions::default(),
        &mut KrylovWorkspace::new(),
    )?;
    Ok(StateVector::from_raw(x, psi.n_sites()))
}

/// Integrates a fixed pump protocol, optionally with one probe pulse.
#[derive(Debug, Clone)]
pub struct Propagator {
    ham: DrivenHamiltonian,
    protocol: DriveProtocol,
    pulse: Option<ProbePulse>,
    options: KrylovOptions,
}

impl Propagator {
    pub fn new(
        config: &SpinChainConfig,
        protocol: &DriveProtocol,
        pulse: Option<&ProbePulse>,
    ) -> Result<Self> {
        protocol.validate()?;
        if let Some(p) = pulse {
            p.validate()?;
            if p.probe_site >= config.n_sites {
                return Err(Error::SiteOutOfRange {
                    index: p.probe_site,
                    n_sites: config.n_sites,
                });
            }
        }
        Ok(Propagator {
            ham: DrivenHamiltonian::new(config)?,
            protocol: protocol.clone(),
            pulse: pulse.cloned(),
            options: KrylovOptions::default(),
        })
    }

    pub fn with_krylov(mut self, options: KrylovOptions) -> Self {
        self.options = options;
        self
    }

    pub fn hamiltonian(&self) -> &DrivenHamiltonian {
        &self.ham
    }

    /// Instantaneous Hamiltonian at `t` including the probe term.
    pub fn at(&self, t: f64) -> InstantHamiltonian<'_> {
        let probe = self
            .pulse
            .as_ref()
            .map(|p| (p.probe_site, probe_value(t, p)));
        self.ham.at(ramp_field(t, &self.protocol), probe)
    }

    /// Pump-only Hamiltonian at `t`.
    pub fn pump_at(&self, t: f64) -> InstantHamiltonian<'_> {
        self.ham.at(ramp_field(t, &self.protocol), None)
    }

    /// One step `[t, t + dt]`, split at any protocol discontinuity inside it.
    pub fn step(&self, psi: &mut [C64], t: f64, dt: f64, ws: &mut KrylovWorkspace) -> Result<()> {
        let end = t + dt;
        let mut cursor = t;
        for jump in self.protocol.discontinuities() {
            if jump > cursor + 1e-12 && jump < end - 1e-12 {
                self.substep(psi, cursor, jump - cursor, ws, 0)?;
                cursor = jump;
            }
        }
        self.substep(psi, cursor, end - cursor, ws, 0)
    }

    fn substep(
        &self,
        psi: &mut [C64],
        t: f64,
        dt: f64,
        ws: &mut KrylovWorkspace,
        depth: u32,
    ) -> Result<()> {
        let h = self.at(t + 0.5 * dt);
        match expm_apply(&h, psi, dt, &self.options, ws) {
            Ok(_) => Ok(()),
            Err(Error::KrylovCapExceeded { estimate, .. }) => {
                if depth >= MAX_HALVINGS {
                    return Err(Error::Integrator { time: t, estimate });
                }
                self.substep(psi, t, 0.5 * dt, ws, depth + 1)?;
                self.substep(psi, t + 0.5 * dt, 0.5 * dt, ws, depth + 1)
            }
            Err(e) => Err(e),
        }
    }

    /// Advances `n_steps` steps of `dt_step`, starting at grid step
    /// `first_step`, i.e. at `t_start + first_step·dt_step`. `visit(k, psi)`
    /// sees the state after `k` of those steps, `k = 0..=n_steps`.
    ///
    /// Step times are always computed from the global step index, so runs
    /// resumed from a checkpoint reproduce the uninterrupted run bit for bit.
    pub fn run(
        &self,
        psi: &mut [C64],
        t_start: f64,
        dt_step: f64,
        first_step: usize,
        n_steps: usize,
        mut visit: impl FnMut(usize, &[C64]) -> Result<()>,
    ) -> Result<()> {
        let mut ws = KrylovWorkspace::new();
        visit(0, psi)?;
        for k in 0..n_steps {
            let t = t_start + (first_step + k) as f64 * dt_step;
            self.step(psi, t, dt_step, &mut ws)?;
            visit(k + 1, psi)?;
        }
        Ok(())
    }
}

/// Evolves `psi0` over `grid` and samples each observable every
/// `dt_sample`.
pub fn evolve_observables(
    psi0: &StateVector,
    config: &SpinChainConfig,
    protocol: &DriveProtocol,
    pulse: Option<&ProbePulse>,
    observables: &[Observable],
    grid: &EvolutionGrid,
) -> Result<Vec<TimeSeries>> {
    let (series, _) = evolve_with_final(psi0, config, protocol, pulse, observables, grid)?;
    Ok(series)
}

/// As [`evolve_observables`], also returning the final state.
pub fn evolve_with_final(
    psi0: &StateVector,
    config: &SpinChainConfig,
    protocol: &DriveProtocol,
    pulse: Option<&ProbePulse>,
    observables: &[Observable],
    grid: &EvolutionGrid,
) -> Result<(Vec<TimeSeries>, StateVector)> {
    grid.validate()?;
    if psi0.n_sites() != config.n_sites {
        return Err(Error::DimensionMismatch {
            expected: config.dim(),
            found: psi0.dim(),
        });
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm));
    }
    for o in observables {
        o.check(config.n_sites)?;
    }
    let prop = Propagator::new(config, protocol, pulse)?;
    let n = config.n_sites;
    let stride = grid.stride();
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.n_samples()); observables.len()];
    let mut psi = psi0.amplitudes().to_vec();
    prop.run(
        &mut psi,
        grid.t_start,
        grid.dt_step,
        0,
        grid.n_steps(),
        |k, state| {
            if k % stride != 0 {
                return Ok(());
            }
            let t = grid.t_start + k as f64 * grid.dt_step;
            for (o, out) in observables.iter().zip(values.iter_mut()) {
                out.push(match *o {
                    Observable::LocalZ(i) => measure::z_expectation(state, i),
                    Observable::Magnetization => {
                        let z = measure::all_z(state, n);
                        z.iter().sum()
                    }
                    Observable::ConnectedZz(i, j) => measure::connected_raw(state, i, j),
                    Observable::Energy => prop.pump_at(t).expectation(state),
                    Observable::Norm => l2_norm(state),
                });
            }
            Ok(())
        },
    )?;
    let series = observables
        .iter()
        .zip(values)
        .map(|(o, v)| TimeSeries::new(grid.t_start, grid.dt_sample, v, o.label()))
        .collect();
    Ok((series, StateVector::from_raw(psi, n)))
}
