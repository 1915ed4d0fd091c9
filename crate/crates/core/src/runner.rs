//! Experiment configuration, the five pipelines and their file outputs.
//!
//! Every run writes `manifest.json` (resolved configuration, version,
//! timings, output list) plus one CSV per output object. CSVs have a single
//! header line; complex values are split into `_re`/`_im` columns and floats
//! are written in shortest round-trip form, so identical single-threaded runs
//! produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::drive::{DriveProtocol, ProbePulse, PulseShape, DEFAULT_H_L_MAX};
use crate::error::{Error, Result};
use crate::lattice::{build_mfim, SpinChainConfig, StateVector, C64};
use crate::measure::total_magnetization;
use crate::parallel::{map_indexed, with_threads, Execution};
use crate::propagator::{evolve_observables, EvolutionGrid, Observable, TimeSeries};
use crate::response::{
    chi_time_domain, commutator_response_oracle, project_onto_band, pump_probe_scan, tp_spectrum,
    ResponseExtractionParams, ResponseMap, ScanSetup,
};
use crate::spectral::{find_peaks, find_peaks_in, summed_power};
use crate::vacuum::{lowest_eigenpairs, prepare_vacuum_aligned, VacuumKind};

/// Lowest levels written by `ground_state`.
pub const GROUND_STATE_LEVELS: usize = 8;
/// Relative threshold for reported peaks.
pub const PEAK_THRESHOLD: f64 = 0.05;
/// Largest chain accepted by `oracle_check`.
pub const ORACLE_MAX_SITES: usize = 12;
/// Default total time of `equilibrium_quench`.
pub const DEFAULT_T_END: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    GroundState,
    EquilibriumQuench,
    PumpProbe,
    Selective,
    OracleCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::GroundState,
        ExperimentKind::EquilibriumQuench,
        ExperimentKind::PumpProbe,
        ExperimentKind::Selective,
        ExperimentKind::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::GroundState => "ground_state",
            ExperimentKind::EquilibriumQuench => "equilibrium_quench",
            ExperimentKind::PumpProbe => "pump_probe",
            ExperimentKind::Selective => "selective",
            ExperimentKind::OracleCheck => "oracle_check",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::config("experiment", format!("unknown experiment `{name}`")))
    }
}

/// Which Hamiltonian the initial vacuum belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VacuumHamiltonian {
    /// `H(h_l_pre)`; for `equilibrium_quench` also with `h_t = 0`.
    #[default]
    PrePump,
    /// `H(h_l_max)`, the field right after the pump.
    PostPump,
}

/// True or false vacuum, aligned against the post-pump field. Accepts either
/// a bare kind (`"false_vacuum"`) or `{"kind": …, "hamiltonian": …}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VacuumChoiceRepr")]
pub struct VacuumChoice {
    pub kind: VacuumKind,
    pub hamiltonian: VacuumHamiltonian,
}

impl Default for VacuumChoice {
    fn default() -> Self {
        VacuumChoice {
            kind: VacuumKind::TrueVacuum,
            hamiltonian: VacuumHamiltonian::PrePump,
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum VacuumChoiceRepr {
    Kind(VacuumKind),
    Full {
        kind: VacuumKind,
        #[serde(default)]
        hamiltonian: VacuumHamiltonian,
    },
}

impl From<VacuumChoiceRepr> for VacuumChoice {
    fn from(r: VacuumChoiceRepr) -> Self {
        match r {
            VacuumChoiceRepr::Kind(kind) => VacuumChoice {
                kind,
                hamiltonian: VacuumHamiltonian::PrePump,
            },
            VacuumChoiceRepr::Full { kind, hamiltonian } => VacuumChoice { kind, hamiltonian },
        }
    }
}

/// Configuration document as written by the user. Absent fields are filled
/// by [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<SpinChainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<DriveProtocol>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<ProbePulse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tp_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<EvolutionGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction: Option<ResponseExtractionParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vacuum_choice: Option<VacuumChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub experiment: ExperimentKind,
    pub chain: SpinChainConfig,
    pub protocol: DriveProtocol,
    pub pulse: ProbePulse,
    pub tp_list: Vec<f64>,
    pub grid: EvolutionGrid,
    pub extraction: ResponseExtractionParams,
    pub vacuum_choice: VacuumChoice,
    pub output_dir: PathBuf,
}

/// `n` probe times uniform on `[start, end]`; the default scan uses 36 on
/// `[15, 50]`.
pub fn uniform_tp_list(start: f64, end: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![start; n];
    }
    let step = (end - start) / (n - 1) as f64;
    (0..n).map(|i| start + i as f64 * step).collect()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Parses `text`, applies `key=value` overrides, then deserializes.
    pub fn from_json_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text)?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        Ok(serde_json::from_value(doc)?)
    }

    /// Fills defaults, checks experiment-specific requirements and validates
    /// every component. Returns the names of the fields that were defaulted.
    pub fn resolve(&self) -> Result<(ResolvedConfig, Vec<String>)> {
        let mut defaulted = Vec::new();
        let experiment = self
            .experiment
            .ok_or_else(|| Error::config("experiment", "missing"))?;
        let chain = self
            .chain
            .clone()
            .ok_or_else(|| Error::config("chain", "missing"))?;
        chain.validate()?;

        let protocol = match (&self.protocol, experiment) {
            (Some(p), _) => p.clone(),
            (None, ExperimentKind::GroundState | ExperimentKind::EquilibriumQuench) => {
                return Err(Error::config(
                    "protocol",
                    format!("required for {}", experiment.name()),
                ));
            }
            (None, _) => {
                defaulted.push("protocol".to_string());
                DriveProtocol::default_ramp(DEFAULT_H_L_MAX)
            }
        };
        protocol.validate()?;

        let pulse = match &self.pulse {
            Some(p) => p.clone(),
            None => {
                defaulted.push("pulse".to_string());
                match experiment {
                    ExperimentKind::Selective => ProbePulse::selective(0.0),
                    _ => ProbePulse::broadband(0.0),
                }
            }
        };
        pulse.validate()?;
        if pulse.probe_site >= chain.n_sites {
            return Err(Error::config("pulse.probe_site", "outside the chain"));
        }
        if experiment == ExperimentKind::Selective && pulse.shape != PulseShape::SineGaussian {
            return Err(Error::config(
                "pulse.shape",
                "selective needs a sine_gaussian pulse",
            ));
        }

        let needs_tp = matches!(
            experiment,
            ExperimentKind::PumpProbe | ExperimentKind::Selective | ExperimentKind::OracleCheck
        );
        let tp_list = match &self.tp_list {
            Some(t) => t.clone(),
            None if needs_tp => {
                return Err(Error::config(
                    "tp_list",
                    format!("required for {}", experiment.name()),
                ));
            }
            None => Vec::new(),
        };
        if needs_tp {
            if tp_list.is_empty() {
                return Err(Error::config("tp_list", "must not be empty"));
            }
            if tp_list.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config("tp_list", "must be strictly increasing"));
            }
        }

        let grid = match &self.grid {
            Some(g) => g.clone(),
            None => {
                defaulted.push("grid".to_string());
                EvolutionGrid::span(DEFAULT_T_END)?
            }
        };
        grid.validate()?;

        let extraction = match &self.extraction {
            Some(e) => e.clone(),
            None => {
                defaulted.push("extraction".to_string());
                ResponseExtractionParams::default()
            }
        };
        extraction.validate()?;

        let vacuum_choice = self.vacuum_choice.unwrap_or_else(|| {
            defaulted.push("vacuum_choice".to_string());
            VacuumChoice::default()
        });

        if experiment == ExperimentKind::OracleCheck && chain.n_sites > ORACLE_MAX_SITES {
            return Err(Error::config(
                "chain.n_sites",
                format!("oracle_check is limited to {ORACLE_MAX_SITES} sites"),
            ));
        }

        let output_dir = match &self.output_dir {
            Some(d) => d.clone(),
            None => {
                defaulted.push("output_dir".to_string());
                PathBuf::from("out")
            }
        };

        Ok((
            ResolvedConfig {
                experiment,
                chain,
                protocol,
                pulse,
                tp_list,
                grid,
                extraction,
                vacuum_choice,
                output_dir,
            },
            defaulted,
        ))
    }
}

/// Sets `a.b.c` in a JSON document; `value` is parsed as JSON, falling back
/// to a plain string. Missing intermediate objects are created.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config("override", format!("`{assignment}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::config("override", format!("bad key `{key}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !node.is_object() {
            return Err(Error::config(key, "path runs through a non-object value"));
        }
        let map = node.as_object_mut().expect("checked above");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Manifest written next to the data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub software: String,
    pub version: String,
    pub experiment: ExperimentKind,
    pub config: ResolvedConfig,
    /// Top-level fields that were absent and filled with defaults.
    pub defaults_applied: Vec<String>,
    /// Values the pipeline derived from the configuration.
    pub derived: BTreeMap<String, Value>,
    /// Worker threads; `1` runs sequentially.
    pub threads: Option<usize>,
    pub timings_seconds: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// `Some(1)` runs everything on the calling thread.
    pub threads: Option<usize>,
}

struct Run {
    dir: PathBuf,
    outputs: Vec<String>,
    derived: BTreeMap<String, Value>,
    timings: BTreeMap<String, f64>,
    execution: Execution,
}

impl Run {
    fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        fs::write(self.dir.join(name), text + "\n")?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn timed<T>(&mut self, phase: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self)?;
        self.timings
            .insert(phase.to_string(), start.elapsed().as_secs_f64());
        Ok(out)
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Resolves `config`, runs its experiment and writes all outputs into
/// `output_dir` (created if needed).
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<Manifest> {
    let (resolved, defaulted) = config.resolve()?;
    fs::create_dir_all(&resolved.output_dir)?;
    let execution = if options.threads == Some(1) {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let mut run = Run {
        dir: resolved.output_dir.clone(),
        outputs: Vec::new(),
        derived: BTreeMap::new(),
        timings: BTreeMap::new(),
        execution,
    };
    let start = Instant::now();
    with_threads(options.threads, || match resolved.experiment {
        ExperimentKind::GroundState => ground_state(&resolved, &mut run),
        ExperimentKind::EquilibriumQuench => equilibrium_quench(&resolved, &mut run),
        ExperimentKind::PumpProbe | ExperimentKind::Selective => pump_probe(&resolved, &mut run),
        ExperimentKind::OracleCheck => oracle_check(&resolved, &mut run),
    })??;
    run.timings
        .insert("total".to_string(), start.elapsed().as_secs_f64());
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: resolved.experiment,
        config: resolved.clone(),
        defaults_applied: defaulted,
        derived: run.derived,
        threads: options.threads,
        timings_seconds: run.timings,
        outputs: run.outputs,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(resolved.output_dir.join("manifest.json"), text + "\n")?;
    Ok(manifest)
}

/// Initial vacuum selected by `vacuum_choice`, aligned against the post-pump
/// field. `chain` is the lattice the vacuum is computed on.
fn initial_state(cfg: &ResolvedConfig, chain: &SpinChainConfig) -> Result<(StateVector, f64)> {
    let post = cfg.protocol.post_pump_field();
    let field = match cfg.vacuum_choice.hamiltonian {
        VacuumHamiltonian::PrePump => cfg.protocol.h_l_pre,
        VacuumHamiltonian::PostPump => post,
    };
    Ok((
        prepare_vacuum_aligned(chain, field, cfg.vacuum_choice.kind, post)?,
        field,
    ))
}

fn ground_state(cfg: &ResolvedConfig, run: &mut Run) -> Result<()> {
    let field = match cfg.vacuum_choice.hamiltonian {
        VacuumHamiltonian::PrePump => cfg.protocol.h_l_pre,
        VacuumHamiltonian::PostPump => cfg.protocol.post_pump_field(),
    };
    let k = GROUND_STATE_LEVELS.min(cfg.chain.dim());
    let sol = run.timed("eigensolve", |_| {
        lowest_eigenpairs(&build_mfim(&cfg.chain, field)?, k)
    })?;
    let (vacuum, _) = run.timed("vacuum", |_| initial_state(cfg, &cfg.chain))?;
    let rows: Vec<Vec<String>> = sol
        .eigenvalues
        .iter()
        .zip(&sol.residuals)
        .enumerate()
        .map(|(i, (e, r))| vec![i.to_string(), num(*e), num(*r)])
        .collect();
    run.csv("eigenvalues.csv", &["index", "energy", "residual"], rows)?;
    let rows: Vec<Vec<String>> = vacuum
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(b, a)| vec![b.to_string(), num(a.re), num(a.im)])
        .collect();
    run.csv(
        "vacuum.csv",
        &["basis_index", "amplitude_re", "amplitude_im"],
        rows,
    )?;
    run.derived.insert("h_l".into(), json!(field));
    run.derived.insert("levels".into(), json!(k));
    run.derived.insert(
        "vacuum_magnetization".into(),
        json!(total_magnetization(&vacuum)),
    );
    Ok(())
}

fn equilibrium_quench(cfg: &ResolvedConfig, run: &mut Run) -> Result<()> {
    let n = cfg.chain.n_sites;
    let pre = cfg.chain.with_transverse(0.0);
    let start_chain = match cfg.vacuum_choice.hamiltonian {
        VacuumHamiltonian::PrePump => &pre,
        VacuumHamiltonian::PostPump => &cfg.chain,
    };
    let (psi0, field) = run.timed("vacuum", |_| initial_state(cfg, start_chain))?;
    let mut observables: Vec<Observable> = (0..n).map(|i| Observable::ConnectedZz(i, 0)).collect();
    observables.push(Observable::Magnetization);
    let series = run.timed("evolve", |_| {
        evolve_observables(
            &psi0,
            &cfg.chain,
            &cfg.protocol,
            None,
            &observables,
            &cfg.grid,
        )
    })?;
    let (corr, mag) = series.split_at(n);

    let mut rows = Vec::with_capacity(corr[0].len() * n);
    for k in 0..corr[0].len() {
        for (i, s) in corr.iter().enumerate() {
            let v = s.values[k];
            rows.push(vec![
                num(s.time(k)),
                i.to_string(),
                num(v),
                num((1.0 + v).log10()),
            ]);
        }
    }
    run.csv(
        "correlators.csv",
        &["t", "site", "zz_c", "log10_1p_zz_c"],
        rows,
    )?;
    let m = &mag[0];
    run.csv(
        "magnetization.csv",
        &["t", "magnetization"],
        (0..m.len()).map(|k| vec![num(m.time(k)), num(m.values[k])]),
    )?;

    let (omega, power) = summed_power(corr)?;
    let peaks = find_peaks_in(&omega, &power, PEAK_THRESHOLD)?;
    run.csv(
        "correlator_spectrum.csv",
        &["omega", "power"],
        omega
            .iter()
            .zip(&power)
            .map(|(w, p)| vec![num(*w), num(*p)]),
    )?;
    run.json("correlator_peaks.json", &peaks)?;
    run.derived.insert("initial_h_l".into(), json!(field));
    run.derived
        .insert("initial_h_t".into(), json!(start_chain.transverse_ht));
    run.derived
        .insert("peak_threshold".into(), json!(PEAK_THRESHOLD));
    Ok(())
}

fn scan_setup(cfg: &ResolvedConfig, run: &Run) -> ScanSetup {
    ScanSetup {
        dt_step: cfg.grid.dt_step,
        dt_sample: cfg.grid.dt_sample,
        execution: run.execution,
        ..ScanSetup::default()
    }
}

fn write_map(run: &mut Run, map: &ResponseMap) -> Result<()> {
    let mut rows = Vec::new();
    for (i, &tp) in map.tp_values.iter().enumerate() {
        for (j, &w) in map.omega.iter().enumerate() {
            let v = map.chi(i, j);
            let ok = map.valid(i, j);
            rows.push(vec![
                num(tp),
                num(w),
                num(v.re),
                num(v.im),
                u8::from(ok).to_string(),
            ]);
        }
    }
    run.csv(
        "response_map.csv",
        &["t_p", "omega", "chi_re", "chi_im", "valid"],
        rows,
    )?;
    let mut rows = Vec::new();
    for (tp, d) in map.tp_values.iter().zip(&map.deltas) {
        for k in 0..d.len() {
            rows.push(vec![num(*tp), num(d.time(k)), num(d.values[k])]);
        }
    }
    run.csv("delta_signal.csv", &["t_p", "t", "delta"], rows)?;
    let mut rows = Vec::new();
    for (tp, col) in map.tp_values.iter().zip(&map.columns) {
        let positive = col.positive();
        if let Ok(peaks) = find_peaks(&positive, PEAK_THRESHOLD) {
            for p in peaks.peaks {
                rows.push(vec![num(*tp), num(p.omega), num(p.height), num(p.width)]);
            }
        }
    }
    run.csv("peaks.csv", &["t_p", "omega", "height", "width"], rows)
}

fn write_time_domain(
    run: &mut Run,
    name: &str,
    tps: &[f64],
    traces: &[TimeSeries<C64>],
) -> Result<()> {
    let mut rows = Vec::new();
    for (tp, s) in tps.iter().zip(traces) {
        for k in 0..s.len() {
            let v = s.values[k];
            rows.push(vec![num(*tp), num(s.time(k)), num(v.re), num(v.im)]);
        }
    }
    run.csv(name, &["t_p", "t", "chi_re", "chi_im"], rows)
}

fn pump_probe(cfg: &ResolvedConfig, run: &mut Run) -> Result<()> {
    let (psi0, field) = run.timed("vacuum", |_| initial_state(cfg, &cfg.chain))?;
    let setup = scan_setup(cfg, run);
    let map = run.timed("scan", |_| {
        pump_probe_scan(
            &psi0,
            &cfg.chain,
            &cfg.protocol,
            &cfg.pulse,
            &cfg.tp_list,
            &cfg.extraction,
            &setup,
        )
    })?;
    run.timed("write", |run| {
        write_map(run, &map)?;
        let demod = match cfg.pulse.shape {
            PulseShape::SineGaussian => Some(cfg.pulse.carrier_omega),
            PulseShape::Gaussian => None,
        };
        let traces = map
            .columns
            .iter()
            .map(|c| chi_time_domain(c, demod))
            .collect::<Result<Vec<_>>>()?;
        write_time_domain(run, "chi_time.csv", &map.tp_values, &traces)
    })?;
    run.derived.insert("initial_h_l".into(), json!(field));
    run.derived
        .insert("tau_damp".into(), json!(cfg.extraction.effective_tau()));
    run.derived.insert(
        "frequency_resolution".into(),
        json!(map.columns[0].resolution),
    );
    run.derived
        .insert("peak_threshold".into(), json!(PEAK_THRESHOLD));
    Ok(())
}

/// Relative L2 distance `‖a − b‖/‖b‖` over the samples of `a` in
/// `[from, to]` that also lie on the grid of `b`.
pub fn relative_l2(a: &TimeSeries<C64>, b: &TimeSeries<C64>, from: f64, to: f64) -> f64 {
    let (mut diff, mut norm) = (0.0, 0.0);
    for k in 0..a.len() {
        let t = a.time(k);
        if t < from - 1e-9 || t > to + 1e-9 {
            continue;
        }
        let j = (t - b.start) / b.step;
        if j < -1e-6 || (j - j.round()).abs() > 1e-6 || j.round() as usize >= b.len() {
            continue;
        }
        let v = b.values[j.round() as usize];
        diff += (a.values[k] - v).norm_sqr();
        norm += v.norm_sqr();
    }
    if norm == 0.0 {
        f64::NAN
    } else {
        (diff / norm).sqrt()
    }
}

fn oracle_check(cfg: &ResolvedConfig, run: &mut Run) -> Result<()> {
    let (psi0, field) = run.timed("vacuum", |_| initial_state(cfg, &cfg.chain))?;
    let setup = scan_setup(cfg, run);
    let map = run.timed("scan", |_| {
        pump_probe_scan(
            &psi0,
            &cfg.chain,
            &cfg.protocol,
            &cfg.pulse,
            &cfg.tp_list,
            &cfg.extraction,
            &setup,
        )
    })?;
    let t_end = cfg.tp_list.last().copied().unwrap_or(0.0) + cfg.extraction.record_length + 1.0;
    let t_end = (t_end / cfg.grid.dt_sample).ceil() * cfg.grid.dt_sample;
    let grid = EvolutionGrid::new(0.0, t_end, cfg.grid.dt_step, cfg.grid.dt_sample)?;
    let execution = run.execution;
    let exact = run.timed("oracle", |_| {
        map_indexed(execution, cfg.tp_list.len(), |i| {
            commutator_response_oracle(
                &psi0,
                &cfg.chain,
                &cfg.protocol,
                cfg.pulse.probe_site,
                &grid,
                cfg.tp_list[i],
            )
        })
    })?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (i, &tp) in cfg.tp_list.iter().enumerate() {
        let col = &map.columns[i];
        let rec = chi_time_domain(col, None)?;
        let projected = project_onto_band(&exact[i], col, &cfg.extraction)?;
        let window_end = tp + cfg.extraction.record_length;
        let error = relative_l2(&rec, &projected, col.t_first, window_end);
        let peak = rec.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let precursor = (0..rec.len())
            .filter(|&k| rec.time(k) < tp - 1.0)
            .map(|k| rec.values[k].norm())
            .fold(0.0, f64::max);
        summary.push(json!({
            "t_p": tp,
            "relative_l2_error": error,
            "precursor_ratio": precursor / peak,
        }));
        for k in 0..rec.len() {
            let t = rec.time(k);
            if t < col.t_first - 1e-9 || t > window_end + 1e-9 {
                continue;
            }
            let j = ((t - exact[i].start) / exact[i].step).round() as usize;
            let p = projected.values[k];
            rows.push(vec![
                num(tp),
                num(t),
                num(rec.values[k].re),
                num(rec.values[k].im),
                num(exact[i].values[j].re),
                num(p.re),
                num(p.im),
            ]);
        }
    }
    run.csv(
        "oracle_check.csv",
        &[
            "t_p",
            "t",
            "extracted_re",
            "extracted_im",
            "exact",
            "projected_re",
            "projected_im",
        ],
        rows,
    )?;
    run.json("oracle_summary.json", &summary)?;
    write_map(run, &map)?;

    if cfg.tp_list.len() >= 8 {
        // Cut through the strongest line of the first column.
        let first = map.columns[0].positive();
        if let Some(omega0) = find_peaks(&first, PEAK_THRESHOLD)?
            .dominant()
            .map(|p| p.omega)
        {
            match tp_spectrum(&map, omega0) {
                Ok(s) => {
                    run.csv(
                        "tp_spectrum.csv",
                        &["nu", "im_squared"],
                        s.omega
                            .iter()
                            .zip(&s.values)
                            .map(|(w, v)| vec![num(*w), num(v.re)]),
                    )?;
                    run.derived
                        .insert("tp_spectrum_omega0".into(), json!(omega0));
                }
                Err(e @ Error::InvalidConfig { .. }) => {
                    run.derived
                        .insert("tp_spectrum_skipped".into(), json!(e.to_string()));
                }
                Err(e) => return Err(e),
            }
        }
    }
    run.derived.insert("initial_h_l".into(), json!(field));
    run.derived
        .insert("tau_damp".into(), json!(cfg.extraction.effective_tau()));
    Ok(())
}

/// Description of the configuration document, printed by `isingpp schema`.
pub fn schema() -> Value {
    let num = |d: &str| json!({"type": "number", "description": d});
    json!({
        "title": "ExperimentConfig",
        "type": "object",
        "additionalProperties": false,
        "properties": {
            "experiment": {"enum": ExperimentKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>(),
                "description": "pipeline; the CLI positional argument takes precedence"},
            "chain": {"type": "object", "required": ["n_sites", "coupling_J", "transverse_ht", "boundary"],
                "properties": {
                    "n_sites": {"type": "integer", "minimum": 2, "maximum": crate::lattice::MAX_SITES},
                    "coupling_J": num("J > 0"),
                    "transverse_ht": num("h_t >= 0"),
                    "boundary": {"enum": ["periodic", "open"]}
                }},
            "protocol": {"type": "object", "required": ["kind"],
                "description": "required for ground_state and equilibrium_quench; otherwise defaults to an exponential ramp to 0.4",
                "properties": {
                    "kind": {"enum": ["constant", "sudden_quench", "exponential_ramp"]},
                    "h_l_pre": num("field before t0 (the constant field for kind = constant); default 0"),
                    "h_l_max": num("field reached at t0; default 0"),
                    "t0": num("pump time; default 0"),
                    "tau_ramp": num("ramp relaxation time; default 35.13")
                }},
            "pulse": {"type": "object", "required": ["shape", "amplitude_A", "width_sigma"],
                "description": "probe template; center_tp is replaced by each t_p. Defaults: gaussian A = 1e-3, sigma = 0.2 (selective: sine_gaussian, sigma = 1.5, omega = 2.2)",
                "properties": {
                    "shape": {"enum": ["gaussian", "sine_gaussian"]},
                    "amplitude_A": num("A > 0"),
                    "center_tp": num("ignored in scans; default 0"),
                    "width_sigma": num("sigma > 0"),
                    "carrier_omega": num("sine_gaussian carrier; default 0"),
                    "probe_site": {"type": "integer", "description": "default 0"}
                }},
            "tp_list": {"type": "array", "items": {"type": "number"},
                "description": "strictly increasing probe times on the dt_step grid; required for pump_probe, selective and oracle_check"},
            "grid": {"type": "object", "required": ["t_start", "t_end"],
                "description": "default t in [0, 60] with dt_step = 0.01, dt_sample = 0.05",
                "properties": {
                    "t_start": num("start time"),
                    "t_end": num("end time (equilibrium_quench)"),
                    "dt_step": num("integrator step; default 0.01"),
                    "dt_sample": num("sampling interval, a multiple of dt_step; default 0.05")
                }},
            "extraction": {"type": "object",
                "properties": {
                    "tau_damp": {"type": ["number", "null"], "description": "damping time; null picks record_length / ln(1e6)"},
                    "zero_pad_factor": {"type": "integer", "minimum": 1, "description": "default 4"},
                    "band_floor": num("relative |phi(omega)| below which bins are invalid; default 1e-3"),
                    "taper_decades": num("raised-cosine taper width above band_floor, in decades; default 2"),
                    "damping_origin": {"enum": ["probe_center", "absolute"], "description": "default probe_center"},
                    "record_length": num("record after t_p; default 50")
                }},
            "vacuum_choice": {
                "description": "true_vacuum | false_vacuum, or {kind, hamiltonian: pre_pump | post_pump}; default true_vacuum of the pre-pump Hamiltonian",
                "oneOf": [
                    {"enum": ["true_vacuum", "false_vacuum"]},
                    {"type": "object", "required": ["kind"], "properties": {
                        "kind": {"enum": ["true_vacuum", "false_vacuum"]},
                        "hamiltonian": {"enum": ["pre_pump", "post_pump"]}
                    }}
                ]},
            "output_dir": {"type": "string", "description": "default ./out; the CLI --out flag takes precedence"}
        }
    })
}

/// Reads a configuration file.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    ExperimentConfig::from_json_with_overrides(&text, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::ProtocolKind;

    fn chain(n: usize, ht: f64) -> SpinChainConfig {
        SpinChainConfig::periodic(n, ht).unwrap()
    }

    #[test]
    fn missing_tp_list_is_named() {
        let cfg = ExperimentConfig {
            experiment: Some(ExperimentKind::PumpProbe),
            chain: Some(chain(4, 0.25)),
            ..Default::default()
        };
        match cfg.resolve() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "tp_list"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn defaults_are_reported() {
        let cfg = ExperimentConfig {
            experiment: Some(ExperimentKind::PumpProbe),
            chain: Some(chain(4, 0.25)),
            tp_list: Some(vec![15.0, 16.0]),
            ..Default::default()
        };
        let (resolved, defaulted) = cfg.resolve().unwrap();
        assert_eq!(
            defaulted,
            [
                "protocol",
                "pulse",
                "grid",
                "extraction",
                "vacuum_choice",
                "output_dir"
            ]
        );
        assert_eq!(resolved.protocol.kind, ProtocolKind::ExponentialRamp);
        assert_eq!(resolved.pulse.width_sigma, 0.2);
    }

    #[test]
    fn protocol_required_for_ground_state() {
        let cfg = ExperimentConfig {
            experiment: Some(ExperimentKind::GroundState),
            chain: Some(chain(4, 0.0)),
            ..Default::default()
        };
        assert!(
            matches!(cfg.resolve(), Err(Error::InvalidConfig { field, .. }) if field == "protocol")
        );
    }

    #[test]
    fn selective_rejects_gaussian() {
        let cfg = ExperimentConfig {
            experiment: Some(ExperimentKind::Selective),
            chain: Some(chain(4, 0.25)),
            pulse: Some(ProbePulse::broadband(0.0)),
            tp_list: Some(vec![15.0]),
            ..Default::default()
        };
        assert!(
            matches!(cfg.resolve(), Err(Error::InvalidConfig { field, .. }) if field == "pulse.shape")
        );
    }

    #[test]
    fn vacuum_choice_forms() {
        let a: VacuumChoice = serde_json::from_str("\"false_vacuum\"").unwrap();
        assert_eq!(a.kind, VacuumKind::FalseVacuum);
        assert_eq!(a.hamiltonian, VacuumHamiltonian::PrePump);
        let b: VacuumChoice =
            serde_json::from_str(r#"{"kind": "true_vacuum", "hamiltonian": "post_pump"}"#).unwrap();
        assert_eq!(b.hamiltonian, VacuumHamiltonian::PostPump);
        let back: VacuumChoice = serde_json::from_value(serde_json::to_value(b).unwrap()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn overrides() {
        let mut doc = json!({"chain": {"n_sites": 4}});
        apply_override(&mut doc, "chain.n_sites=6").unwrap();
        apply_override(&mut doc, "protocol.kind=constant").unwrap();
        apply_override(&mut doc, "tp_list=[15, 20]").unwrap();
        assert_eq!(doc["chain"]["n_sites"], 6);
        assert_eq!(doc["protocol"]["kind"], "constant");
        assert_eq!(doc["tp_list"], json!([15, 20]));
        assert!(apply_override(&mut doc, "novalue").is_err());
        assert!(apply_override(&mut doc, "chain.n_sites.x=1").is_err());
        assert!(apply_override(&mut doc, "a..b=1").is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"chian": {}}"#).is_err());
    }

    #[test]
    fn uniform_probe_times() {
        let t = uniform_tp_list(15.0, 50.0, 36);
        assert_eq!(t.len(), 36);
        assert_eq!(t[0], 15.0);
        assert!((t[35] - 50.0).abs() < 1e-12);
        assert!((t[1] - 16.0).abs() < 1e-12);
    }

    /// Every key of a fully resolved configuration is described by the schema.
    #[test]
    fn schema_covers_resolved_config() {
        fn check(value: &Value, schema: &Value, path: &str) {
            let Some(map) = value.as_object() else { return };
            let props = &schema["properties"];
            for (k, v) in map {
                let sub = &props[k];
                assert!(!sub.is_null(), "schema lacks `{path}{k}`");
                if sub.get("properties").is_some() {
                    check(v, sub, &format!("{path}{k}."));
                }
            }
        }
        let cfg = ExperimentConfig {
            experiment: Some(ExperimentKind::OracleCheck),
            chain: Some(chain(4, 0.25)),
            tp_list: Some(vec![15.0]),
            ..Default::default()
        };
        let (resolved, _) = cfg.resolve().unwrap();
        let mut value = serde_json::to_value(&resolved).unwrap();
        // The struct form of vacuum_choice is covered by the oneOf branch.
        value.as_object_mut().unwrap().remove("vacuum_choice");
        check(&value, &schema(), "");
    }

    #[test]
    fn ground_state_writes_classical_energy() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            experiment: Some(ExperimentKind::GroundState),
            chain: Some(chain(4, 0.0)),
            protocol: Some(DriveProtocol::constant(0.2)),
            output_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        let manifest = run_experiment(&cfg, &RunOptions { threads: Some(1) }).unwrap();
        assert!(manifest.outputs.contains(&"eigenvalues.csv".to_string()));
        let text = fs::read_to_string(dir.path().join("eigenvalues.csv")).unwrap();
        let first = text.lines().nth(1).unwrap();
        let e: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
        assert!((e + 4.8).abs() < 1e-10, "{e}");
        let m: Manifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(m.config.chain.n_sites, 4);
    }
}
