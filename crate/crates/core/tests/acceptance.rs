//! End-to-end acceptance checks, one per criterion, each printing a single
//! PASS/FAIL line.
//!
//! Criteria listed in `EXPECTED_FAILURES` are known not to hold for this
//! model at the stated tolerance. The run succeeds when every outcome matches
//! that list, so a regression and an unexpected pass both fail it.
//!
//! `cargo test --test acceptance -- 5 6` runs a subset.

use std::f64::consts::PI;
use std::fs;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use isingpp_core::dense::{eigen_of, DenseEigen};
use isingpp_core::drive::{chi_coupling, ramp_field, DriveProtocol, ProbePulse};
use isingpp_core::fourier::forward;
use isingpp_core::lattice::{build_mfim, l2_norm, Boundary, SpinChainConfig, StateVector, C64};
use isingpp_core::measure::second_moment;
use isingpp_core::propagator::{
    evolve_observables, evolve_with_final, EvolutionGrid, Observable, TimeSeries,
};
use isingpp_core::response::{
    chi_time_domain, commutator_response_oracle, project_onto_band, pump_probe_scan, tp_spectrum,
    ResponseExtractionParams, ResponseMap, ScanSetup,
};
use isingpp_core::runner::{
    relative_l2, run_experiment, ExperimentConfig, ExperimentKind, RunOptions,
};
use isingpp_core::spectral::{
    bloch_harmonics, find_peaks, find_peaks_in, lehmann_spectrum, meson_threshold, summed_power,
    PeakList,
};
use isingpp_core::vacuum::{prepare_vacuum, prepare_vacuum_aligned, VacuumKind};

const EXPECTED_FAILURES: &[u32] = &[1, 2, 3, 4, 7, 9];

const H_T: f64 = 0.25;
const QUENCH_FIELDS: [f64; 4] = [0.1, 0.2, 0.3, 0.4];
const QUENCH_T: f64 = 50.0;
/// Lehmann lines lighter than this are not counted as observable gaps.
const LINE_WEIGHT: f64 = 1e-4;
const PEAK_THRESHOLD: f64 = 0.05;

struct Outcome {
    pass: bool,
    details: String,
}

fn outcome(pass: bool, details: String) -> Outcome {
    Outcome { pass, details }
}

fn chain(n: usize) -> SpinChainConfig {
    SpinChainConfig::periodic(n, H_T).unwrap()
}

fn tp_range(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step).round() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

/// `(E_n − E_ref, |<n|Z_0|ref>|²)` for every eigenstate.
fn lines_from(eig: &DenseEigen, reference: usize) -> Vec<(f64, f64)> {
    let z_ref: Vec<C64> = eig.vectors[reference]
        .iter()
        .enumerate()
        .map(|(b, a)| if b & 1 == 0 { *a } else { -*a })
        .collect();
    eig.values
        .iter()
        .zip(&eig.vectors)
        .map(|(e, v)| {
            let m: C64 = v.iter().zip(&z_ref).map(|(a, b)| a.conj() * b).sum();
            (e - eig.values[reference], m.norm_sqr())
        })
        .collect()
}

fn nearest_line(lines: &[(f64, f64)], omega: f64) -> f64 {
    lines
        .iter()
        .filter(|l| l.1 >= LINE_WEIGHT)
        .map(|l| (l.0.abs() - omega).abs())
        .fold(f64::INFINITY, f64::min)
}

fn fmt_list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

/// `⟨Z_i Z_0⟩_c(t)` for all `i` after quenching the classical vacuum of
/// the given kind (relative to `h_l`) into `H(h_t, h_l)`.
fn quench_correlators(n: usize, h_l: f64, kind: VacuumKind) -> Vec<TimeSeries> {
    let config = chain(n);
    let psi0 = prepare_vacuum_aligned(&config.with_transverse(0.0), 0.0, kind, h_l).unwrap();
    let observables: Vec<Observable> = (0..n).map(|i| Observable::ConnectedZz(i, 0)).collect();
    let grid = EvolutionGrid::new(0.0, QUENCH_T, 0.01, 0.05).unwrap();
    evolve_observables(
        &psi0,
        &config,
        &DriveProtocol::constant(h_l),
        None,
        &observables,
        &grid,
    )
    .unwrap()
}

/// True-vacuum quenches at N = 12 over `QUENCH_FIELDS`, shared by the first
/// two criteria.
fn true_vacuum_quenches() -> &'static [Vec<TimeSeries>] {
    static CACHE: OnceLock<Vec<Vec<TimeSeries>>> = OnceLock::new();
    CACHE.get_or_init(|| {
        QUENCH_FIELDS
            .iter()
            .map(|&h| quench_correlators(12, h, VacuumKind::TrueVacuum))
            .collect()
    })
}

fn correlator_peaks(series: &[TimeSeries]) -> PeakList {
    let (omega, power) = summed_power(series).unwrap();
    find_peaks_in(&omega, &power, PEAK_THRESHOLD).unwrap()
}

fn criterion_1() -> Outcome {
    let k = (20.0 / 0.05_f64).round() as usize;
    let moments: Vec<f64> = true_vacuum_quenches()
        .iter()
        .map(|c| {
            assert!((c[0].time(k) - 20.0).abs() < 1e-9);
            let row: Vec<f64> = c.iter().map(|s| s.values[k]).collect();
            second_moment(&row, 0, Boundary::Periodic)
        })
        .collect();
    let pass = moments.windows(2).all(|w| w[1] < w[0]);
    outcome(
        pass,
        format!(
            "second moment at t = 20 for h_l = {:?}: {}",
            QUENCH_FIELDS,
            fmt_list(&moments)
        ),
    )
}

fn criterion_2() -> Outcome {
    let bin = 2.0 * PI / QUENCH_T;
    let mut dominant = Vec::new();
    let mut misses = Vec::new();
    for (&h, c) in QUENCH_FIELDS.iter().zip(true_vacuum_quenches()) {
        let peaks = correlator_peaks(c);
        dominant.push(peaks.dominant().unwrap().omega);
        let eig = eigen_of(&build_mfim(&chain(12), h).unwrap()).unwrap();
        let lines = lines_from(&eig, 0);
        for p in &peaks.peaks {
            let d = nearest_line(&lines, p.omega);
            if d > bin {
                misses.push(format!("{:.3}@h_l={h} (off by {d:.3})", p.omega));
            }
        }
    }
    let monotone = dominant.windows(2).all(|w| w[1] > w[0]);
    let pass = monotone && misses.is_empty();
    outcome(
        pass,
        format!(
            "dominant peaks {} ({}); peaks without an E_n - E_0 line within {bin:.3}: {}",
            fmt_list(&dominant),
            if monotone {
                "increasing"
            } else {
                "not increasing"
            },
            if misses.is_empty() {
                "none".to_string()
            } else {
                misses.join(", ")
            }
        ),
    )
}

fn criterion_3() -> Outcome {
    let h = -0.4;
    let config = chain(12);
    let bin = 2.0 * PI / QUENCH_T;
    let c = quench_correlators(12, h, VacuumKind::FalseVacuum);
    let peaks = correlator_peaks(&c);
    let psi0 = StateVector::all_up(12);
    let eig = eigen_of(&build_mfim(&config, h).unwrap()).unwrap();
    let true_lines = lines_from(&eig, 0);
    let threshold = true_lines
        .iter()
        .filter(|l| l.0 > 1e-9 && l.1 >= 1e-3)
        .map(|l| l.0)
        .fold(f64::INFINITY, f64::min);
    let false_ref = (0..eig.dim())
        .max_by(|&a, &b| {
            let fa: C64 = eig.vectors[a]
                .iter()
                .zip(psi0.amplitudes())
                .map(|(x, y)| x.conj() * y)
                .sum();
            let fb: C64 = eig.vectors[b]
                .iter()
                .zip(psi0.amplitudes())
                .map(|(x, y)| x.conj() * y)
                .sum();
            fa.norm_sqr().total_cmp(&fb.norm_sqr())
        })
        .unwrap();
    let false_lines = lines_from(&eig, false_ref);

    let chi = chi_coupling(0.4, H_T).unwrap();
    let fit = bloch_harmonics(&peaks, &chi, threshold);
    let sub: Vec<f64> = peaks
        .frequencies()
        .into_iter()
        .filter(|&w| w < threshold)
        .collect();
    let spaced = !fit.harmonics.is_empty() && fit.unassigned.is_empty();
    let below_band = sub.iter().all(|&w| w < 3.5);
    let unmatched: Vec<f64> = peaks
        .frequencies()
        .into_iter()
        .filter(|&w| nearest_line(&false_lines, w) > bin)
        .collect();
    let ratio_ok = (fit.ratio_to_chi - 1.0).abs() <= 0.3;
    let pass = spaced && below_band && unmatched.is_empty() && ratio_ok;
    outcome(
        pass,
        format!(
            "threshold {threshold:.3}, sub-threshold peaks {}; omega_b {:.3} (omega_b/chi {:.3}), harmonics {:?}, \
             off-comb {}; all below 3.5: {below_band}; peaks without a false-vacuum line: {}",
            fmt_list(&sub),
            fit.omega_b,
            fit.ratio_to_chi,
            fit.harmonics.iter().map(|h| h.n).collect::<Vec<_>>(),
            fmt_list(&fit.unassigned),
            fmt_list(&unmatched)
        ),
    )
}

/// Relative L2 error of the extracted response against the band-projected
/// exact one, per `t_p`.
fn oracle_errors(
    config: &SpinChainConfig,
    protocol: &DriveProtocol,
    psi0: &StateVector,
    amplitude: f64,
    tps: &[f64],
    dt_sample: f64,
) -> Vec<f64> {
    let params = ResponseExtractionParams::default();
    let setup = ScanSetup {
        dt_sample,
        ..ScanSetup::default()
    };
    let pulse = ProbePulse::broadband(0.0).with_amplitude(amplitude);
    let map = pump_probe_scan(psi0, config, protocol, &pulse, tps, &params, &setup).unwrap();
    tps.iter()
        .enumerate()
        .map(|(i, &tp)| {
            let col = &map.columns[i];
            let rec = chi_time_domain(col, None).unwrap();
            let grid =
                EvolutionGrid::new(0.0, tp + params.record_length + 1.0, 0.01, dt_sample).unwrap();
            let exact = commutator_response_oracle(psi0, config, protocol, 0, &grid, tp).unwrap();
            let projected = project_onto_band(&exact, col, &params).unwrap();
            relative_l2(&rec, &projected, col.t_first, tp + params.record_length)
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let config = chain(8);
    let tps = [15.0, 30.0];
    let cases = [
        (
            "constant",
            DriveProtocol::constant(0.4),
            prepare_vacuum(&config, 0.4, VacuumKind::TrueVacuum).unwrap(),
        ),
        (
            "ramp",
            DriveProtocol::default_ramp(0.4),
            prepare_vacuum_aligned(&config, 0.0, VacuumKind::TrueVacuum, 0.4).unwrap(),
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, protocol, psi0) in &cases {
        let full = oracle_errors(&config, protocol, psi0, 1e-3, &tps, 0.01);
        let half = oracle_errors(&config, protocol, psi0, 5e-4, &tps, 0.01);
        let worst = full.iter().copied().fold(0.0, f64::max);
        let ratio = full
            .iter()
            .zip(&half)
            .map(|(a, b)| a / b)
            .fold(f64::INFINITY, f64::min);
        pass &= worst <= 0.01 && ratio >= 1.8;
        parts.push(format!(
            "{name}: error {worst:.2e}, halving ratio {ratio:.2}"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn precursor_ratio(map: &ResponseMap, i: usize) -> f64 {
    let tp = map.tp_values[i];
    let rec = chi_time_domain(&map.columns[i], None).unwrap();
    let global = rec.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let early = (0..rec.len())
        .filter(|&k| rec.time(k) < tp - 1.0)
        .map(|k| rec.values[k].norm())
        .fold(0.0, f64::max);
    early / global
}

fn criterion_5() -> Outcome {
    let config = chain(12);
    let protocol = DriveProtocol::default_ramp(-0.4);
    let psi0 = prepare_vacuum_aligned(&config, 0.0, VacuumKind::FalseVacuum, -0.4).unwrap();
    let tps = [17.12, 42.92];
    let map = pump_probe_scan(
        &psi0,
        &config,
        &protocol,
        &ProbePulse::broadband(0.0),
        &tps,
        &ResponseExtractionParams::default(),
        &ScanSetup::default(),
    )
    .unwrap();
    let ratios: Vec<f64> = (0..tps.len()).map(|i| precursor_ratio(&map, i)).collect();
    let pass = ratios.iter().all(|&r| r <= 1e-3);
    outcome(
        pass,
        format!(
            "max |chi| before t_p - 1 relative to global max: {:.2e} at t_p = {}, {:.2e} at t_p = {}",
            ratios[0], tps[0], ratios[1], tps[1]
        ),)
}

fn criterion_6() -> Outcome {
    let config = chain(8);
    let psi0 = prepare_vacuum(&config, 0.4, VacuumKind::TrueVacuum).unwrap();
    let tps = tp_range(15.0, 50.0, 5.0);
    let map = pump_probe_scan(
        &psi0,
        &config,
        &DriveProtocol::constant(0.4),
        &ProbePulse::broadband(0.0),
        &tps,
        &ResponseExtractionParams::default(),
        &ScanSetup::default(),
    )
    .unwrap();
    let first = chi_time_domain(&map.columns[0], None).unwrap();
    let scale = first.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for col in &map.columns[1..] {
        let rec = chi_time_domain(col, None).unwrap();
        assert_eq!(rec.len(), first.len());
        for (a, b) in rec.values.iter().zip(&first.values) {
            worst = worst.max((a - b).norm() / scale);
        }
    }
    outcome(
        worst <= 1e-6,
        format!(
            "max deviation between columns in t - t_p over {} probe times: {worst:.2e}",
            tps.len()
        ),
    )
}

fn band_fraction(spec: &isingpp_core::fourier::Spectrum, lo: f64, hi: f64) -> f64 {
    let power = spec.power();
    let total: f64 = power.iter().sum();
    let inside: f64 = spec
        .omega
        .iter()
        .zip(&power)
        .filter(|(w, _)| **w >= lo && **w <= hi)
        .map(|(_, p)| p)
        .sum();
    inside / total
}

fn criterion_7() -> Outcome {
    let config = chain(12);
    let psi0 = prepare_vacuum_aligned(&config, 0.0, VacuumKind::TrueVacuum, 0.4).unwrap();
    let tps = tp_range(15.0, 50.0, 1.0);
    let map = pump_probe_scan(
        &psi0,
        &config,
        &DriveProtocol::default_ramp(0.4),
        &ProbePulse::broadband(0.0),
        &tps,
        &ResponseExtractionParams::default(),
        &ScanSetup::default(),
    )
    .unwrap();
    let positive: Vec<_> = map.columns.iter().map(|c| c.positive()).collect();
    let peaks: Vec<PeakList> = positive
        .iter()
        .map(|s| find_peaks(s, PEAK_THRESHOLD).unwrap())
        .collect();
    let dominant: Vec<f64> = peaks.iter().map(|p| p.dominant().unwrap().omega).collect();
    let fraction = band_fraction(&positive[0], 4.0, 5.0);
    // Peak positions are known to one padded bin.
    let bin = positive[0].bin_width();
    let rises: Vec<String> = dominant
        .windows(2)
        .zip(&tps[1..])
        .filter(|(w, _)| w[1] > w[0] + bin)
        .map(|(w, tp)| format!("{:.2}->{:.2}@{tp}", w[0], w[1]))
        .collect();
    let below = |p: &PeakList| p.peaks.iter().filter(|q| q.omega < 4.0).count();
    let (first_below, last_below) = (below(&peaks[0]), below(peaks.last().unwrap()));
    let pass = fraction > 0.5 && rises.is_empty() && last_below > first_below;
    outcome(
        pass,
        format!(
            "weight in [4, 5] at t_p = 15: {fraction:.3}; dominant peak {:.3} -> {:.3}, rises beyond one bin: {}; \
             peaks below 4: {first_below} first, {last_below} last",
            dominant[0],
            dominant.last().unwrap(),
            if rises.is_empty() { "none".to_string() } else { rises.join(" ") }
        ),
    )
}

fn criterion_8() -> Outcome {
    let config = chain(8);
    let protocol = DriveProtocol::default_ramp(-0.4);
    let psi0 = prepare_vacuum_aligned(&config, 0.0, VacuumKind::FalseVacuum, -0.4).unwrap();
    let pulse = ProbePulse::selective(0.0);
    let tps = tp_range(15.0, 50.0, 1.0);
    let map = pump_probe_scan(
        &psi0,
        &config,
        &protocol,
        &pulse,
        &tps,
        &ResponseExtractionParams::default(),
        &ScanSetup::default(),
    )
    .unwrap();
    let (w0, half) = (pulse.carrier_omega, 4.0 / pulse.width_sigma);

    let mut worst_leak: f64 = 0.0;
    let mut single = 0;
    let mut bloch = Vec::new();
    for (i, &tp) in tps.iter().enumerate() {
        let d = &map.deltas[i];
        let x: Vec<C64> = d.values.iter().map(|&v| C64::new(v, 0.0)).collect();
        let (omega, f) = forward(&x, d.step, d.start, tp, 4);
        let (mut inside, mut outside) = (0.0, 0.0);
        for (w, v) in omega.iter().zip(&f) {
            if (w.abs() - w0).abs() <= half {
                inside += v.norm_sqr();
            } else {
                outside += v.norm_sqr();
            }
        }
        worst_leak = worst_leak.max(outside / inside);

        // Bins with full taper weight inside the carrier band.
        let col = map.columns[i].positive();
        let trusted: Vec<usize> = (0..col.len())
            .filter(|&j| col.weights[j] >= 1.0 && (col.omega[j] - w0).abs() <= half)
            .collect();
        let omega: Vec<f64> = trusted.iter().map(|&j| col.omega[j]).collect();
        let power: Vec<f64> = trusted.iter().map(|&j| col.values[j].norm_sqr()).collect();
        let peaks = find_peaks_in(&omega, &power, PEAK_THRESHOLD).unwrap();
        let top = peaks.dominant().map_or(0.0, |p| p.height);
        if peaks.peaks.iter().filter(|p| p.height >= 0.5 * top).count() == 1 {
            single += 1;
        }

        let h = ramp_field(tp, &protocol);
        let lines = lehmann_spectrum(&config, h, 0, config.dim()).unwrap();
        let threshold = meson_threshold(&lines, 1e-3).unwrap();
        bloch.push(
            omega
                .iter()
                .zip(&power)
                .filter(|(w, _)| **w < threshold)
                .map(|(_, p)| p)
                .sum::<f64>(),
        );
    }
    let third = tps.len() / 3;
    let early = bloch[..third].iter().sum::<f64>() / third as f64;
    let late = bloch[tps.len() - third..].iter().sum::<f64>() / third as f64;
    let pass = worst_leak <= 0.1 && 2 * single > tps.len() && early > late;
    outcome(
        pass,
        format!(
            "out-of-band/in-band weight of dA <= {worst_leak:.2e}; single dominant peak in {single}/{} line cuts; \
             sub-threshold weight early {early:.3e}, late {late:.3e}",
            tps.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let config = chain(8);
    let protocol = DriveProtocol::default_ramp(-0.4);
    let psi0 = prepare_vacuum_aligned(&config, 0.0, VacuumKind::FalseVacuum, -0.4).unwrap();
    let tps = tp_range(15.0, 50.0, 0.25);
    let map = pump_probe_scan(
        &psi0,
        &config,
        &protocol,
        &ProbePulse::broadband(0.0),
        &tps,
        &ResponseExtractionParams::default(),
        &ScanSetup::default(),
    )
    .unwrap();
    let first = map.columns[0].positive();
    let mesonic = find_peaks(&first, PEAK_THRESHOLD).unwrap();
    let Some(omega0) = mesonic
        .peaks
        .iter()
        .filter(|p| (3.5..=4.5).contains(&p.omega))
        .max_by(|a, b| a.height.total_cmp(&b.height))
        .map(|p| p.omega)
    else {
        return outcome(false, "no peak in [3.5, 4.5] in the first column".into());
    };
    let spec = tp_spectrum(&map, omega0).unwrap().positive();
    let power: Vec<f64> = spec.values.iter().map(|v| v.re).collect();
    let peaks = find_peaks_in(&spec.omega, &power, PEAK_THRESHOLD).unwrap();
    let tolerance = 2.0 * spec.resolution;
    let hit = peaks
        .peaks
        .iter()
        .any(|p| (p.omega - omega0).abs() <= tolerance);

    // Same cut with the phase referenced to absolute time instead of t_p.
    let j = map.columns[0].nearest_bin(omega0).unwrap();
    let column: Vec<C64> = (0..tps.len())
        .map(|i| map.chi(i, j) * C64::from_polar(1.0, map.omega[j] * tps[i]))
        .collect();
    let (nu, f) = forward(&column, 0.25, tps[0], 0.0, 4);
    let abs_power: Vec<f64> = f.iter().map(|v| v.im * v.im).collect();
    let abs_peak = find_peaks_in(&nu, &abs_power, PEAK_THRESHOLD)
        .unwrap()
        .dominant()
        .map(|p| p.omega);
    outcome(
        hit,
        format!(
            "omega0 {omega0:.3}; t_p-spectrum peaks {} (tolerance {tolerance:.3}); \
             with absolute-time phase the dominant peak sits at {:.3}",
            fmt_list(&peaks.frequencies()),
            abs_peak.unwrap_or(f64::NAN)
        ),
    )
}

fn step_error(
    dt: f64,
    reference: &StateVector,
    config: &SpinChainConfig,
    protocol: &DriveProtocol,
    pulse: &ProbePulse,
) -> f64 {
    let psi0 = StateVector::all_up(config.n_sites);
    let grid = EvolutionGrid::new(0.0, 10.0, dt, 0.04).unwrap();
    let (_, psi) = evolve_with_final(&psi0, config, protocol, Some(pulse), &[], &grid).unwrap();
    let diff: Vec<C64> = psi
        .amplitudes()
        .iter()
        .zip(reference.amplitudes())
        .map(|(a, b)| a - b)
        .collect();
    l2_norm(&diff)
}

fn criterion_10() -> Outcome {
    let config = chain(8);
    let mut parts = Vec::new();
    let mut pass = true;

    let ramp = DriveProtocol::default_ramp(0.4);
    let probe = ProbePulse::broadband(20.0);
    let psi0 = prepare_vacuum_aligned(&config, 0.0, VacuumKind::TrueVacuum, 0.4).unwrap();
    let grid = EvolutionGrid::span(60.0).unwrap();
    let norm = evolve_observables(
        &psi0,
        &config,
        &ramp,
        Some(&probe),
        &[Observable::Norm],
        &grid,
    )
    .unwrap();
    let drift = norm[0]
        .values
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    pass &= drift <= 1e-8;
    parts.push(format!("norm drift {drift:.1e}"));

    let energy = evolve_observables(
        &StateVector::all_up(8),
        &config,
        &DriveProtocol::constant(0.4),
        None,
        &[Observable::Energy],
        &grid,
    )
    .unwrap();
    let e0 = energy[0].values[0];
    let e_drift = energy[0]
        .values
        .iter()
        .map(|e| ((e - e0) / e0).abs())
        .fold(0.0, f64::max);
    pass &= e_drift <= 1e-8;
    parts.push(format!("energy drift {e_drift:.1e}"));

    let protocol = DriveProtocol::exponential_ramp(0.4, 2.0, 5.0);
    let pulse = ProbePulse {
        width_sigma: 0.5,
        ..ProbePulse::broadband(5.0).with_amplitude(0.2)
    };
    let psi_start = StateVector::all_up(8);
    let fine = EvolutionGrid::new(0.0, 10.0, 0.0025, 0.04).unwrap();
    let (_, reference) =
        evolve_with_final(&psi_start, &config, &protocol, Some(&pulse), &[], &fine).unwrap();
    let coarse = step_error(0.04, &reference, &config, &protocol, &pulse);
    let finer = step_error(0.02, &reference, &config, &protocol, &pulse);
    let ratio = coarse / finer;
    pass &= ratio >= 3.5;
    parts.push(format!("step-halving error ratio {ratio:.2}"));

    let lines = lehmann_spectrum(&config, 0.4, 0, config.dim()).unwrap();
    let sum: f64 = lines.iter().map(|l| l.weight).sum();
    pass &= (sum - 1.0).abs() <= 1e-9;
    parts.push(format!("sum rule |sum - 1| {:.1e}", (sum - 1.0).abs()));

    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let cfg = ExperimentConfig {
            experiment: Some(ExperimentKind::PumpProbe),
            chain: Some(chain(6)),
            tp_list: Some(vec![15.0, 16.0]),
            output_dir: Some(dir.path().join(run)),
            ..Default::default()
        };
        outputs.push(run_experiment(&cfg, &RunOptions { threads: Some(1) }).unwrap());
    }
    let identical = outputs[0]
        .outputs
        .iter()
        .filter(|name| name.ends_with(".csv"))
        .all(|name| {
            fs::read(dir.path().join("a").join(name)).unwrap()
                == fs::read(dir.path().join("b").join(name)).unwrap()
        });
    pass &= identical;
    parts.push(format!(
        "single-threaded reruns byte-identical: {identical}"
    ));

    outcome(pass, parts.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut surprises = Vec::new();
    for (id, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let should_pass = !EXPECTED_FAILURES.contains(&id);
        println!(
            "[criterion {id}] {}: {} ({:.0} s)",
            match (result.pass, should_pass) {
                (true, _) => "PASS",
                (false, false) => "FAIL (expected)",
                (false, true) => "FAIL",
            },
            result.details,
            start.elapsed().as_secs_f64()
        );
        if result.pass != should_pass {
            surprises.push(id);
        }
    }
    if surprises.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("outcome differs from the expected-failure list for criteria {surprises:?}");
        ExitCode::FAILURE
    }
}
