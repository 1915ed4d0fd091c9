//! Peak detection, the exact Lehmann oracle and Bloch-harmonic assignment.

use serde::{Deserialize, Serialize};

use crate::dense;
use crate::drive::ConfinementModel;
use crate::error::{Error, Result};
use crate::fourier::{centered_spectrum, Spectrum};
use crate::lattice::{build_mfim, SpinChainConfig, StateVector, C64};
use crate::propagator::TimeSeries;
use crate::vacuum::{lowest_eigenpairs, EigenSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub omega: f64,
    pub height: f64,
    /// Full width at half maximum.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakList {
    pub peaks: Vec<Peak>,
    pub detection_threshold: f64,
}

impl PeakList {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// Highest peak.
    pub fn dominant(&self) -> Option<&Peak> {
        self.peaks
            .iter()
            .max_by(|a, b| a.height.total_cmp(&b.height))
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.omega).collect()
    }
}

/// Local maxima of `|values|²` above `threshold_rel · max`, refined by a
/// three-point parabola. Invalid bins count as zero, and a bin next to an
/// invalid one is a band edge rather than a peak.
pub fn find_peaks(spec: &Spectrum, threshold_rel: f64) -> Result<PeakList> {
    let power = spec.power();
    find_peaks_masked(&spec.omega, &power, &spec.valid, threshold_rel)
}

/// As [`find_peaks`] on an explicit non-negative profile.
pub fn find_peaks_in(omega: &[f64], power: &[f64], threshold_rel: f64) -> Result<PeakList> {
    find_peaks_masked(omega, power, &vec![true; power.len()], threshold_rel)
}

fn find_peaks_masked(
    omega: &[f64],
    power: &[f64],
    mask: &[bool],
    threshold_rel: f64,
) -> Result<PeakList> {
    if !(threshold_rel > 0.0 && threshold_rel < 1.0) {
        return Err(Error::config("threshold_rel", "must lie in (0, 1)"));
    }
    let max = power.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::ZeroSpectrum);
    }
    let threshold = threshold_rel * max;
    let dw = if omega.len() > 1 {
        omega[1] - omega[0]
    } else {
        0.0
    };
    let mut peaks = Vec::new();
    for i in 1..power.len().saturating_sub(1) {
        if !(mask[i - 1] && mask[i] && mask[i + 1]) {
            continue;
        }
        let (l, c, r) = (power[i - 1], power[i], power[i + 1]);
        if !(c > l && c >= r && c >= threshold) {
            continue;
        }
        let denom = l - 2.0 * c + r;
        let shift = if denom < 0.0 {
            (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let height = c - 0.25 * (l - r) * shift;
        peaks.push(Peak {
            omega: omega[i] + shift * dw,
            height,
            width: half_max_width(power, i, height, dw),
        });
    }
    Ok(PeakList {
        peaks,
        detection_threshold: threshold,
    })
}

fn half_max_width(power: &[f64], i: usize, height: f64, dw: f64) -> f64 {
    let half = 0.5 * height;
    let mut left = i as f64;
    let mut j = i;
    while j > 0 {
        if power[j - 1] < half {
            left = (j - 1) as f64 + (half - power[j - 1]) / (power[j] - power[j - 1]);
            break;
        }
        j -= 1;
        left = j as f64;
    }
    let mut right = i as f64;
    let mut j = i;
    while j + 1 < power.len() {
        if power[j + 1] < half {
            right = j as f64 + (power[j] - half) / (power[j] - power[j + 1]);
            break;
        }
        j += 1;
        right = j as f64;
    }
    (right - left) * dw
}

/// `Σ_i |F[C_i − mean]|²` over traces on a common grid, unpadded, on the
/// non-negative frequencies. Returns `(omega, power)`.
pub fn summed_power(series: &[TimeSeries]) -> Result<(Vec<f64>, Vec<f64>)> {
    let Some(first) = series.first() else {
        return Err(Error::TooFewSamples {
            found: 0,
            needed: 1,
        });
    };
    let mut omega = Vec::new();
    let mut power: Vec<f64> = Vec::new();
    for s in series {
        if !s.same_grid(first) {
            return Err(Error::GridMismatch(format!(
                "`{}` and `{}` differ",
                s.label, first.label
            )));
        }
        let spec = centered_spectrum(s, 1)?.positive();
        if power.is_empty() {
            omega = spec.omega.clone();
            power = vec![0.0; spec.len()];
        }
        for (p, v) in power.iter_mut().zip(&spec.values) {
            *p += v.norm_sqr();
        }
    }
    Ok((omega, power))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LehmannLine {
    /// `E_n − E_ref`.
    pub gap: f64,
    /// `|<n|Z_site|ref>|²`.
    pub weight: f64,
}

/// Which eigenstate the spectrum is measured from.
#[derive(Debug, Clone, PartialEq)]
pub enum LehmannReference {
    Ground,
    /// Eigenstate with the largest overlap with this state.
    ClosestTo(StateVector),
}

fn eigenpairs(config: &SpinChainConfig, h_l: f64, n_states: usize) -> Result<EigenSolution> {
    let h = build_mfim(config, h_l)?;
    if n_states == 0 || n_states > config.dim() {
        return Err(Error::config(
            "n_states",
            format!("must lie in [1, {}]", config.dim()),
        ));
    }
    lowest_eigenpairs(&h, n_states)
}

/// Lines `(E_n − E_0, |<n|Z_site|0>|²)` over the `n_states` lowest
/// eigenstates of `H(h_l)`.
pub fn lehmann_spectrum(
    config: &SpinChainConfig,
    h_l: f64,
    probe_site: usize,
    n_states: usize,
) -> Result<Vec<LehmannLine>> {
    lehmann_spectrum_from(config, h_l, probe_site, n_states, &LehmannReference::Ground)
}

pub fn lehmann_spectrum_from(
    config: &SpinChainConfig,
    h_l: f64,
    probe_site: usize,
    n_states: usize,
    reference: &LehmannReference,
) -> Result<Vec<LehmannLine>> {
    if probe_site >= config.n_sites {
        return Err(Error::SiteOutOfRange {
            index: probe_site,
            n_sites: config.n_sites,
        });
    }
    let sol = eigenpairs(config, h_l, n_states)?;
    let r = match reference {
        LehmannReference::Ground => 0,
        LehmannReference::ClosestTo(state) => sol
            .eigenvectors
            .iter()
            .map(|v| v.fidelity(state))
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .unwrap_or(0),
    };
    let mask = 1usize << probe_site;
    let reference_vec = sol.eigenvectors[r].amplitudes();
    let z_ref: Vec<C64> = reference_vec
        .iter()
        .enumerate()
        .map(|(b, a)| if b & mask == 0 { *a } else { -*a })
        .collect();
    Ok(sol
        .eigenvalues
        .iter()
        .zip(&sol.eigenvectors)
        .map(|(e, v)| LehmannLine {
            gap: e - sol.eigenvalues[r],
            weight: v
                .amplitudes()
                .iter()
                .zip(&z_ref)
                .map(|(a, b)| a.conj() * b)
                .sum::<C64>()
                .norm_sqr(),
        })
        .collect())
}

/// Lowest positive gap carrying at least `min_weight`.
pub fn meson_threshold(lines: &[LehmannLine], min_weight: f64) -> Option<f64> {
    lines
        .iter()
        .filter(|l| l.gap > 1e-9 && l.weight >= min_weight)
        .map(|l| l.gap)
        .fold(None, |acc: Option<f64>, g| {
            Some(acc.map_or(g, |a| a.min(g)))
        })
}

/// Frequencies `|E_n − E_m|` between eigenstates that `psi` populates with
/// probability above `min_population`, for the dynamics of a quench into
/// `H(h_l)`.
pub fn quench_frequencies(
    config: &SpinChainConfig,
    h_l: f64,
    psi: &StateVector,
    min_population: f64,
) -> Result<Vec<f64>> {
    let h = build_mfim(config, h_l)?;
    let eig = dense::eigen_of(&h)?;
    let populated: Vec<f64> = eig
        .values
        .iter()
        .zip(&eig.vectors)
        .filter(|(_, v)| {
            let overlap: C64 = v
                .iter()
                .zip(psi.amplitudes())
                .map(|(a, b)| a.conj() * b)
                .sum();
            overlap.norm_sqr() >= min_population
        })
        .map(|(e, _)| *e)
        .collect();
    let mut out = Vec::new();
    for (i, a) in populated.iter().enumerate() {
        for b in &populated[i + 1..] {
            out.push((a - b).abs());
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub n: u32,
    pub omega: f64,
    /// `omega − n·ω_b`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochAssignment {
    pub omega_b: f64,
    pub harmonics: Vec<Harmonic>,
    pub chi_reference: f64,
    pub meson_threshold: f64,
    /// `ω_b / χ`; `NaN` when either is zero.
    pub ratio_to_chi: f64,
    /// Sub-threshold peaks that fit no harmonic of `ω_b`.
    pub unassigned: Vec<f64>,
}

impl BlochAssignment {
    pub fn is_empty(&self) -> bool {
        self.harmonics.is_empty()
    }
}

const HARMONIC_TOLERANCE: f64 = 0.15;
const MAX_HARMONIC: u32 = 16;

struct Fit {
    omega_b: f64,
    assigned: Vec<(u32, f64)>,
    unassigned: Vec<f64>,
    cost: f64,
}

/// Assigns `n` to each peak for spacing `omega_b` and refines the spacing by
/// least squares. Peaks farther than the tolerance from every harmonic, or
/// colliding on an `n` already taken by a closer peak, are left out.
fn fit_spacing(freqs: &[f64], omega_b: f64) -> Fit {
    let mut best_for_n: Vec<(u32, f64, f64)> = Vec::new();
    let mut unassigned = Vec::new();
    for &f in freqs {
        let n = (f / omega_b).round().max(1.0) as u32;
        let r = (f - n as f64 * omega_b).abs();
        if r > HARMONIC_TOLERANCE * omega_b || n > MAX_HARMONIC {
            unassigned.push(f);
            continue;
        }
        match best_for_n.iter_mut().find(|e| e.0 == n) {
            Some(e) if e.2 <= r => unassigned.push(f),
            Some(e) => {
                unassigned.push(e.1);
                *e = (n, f, r);
            }
            None => best_for_n.push((n, f, r)),
        }
    }
    let num: f64 = best_for_n.iter().map(|e| e.0 as f64 * e.1).sum();
    let den: f64 = best_for_n.iter().map(|e| (e.0 as f64).powi(2)).sum();
    let refined = if den > 0.0 { num / den } else { omega_b };
    let mut assigned: Vec<(u32, f64)> = best_for_n.iter().map(|e| (e.0, e.1)).collect();
    assigned.sort_by_key(|e| e.0);
    let cost = assigned
        .iter()
        .map(|&(n, f)| ((f - n as f64 * refined) / refined).powi(2))
        .sum();
    unassigned.sort_by(f64::total_cmp);
    Fit {
        omega_b: refined,
        assigned,
        unassigned,
        cost,
    }
}

/// Common spacing `ω_b` of the peaks below `meson_threshold`.
///
/// Candidate spacings are `f/n` for every sub-threshold peak `f`. The largest
/// candidate that explains all peaks within `0.15·ω_b` wins; otherwise the
/// candidate explaining the most peaks, with the smallest residual cost.
pub fn bloch_harmonics(
    peaks: &PeakList,
    chi_ref: &ConfinementModel,
    meson_threshold: f64,
) -> BlochAssignment {
    let freqs: Vec<f64> = peaks
        .peaks
        .iter()
        .map(|p| p.omega)
        .filter(|&w| w > 0.0 && w < meson_threshold)
        .collect();
    let empty = BlochAssignment {
        omega_b: 0.0,
        harmonics: Vec::new(),
        chi_reference: chi_ref.chi,
        meson_threshold,
        ratio_to_chi: f64::NAN,
        unassigned: Vec::new(),
    };
    if freqs.is_empty() {
        return empty;
    }
    let mut candidates: Vec<f64> = freqs
        .iter()
        .flat_map(|&f| (1..=MAX_HARMONIC).map(move |n| f / n as f64))
        .collect();
    candidates.sort_by(|a, b| b.total_cmp(a));

    let mut best: Option<Fit> = None;
    for c in candidates {
        let fit = fit_spacing(&freqs, c);
        let valid = fit
            .assigned
            .iter()
            .all(|&(n, f)| (f - n as f64 * fit.omega_b).abs() <= HARMONIC_TOLERANCE * fit.omega_b);
        if !valid {
            continue;
        }
        if fit.unassigned.is_empty() {
            best = Some(fit);
            break;
        }
        let better = match &best {
            None => true,
            Some(b) => {
                fit.assigned.len() > b.assigned.len()
                    || (fit.assigned.len() == b.assigned.len() && fit.cost < b.cost)
            }
        };
        if better {
            best = Some(fit);
        }
    }
    let Some(fit) = best else {
        return BlochAssignment {
            unassigned: freqs,
            ..empty
        };
    };
    BlochAssignment {
        omega_b: fit.omega_b,
        harmonics: fit
            .assigned
            .iter()
            .map(|&(n, f)| Harmonic {
                n,
                omega: f,
                residual: f - n as f64 * fit.omega_b,
            })
            .collect(),
        chi_reference: chi_ref.chi,
        meson_threshold,
        ratio_to_chi: if chi_ref.chi > 0.0 {
            fit.omega_b / chi_ref.chi
        } else {
            f64::NAN
        },
        unassigned: fit.unassigned,
    }
}
