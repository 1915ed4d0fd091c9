//! Low-lying eigenpairs and magnetized vacuum states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{Error, Result};
use crate::lattice::{
    build_mfim, inner, l2_norm, magnetization_diagonal, LinearOperator, SparseOperator,
    SpinChainConfig, StateVector, C64,
};

#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<StateVector>,
    /// `‖H v − λ v‖` per pair.
    pub residuals: Vec<f64>,
}

impl EigenSolution {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    pub tolerance: f64,
    pub method: EigenMethod,
    /// `Auto` uses the dense solver up to this dimension.
    pub dense_threshold: usize,
    pub max_krylov: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tolerance: 1e-10,
            method: EigenMethod::Auto,
            dense_threshold: 4096,
            max_krylov: 200,
            max_restarts: 50,
            seed: 0x5eed_1517,
        }
    }
}

/// The `k` lowest eigenpairs of a hermitian operator.
pub fn lowest_eigenpairs(h: &SparseOperator, k: usize) -> Result<EigenSolution> {
    lowest_eigenpairs_with(h, k, &EigenOptions::default())
}

pub fn lowest_eigenpairs_with(
    h: &SparseOperator,
    k: usize,
    options: &EigenOptions,
) -> Result<EigenSolution> {
    if !h.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    let dim = h.dim();
    if k == 0 || k > dim {
        return Err(Error::config(
            "k",
            format!("must lie in [1, {dim}], got {k}"),
        ));
    }
    let use_dense = match options.method {
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => false,
        EigenMethod::Auto => dim <= options.dense_threshold,
    };
    let (values, vectors) = if use_dense {
        let eig = dense::eigen_of(h)?;
        (eig.values[..k].to_vec(), eig.vectors[..k].to_vec())
    } else {
        lanczos_lowest(h, k, options)?
    };
    finish(h, values, vectors, options.tolerance.max(1e-8))
}

fn finish(
    h: &impl LinearOperator,
    values: Vec<f64>,
    vectors: Vec<Vec<C64>>,
    bound: f64,
) -> Result<EigenSolution> {
    let n_sites = h.dim().trailing_zeros() as usize;
    let mut residuals = Vec::with_capacity(values.len());
    let mut hv = vec![C64::new(0.0, 0.0); h.dim()];
    for (lambda, v) in values.iter().zip(&vectors) {
        h.apply_into(v, &mut hv);
        let r = hv
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b * lambda).norm_sqr())
            .sum::<f64>()
            .sqrt();
        residuals.push(r);
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    if worst > bound {
        return Err(Error::NoConvergence {
            residual: worst,
            tolerance: bound,
        });
    }
    Ok(EigenSolution {
        eigenvalues: values,
        eigenvectors: vectors
            .into_iter()
            .map(|v| StateVector::from_raw(v, n_sites))
            .collect(),
        residuals,
    })
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// Two passes of classical Gram-Schmidt against `basis`.
fn orthogonalize(v: &mut [C64], basis: &[Vec<C64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = inner(b, v);
            axpy(v, -c, b);
        }
    }
}

fn normalize(v: &mut [C64]) -> f64 {
    let n = l2_norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<C64> {
    (0..dim)
        .map(|_| C64::new(rng.gen::<f64>() - 0.5, 0.0))
        .collect()
}

struct LanczosRun {
    ritz_values: Vec<f64>,
    ritz_vectors: Vec<Vec<C64>>,
    estimates: Vec<f64>,
}

/// One Lanczos pass with full reorthogonalization against the run's basis
/// and the `locked` vectors. Returns the `want` lowest Ritz pairs.
fn lanczos_pass(
    h: &impl LinearOperator,
    start: Vec<C64>,
    locked: &[Vec<C64>],
    want: usize,
    options: &EigenOptions,
    rng: &mut ChaCha8Rng,
) -> Result<LanczosRun> {
    let dim = h.dim();
    let room = dim - locked.len();
    let m_max = options.max_krylov.min(room).max(1);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m_max);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();

    let mut v = start;
    orthogonalize(&mut v, locked);
    if normalize(&mut v) < 1e-12 {
        v = random_vector(rng, dim);
        orthogonalize(&mut v, locked);
        normalize(&mut v);
    }
    let mut w = vec![C64::new(0.0, 0.0); dim];
    loop {
        h.apply_into(&v, &mut w);
        let a = inner(&v, &w).re;
        basis.push(v);
        alpha.push(a);
        let j = basis.len();
        orthogonalize(&mut w, locked);
        orthogonalize(&mut w, &basis);
        let mut b = l2_norm(&w);

        let exhausted = j == m_max;
        let check = exhausted || j.is_multiple_of(5) || b < 1e-12 * (1.0 + a.abs());
        if check && j >= want {
            let (vals, vecs) = tridiagonal_eigen(&alpha, &beta)?;
            let estimates: Vec<f64> = (0..want).map(|i| (b * vecs[i][j - 1]).abs()).collect();
            let done = estimates.iter().all(|&e| e <= options.tolerance * 0.1);
            if done || exhausted {
                let ritz_vectors = (0..want)
                    .map(|i| {
                        let mut x = vec![C64::new(0.0, 0.0); dim];
                        for (q, &s) in basis.iter().zip(&vecs[i]) {
                            axpy(&mut x, C64::new(s, 0.0), q);
                        }
                        normalize(&mut x);
                        x
                    })
                    .collect();
                return Ok(LanczosRun {
                    ritz_values: vals[..want].to_vec(),
                    ritz_vectors,
                    estimates,
                });
            }
        }
        if b < 1e-12 * (1.0 + a.abs()) {
            // Invariant subspace: continue with a fresh direction.
            let mut fresh = random_vector(rng, dim);
            orthogonalize(&mut fresh, locked);
            orthogonalize(&mut fresh, &basis);
            if normalize(&mut fresh) < 1e-10 {
                let (vals, vecs) = tridiagonal_eigen(&alpha, &beta)?;
                let take = want.min(vals.len());
                let ritz_vectors = (0..take)
                    .map(|i| {
                        let mut x = vec![C64::new(0.0, 0.0); dim];
                        for (q, &s) in basis.iter().zip(&vecs[i]) {
                            axpy(&mut x, C64::new(s, 0.0), q);
                        }
                        normalize(&mut x);
                        x
                    })
                    .collect();
                return Ok(LanczosRun {
                    ritz_values: vals[..take].to_vec(),
                    ritz_vectors,
                    estimates: vec![0.0; take],
                });
            }
            w = fresh;
            b = 0.0;
            beta.push(b);
            v = std::mem::replace(&mut w, vec![C64::new(0.0, 0.0); dim]);
            continue;
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        v = std::mem::replace(&mut w, vec![C64::new(0.0, 0.0); dim]);
    }
}

/// Eigenpairs of the symmetric tridiagonal matrix with diagonal `alpha`
/// and off-diagonal `beta`. Eigenvectors are returned as rows.
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = alpha.len();
    let eig = dense::real_symmetric_eigen(m, |i, j| {
        if i == j {
            alpha[i]
        } else if i.abs_diff(j) == 1 {
            beta[i.min(j)]
        } else {
            0.0
        }
    })?;
    let vecs = eig
        .vectors
        .iter()
        .map(|v| v.iter().map(|z| z.re).collect())
        .collect();
    Ok((eig.values, vecs))
}

/// Lanczos with locking of converged pairs and explicit restarts. A final
/// deflated pass checks that no lower eigenvalue (e.g. a missed degenerate
/// partner) remains outside the locked set.
fn lanczos_lowest(
    h: &impl LinearOperator,
    k: usize,
    options: &EigenOptions,
) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let dim = h.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut locked_vals: Vec<f64> = Vec::new();
    let mut locked: Vec<Vec<C64>> = Vec::new();
    let fresh_start = |rng: &mut ChaCha8Rng| {
        let mut v = random_vector(rng, dim);
        v.iter_mut().for_each(|x| *x *= 1e-2);
        v[0] += C64::new(1.0, 0.0);
        v
    };
    let mut start = fresh_start(&mut rng);
    let mut worst = f64::INFINITY;
    let mut verified = false;
    for _ in 0..=options.max_restarts {
        if locked.len() == dim {
            verified = true;
            break;
        }
        let want = (k - locked.len().min(k)).max(1).min(dim - locked.len());
        let run = lanczos_pass(h, start, &locked, want, options, &mut rng)?;
        let mut next_start = None;
        let mut any_new = false;
        for i in 0..run.ritz_values.len() {
            if run.estimates[i] <= options.tolerance * 0.1 {
                let lambda = run.ritz_values[i];
                let top = locked_vals
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                if locked.len() >= k && lambda >= top - options.tolerance {
                    continue;
                }
                locked_vals.push(lambda);
                locked.push(run.ritz_vectors[i].clone());
                any_new = true;
            } else {
                worst = run.estimates[i];
                next_start = Some(run.ritz_vectors[i].clone());
                break;
            }
        }
        if locked.len() >= k {
            if !any_new && next_start.is_none() {
                verified = true;
                break;
            }
            // Keep the k lowest and verify with a fresh deflated pass.
            let mut order: Vec<usize> = (0..locked.len()).collect();
            order.sort_by(|&a, &b| locked_vals[a].total_cmp(&locked_vals[b]));
            order.truncate(k);
            locked_vals = order.iter().map(|&i| locked_vals[i]).collect();
            locked = order.iter().map(|&i| locked[i].clone()).collect();
            start = fresh_start(&mut rng);
            continue;
        }
        start = next_start.unwrap_or_else(|| fresh_start(&mut rng));
    }
    if !verified || locked.len() < k {
        return Err(Error::NoConvergence {
            residual: worst,
            tolerance: options.tolerance,
        });
    }
    let mut order: Vec<usize> = (0..locked.len()).collect();
    order.sort_by(|&a, &b| locked_vals[a].total_cmp(&locked_vals[b]));
    order.truncate(k);
    Ok((
        order.iter().map(|&i| locked_vals[i]).collect(),
        order.iter().map(|&i| locked[i].clone()).collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VacuumKind {
    TrueVacuum,
    FalseVacuum,
}

/// Vacuum of `H(h_l)` whose magnetization is aligned with `h_l` (true) or
/// anti-aligned (false). At `h_l = 0` the true vacuum is positively
/// magnetized.
pub fn prepare_vacuum(
    config: &SpinChainConfig,
    h_l: f64,
    which: VacuumKind,
) -> Result<StateVector> {
    prepare_vacuum_aligned(config, h_l, which, h_l)
}

/// As [`prepare_vacuum`], with the alignment judged against `reference_h_l`
/// (typically the post-pump field) rather than the field of the Hamiltonian.
pub fn prepare_vacuum_aligned(
    config: &SpinChainConfig,
    h_l: f64,
    which: VacuumKind,
    reference_h_l: f64,
) -> Result<StateVector> {
    prepare_vacuum_with(config, h_l, which, reference_h_l, &EigenOptions::default())
}

pub fn prepare_vacuum_with(
    config: &SpinChainConfig,
    h_l: f64,
    which: VacuumKind,
    reference_h_l: f64,
    options: &EigenOptions,
) -> Result<StateVector> {
    if config.transverse_ht >= 1.0 {
        return Err(Error::config(
            "transverse_ht",
            "vacuum preparation needs h_t < 1",
        ));
    }
    let n = config.n_sites;
    let threshold = 0.5 * n as f64;
    let aligned = if reference_h_l < 0.0 { -1.0 } else { 1.0 };
    let target = match which {
        VacuumKind::TrueVacuum => aligned,
        VacuumKind::FalseVacuum => -aligned,
    };
    let h = build_mfim(config, h_l)?;
    let mag = magnetization_diagonal(n);
    let m_expect = |v: &[C64]| -> f64 { v.iter().zip(&mag).map(|(a, m)| a.norm_sqr() * m).sum() };
    let m_cross = |u: &[C64], v: &[C64]| -> C64 {
        u.iter()
            .zip(v)
            .zip(&mag)
            .map(|((a, b), m)| a.conj() * b * m)
            .sum()
    };

    let dim = h.dim();
    let mut k = 2.min(dim);
    let mut best = 0.0f64;
    loop {
        let sol = lowest_eigenpairs_with(&h, k, options)?;
        let vecs: Vec<&[C64]> = sol.eigenvectors.iter().map(|v| v.amplitudes()).collect();
        let m0 = m_expect(vecs[0]);
        let m1 = m_expect(vecs[1]);
        let m01 = m_cross(vecs[0], vecs[1]);
        if m0.abs() < threshold && m1.abs() < threshold && m01.norm() >= threshold {
            // Cat-like doublet: diagonalize M in its span.
            let eig = dense::hermitian_eigen(2, |i, j| match (i, j) {
                (0, 0) => C64::new(m0, 0.0),
                (1, 1) => C64::new(m1, 0.0),
                (0, 1) => m01,
                _ => m01.conj(),
            })?;
            let pick = if target > 0.0 { 1 } else { 0 };
            let c = &eig.vectors[pick];
            let amps: Vec<C64> = vecs[0]
                .iter()
                .zip(vecs[1])
                .map(|(a, b)| c[0] * a + c[1] * b)
                .collect();
            let mut state = StateVector::normalized(amps, n)?;
            fix_phase(&mut state);
            let m = m_expect(state.amplitudes());
            if m * target >= threshold {
                return Ok(state);
            }
            best = best.max(m.abs());
        }
        for v in &sol.eigenvectors {
            let m = m_expect(v.amplitudes());
            if m * target >= threshold {
                let mut state = v.clone();
                fix_phase(&mut state);
                return Ok(state);
            }
            best = best.max(m.abs());
        }
        if k == dim {
            return Err(Error::AmbiguousMagnetization {
                magnetization: best,
                threshold,
            });
        }
        k = (2 * k).min(dim);
    }
}

/// Makes the largest-magnitude amplitude real and positive.
fn fix_phase(state: &mut StateVector) {
    let amps = state.amplitudes();
    let Some(big) = amps
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
    else {
        return;
    };
    if big.norm() == 0.0 {
        return;
    }
    let phase = big.conj() / big.norm();
    let n = state.n_sites();
    let rotated = amps.iter().map(|a| a * phase).collect();
    *state = StateVector::from_raw(rotated, n);
}

/// `<psi|H|psi>` for the mixed-field Ising Hamiltonian.
pub fn energy(config: &SpinChainConfig, h_l: f64, psi: &StateVector) -> Result<f64> {
    Ok(build_mfim(config, h_l)?.expectation(psi.amplitudes())?.re)
}
