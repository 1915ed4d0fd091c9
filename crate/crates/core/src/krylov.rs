//! Krylov-subspace action of `exp(−i H dt)` on a vector for hermitian `H`.

use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{Error, Result};
use crate::lattice::{inner, l2_norm, LinearOperator, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KrylovOptions {
    /// Largest Krylov dimension tried before giving up.
    pub max_dim: usize,
    /// Bound on the local error estimate, relative to the input norm.
    pub tolerance: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            max_dim: 30,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovStats {
    pub dim: usize,
    pub error_estimate: f64,
}

/// Scratch buffers reused across steps.
#[derive(Debug, Default)]
pub struct KrylovWorkspace {
    basis: Vec<Vec<C64>>,
    w: Vec<C64>,
}

impl KrylovWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, dim: usize, m: usize) {
        if self.w.len() != dim {
            self.w = vec![C64::new(0.0, 0.0); dim];
            self.basis.clear();
        }
        while self.basis.len() < m {
            self.basis.push(vec![C64::new(0.0, 0.0); dim]);
        }
    }
}

/// `e^{−i T dt} e_1` for the symmetric tridiagonal `T`.
fn small_exponential(alpha: &[f64], beta: &[f64], dt: f64) -> Result<Vec<C64>> {
    let m = alpha.len();
    if m == 1 {
        return Ok(vec![C64::from_polar(1.0, -alpha[0] * dt)]);
    }
    let eig = dense::real_symmetric_eigen(m, |i, j| {
        if i == j {
            alpha[i]
        } else if i.abs_diff(j) == 1 {
            beta[i.min(j)]
        } else {
            0.0
        }
    })?;
    let mut c = vec![C64::new(0.0, 0.0); m];
    for (e, v) in eig.values.iter().zip(&eig.vectors) {
        let coef = C64::from_polar(1.0, -e * dt) * v[0].re;
        for (ci, vi) in c.iter_mut().zip(v) {
            *ci += coef * vi.re;
        }
    }
    Ok(c)
}

/// Overwrites `x` with `exp(−i H dt) x`.
///
/// The Krylov dimension grows until `β_m |[e^{−i T dt} e_1]_m|` drops below
/// the tolerance; a vanishing `β` means the subspace is invariant and the
/// result is exact.
pub fn expm_apply(
    h: &impl LinearOperator,
    x: &mut [C64],
    dt: f64,
    options: &KrylovOptions,
    ws: &mut KrylovWorkspace,
) -> Result<KrylovStats> {
    let dim = h.dim();
    assert_eq!(x.len(), dim, "state dimension");
    let norm = l2_norm(x);
    if norm == 0.0 || dt == 0.0 {
        return Ok(KrylovStats {
            dim: 0,
            error_estimate: 0.0,
        });
    }
    let m_cap = options.max_dim.min(dim).max(1);
    ws.prepare(dim, m_cap);
    ws.basis[0]
        .iter_mut()
        .zip(x.iter())
        .for_each(|(b, xi)| *b = xi / norm);

    let mut alpha = Vec::with_capacity(m_cap);
    let mut beta = Vec::with_capacity(m_cap);
    let mut last_estimate = f64::INFINITY;
    for j in 0..m_cap {
        let (done, rest) = ws.basis.split_at_mut(j + 1);
        let v = &done[j];
        h.apply_into(v, &mut ws.w);
        let a = inner(v, &ws.w).re;
        alpha.push(a);
        ws.w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= a * vi);
        if j > 0 {
            let b_prev: f64 = beta[j - 1];
            ws.w.iter_mut()
                .zip(&done[j - 1])
                .for_each(|(wi, vi)| *wi -= b_prev * vi);
        }
        // One reorthogonalization sweep keeps the short basis orthonormal.
        for q in done.iter() {
            let c = inner(q, &ws.w);
            ws.w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
        }
        let b = l2_norm(&ws.w);
        let c = small_exponential(&alpha, &beta, dt)?;
        let scale = alpha.iter().map(|a| a.abs()).fold(0.0, f64::max)
            + beta.iter().copied().fold(0.0, f64::max);
        let breakdown = b <= 1e-14 * scale.max(1.0);
        let estimate = if breakdown { 0.0 } else { b * c[j].norm() };
        last_estimate = estimate;
        if breakdown || estimate <= options.tolerance || j + 1 == dim {
            x.iter_mut().for_each(|xi| *xi = C64::new(0.0, 0.0));
            for (q, cj) in done.iter().zip(&c) {
                let coef = cj * norm;
                x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += coef * qi);
            }
            return Ok(KrylovStats {
                dim: j + 1,
                error_estimate: estimate,
            });
        }
        if j + 1 < m_cap {
            beta.push(b);
            let next = &mut rest[0];
            next.iter_mut().zip(&ws.w).for_each(|(n, wi)| *n = wi / b);
        }
    }
    Err(Error::KrylovCapExceeded {
        cap: m_cap,
        estimate: last_estimate,
    })
}
