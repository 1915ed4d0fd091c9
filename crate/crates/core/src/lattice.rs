//! Spin-chain lattice, Pauli-string operators and the mixed-field Ising
//! Hamiltonian.
//!
//! Basis convention: computational basis, bit `b = 0` is spin up (`Z = +1`),
//! site 0 is the least significant bit of the basis index.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const MAX_SITES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinChainConfig {
    pub n_sites: usize,
    #[serde(rename = "coupling_J")]
    pub coupling_j: f64,
    pub transverse_ht: f64,
    pub boundary: Boundary,
}

impl SpinChainConfig {
    pub fn new(
        n_sites: usize,
        coupling_j: f64,
        transverse_ht: f64,
        boundary: Boundary,
    ) -> Result<Self> {
        let config = SpinChainConfig {
            n_sites,
            coupling_j,
            transverse_ht,
            boundary,
        };
        config.validate()?;
        Ok(config)
    }

    /// Periodic chain with `J = 1`.
    pub fn periodic(n_sites: usize, transverse_ht: f64) -> Result<Self> {
        Self::new(n_sites, 1.0, transverse_ht, Boundary::Periodic)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_SITES).contains(&self.n_sites) {
            return Err(Error::config(
                "n_sites",
                format!("must lie in [2, {MAX_SITES}], got {}", self.n_sites),
            ));
        }
        if !(self.coupling_j > 0.0 && self.coupling_j.is_finite()) {
            return Err(Error::config("coupling_J", "must be positive"));
        }
        if !(self.transverse_ht >= 0.0 && self.transverse_ht.is_finite()) {
            return Err(Error::config("transverse_ht", "must be non-negative"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn with_transverse(&self, transverse_ht: f64) -> Self {
        SpinChainConfig {
            transverse_ht,
            ..self.clone()
        }
    }

    /// Nearest-neighbour bonds `(i, i+1)`. A periodic chain of two sites
    /// carries the bond twice.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n_sites;
        match self.boundary {
            Boundary::Periodic => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            Boundary::Open => (0..n - 1).map(|i| (i, i + 1)).collect(),
        }
    }
}

/// `Z` eigenvalue of `site` in basis state `index`.
#[inline]
pub fn spin(index: usize, site: usize) -> f64 {
    if (index >> site) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Anything that can act on a state vector.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y = A x`; `y` is overwritten.
    fn apply_into(&self, x: &[C64], y: &mut [C64]);
}

/// Row-compressed sparse operator on the `2^n` dimensional chain space.
/// Columns within a row are stored in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n_sites: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<C64>,
    hermitian: bool,
}

impl SparseOperator {
    /// Builds from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(
        n_sites: usize,
        mut triplets: Vec<(usize, usize, C64)>,
        hermitian: bool,
    ) -> Result<Self> {
        let dim = 1usize << n_sites;
        for &(r, c, _) in &triplets {
            if r >= dim || c >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.max(c) + 1,
                });
            }
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            cols.push(c);
            values.push(v);
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let op = SparseOperator {
            n_sites,
            row_ptr,
            cols,
            values,
            hermitian,
        };
        if hermitian && !op.is_exactly_hermitian() {
            return Err(Error::NotHermitian);
        }
        Ok(op)
    }

    pub fn identity(n_sites: usize) -> Self {
        Self::from_real_diagonal(&vec![1.0; 1 << n_sites]).expect("power-of-two length")
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let dim = diag.len();
        if !dim.is_power_of_two() {
            return Err(Error::DimensionMismatch {
                expected: dim.next_power_of_two(),
                found: dim,
            });
        }
        Ok(SparseOperator {
            n_sites: dim.trailing_zeros() as usize,
            row_ptr: (0..=dim).collect(),
            cols: (0..dim).collect(),
            values: diag.iter().map(|&d| C64::new(d, 0.0)).collect(),
            hermitian: true,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Exact (bitwise) comparison of every entry with its conjugate transpose.
    pub fn is_exactly_hermitian(&self) -> bool {
        (0..self.dim()).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v.conj()))
    }

    pub fn max_entry_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// `Σ c_k A_k` over operators on the same chain.
    pub fn linear_combination(terms: &[(C64, &SparseOperator)]) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::config("terms", "empty linear combination"));
        };
        let n_sites = first.n_sites;
        let mut triplets = Vec::new();
        let mut hermitian = true;
        for &(coef, op) in terms {
            if op.n_sites != n_sites {
                return Err(Error::DimensionMismatch {
                    expected: 1 << n_sites,
                    found: op.dim(),
                });
            }
            hermitian &= op.hermitian && coef.im == 0.0;
            for r in 0..op.dim() {
                triplets.extend(op.row(r).map(|(c, v)| (r, c, coef * v)));
            }
        }
        let mut op = Self::from_triplets(n_sites, triplets, false)?;
        op.hermitian = hermitian && op.is_exactly_hermitian();
        Ok(op)
    }

    /// `op · psi`, not renormalized.
    pub fn apply(&self, psi: &StateVector) -> Result<Vec<C64>> {
        self.apply_slice(psi.amplitudes())
    }

    pub fn apply_slice(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// `<x|A|x>`.
    pub fn expectation(&self, x: &[C64]) -> Result<C64> {
        let ax = self.apply_slice(x)?;
        Ok(x.iter().zip(&ax).map(|(a, b)| a.conj() * b).sum())
    }

    /// Dense row-major copy; small dimensions only.
    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let dim = self.dim();
        let mut m = vec![vec![C64::new(0.0, 0.0); dim]; dim];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        m
    }
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        1 << self.n_sites
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            *out = acc;
        }
    }
}

/// Tensor product of Paulis on `sites`, identity elsewhere.
pub fn pauli_string(sites: &[usize], axes: &[Pauli], n_sites: usize) -> Result<SparseOperator> {
    if sites.len() != axes.len() {
        return Err(Error::config(
            "axes",
            format!("{} axes for {} sites", axes.len(), sites.len()),
        ));
    }
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::config(
            "n_sites",
            format!("must lie in [1, {MAX_SITES}]"),
        ));
    }
    let mut flip = 0usize;
    let mut seen = 0usize;
    for &s in sites {
        if s >= n_sites {
            return Err(Error::SiteOutOfRange { index: s, n_sites });
        }
        if seen & (1 << s) != 0 {
            return Err(Error::DuplicateSite(s));
        }
        seen |= 1 << s;
    }
    for (&s, &a) in sites.iter().zip(axes) {
        if a != Pauli::Z {
            flip |= 1 << s;
        }
    }
    let dim = 1usize << n_sites;
    // P|c> = phase(c) |c ^ flip>, so row r = c ^ flip holds phase(c) at column c.
    let mut cols = Vec::with_capacity(dim);
    let mut values = Vec::with_capacity(dim);
    for r in 0..dim {
        let c = r ^ flip;
        let mut phase = C64::new(1.0, 0.0);
        for (&s, &a) in sites.iter().zip(axes) {
            let down = (c >> s) & 1 == 1;
            phase *= match (a, down) {
                (Pauli::X, _) => C64::new(1.0, 0.0),
                (Pauli::Z, false) => C64::new(1.0, 0.0),
                (Pauli::Z, true) => C64::new(-1.0, 0.0),
                // Y|up> = i|down>, Y|down> = -i|up>
                (Pauli::Y, false) => C64::new(0.0, 1.0),
                (Pauli::Y, true) => C64::new(0.0, -1.0),
            };
        }
        cols.push(c);
        values.push(phase);
    }
    Ok(SparseOperator {
        n_sites,
        row_ptr: (0..=dim).collect(),
        cols,
        values,
        hermitian: true,
    })
}

/// Diagonal of `-J Σ_bonds Z_i Z_j` in the computational basis.
pub fn bond_diagonal(config: &SpinChainConfig) -> Vec<f64> {
    let bonds = config.bonds();
    (0..config.dim())
        .map(|b| {
            -config.coupling_j
                * bonds
                    .iter()
                    .map(|&(i, j)| spin(b, i) * spin(b, j))
                    .sum::<f64>()
        })
        .collect()
}

/// Diagonal of `Σ_i Z_i`.
pub fn magnetization_diagonal(n_sites: usize) -> Vec<f64> {
    (0..1usize << n_sites)
        .map(|b| n_sites as f64 - 2.0 * b.count_ones() as f64)
        .collect()
}

/// `H = -J Σ_i (Z_i Z_{i+1} + h_t X_i + h_l Z_i)`.
pub fn build_mfim(config: &SpinChainConfig, h_l: f64) -> Result<SparseOperator> {
    config.validate()?;
    let n = config.n_sites;
    let dim = config.dim();
    let zz = bond_diagonal(config);
    let mag = magnetization_diagonal(n);
    let off = -config.coupling_j * config.transverse_ht;

    let mut row_ptr = Vec::with_capacity(dim + 1);
    let per_row = if off != 0.0 { n + 1 } else { 1 };
    let mut cols = Vec::with_capacity(dim * per_row);
    let mut values = Vec::with_capacity(dim * per_row);
    row_ptr.push(0);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(n + 1);
    for b in 0..dim {
        entries.clear();
        entries.push((b, zz[b] - config.coupling_j * h_l * mag[b]));
        if off != 0.0 {
            entries.extend((0..n).map(|i| (b ^ (1 << i), off)));
        }
        entries.sort_by_key(|e| e.0);
        for &(c, v) in &entries {
            cols.push(c);
            values.push(C64::new(v, 0.0));
        }
        row_ptr.push(cols.len());
    }
    Ok(SparseOperator {
        n_sites: n,
        row_ptr,
        cols,
        values,
        hermitian: true,
    })
}

/// One-site cyclic translation `T|s_0 s_1 ... s_{N-1}> = |s_{N-1} s_0 ... s_{N-2}>`.
pub fn translation_operator(n_sites: usize) -> SparseOperator {
    let dim = 1usize << n_sites;
    let mask = dim - 1;
    let triplets = (0..dim)
        .map(|c| {
            let r = ((c << 1) | (c >> (n_sites - 1))) & mask;
            (r, c, C64::new(1.0, 0.0))
        })
        .collect();
    SparseOperator::from_triplets(n_sites, triplets, false).expect("permutation")
}

/// Normalized state on the `2^n` dimensional chain space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amplitudes: Vec<C64>,
    n_sites: usize,
}

pub const NORM_TOLERANCE: f64 = 1e-10;

impl StateVector {
    pub fn new(amplitudes: Vec<C64>, n_sites: usize) -> Result<Self> {
        if amplitudes.len() != 1 << n_sites {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_sites,
                found: amplitudes.len(),
            });
        }
        let norm = l2_norm(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(StateVector {
            amplitudes,
            n_sites,
        })
    }

    /// Rescales to unit norm.
    pub fn normalized(mut amplitudes: Vec<C64>, n_sites: usize) -> Result<Self> {
        if amplitudes.len() != 1 << n_sites {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_sites,
                found: amplitudes.len(),
            });
        }
        let norm = l2_norm(&amplitudes);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(StateVector {
            amplitudes,
            n_sites,
        })
    }

    pub(crate) fn from_raw(amplitudes: Vec<C64>, n_sites: usize) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << n_sites);
        StateVector {
            amplitudes,
            n_sites,
        }
    }

    pub fn basis_state(n_sites: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_sites;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index + 1,
            });
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(StateVector {
            amplitudes,
            n_sites,
        })
    }

    pub fn all_up(n_sites: usize) -> Self {
        Self::basis_state(n_sites, 0).expect("index 0 exists")
    }

    pub fn all_down(n_sites: usize) -> Self {
        Self::basis_state(n_sites, (1 << n_sites) - 1).expect("last index exists")
    }

    /// Up, down, up, ... starting with site 0 up.
    pub fn neel(n_sites: usize) -> Self {
        let index = (0..n_sites)
            .filter(|i| i % 2 == 1)
            .fold(0, |acc, i| acc | (1 << i));
        Self::basis_state(n_sites, index).expect("index in range")
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amplitudes)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn l2_norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
