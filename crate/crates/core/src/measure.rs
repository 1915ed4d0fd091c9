//! Local and two-point `Z` observables.

use crate::error::{Error, Result};
use crate::lattice::{spin, Boundary, StateVector, C64};

fn check_site(i: usize, n_sites: usize) -> Result<()> {
    if i >= n_sites {
        return Err(Error::SiteOutOfRange { index: i, n_sites });
    }
    Ok(())
}

pub(crate) fn z_expectation(amps: &[C64], i: usize) -> f64 {
    let mask = 1usize << i;
    amps.iter()
        .enumerate()
        .map(|(b, a)| {
            if b & mask == 0 {
                a.norm_sqr()
            } else {
                -a.norm_sqr()
            }
        })
        .sum()
}

pub(crate) fn zz_expectation(amps: &[C64], i: usize, j: usize) -> f64 {
    let mask = (1usize << i) ^ (1usize << j);
    amps.iter()
        .enumerate()
        .map(|(b, a)| {
            if (b & mask).count_ones().is_multiple_of(2) {
                a.norm_sqr()
            } else {
                -a.norm_sqr()
            }
        })
        .sum()
}

/// `<Z_i>` for every site in one pass over the amplitudes.
pub(crate) fn all_z(amps: &[C64], n_sites: usize) -> Vec<f64> {
    let mut z = vec![0.0; n_sites];
    for (b, a) in amps.iter().enumerate() {
        let p = a.norm_sqr();
        for (i, zi) in z.iter_mut().enumerate() {
            *zi += p * spin(b, i);
        }
    }
    z
}

pub fn local_z(psi: &StateVector, i: usize) -> Result<f64> {
    check_site(i, psi.n_sites())?;
    Ok(z_expectation(psi.amplitudes(), i))
}

/// `<Z_i Z_j> − <Z_i><Z_j>`; for `i = j` this is `1 − <Z_i>²`.
pub fn connected_zz(psi: &StateVector, i: usize, j: usize) -> Result<f64> {
    check_site(i, psi.n_sites())?;
    check_site(j, psi.n_sites())?;
    Ok(connected_raw(psi.amplitudes(), i, j))
}

pub(crate) fn connected_raw(amps: &[C64], i: usize, j: usize) -> f64 {
    let zi = z_expectation(amps, i);
    if i == j {
        return 1.0 - zi * zi;
    }
    zz_expectation(amps, i, j) - zi * z_expectation(amps, j)
}

/// Row `<Z_i Z_j>_c` for all `i` at fixed `j`.
pub fn connected_row(psi: &StateVector, j: usize) -> Result<Vec<f64>> {
    check_site(j, psi.n_sites())?;
    let amps = psi.amplitudes();
    let z = all_z(amps, psi.n_sites());
    Ok((0..psi.n_sites())
        .map(|i| {
            if i == j {
                1.0 - z[i] * z[i]
            } else {
                zz_expectation(amps, i, j) - z[i] * z[j]
            }
        })
        .collect())
}

/// `Σ_i <Z_i>`.
pub fn total_magnetization(psi: &StateVector) -> f64 {
    let n = psi.n_sites() as f64;
    psi.amplitudes()
        .iter()
        .enumerate()
        .map(|(b, a)| a.norm_sqr() * (n - 2.0 * b.count_ones() as f64))
        .sum()
}

/// Spatial second moment `Σ_i d_i² |C_i| / Σ_i |C_i|` of a correlator row,
/// with `d_i` the distance from `reference` (around the ring when periodic).
/// Zero for an all-zero row.
pub fn second_moment(row: &[f64], reference: usize, boundary: Boundary) -> f64 {
    let n = row.len();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, c) in row.iter().enumerate() {
        let d = i.abs_diff(reference);
        let d = match boundary {
            Boundary::Periodic => d.min(n - d),
            Boundary::Open => d,
        } as f64;
        num += d * d * c.abs();
        den += c.abs();
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
