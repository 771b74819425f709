use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::UnitCellSpec;

/// Grid points on `[0, pi/a]` for the coarse gap and band-edge scans.
const SCAN_POINTS: usize = 257;
/// Golden-section termination in units of `k a`.
const GOLDEN_TOL: f64 = 1e-10;

/// Bloch Hamiltonian with intercell corner elements `tau e^{-ika}` (upper
/// right) and `tau e^{ika}` (lower left).
pub fn bloch_hamiltonian(cell: &UnitCellSpec, k: f64) -> DMatrix<Complex64> {
    let j = cell.j();
    let mut h = DMatrix::from_element(j, j, Complex64::new(0.0, 0.0));
    for (i, &t) in cell.intracell().iter().enumerate() {
        h[(i, i + 1)] = Complex64::new(t, 0.0);
        h[(i + 1, i)] = Complex64::new(t, 0.0);
    }
    let phase = Complex64::from_polar(cell.intercell(), -k * cell.lattice_constant());
    h[(0, j - 1)] += phase;
    h[(j - 1, 0)] += phase.conj();
    h
}

/// Real Bloch Hamiltonian at a time-reversal-invariant momentum; `pi_point`
/// selects `k = pi/a` over `k = 0`.
pub(crate) fn trim_hamiltonian(cell: &UnitCellSpec, pi_point: bool) -> DMatrix<f64> {
    let j = cell.j();
    let mut h = DMatrix::zeros(j, j);
    for (i, &t) in cell.intracell().iter().enumerate() {
        h[(i, i + 1)] = t;
        h[(i + 1, i)] = t;
    }
    let tau = if pi_point { -cell.intercell() } else { cell.intercell() };
    h[(0, j - 1)] += tau;
    h[(j - 1, 0)] += tau;
    h
}

/// Sorted band energies at wavevector `k`.
pub fn bloch_energies(cell: &UnitCellSpec, k: f64) -> Vec<f64> {
    let e = SymmetricEigen::new(bloch_hamiltonian(cell, k)).eigenvalues;
    let mut v: Vec<f64> = e.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Sorted energies and eigenvectors (columns) of a TRIM Hamiltonian.
pub(crate) fn trim_eigen(cell: &UnitCellSpec, pi_point: bool) -> (Vec<f64>, DMatrix<f64>) {
    let eig = trim_hamiltonian(cell, pi_point).symmetric_eigen();
    let j = cell.j();
    let mut order: Vec<usize> = (0..j).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(j, j);
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// `det(beta - H(k))` for real `beta`; real for Hermitian `H(k)`.
pub fn band_determinant(cell: &UnitCellSpec, beta: f64, k: f64) -> f64 {
    let h = bloch_hamiltonian(cell, k);
    let j = cell.j();
    let m = DMatrix::from_fn(j, j, |r, c| {
        let d = if r == c { Complex64::new(beta, 0.0) } else { Complex64::new(0.0, 0.0) };
        d - h[(r, c)]
    });
    m.determinant().re
}

#[derive(Clone, Debug, Serialize)]
pub struct BandStructure {
    /// Wavevectors in `[-pi/a, pi/a]`.
    pub k: Vec<f64>,
    /// `bands[n][i]` is band `n` (ascending) at `k[i]`.
    pub bands: Vec<Vec<f64>>,
}

impl BandStructure {
    /// Smallest adjacent-band separation on the grid for each gap.
    pub fn grid_gaps(&self) -> Vec<f64> {
        (0..self.bands.len() - 1)
            .map(|n| {
                self.bands[n + 1]
                    .iter()
                    .zip(&self.bands[n])
                    .map(|(u, l)| u - l)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

/// Bands on a symmetric grid of `n_k` points that includes both TRIMs.
///
/// An even `n_k` is raised by one so that `k = 0` lies on the grid.
pub fn band_structure(cell: &UnitCellSpec, n_k: usize) -> Result<BandStructure> {
    if n_k < 16 {
        return Err(Error::validation(format!("band structure needs n_k >= 16, got {n_k}")));
    }
    let n_k = if n_k % 2 == 0 { n_k + 1 } else { n_k };
    let a = cell.lattice_constant();
    let k: Vec<f64> = (0..n_k).map(|i| (-PI + 2.0 * PI * i as f64 / (n_k - 1) as f64) / a).collect();
    let rows: Vec<Vec<f64>> = k.par_iter().map(|&kk| bloch_energies(cell, kk)).collect();
    let bands = (0..cell.j()).map(|n| rows.iter().map(|r| r[n]).collect()).collect();
    Ok(BandStructure { k, bands })
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > GOLDEN_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Minimize `f` over `[0, pi]`: coarse scan, then golden section around the
/// best grid point. Returns `(argmin, min)`.
fn scan_min(f: impl Fn(f64) -> f64 + Copy) -> (f64, f64) {
    let grid: Vec<f64> = (0..SCAN_POINTS).map(|i| PI * i as f64 / (SCAN_POINTS - 1) as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let (i, _) = vals.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(SCAN_POINTS - 1)];
    let (x, v) = golden_min(f, lo, hi);
    [(grid[i], vals[i]), (x, v), (0.0, vals[0]), (PI, vals[SCAN_POINTS - 1])]
        .into_iter()
        .fold((0.0, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NumericGap {
    /// 1-based index of the lower band.
    pub lower_band: usize,
    /// `min_k [beta_{n+1}(k) - beta_n(k)]`.
    pub size: f64,
    /// Location of the minimum, in `[0, pi/a]`.
    pub k_min: f64,
}

/// Direct gaps between adjacent bands, refined by golden section.
pub fn numeric_gaps(cell: &UnitCellSpec) -> Vec<NumericGap> {
    let a = cell.lattice_constant();
    (0..cell.j() - 1)
        .map(|n| {
            let f = |x: f64| {
                let e = bloch_energies(cell, x / a);
                e[n + 1] - e[n]
            };
            let (x, v) = scan_min(f);
            NumericGap { lower_band: n + 1, size: v.max(0.0), k_min: x / a }
        })
        .collect()
}

/// `(min, max)` of every band over the Brillouin zone.
pub fn band_edges(cell: &UnitCellSpec) -> Vec<(f64, f64)> {
    let a = cell.lattice_constant();
    (0..cell.j())
        .map(|n| {
            let (_, lo) = scan_min(|x| bloch_energies(cell, x / a)[n]);
            let (_, neg_hi) = scan_min(|x| -bloch_energies(cell, x / a)[n]);
            (lo, -neg_hi)
        })
        .collect()
}

/// Gap above band `n` (0-based) at a TRIM, signed by `(-1)^(number of odd
/// states in bands 0..=n)`. The odd count is read off the trace of the mirror
/// operator over the lower subspace, which does not depend on how degenerate
/// states below the gap are mixed, so the sign only flips when gap `n` itself
/// closes and reopens. Returns zero when the gap is degenerate at the TRIM.
fn signed_trim_gap(cell: &UnitCellSpec, n: usize, pi_point: bool) -> f64 {
    let (vals, vecs) = trim_eigen(cell, pi_point);
    let j = cell.j();
    let trace: f64 = (0..=n).map(|b| (0..j).map(|i| vecs[(i, b)] * vecs[(j - 1 - i, b)]).sum::<f64>()).sum();
    let even_minus_odd = trace.round();
    if (trace - even_minus_odd).abs() > 1e-6 {
        // a degenerate pair straddles the gap
        return 0.0;
    }
    let odd = ((n + 1) as f64 - even_minus_odd) / 2.0;
    let sign = if (odd as i64) % 2 == 0 { 1.0 } else { -1.0 };
    sign * (vals[n + 1] - vals[n])
}

/// Intercell coupling in `[lo, hi]` at which gap `lower_band` (1-based)
/// closes, found by bisection on the parity-signed TRIM gap.
pub fn locate_tau_closure(cell: &UnitCellSpec, lower_band: usize, lo: f64, hi: f64) -> Result<f64> {
    if lower_band == 0 || lower_band >= cell.j() {
        return Err(Error::validation(format!("gap index {lower_band} out of range")));
    }
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::validation(format!("invalid bracket [{lo}, {hi}]")));
    }
    let n = lower_band - 1;
    let f = |tau: f64, pi_point: bool| -> Result<f64> { Ok(signed_trim_gap(&cell.with_intercell(tau)?, n, pi_point)) };
    for pi_point in [false, true] {
        let (mut a, mut b) = (lo, hi);
        let (fa, fb) = (f(a, pi_point)?, f(b, pi_point)?);
        if fa == 0.0 {
            return Ok(a);
        }
        if fb == 0.0 {
            return Ok(b);
        }
        if fa.signum() == fb.signum() {
            continue;
        }
        let sa = fa.signum();
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (b - a) <= 1e-15 * m {
                break;
            }
            let v = f(m, pi_point)?;
            if v == 0.0 {
                return Ok(m);
            }
            if v.signum() == sa {
                a = m;
            } else {
                b = m;
            }
        }
        return Ok(0.5 * (a + b));
    }
    Err(Error::validation(format!("gap {lower_band} does not close for tau in [{lo}, {hi}]")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::super::mirror_parity;

    fn j3(t: f64, tau: f64) -> UnitCellSpec {
        UnitCellSpec::new(vec![t, t], tau).unwrap()
    }

    #[test]
    fn j3_zone_centre() {
        let e = bloch_energies(&j3(0.5, 1.0), 0.0);
        let s3 = 3f64.sqrt();
        let want = [-1.0, (1.0 - s3) / 2.0, (1.0 + s3) / 2.0];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
        // The odd-parity state sits at +tau at the zone boundary.
        let (vals, vecs) = trim_eigen(&j3(0.5, 1.0), true);
        let odd = (0..3).find(|&c| {
            let v: Vec<f64> = vecs.column(c).iter().copied().collect();
            mirror_parity(&v) == super::super::Parity::Odd
        });
        assert!((vals[odd.unwrap()] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hermitian_and_symmetric_bands() {
        let cell = UnitCellSpec::new(vec![0.3, 0.7, 0.7, 0.3], 0.9).unwrap();
        for k in [-2.0, -0.3, 0.0, 1.1, PI] {
            let h = bloch_hamiltonian(&cell, k);
            assert_eq!(h, h.adjoint());
            let (a, b) = (bloch_energies(&cell, k), bloch_energies(&cell, -k));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_includes_trims() {
        let bs = band_structure(&j3(0.5, 1.0), 64).unwrap();
        assert_eq!(bs.k.len(), 65);
        assert!(bs.k.contains(&0.0));
        assert_eq!(bs.k[0], -PI);
        assert_eq!(*bs.k.last().unwrap(), PI);
        assert!(band_structure(&j3(0.5, 1.0), 8).is_err());
    }

    #[test]
    fn determinant_is_linear_in_cos_k() {
        let cell = UnitCellSpec::new(vec![0.4, 0.9, 0.4], 1.3).unwrap();
        let beta = 0.37;
        let d0 = band_determinant(&cell, beta, 0.0);
        let dp = band_determinant(&cell, beta, PI);
        for k in [0.3f64, 1.0, 2.5] {
            let want = 0.5 * (d0 + dp) + 0.5 * (d0 - dp) * k.cos();
            assert!((band_determinant(&cell, beta, k) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn j3_closure_by_bisection() {
        let tau = locate_tau_closure(&j3(0.5, 1.0), 1, 0.1, 2.0).unwrap();
        assert!((tau - 0.5).abs() < 1e-12, "{tau}");
    }

    #[test]
    fn gap_closes_at_transition() {
        let g = numeric_gaps(&j3(0.5, 0.5));
        assert!(g[0].size < 1e-9 && g[1].size < 1e-9);
    }
}
