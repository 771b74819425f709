//! Winding numbers, Zak phases and band-resolved Wilson-loop windings.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::UnitCellSpec;
use crate::spectral::{bloch_hamiltonian, mirror_parity, Parity};

/// Relative width of the transition band around `R = |C|`.
pub const TRANSITION_RTOL: f64 = 1e-12;
/// Refinement stops once Wilson-loop increments are below this.
const WILSON_STEP_TARGET: f64 = PI / 4.0;
const MAX_GRID: usize = 1 << 16;

/// Off-diagonal block of the Bloch Hamiltonian with
/// `det q(k) = C + R e^{-ika}`, `R > 0`.
///
/// For even `J` this is the sublattice block (odd sites to even sites). Odd
/// `J` has no bulk sublattice symmetry; there the block is the bidiagonal
/// `(m+1) x (m+1)` matrix, `m = (J-1)/2`, with diagonal `t_1, t_1 .. t_m`,
/// subdiagonal `t_2 .. t_{m+1}` and corner `+-tau e^{-ika}`, so that
/// `C = t_1 prod_{j<=m} t_j` and `R = tau prod_{j=2}^{m+1} t_j`.
#[derive(Clone, Debug)]
pub struct ChiralBlock {
    cell: UnitCellSpec,
    /// Sign applied to the raw determinant so that `R > 0`.
    sign: f64,
    pub c: f64,
    pub r: f64,
}

impl ChiralBlock {
    pub fn new(cell: &UnitCellSpec) -> Self {
        let mut b = ChiralBlock { cell: cell.clone(), sign: 1.0, c: 0.0, r: 0.0 };
        let a = cell.lattice_constant();
        let d0 = b.raw_det(0.0).re;
        let dp = b.raw_det(PI / a).re;
        let (c, r) = (0.5 * (d0 + dp), 0.5 * (d0 - dp));
        b.sign = if r < 0.0 { -1.0 } else { 1.0 };
        b.c = b.sign * c;
        b.r = b.sign * r;
        b
    }

    /// `q(k)` as a complex matrix.
    pub fn q(&self, k: f64) -> DMatrix<Complex64> {
        let cell = &self.cell;
        let j = cell.j();
        if j % 2 == 0 {
            let h = bloch_hamiltonian(cell, k);
            DMatrix::from_fn(j / 2, j / 2, |r, c| h[(2 * r, 2 * c + 1)])
        } else {
            let m = (j - 1) / 2;
            let t = cell.intracell();
            let mut q = DMatrix::from_element(m + 1, m + 1, Complex64::new(0.0, 0.0));
            q[(0, 0)] = Complex64::new(t[0], 0.0);
            for i in 1..=m {
                q[(i, i)] = Complex64::new(t[i - 1], 0.0);
                q[(i, i - 1)] = Complex64::new(t[i], 0.0);
            }
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            q[(0, m)] += Complex64::from_polar(sign * cell.intercell(), -k * cell.lattice_constant());
            q
        }
    }

    fn raw_det(&self, k: f64) -> Complex64 {
        self.q(k).determinant()
    }

    /// `det q(k)`, sign-normalized.
    pub fn det(&self, k: f64) -> Complex64 {
        self.raw_det(k) * self.sign
    }

    /// Largest deviation of `|det q(k)|` from `|C + R e^{-ika}|` on `n` points.
    pub fn single_harmonic_defect(&self, n: usize) -> f64 {
        let a = self.cell.lattice_constant();
        (0..n)
            .map(|i| {
                let k = (-PI + 2.0 * PI * i as f64 / n as f64) / a;
                let model = Complex64::new(self.c, 0.0) + Complex64::from_polar(self.r, -k * a);
                (self.det(k).norm() - model.norm()).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub nu_total: i32,
    /// Per-band Zak phase, `0` or `pi`.
    pub zak: Vec<f64>,
    /// Per-band unwrapped Wilson-loop phase over `pi`.
    pub band_winding: Vec<i32>,
    pub at_transition: bool,
}

/// Circle criterion: `nu = 1` if `R > |C|`, else `0`.
pub fn winding_circle(cell: &UnitCellSpec) -> (i32, bool) {
    let b = ChiralBlock::new(cell);
    let at = (b.r - b.c.abs()).abs() < TRANSITION_RTOL * b.r.max(b.c.abs());
    (if b.r > b.c.abs() { 1 } else { 0 }, at)
}

/// Total phase of `det q(k)` accumulated along the Brillouin zone on `n_k`
/// steps, increasing `k` unless `reverse`.
pub fn winding_phase(cell: &UnitCellSpec, n_k: usize, reverse: bool) -> Result<f64> {
    let b = ChiralBlock::new(cell);
    let a = cell.lattice_constant();
    let scale = b.r.max(b.c.abs());
    let mut n = n_k.max(8);
    loop {
        let ks: Vec<f64> = (0..=n)
            .map(|i| {
                let s = if reverse { PI - 2.0 * PI * i as f64 / n as f64 } else { -PI + 2.0 * PI * i as f64 / n as f64 };
                s / a
            })
            .collect();
        let dets: Vec<Complex64> = ks.iter().map(|&k| b.det(k)).collect();
        if let Some(i) = dets.iter().position(|d| d.norm() < 1e-12 * scale) {
            return Err(Error::Transition(format!("det q vanishes at k = {}", ks[i])));
        }
        let steps: Vec<f64> = dets.windows(2).map(|w| (w[1] / w[0]).arg()).collect();
        let worst = steps.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if worst < PI / 2.0 {
            return Ok(steps.iter().sum());
        }
        if n >= MAX_GRID {
            return Err(Error::Transition("phase of det q could not be resolved".into()));
        }
        n *= 2;
    }
}

/// Winding number from the phase integral. With the `e^{-ika}` convention
/// `det q` winds clockwise, so `nu = -phase / 2 pi`.
pub fn winding_integral(cell: &UnitCellSpec, n_k: usize) -> Result<i32> {
    let phase = winding_phase(cell, n_k, false)?;
    Ok((-phase / (2.0 * PI)).round() as i32)
}

/// Zak phases from mirror parities at `k = 0` and `k = pi/a`.
pub fn zak_trim(cell: &UnitCellSpec) -> Result<Vec<f64>> {
    let j = cell.j();
    let scale = cell.max_coupling();
    let mut parities = vec![[0i32; 2]; j];
    for (slot, pi_point) in [false, true].into_iter().enumerate() {
        let h = bloch_hamiltonian(cell, if pi_point { PI / cell.lattice_constant() } else { 0.0 }).map(|z| z.re);
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..j).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        for w in order.windows(2) {
            if (eig.eigenvalues[w[1]] - eig.eigenvalues[w[0]]).abs() < 1e-10 * scale {
                return Err(Error::Degenerate(format!(
                    "degenerate TRIM eigenvalue {} at k = {}",
                    eig.eigenvalues[w[0]],
                    if pi_point { "pi/a" } else { "0" }
                )));
            }
        }
        for (band, &col) in order.iter().enumerate() {
            let v: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
            parities[band][slot] = match mirror_parity(&v) {
                Parity::Even => 1,
                Parity::Odd => -1,
                Parity::Undefined => {
                    return Err(Error::Degenerate(format!("band {} has no definite parity", band + 1)))
                }
            };
        }
    }
    Ok(parities.iter().map(|p| if p[0] * p[1] < 0 { PI } else { 0.0 }).collect())
}

/// Eigenvectors at `k` in the gauge where the last cell site is real and
/// positive.
fn gauged_states(cell: &UnitCellSpec, k: f64, scale: f64) -> Result<Vec<DVector<Complex64>>> {
    let j = cell.j();
    let eig = SymmetricEigen::new(bloch_hamiltonian(cell, k));
    let mut order: Vec<usize> = (0..j).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    for w in order.windows(2) {
        if eig.eigenvalues[w[1]] - eig.eigenvalues[w[0]] < 1e-10 * scale {
            return Err(Error::Transition(format!("bands touch at k = {k}")));
        }
    }
    Ok(order
        .iter()
        .map(|&c| {
            let v: DVector<Complex64> = eig.eigenvectors.column(c).into_owned();
            let anchor = v[j - 1];
            let phase = if anchor.norm() > 0.0 { anchor.conj() / anchor.norm() } else { Complex64::new(1.0, 0.0) };
            v * phase
        })
        .collect())
}

/// Band-resolved winding: accumulated `-arg <u_i|u_{i+1}>` over the zone,
/// divided by `pi` and rounded. The grid is doubled until every increment is
/// below `pi/4`.
pub fn band_winding_wilson(cell: &UnitCellSpec, n_k: usize) -> Result<Vec<i32>> {
    let j = cell.j();
    let a = cell.lattice_constant();
    let scale = cell.max_coupling();
    let mut n = n_k.max(8);
    loop {
        let ks: Vec<f64> = (0..=n).map(|i| (-PI + 2.0 * PI * i as f64 / n as f64) / a).collect();
        let states: Vec<Vec<DVector<Complex64>>> =
            ks.iter().map(|&k| gauged_states(cell, k, scale)).collect::<Result<_>>()?;
        let mut total = vec![0.0; j];
        let mut worst: f64 = 0.0;
        for w in states.windows(2) {
            for band in 0..j {
                let step = -w[0][band].dotc(&w[1][band]).arg();
                worst = worst.max(step.abs());
                total[band] += step;
            }
        }
        if worst < WILSON_STEP_TARGET || n >= MAX_GRID {
            if worst >= PI {
                return Err(Error::Transition("Berry-phase increments could not be resolved".into()));
            }
            return Ok(total.iter().map(|t| (t / PI).round() as i32).collect());
        }
        n *= 2;
    }
}

/// Winding, Zak phases and band windings of one cell.
pub fn invariants(cell: &UnitCellSpec, n_k: usize) -> Result<InvariantReport> {
    let (nu, at) = winding_circle(cell);
    Ok(InvariantReport { nu_total: nu, zak: zak_trim(cell)?, band_winding: band_winding_wilson(cell, n_k)?, at_transition: at })
}

#[derive(Clone, Debug, Serialize)]
pub struct PhasePoint {
    pub t: f64,
    pub tau: f64,
    pub nu_total: i32,
    pub at_transition: bool,
    /// `None` where the bands touch on the grid.
    pub band_winding: Option<Vec<i32>>,
}

/// Evaluate the circle criterion and band windings on a `resolution x
/// resolution` grid. Intracell couplings follow the template's profile
/// scaled so that `t_1 = t`; `tau` replaces the intercell coupling. Grid
/// values are `lo + (i+1) (hi - lo) / resolution`.
pub fn phase_diagram(
    template: &UnitCellSpec,
    t_range: (f64, f64),
    tau_range: (f64, f64),
    resolution: usize,
    n_k: usize,
) -> Result<Vec<PhasePoint>> {
    if !(t_range.0 >= 0.0 && t_range.1 > t_range.0 && tau_range.0 >= 0.0 && tau_range.1 > tau_range.0) {
        return Err(Error::validation("phase-diagram ranges must be positive and increasing"));
    }
    if resolution == 0 {
        return Err(Error::validation("resolution must be positive"));
    }
    let step = |r: (f64, f64), i: usize| r.0 + (i + 1) as f64 * (r.1 - r.0) / resolution as f64;
    let profile: Vec<f64> = template.intracell().iter().map(|x| x / template.intracell()[0]).collect();
    let points: Vec<(f64, f64)> = (0..resolution)
        .flat_map(|it| (0..resolution).map(move |iu| (it, iu)))
        .map(|(it, iu)| (step(t_range, it), step(tau_range, iu)))
        .collect();
    points
        .par_iter()
        .map(|&(t, tau)| {
            let cell = UnitCellSpec::with_lattice_constant(
                profile.iter().map(|p| p * t).collect(),
                tau,
                template.lattice_constant(),
            )?;
            let (nu, at) = winding_circle(&cell);
            let band_winding = if at { None } else { band_winding_wilson(&cell, n_k).ok() };
            Ok(PhasePoint { t, tau, nu_total: nu, at_transition: at, band_winding })
        })
        .collect()
}
