//! Finite-chain spectra, Bloch bands, gap formulas and interface modes.

mod bloch;
mod closed_form;
mod interface;

pub use bloch::{
    band_determinant, band_edges, band_structure, bloch_energies, bloch_hamiltonian, locate_tau_closure,
    numeric_gaps, BandStructure, NumericGap,
};
pub use closed_form::{
    closed_form_report, decay_lengths, exact_decay_length, j5_exact_closures, CardanoPoint, CriticalCoupling,
    DecayLength, GapEntry, GapReport,
};
pub use interface::{fit_decay_length, tagged_eigensystem, validate_interface, InterfaceValidation};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{centered_index, LatticeHamiltonian};

/// Relative tolerance used for symmetry checks on input matrices.
const SYMMETRY_RTOL: f64 = 1e-12;
/// Overlap with the mirrored mode needed to assign a parity.
pub const PARITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    /// In-gap, localized near the centre waveguide.
    Interface,
    /// In-gap, localized at an outer end of the finite chain.
    Edge,
    Bulk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
    Undefined,
}

impl Parity {
    pub fn sign(self) -> Option<i32> {
        match self {
            Parity::Even => Some(1),
            Parity::Odd => Some(-1),
            Parity::Undefined => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModeTag {
    pub kind: ModeKind,
    pub parity: Parity,
    pub ipr: f64,
}

/// Sorted eigenpairs of a real symmetric matrix.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, same order as `values`.
    pub vectors: DMatrix<f64>,
    pub tags: Vec<ModeTag>,
}

impl EigenSystem {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, m: usize) -> nalgebra::DVectorView<'_, f64> {
        self.vectors.column(m)
    }

    /// Indices of interface-tagged modes in ascending eigenvalue order.
    pub fn interface_modes(&self) -> Vec<usize> {
        (0..self.n()).filter(|&m| self.tags[m].kind == ModeKind::Interface).collect()
    }

    /// `max_i |beta_i + beta_{N-1-i}|`, zero for a chiral spectrum.
    pub fn chiral_asymmetry(&self) -> f64 {
        let n = self.n();
        (0..n).map(|i| (self.values[i] + self.values[n - 1 - i]).abs()).fold(0.0, f64::max)
    }

    /// `max |V^T V - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.vectors.tr_mul(&self.vectors);
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Weight of mode `m` on sites with `|label| <= radius`.
    pub fn central_weight(&self, m: usize, radius: usize) -> f64 {
        let n = self.n();
        self.vectors
            .column(m)
            .iter()
            .enumerate()
            .filter(|(i, _)| centered_index(*i, n).unsigned_abs() as usize <= radius)
            .map(|(_, v)| v * v)
            .sum()
    }
}

/// Inverse participation ratio `sum v^4` of a normalized vector.
pub fn ipr(v: &[f64]) -> f64 {
    let norm2: f64 = v.iter().map(|x| x * x).sum();
    v.iter().map(|x| x.powi(4)).sum::<f64>() / (norm2 * norm2)
}

/// Mirror parity of a normalized vector.
pub fn mirror_parity(v: &[f64]) -> Parity {
    let n = v.len();
    let overlap: f64 = (0..n).map(|i| v[i] * v[n - 1 - i]).sum();
    if (overlap - 1.0).abs() < PARITY_TOL {
        Parity::Even
    } else if (overlap + 1.0).abs() < PARITY_TOL {
        Parity::Odd
    } else {
        Parity::Undefined
    }
}

/// Eigen-decomposition of a chain Hamiltonian; every mode is tagged bulk.
/// Use [`tagged_eigensystem`] to classify interface modes.
pub fn eigensystem(h: &LatticeHamiltonian) -> EigenSystem {
    eigensystem_dense(h.matrix()).expect("chain Hamiltonians are symmetric by construction")
}

/// Eigen-decomposition of any real symmetric matrix.
///
/// Eigenvalues ascend; each eigenvector is signed so that its first component
/// above `1e-8` of its largest entry is positive.
pub fn eigensystem_dense(m: &DMatrix<f64>) -> Result<EigenSystem> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension { expected: n, found: m.ncols() });
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_RTOL * scale {
                return Err(Error::validation(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut raw = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        raw.set_column(col, &eig.eigenvectors.column(src));
    }
    if is_mirror_symmetric(m, scale) {
        split_mirror_clusters(m, &mut values, &mut raw);
    }
    let mut vectors = DMatrix::zeros(n, n);
    let mut tags = Vec::with_capacity(n);
    for col in 0..n {
        let mut v: Vec<f64> = raw.column(col).iter().copied().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let big = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let lead = v.iter().copied().find(|x| x.abs() > 1e-8 * big).unwrap_or(1.0);
        let s = lead.signum() / norm;
        for x in &mut v {
            *x *= s;
        }
        tags.push(ModeTag { kind: ModeKind::Bulk, parity: mirror_parity(&v), ipr: ipr(&v) });
        vectors.set_column(col, &nalgebra::DVector::from_vec(v));
    }
    Ok(EigenSystem { values, vectors, tags })
}

fn is_mirror_symmetric(m: &DMatrix<f64>, scale: f64) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| (m[(i, j)] - m[(n - 1 - i, n - 1 - j)]).abs() <= SYMMETRY_RTOL * scale))
}

/// Eigenvalues closer than this fraction of the spectral scale form a cluster.
const CLUSTER_RTOL: f64 = 1e-10;

/// Within clusters of (numerically) degenerate eigenvalues the solver may
/// return arbitrary mixtures, e.g. of the two far-apart edge states of a
/// mirror-symmetric chain. Rotate each cluster onto eigenvectors of the
/// mirror operator so that every mode has a definite parity.
fn split_mirror_clusters(m: &DMatrix<f64>, values: &mut [f64], vectors: &mut DMatrix<f64>) {
    let n = values.len();
    let scale = values.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] <= CLUSTER_RTOL * scale {
            end += 1;
        }
        if end - start > 1 {
            let block = vectors.columns(start, end - start).into_owned();
            let mirrored = DMatrix::from_fn(n, end - start, |i, c| block[(n - 1 - i, c)]);
            let p = block.tr_mul(&mirrored);
            let p = (&p + p.transpose()) * 0.5;
            let rot = p.symmetric_eigen().eigenvectors;
            let rotated = &block * rot;
            for c in 0..end - start {
                let v = rotated.column(c);
                values[start + c] = v.dot(&(m * v)) / v.dot(&v);
                vectors.set_column(start + c, &v);
            }
        }
        start = end;
    }
    // rotation may reorder Rayleigh quotients inside a cluster
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let sorted = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    values.copy_from_slice(&sorted_values);
    *vectors = sorted;
}

/// Classify modes against the open gaps `(upper edge of band j, lower edge of
/// band j+1)` of the infinite lattice.
///
/// A mode is in-gap if its energy lies strictly inside a gap, localized if its
/// IPR exceeds `4/N`; localized in-gap modes with most of their weight in the
/// central half of the chain are interface modes, the rest are edge modes.
pub fn tag_modes(eig: &mut EigenSystem, gaps: &[(f64, f64)]) {
    let n = eig.n();
    let scale = eig.values.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let margin = 1e-9 * scale;
    let radius = (n - 1) / 4;
    for m in 0..n {
        let e = eig.values[m];
        let in_gap = gaps.iter().any(|&(lo, hi)| hi - lo > 2.0 * margin && e > lo + margin && e < hi - margin);
        let localized = eig.tags[m].ipr > 4.0 / n as f64;
        eig.tags[m].kind = if in_gap && localized {
            if eig.central_weight(m, radius) > 0.5 {
                ModeKind::Interface
            } else {
                ModeKind::Edge
            }
        } else {
            ModeKind::Bulk
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hamiltonian, CouplingSequence};

    #[test]
    fn two_site_coupler() {
        let h = build_hamiltonian(&CouplingSequence::new(vec![0.7]).unwrap()).unwrap();
        let e = eigensystem(&h);
        assert!((e.values[0] + 0.7).abs() < 1e-15 && (e.values[1] - 0.7).abs() < 1e-15);
        let s = 0.5f64.sqrt();
        assert!((e.vectors[(0, 0)] - s).abs() < 1e-15 && (e.vectors[(1, 0)] + s).abs() < 1e-15);
        assert!((e.vectors[(0, 1)] - s).abs() < 1e-15 && (e.vectors[(1, 1)] - s).abs() < 1e-15);
        assert_eq!(e.tags[0].parity, Parity::Odd);
        assert_eq!(e.tags[1].parity, Parity::Even);
    }

    #[test]
    fn degenerate_end_dimers_get_parities() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
        );
        let e = eigensystem_dense(&m).unwrap();
        assert!(e.tags.iter().all(|t| t.parity != Parity::Undefined));
        assert!(e.orthonormality_defect() < 1e-14);
        for k in 0..4 {
            let v = e.vector(k);
            assert!((&m * v - v * e.values[k]).amax() < 1e-14);
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(eigensystem_dense(&m).is_err());
    }

    #[test]
    fn ipr_limits() {
        assert!((ipr(&[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((ipr(&[1.0, 1.0, 1.0, 1.0]) - 0.25).abs() < 1e-15);
    }
}
