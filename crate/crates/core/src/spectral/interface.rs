use serde::Serialize;

use super::bloch::band_edges;
use super::{eigensystem, tag_modes, EigenSystem};
use crate::error::{Error, Result};
use crate::lattice::{build_hamiltonian, build_interface_sequence, InterfaceLatticeSpec, LatticeHamiltonian, UnitCellSpec};

/// Open gaps of the infinite lattice built from `cell`.
pub(crate) fn open_gaps(cell: &UnitCellSpec) -> Vec<(f64, f64)> {
    let edges = band_edges(cell);
    edges.windows(2).map(|w| (w[0].1, w[1].0)).collect()
}

/// Eigen-decomposition with interface/edge/bulk tags taken against the gaps
/// of `cell`.
pub fn tagged_eigensystem(h: &LatticeHamiltonian, cell: &UnitCellSpec) -> EigenSystem {
    let mut eig = eigensystem(h);
    tag_modes(&mut eig, &open_gaps(cell));
    eig
}

#[derive(Clone, Debug, Serialize)]
pub struct InterfaceValidation {
    /// `J - 1`.
    pub expected: usize,
    pub found: usize,
    /// Indices (ascending energy) of interface-tagged modes.
    pub modes: Vec<usize>,
    pub energies: Vec<f64>,
    pub ok: bool,
}

impl InterfaceValidation {
    pub fn warning(&self) -> Option<String> {
        (!self.ok).then(|| format!("expected {} interface modes, found {}", self.expected, self.found))
    }
}

/// Build the chain of `spec` and count its interface modes.
pub fn validate_interface(spec: &InterfaceLatticeSpec) -> Result<(EigenSystem, InterfaceValidation)> {
    let h = build_hamiltonian(&build_interface_sequence(spec))?;
    let eig = tagged_eigensystem(&h, &spec.cell);
    let modes = eig.interface_modes();
    let expected = spec.cell.j() - 1;
    let v = InterfaceValidation {
        expected,
        found: modes.len(),
        energies: modes.iter().map(|&m| eig.values[m]).collect(),
        ok: modes.len() == expected,
        modes,
    };
    Ok((eig, v))
}

/// Decay length of mode `m` (in units of `a`) from a log-linear fit of its
/// per-cell norm against distance from the centre.
///
/// Cells whose norm falls below `1e-10` of the first cell, and the last two
/// cells before the outer ends, are left out. Returns `None` if fewer than
/// three cells remain or the envelope does not decay.
pub fn fit_decay_length(eig: &EigenSystem, m: usize, spec: &InterfaceLatticeSpec) -> Result<Option<f64>> {
    let n = eig.n();
    if n != spec.n_sites() {
        return Err(Error::Dimension { expected: spec.n_sites(), found: n });
    }
    let j = spec.cell.j();
    let centre = (n - 1) / 2;
    let v = eig.vector(m);
    let cell_norm = |c: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..j {
            let off = 1 + c * j + i;
            s += v[centre + off].powi(2) + v[centre - off].powi(2);
        }
        (0.5 * s).sqrt()
    };
    let last = spec.half_cells.saturating_sub(2);
    let first = cell_norm(0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for c in 0..last {
        let a = cell_norm(c);
        if a < 1e-10 * first {
            break;
        }
        xs.push(c as f64);
        ys.push(a.ln());
    }
    if xs.len() < 3 {
        return Ok(None);
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return Ok(None);
    }
    Ok(Some(spec.cell.lattice_constant() / -slope))
}
