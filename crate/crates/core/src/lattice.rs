//! Superlattice specifications, gap-to-coupling conversion, finite interface
//! chains and disorder realizations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{NormalStream, XorShift64Star};

/// Smallest inter-waveguide gap accepted by [`couplings_from_gaps`] (nm).
pub const MIN_GAP_NM: f64 = 70.0;

/// Relative tolerance for the inversion-symmetry check `t_j = t_{J-j}`.
const INVERSION_RTOL: f64 = 1e-12;

/// A `J`-site unit cell: `J-1` intracell couplings and the intercell coupling.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnitCellSpec {
    intracell: Vec<f64>,
    intercell: f64,
    lattice_constant: f64,
}

impl UnitCellSpec {
    /// Cell with lattice constant 1.
    pub fn new(intracell: Vec<f64>, intercell: f64) -> Result<Self> {
        Self::with_lattice_constant(intracell, intercell, 1.0)
    }

    pub fn with_lattice_constant(intracell: Vec<f64>, intercell: f64, a: f64) -> Result<Self> {
        if intracell.len() < 2 {
            return Err(Error::validation(format!(
                "a unit cell needs at least 3 sites, got {}",
                intracell.len() + 1
            )));
        }
        for (i, &t) in intracell.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::validation(format!("intracell coupling t_{} = {t} must be positive", i + 1)));
            }
        }
        if !(intercell.is_finite() && intercell > 0.0) {
            return Err(Error::validation(format!("intercell coupling {intercell} must be positive")));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::validation(format!("lattice constant {a} must be positive")));
        }
        let n = intracell.len();
        for i in 0..n / 2 {
            let (x, y) = (intracell[i], intracell[n - 1 - i]);
            if (x - y).abs() > INVERSION_RTOL * x.max(y) {
                return Err(Error::validation(format!(
                    "cell is not inversion symmetric: t_{} = {x} but t_{} = {y}",
                    i + 1,
                    n - i
                )));
            }
        }
        Ok(Self { intracell, intercell, lattice_constant: a })
    }

    /// Sites per cell.
    pub fn j(&self) -> usize {
        self.intracell.len() + 1
    }

    pub fn intracell(&self) -> &[f64] {
        &self.intracell
    }

    pub fn intercell(&self) -> f64 {
        self.intercell
    }

    pub fn lattice_constant(&self) -> f64 {
        self.lattice_constant
    }

    /// Couplings in chain order: `t_1 .. t_{J-1}, tau`.
    pub fn cycle(&self) -> Vec<f64> {
        let mut c = self.intracell.clone();
        c.push(self.intercell);
        c
    }

    /// Same cell with a different intercell coupling.
    pub fn with_intercell(&self, tau: f64) -> Result<Self> {
        Self::with_lattice_constant(self.intracell.clone(), tau, self.lattice_constant)
    }

    /// Every coupling multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::with_lattice_constant(
            self.intracell.iter().map(|t| t * s).collect(),
            self.intercell * s,
            self.lattice_constant,
        )
    }

    pub fn max_coupling(&self) -> f64 {
        self.intracell.iter().copied().fold(self.intercell, f64::max)
    }
}

/// Waveguide gaps of one unit cell, in nm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalGeometry {
    /// Intracell gaps `g_1 .. g_{J-1}`.
    pub gaps_nm: Vec<f64>,
    /// Gap between neighbouring cells.
    pub intercell_gap_nm: f64,
    #[serde(default = "default_width")]
    pub width_nm: f64,
    #[serde(default = "default_height")]
    pub height_nm: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength_nm: f64,
}

fn default_width() -> f64 {
    450.0
}
fn default_height() -> f64 {
    220.0
}
fn default_wavelength() -> f64 {
    1550.0
}

impl PhysicalGeometry {
    pub fn new(gaps_nm: Vec<f64>, intercell_gap_nm: f64) -> Self {
        Self {
            gaps_nm,
            intercell_gap_nm,
            width_nm: default_width(),
            height_nm: default_height(),
            wavelength_nm: default_wavelength(),
        }
    }

    /// Expand the independent gaps of an inversion-symmetric cell:
    /// `[g1, g2]` for `J = 5` becomes `[g1, g2, g2, g1]`.
    pub fn symmetric(j: usize, half_gaps_nm: &[f64], intercell_gap_nm: f64) -> Result<Self> {
        if j < 3 || half_gaps_nm.len() != j / 2 {
            return Err(Error::validation(format!(
                "J = {j} needs {} independent gaps, got {}",
                j / 2,
                half_gaps_nm.len()
            )));
        }
        let mut gaps = half_gaps_nm.to_vec();
        let mirror: Vec<f64> = if (j - 1) % 2 == 0 {
            half_gaps_nm.iter().rev().copied().collect()
        } else {
            half_gaps_nm.iter().rev().skip(1).copied().collect()
        };
        gaps.extend(mirror);
        Ok(Self::new(gaps, intercell_gap_nm))
    }
}

/// Exponential evanescent coupling model `t(g) = kappa0 * exp(-g / g0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingMap {
    /// Coupling at zero gap, m^-1.
    pub kappa0: f64,
    /// Decay scale, nm.
    pub g0_nm: f64,
}

impl Default for CouplingMap {
    /// Least-squares fit (at `kappa0 = 2e5 m^-1`) to reference J=5 gap sizes
    /// and gap ratios for 280 nm-class silicon waveguides.
    fn default() -> Self {
        Self { kappa0: 2.0e5, g0_nm: 115.65 }
    }
}

impl CouplingMap {
    pub fn new(kappa0: f64, g0_nm: f64) -> Result<Self> {
        if !(kappa0.is_finite() && kappa0 > 0.0 && g0_nm.is_finite() && g0_nm > 0.0) {
            return Err(Error::validation(format!("coupling map needs kappa0 > 0 and g0 > 0, got {kappa0}, {g0_nm}")));
        }
        Ok(Self { kappa0, g0_nm })
    }

    pub fn coupling(&self, gap_nm: f64) -> f64 {
        self.kappa0 * (-gap_nm / self.g0_nm).exp()
    }
}

/// Convert a cell geometry into couplings.
pub fn couplings_from_gaps(geom: &PhysicalGeometry, map: &CouplingMap) -> Result<UnitCellSpec> {
    CouplingMap::new(map.kappa0, map.g0_nm)?;
    if geom.gaps_nm.len() < 2 {
        return Err(Error::validation("geometry needs at least two intracell gaps"));
    }
    for (name, v) in [("width", geom.width_nm), ("height", geom.height_nm), ("wavelength", geom.wavelength_nm)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::validation(format!("{name} must be positive, got {v}")));
        }
    }
    let all = geom.gaps_nm.iter().chain(std::iter::once(&geom.intercell_gap_nm));
    for &g in all {
        if !g.is_finite() || g < MIN_GAP_NM {
            return Err(Error::validation(format!("gap {g} nm is below the {MIN_GAP_NM} nm minimum")));
        }
    }
    let n = geom.gaps_nm.len();
    for i in 0..n / 2 {
        if geom.gaps_nm[i] != geom.gaps_nm[n - 1 - i] {
            return Err(Error::validation(format!(
                "gap list is not mirror symmetric: g_{} = {} vs g_{} = {}",
                i + 1,
                geom.gaps_nm[i],
                n - i,
                geom.gaps_nm[n - 1 - i]
            )));
        }
    }
    let t = geom.gaps_nm.iter().map(|&g| map.coupling(g)).collect();
    UnitCellSpec::new(t, map.coupling(geom.intercell_gap_nm))
}

/// Finite chain made of `half_cells` cells on each side of a centre waveguide.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterfaceLatticeSpec {
    pub cell: UnitCellSpec,
    pub half_cells: usize,
    /// Position in the coupling cycle used for the bond next to the centre.
    pub interface_offset: usize,
}

impl InterfaceLatticeSpec {
    pub fn new(cell: UnitCellSpec, half_cells: usize, interface_offset: usize) -> Result<Self> {
        if half_cells == 0 {
            return Err(Error::validation("half_cells must be at least 1"));
        }
        if interface_offset >= cell.j() {
            return Err(Error::validation(format!(
                "interface_offset {interface_offset} must be below J = {}",
                cell.j()
            )));
        }
        Ok(Self { cell, half_cells, interface_offset })
    }

    /// Total number of waveguides, `2 M J + 1`.
    pub fn n_sites(&self) -> usize {
        2 * self.half_cells * self.cell.j() + 1
    }
}

/// Nearest-neighbour couplings of a chain, left to right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSequence {
    pub values: Vec<f64>,
}

impl CouplingSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("coupling sequence is empty"));
        }
        Ok(Self { values })
    }

    pub fn n_sites(&self) -> usize {
        self.values.len() + 1
    }

    pub fn is_mirror_symmetric(&self) -> bool {
        let v = &self.values;
        (0..v.len()).all(|i| v[i] == v[v.len() - 1 - i])
    }
}

/// Right half repeats the coupling cycle from `interface_offset`; the left half
/// mirrors it.
pub fn build_interface_sequence(spec: &InterfaceLatticeSpec) -> CouplingSequence {
    let cycle = spec.cell.cycle();
    let j = cycle.len();
    let right: Vec<f64> = (0..spec.half_cells * j).map(|i| cycle[(spec.interface_offset + i) % j]).collect();
    let mut values: Vec<f64> = right.iter().rev().copied().collect();
    values.extend_from_slice(&right);
    CouplingSequence { values }
}

/// Real symmetric tridiagonal chain Hamiltonian with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeHamiltonian {
    couplings: Vec<f64>,
    matrix: DMatrix<f64>,
}

impl LatticeHamiltonian {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn row_sum_bound(&self) -> f64 {
        let c = &self.couplings;
        (0..self.n())
            .map(|i| {
                let l = if i > 0 { c[i - 1].abs() } else { 0.0 };
                let r = if i < c.len() { c[i].abs() } else { 0.0 };
                l + r
            })
            .fold(0.0, f64::max)
    }

    /// Spectral norm of `H`.
    pub fn norm(&self) -> f64 {
        self.matrix.clone().symmetric_eigenvalues().amax()
    }

    /// `y = H x` for a vector of length `n`, using the tridiagonal structure.
    pub fn apply<T>(&self, x: &[T], y: &mut [T])
    where
        T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    {
        let n = self.n();
        let c = &self.couplings;
        for i in 0..n {
            let mut acc = T::default();
            if i > 0 {
                acc = acc + x[i - 1] * c[i - 1];
            }
            if i + 1 < n {
                acc = acc + x[i + 1] * c[i];
            }
            y[i] = acc;
        }
    }
}

pub fn build_hamiltonian(seq: &CouplingSequence) -> Result<LatticeHamiltonian> {
    if seq.values.is_empty() {
        return Err(Error::validation("coupling sequence is empty"));
    }
    for (i, &v) in seq.values.iter().enumerate() {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::validation(format!("coupling {i} = {v} must be positive")));
        }
    }
    let n = seq.n_sites();
    let mut m = DMatrix::zeros(n, n);
    for (i, &v) in seq.values.iter().enumerate() {
        m[(i, i + 1)] = v;
        m[(i + 1, i)] = v;
    }
    Ok(LatticeHamiltonian { couplings: seq.values.clone(), matrix: m })
}

/// Relative coupling disorder: each bond is multiplied by `1 + D z_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub level: f64,
    pub seed: u64,
    pub realization_index: u64,
    /// Extra stream coordinate; ensembles put the disorder-level index here.
    #[serde(default)]
    pub stream: u64,
}

impl DisorderSpec {
    pub fn new(level: f64, seed: u64, realization_index: u64) -> Result<Self> {
        if !(level.is_finite() && level >= 0.0) {
            return Err(Error::validation(format!("disorder level {level} must be >= 0")));
        }
        Ok(Self { level, seed, realization_index, stream: 0 })
    }
}

/// Multiplicative factors `delta_i ~ N(1, D^2)` for `n` bonds.
///
/// The same vector should be applied to the pump, signal and idler chains.
pub fn disorder_factors(n: usize, d: &DisorderSpec) -> Vec<f64> {
    if d.level == 0.0 {
        return vec![1.0; n];
    }
    let mut normals = NormalStream::new(XorShift64Star::for_stream(d.seed, d.stream, d.realization_index));
    (0..n).map(|_| 1.0 + d.level * normals.next_standard()).collect()
}

pub fn apply_factors(seq: &CouplingSequence, factors: &[f64]) -> Result<CouplingSequence> {
    if factors.len() != seq.values.len() {
        return Err(Error::Dimension { expected: seq.values.len(), found: factors.len() });
    }
    Ok(CouplingSequence { values: seq.values.iter().zip(factors).map(|(v, f)| v * f).collect() })
}

pub fn disordered_sequence(seq: &CouplingSequence, d: &DisorderSpec) -> CouplingSequence {
    if d.level == 0.0 {
        return seq.clone();
    }
    let f = disorder_factors(seq.values.len(), d);
    CouplingSequence { values: seq.values.iter().zip(&f).map(|(v, f)| v * f).collect() }
}

/// Convert a site index `0..n` to the centred label (`0` at the middle).
pub fn centered_index(i: usize, n: usize) -> i64 {
    i as i64 - (n as i64 - 1) / 2
}

/// Inverse of [`centered_index`].
pub fn array_index(label: i64, n: usize) -> Option<usize> {
    let i = label + (n as i64 - 1) / 2;
    (0..n as i64).contains(&i).then_some(i as usize)
}
