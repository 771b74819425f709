//! Pump and biphoton propagation along the waveguide array.
//!
//! The pump obeys `i dA/dz = H_p A` and is propagated exactly in its
//! eigenbasis. The biphoton amplitude obeys
//!
//! ```text
//! i dpsi/dz = H_s psi + s psi H_i + gamma psi0 diag(A(z)^2)
//! ```
//!
//! with `s = +1` ([`PairPhase::Sum`]) or `s = -1` ([`PairPhase::Difference`]).
//! Two integrators are provided: an interaction-picture split-step scheme
//! with adaptive step doubling, and a fixed-step Crank–Nicolson scheme on the
//! vectorized state.

mod crank_nicolson;
mod split_step;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeHamiltonian;
use crate::spectral::{eigensystem, EigenSystem};

pub use crank_nicolson::propagate_biphoton_cn;
pub use split_step::propagate_biphoton_split_step;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Kerr nonlinear coefficient `omega0 n2 / (c A_eff)` with `omega0 = 2 pi c / lambda0`.
///
/// Arguments in SI units (m^2/W, m^2, m); result in 1/(W m).
pub fn nonlinear_gamma(n2: f64, a_eff: f64, lambda0: f64) -> Result<f64> {
    for (name, v) in [("n2", n2), ("A_eff", a_eff), ("lambda0", lambda0)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::validation(format!("{name} must be positive, got {v}")));
        }
    }
    let omega0 = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / lambda0;
    Ok(omega0 * n2 / (SPEED_OF_LIGHT * a_eff))
}

/// Strength of the pair-generation term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearSource {
    /// 1/(W m).
    pub gamma: f64,
    #[serde(default = "one")]
    pub psi0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_eff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl NonlinearSource {
    pub fn new(gamma: f64) -> Result<Self> {
        let s = Self { gamma, psi0: 1.0, n2: None, a_eff: None, lambda0: None };
        s.validate()?;
        Ok(s)
    }

    /// Source with `gamma` computed from material parameters.
    pub fn from_material(n2: f64, a_eff: f64, lambda0: f64) -> Result<Self> {
        let gamma = nonlinear_gamma(n2, a_eff, lambda0)?;
        Ok(Self { gamma, psi0: 1.0, n2: Some(n2), a_eff: Some(a_eff), lambda0: Some(lambda0) })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::validation(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !self.psi0.is_finite() {
            return Err(Error::validation("psi0 must be finite"));
        }
        Ok(())
    }

    /// `gamma * psi0`.
    pub fn strength(&self) -> f64 {
        self.gamma * self.psi0
    }
}

/// Pump amplitudes (sqrt W) at position `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct PumpField {
    pub amplitudes: DVector<Complex64>,
    pub z: f64,
}

impl PumpField {
    /// Real input profile at `z = 0`.
    pub fn from_real(a: &[f64]) -> Self {
        Self { amplitudes: DVector::from_iterator(a.len(), a.iter().map(|&x| Complex64::new(x, 0.0))), z: 0.0 }
    }

    /// Power `p` launched into a single waveguide.
    pub fn single_site(n: usize, site: usize, power: f64) -> Result<Self> {
        if site >= n {
            return Err(Error::validation(format!("pump site {site} outside 0..{n}")));
        }
        if !(power.is_finite() && power >= 0.0) {
            return Err(Error::validation(format!("pump power {power} must be >= 0")));
        }
        let mut a = vec![0.0; n];
        a[site] = power.sqrt();
        Ok(Self::from_real(&a))
    }

    pub fn power(&self) -> f64 {
        self.amplitudes.norm_squared()
    }
}

/// Exact solution of `i dA/dz = H_p A` from its eigen-decomposition.
#[derive(Clone, Debug)]
pub struct PumpPropagator {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    /// Modal amplitudes at `z = 0`.
    coefficients: DVector<Complex64>,
}

impl PumpPropagator {
    pub fn new(h: &LatticeHamiltonian, input: &PumpField) -> Result<Self> {
        Self::from_eigensystem(&eigensystem(h), input)
    }

    pub fn from_eigensystem(eig: &EigenSystem, input: &PumpField) -> Result<Self> {
        let n = eig.n();
        if input.amplitudes.len() != n {
            return Err(Error::Dimension { expected: n, found: input.amplitudes.len() });
        }
        let vc = eig.vectors.map(|x| Complex64::new(x, 0.0));
        let mut coefficients = vc.tr_mul(&input.amplitudes);
        // shift the reference plane to z = 0
        for (m, c) in coefficients.iter_mut().enumerate() {
            *c *= Complex64::from_polar(1.0, eig.values[m] * input.z);
        }
        Ok(Self { values: eig.values.clone(), vectors: eig.vectors.clone(), coefficients })
    }

    /// A pump that does not spread: every waveguide keeps its input amplitude.
    pub fn constant(input: &PumpField) -> Self {
        let n = input.amplitudes.len();
        Self { values: vec![0.0; n], vectors: DMatrix::identity(n, n), coefficients: input.amplitudes.clone() }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn modal_amplitudes(&self) -> &DVector<Complex64> {
        &self.coefficients
    }

    pub fn max_frequency(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, b| a.max(b.abs()))
    }

    pub fn at(&self, z: f64) -> PumpField {
        let mut out = DVector::zeros(self.n());
        self.amplitudes_into(z, out.as_mut_slice());
        PumpField { amplitudes: out, z }
    }

    pub(crate) fn amplitudes_into(&self, z: f64, out: &mut [Complex64]) {
        let n = self.n();
        let phased: Vec<Complex64> = (0..n)
            .map(|m| self.coefficients[m] * Complex64::from_polar(1.0, -self.values[m] * z))
            .collect();
        out.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        for (m, p) in phased.iter().enumerate() {
            if p.norm_sqr() == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += p * self.vectors[(i, m)];
            }
        }
    }

    /// Samples at `z_k = k L / (samples - 1)`.
    pub fn trajectory(&self, length: f64, samples: usize) -> Vec<PumpField> {
        sample_points(length, samples).into_iter().map(|z| self.at(z)).collect()
    }
}

/// How the pump enters a biphoton run.
#[derive(Clone, Debug)]
pub struct PumpDrive {
    pub input: PumpField,
    /// `None` keeps the pump constant along `z` (an isolated pumped guide).
    pub hamiltonian: Option<LatticeHamiltonian>,
}

impl PumpDrive {
    pub fn lattice(h: LatticeHamiltonian, input: PumpField) -> Self {
        Self { input, hamiltonian: Some(h) }
    }

    pub fn constant(input: PumpField) -> Self {
        Self { input, hamiltonian: None }
    }

    pub fn propagator(&self) -> Result<PumpPropagator> {
        match &self.hamiltonian {
            Some(h) => PumpPropagator::new(h, &self.input),
            None => Ok(PumpPropagator::constant(&self.input)),
        }
    }
}

/// Pump launch conditions in configuration form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSpec {
    /// Centred label of the pumped waveguide.
    #[serde(default)]
    pub site: i64,
    /// Launched power in W.
    #[serde(default = "one")]
    pub power: f64,
    /// Let the pump spread through the lattice; otherwise it stays in `site`.
    #[serde(default = "yes")]
    pub propagate: bool,
}

fn yes() -> bool {
    true
}

impl Default for PumpSpec {
    fn default() -> Self {
        Self { site: 0, power: 1.0, propagate: true }
    }
}

impl PumpSpec {
    /// Pump drive for the chain `h_p`.
    pub fn drive(&self, h_p: &LatticeHamiltonian) -> Result<PumpDrive> {
        let n = h_p.n();
        let idx = crate::lattice::array_index(self.site, n)
            .ok_or_else(|| Error::validation(format!("pump site {} outside a {n}-site lattice", self.site)))?;
        let input = PumpField::single_site(n, idx, self.power)?;
        Ok(if self.propagate { PumpDrive::lattice(h_p.clone(), input) } else { PumpDrive::constant(input) })
    }
}

/// Sign of the idler term in the biphoton equation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairPhase {
    /// `H_s psi + psi H_i`: eigenmode pair `(m, n)` rotates at `beta_m + beta_n`.
    #[default]
    Sum,
    /// `H_s psi - psi H_i`: eigenmode pair `(m, n)` rotates at `beta_m - beta_n`.
    Difference,
}

impl PairPhase {
    pub fn sign(self) -> f64 {
        match self {
            PairPhase::Sum => 1.0,
            PairPhase::Difference => -1.0,
        }
    }

    /// Rotation frequency of the eigenmode pair `(beta_s, beta_i)`.
    pub fn pair_frequency(self, beta_s: f64, beta_i: f64) -> f64 {
        beta_s + self.sign() * beta_i
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    SplitStep,
    CrankNicolson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationConfig {
    /// Propagation length in m.
    pub length: f64,
    /// Number of equally spaced snapshots, including `z = 0` and `z = L`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Local relative error tolerance per adaptive step.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Required agreement with a run at `tolerance / 100`.
    #[serde(default = "default_global_target")]
    pub global_target: f64,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub pair_phase: PairPhase,
    /// Run the global-error certificate (split-step only).
    #[serde(default = "default_certify")]
    pub certify: bool,
    /// Step budget, accepted plus rejected.
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Crank–Nicolson step as a fraction of `1 / omega_max`.
    #[serde(default = "default_cn_theta")]
    pub cn_theta: f64,
    /// Fixed Crank–Nicolson step count; overrides `cn_theta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cn_steps: Option<usize>,
}

fn default_samples() -> usize {
    51
}
fn default_tolerance() -> f64 {
    1e-8
}
fn default_global_target() -> f64 {
    1e-6
}
fn default_certify() -> bool {
    true
}
fn default_max_steps() -> usize {
    5_000_000
}
fn default_cn_theta() -> f64 {
    0.01
}

impl PropagationConfig {
    pub fn new(length: f64) -> Self {
        Self {
            length,
            samples: default_samples(),
            tolerance: default_tolerance(),
            global_target: default_global_target(),
            method: Method::default(),
            pair_phase: PairPhase::default(),
            certify: default_certify(),
            max_steps: default_max_steps(),
            cn_theta: default_cn_theta(),
            cn_steps: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::validation(format!("length must be positive, got {}", self.length)));
        }
        if self.samples < 2 {
            return Err(Error::validation("need at least 2 samples"));
        }
        for (name, v) in [
            ("tolerance", self.tolerance),
            ("global_target", self.global_target),
            ("cn_theta", self.cn_theta),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_steps == 0 || self.cn_steps == Some(0) {
            return Err(Error::validation("step counts must be positive"));
        }
        Ok(())
    }

    pub fn sample_points(&self) -> Vec<f64> {
        sample_points(self.length, self.samples)
    }
}

pub(crate) fn sample_points(length: f64, samples: usize) -> Vec<f64> {
    let last = samples.max(2) - 1;
    (0..=last).map(|k| if k == last { length } else { length * k as f64 / last as f64 }).collect()
}

/// Biphoton amplitude over signal x idler sites.
#[derive(Clone, Debug, PartialEq)]
pub struct BiphotonState {
    pub psi: DMatrix<Complex64>,
    pub z: f64,
}

impl BiphotonState {
    pub fn vacuum(n: usize) -> Self {
        Self { psi: DMatrix::zeros(n, n), z: 0.0 }
    }

    pub fn n(&self) -> usize {
        self.psi.nrows()
    }

    pub fn norm(&self) -> f64 {
        frobenius(&self.psi)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub method: Method,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub min_step: f64,
    pub max_step: f64,
    /// Source evaluations (split-step) or linear solves (Crank–Nicolson).
    pub evaluations: usize,
    /// Largest relative difference from the tighter certificate run.
    pub certified_error: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<BiphotonState>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn last(&self) -> &BiphotonState {
        self.states.last().expect("trajectories hold at least two snapshots")
    }

    pub fn z(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.z).collect()
    }

    /// Largest per-snapshot relative Frobenius distance to `other`, skipping
    /// snapshots where `other` vanishes.
    pub fn max_relative_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.states.len() != other.states.len() {
            return Err(Error::Dimension { expected: other.states.len(), found: self.states.len() });
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.states.iter().zip(&other.states) {
            let nb = b.norm();
            if nb > 0.0 {
                worst = worst.max(frobenius(&(&a.psi - &b.psi)) / nb);
            } else if a.norm() > 0.0 {
                worst = f64::INFINITY;
            }
        }
        Ok(worst)
    }
}

pub(crate) fn frobenius(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Sample the pump at the configured snapshots.
pub fn propagate_pump(h: &LatticeHamiltonian, input: &PumpField, cfg: &PropagationConfig) -> Result<Vec<PumpField>> {
    cfg.validate()?;
    Ok(PumpPropagator::new(h, input)?.trajectory(cfg.length, cfg.samples))
}

/// Propagate the biphoton state with the method selected in `cfg`.
pub fn propagate_biphoton(
    h_s: &LatticeHamiltonian,
    h_i: &LatticeHamiltonian,
    pump: &PumpDrive,
    src: &NonlinearSource,
    cfg: &PropagationConfig,
) -> Result<Trajectory> {
    match cfg.method {
        Method::SplitStep => propagate_biphoton_split_step(h_s, h_i, pump, src, cfg),
        Method::CrankNicolson => propagate_biphoton_cn(h_s, h_i, pump, src, cfg),
    }
}

pub(crate) fn check_inputs(
    h_s: &LatticeHamiltonian,
    h_i: &LatticeHamiltonian,
    pump: &PumpDrive,
    src: &NonlinearSource,
    cfg: &PropagationConfig,
) -> Result<usize> {
    cfg.validate()?;
    src.validate()?;
    let n = h_s.n();
    for found in [h_i.n(), pump.input.amplitudes.len()] {
        if found != n {
            return Err(Error::Dimension { expected: n, found });
        }
    }
    if let Some(h) = &pump.hamiltonian {
        if h.n() != n {
            return Err(Error::Dimension { expected: n, found: h.n() });
        }
    }
    if pump.input.amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::validation("pump amplitudes must be finite"));
    }
    Ok(n)
}
