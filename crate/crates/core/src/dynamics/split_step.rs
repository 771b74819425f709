//! Interaction-picture split-step integrator.
//!
//! In the eigenbases of `H_s` and `H_i` the state `phi = V_s^T psi V_i`
//! obeys `i dphi/dz = Omega o phi + g S(z)` with `S = V_s^T diag(A^2) V_i`.
//! Each step applies the exact rotation for half a step, a midpoint source
//! kick, and another half rotation. The scheme is symmetric, so comparing one
//! step against two half steps both estimates the error and allows a
//! Richardson update of fourth order.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{
    check_inputs, frobenius, BiphotonState, IntegratorStats, Method, NonlinearSource, PropagationConfig, PumpDrive,
    PumpPropagator, Trajectory,
};
use crate::error::{Error, Result};
use crate::lattice::LatticeHamiltonian;
use crate::spectral::eigensystem;

struct Frame {
    vs: DMatrix<f64>,
    vs_t: DMatrix<f64>,
    vi: DMatrix<f64>,
    vi_t: DMatrix<f64>,
    omega: DMatrix<f64>,
    pump: PumpPropagator,
    strength: f64,
    // scratch
    a: Vec<Complex64>,
    w: DMatrix<f64>,
    s_re: DMatrix<f64>,
    s_im: DMatrix<f64>,
    evaluations: usize,
}

impl Frame {
    fn n(&self) -> usize {
        self.omega.nrows()
    }

    /// Fill `s_re`, `s_im` with `V_s^T diag(A(z)^2) V_i`.
    fn source(&mut self, z: f64) {
        self.evaluations += 1;
        self.pump.amplitudes_into(z, &mut self.a);
        let n = self.n();
        let a2: Vec<Complex64> = self.a.iter().map(|a| a * a).collect();
        for part in 0..2 {
            for j in 0..n {
                for (i, a) in a2.iter().enumerate() {
                    let f = if part == 0 { a.re } else { a.im };
                    self.w[(i, j)] = f * self.vi[(i, j)];
                }
            }
            let target = if part == 0 { &mut self.s_re } else { &mut self.s_im };
            target.gemm(1.0, &self.vs_t, &self.w, 0.0);
        }
    }

    /// One symmetric step of length `h` from `z`; `rot` holds `exp(-i Omega h / 2)`.
    fn step(&mut self, phi: &DMatrix<Complex64>, z: f64, h: f64, rot: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        self.source(z + 0.5 * h);
        let gh = self.strength * h;
        let mut out = phi.component_mul(rot);
        for ((o, sr), si) in out.iter_mut().zip(self.s_re.iter()).zip(self.s_im.iter()) {
            // -i g h (s_re + i s_im)
            *o += Complex64::new(gh * si, -gh * sr);
        }
        out.component_mul_assign(rot);
        out
    }

    fn rotation(&self, h: f64) -> DMatrix<Complex64> {
        self.omega.map(|w| Complex64::from_polar(1.0, -w * h))
    }

    fn to_sites(&self, phi: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let re = phi.map(|x| x.re);
        let im = phi.map(|x| x.im);
        let re = &self.vs * re * &self.vi_t;
        let im = &self.vs * im * &self.vi_t;
        re.zip_map(&im, Complex64::new)
    }
}

/// Split-step propagation with adaptive step doubling.
///
/// The local error estimate of each step must stay below
/// `tolerance * ||phi||`. With `cfg.certify` the run is repeated at
/// `tolerance / 100` and the largest snapshot difference is reported in
/// [`IntegratorStats::certified_error`]; exceeding `cfg.global_target` is a
/// convergence error.
pub fn propagate_biphoton_split_step(
    h_s: &LatticeHamiltonian,
    h_i: &LatticeHamiltonian,
    pump: &PumpDrive,
    src: &NonlinearSource,
    cfg: &PropagationConfig,
) -> Result<Trajectory> {
    check_inputs(h_s, h_i, pump, src, cfg)?;
    let es = eigensystem(h_s);
    let ei = eigensystem(h_i);
    let propagator = pump.propagator()?;
    let sign = cfg.pair_phase.sign();
    let n = es.n();
    let omega = DMatrix::from_fn(n, n, |m, k| es.values[m] + sign * ei.values[k]);
    let mut frame = Frame {
        vs_t: es.vectors.transpose(),
        vs: es.vectors,
        vi_t: ei.vectors.transpose(),
        vi: ei.vectors,
        omega,
        pump: propagator,
        strength: src.strength(),
        a: vec![Complex64::new(0.0, 0.0); n],
        w: DMatrix::zeros(n, n),
        s_re: DMatrix::zeros(n, n),
        s_im: DMatrix::zeros(n, n),
        evaluations: 0,
    };
    let mut traj = integrate(&mut frame, cfg, cfg.tolerance)?;
    if cfg.certify {
        let fine = integrate(&mut frame, cfg, cfg.tolerance / 100.0)?;
        let err = traj.max_relative_distance(&fine)?;
        traj.stats.certified_error = Some(err);
        traj.stats.evaluations = frame.evaluations;
        if err > cfg.global_target {
            return Err(Error::Convergence(format!(
                "global error estimate {err:.3e} exceeds target {:.1e} at tolerance {:.1e}",
                cfg.global_target, cfg.tolerance
            )));
        }
    }
    Ok(traj)
}

fn integrate(frame: &mut Frame, cfg: &PropagationConfig, tol: f64) -> Result<Trajectory> {
    let n = frame.n();
    let samples = cfg.sample_points();
    let length = cfg.length;
    let w_max = frame.omega.iter().fold(0.0f64, |a, b| a.max(b.abs())) + 2.0 * frame.pump.max_frequency();
    let mut h = (length / (samples.len() - 1) as f64).min(0.1 / w_max.max(f64::MIN_POSITIVE));
    let h_floor = 1e-14 * length;

    let mut phi = DMatrix::<Complex64>::zeros(n, n);
    let mut z = 0.0;
    let mut states = vec![BiphotonState::vacuum(n)];
    let mut stats = IntegratorStats {
        method: Method::SplitStep,
        min_step: f64::INFINITY,
        ..Default::default()
    };
    let evaluations_before = frame.evaluations;

    for &target in &samples[1..] {
        while z < target {
            if stats.accepted_steps + stats.rejected_steps >= cfg.max_steps {
                return Err(Error::Convergence(format!(
                    "step budget {} exhausted at z = {z:.6e} of {length:.6e} (last step {h:.3e})",
                    cfg.max_steps
                )));
            }
            let remaining = target - z;
            let landing = h >= remaining * (1.0 - 1e-12);
            let h_try = if landing { remaining } else { h };

            let rot_half = frame.rotation(0.5 * h_try);
            let rot_quarter = frame.rotation(0.25 * h_try);
            let big = frame.step(&phi, z, h_try, &rot_half);
            let mid = frame.step(&phi, z, 0.5 * h_try, &rot_quarter);
            let fine = frame.step(&mid, z + 0.5 * h_try, 0.5 * h_try, &rot_quarter);

            let diff = &fine - &big;
            let err = frobenius(&diff) / 3.0;
            let scale = frobenius(&fine).max(frobenius(&phi));
            let allowed = tol * scale;
            if err <= allowed {
                phi = fine + diff / Complex64::new(3.0, 0.0);
                z = if landing { target } else { z + h_try };
                stats.accepted_steps += 1;
                stats.min_step = stats.min_step.min(h_try);
                stats.max_step = stats.max_step.max(h_try);
            } else {
                stats.rejected_steps += 1;
            }
            let factor = if err == 0.0 { 4.0 } else { (0.9 * (allowed / err).cbrt()).clamp(0.2, 4.0) };
            let proposal = h_try * factor;
            h = if landing && err <= allowed { proposal.max(h) } else { proposal };
            if h < h_floor {
                return Err(Error::Convergence(format!("step size underflow at z = {z:.6e}")));
            }
        }
        states.push(BiphotonState { psi: frame.to_sites(&phi), z: target });
    }
    if stats.accepted_steps == 0 {
        stats.min_step = 0.0;
    }
    stats.evaluations = frame.evaluations - evaluations_before;
    Ok(Trajectory { states, stats })
}
