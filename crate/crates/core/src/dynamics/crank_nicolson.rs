//! Fixed-step Crank–Nicolson integrator on the vectorized biphoton state.
//!
//! `psi` is flattened row-major (`p = i N + j`), which turns the two-sided
//! operator `H_s psi + s psi H_i` into a banded matrix of half-bandwidth `N`.
//! The implicit system is factorized once by banded LU. No eigendecomposition
//! is used anywhere, so this path is independent of the split-step solver.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{
    check_inputs, BiphotonState, IntegratorStats, Method, NonlinearSource, PropagationConfig, PumpDrive, Trajectory,
};
use crate::error::{Error, Result};
use crate::lattice::LatticeHamiltonian;

const PIVOT_FLOOR: f64 = 1e-12;

/// Row-window band storage of a square complex matrix.
struct BandLu {
    n: usize,
    b: usize,
    data: Vec<Complex64>,
}

impl BandLu {
    fn width(&self) -> usize {
        2 * self.b + 1
    }

    fn idx(&self, row: usize, col: usize) -> usize {
        row * self.width() + col + self.b - row
    }

    /// In-place LU without pivoting.
    fn factorize(&mut self) -> Result<()> {
        let (n, b) = (self.n, self.b);
        for k in 0..n {
            let piv = self.data[self.idx(k, k)];
            if !(piv.norm() > PIVOT_FLOOR) || !piv.re.is_finite() || !piv.im.is_finite() {
                return Err(Error::LinearSolve(format!("pivot {piv} at row {k}")));
            }
            let last = (k + b).min(n - 1);
            let k_row = self.idx(k, k + 1);
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let l = self.data[ik] / piv;
                self.data[ik] = l;
                if l == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let i_row = self.idx(i, k + 1);
                for c in 0..last - k {
                    let u = self.data[k_row + c];
                    self.data[i_row + c] -= l * u;
                }
            }
        }
        Ok(())
    }

    fn solve(&self, x: &mut [Complex64]) {
        let (n, b) = (self.n, self.b);
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let row = self.idx(i, lo);
            let mut acc = x[i];
            for (c, xc) in x[lo..i].iter().enumerate() {
                acc -= self.data[row + c] * xc;
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + b).min(n - 1);
            let row = self.idx(i, i + 1);
            let mut acc = x[i];
            for (c, xc) in x[i + 1..=hi].iter().enumerate() {
                acc -= self.data[row + c] * xc;
            }
            x[i] = acc / self.data[self.idx(i, i)];
        }
    }
}

/// Nearest-neighbour couplings of a chain; `None` for a constant pump.
fn chain(h: Option<&LatticeHamiltonian>) -> Option<Vec<f64>> {
    h.map(|h| h.couplings().to_vec())
}

/// `out = (I + c H) x` for a tridiagonal `H` with zero diagonal.
fn tri_apply(t: &[f64], c: Complex64, x: &[Complex64], out: &mut [Complex64]) {
    let n = x.len();
    for i in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        if i > 0 {
            acc += x[i - 1] * t[i - 1];
        }
        if i + 1 < n {
            acc += x[i + 1] * t[i];
        }
        out[i] = x[i] + c * acc;
    }
}

/// Solve `(I + c H) y = r` for tridiagonal `H` (Thomas algorithm).
fn tri_solve(t: &[f64], c: Complex64, r: &mut [Complex64]) -> Result<()> {
    let n = r.len();
    let mut sup = vec![Complex64::new(0.0, 0.0); n];
    let mut diag = Complex64::new(1.0, 0.0);
    if n > 1 {
        sup[0] = c * t[0] / diag;
    }
    r[0] /= diag;
    for i in 1..n {
        let low = c * t[i - 1];
        diag = Complex64::new(1.0, 0.0) - low * sup[i - 1];
        if !(diag.norm() > PIVOT_FLOOR) {
            return Err(Error::LinearSolve(format!("tridiagonal pivot {diag} at row {i}")));
        }
        if i + 1 < n {
            sup[i] = c * t[i] / diag;
        }
        r[i] = (r[i] - low * r[i - 1]) / diag;
    }
    for i in (0..n - 1).rev() {
        let next = r[i + 1];
        r[i] -= sup[i] * next;
    }
    Ok(())
}

/// Crank–Nicolson propagation with step `cn_theta / omega_max`, where
/// `omega_max` is the row-sum bound of `H_s` plus that of `H_i`, or with
/// `cn_steps` equal steps if set. The source uses the trapezoidal rule and
/// the pump is advanced by its own Crank–Nicolson recursion.
pub fn propagate_biphoton_cn(
    h_s: &LatticeHamiltonian,
    h_i: &LatticeHamiltonian,
    pump: &PumpDrive,
    src: &NonlinearSource,
    cfg: &PropagationConfig,
) -> Result<Trajectory> {
    let n = check_inputs(h_s, h_i, pump, src, cfg)?;
    let intervals = cfg.samples - 1;
    let omega_max = h_s.row_sum_bound() + h_i.row_sum_bound();
    let per_interval = match cfg.cn_steps {
        Some(s) => s.div_ceil(intervals),
        None => ((cfg.length * omega_max / cfg.cn_theta) / intervals as f64).ceil().max(1.0) as usize,
    };
    let total = per_interval * intervals;
    if total > cfg.max_steps {
        return Err(Error::Convergence(format!(
            "Crank–Nicolson needs {total} steps, budget is {}",
            cfg.max_steps
        )));
    }
    let h = cfg.length / total as f64;
    let alpha = Complex64::new(0.0, 0.5 * h);
    let sign = cfg.pair_phase.sign();
    let ts = h_s.couplings();
    let ti = h_i.couplings();

    let dim = n * n;
    let mut lu = BandLu { n: dim, b: n, data: vec![Complex64::new(0.0, 0.0); dim * (2 * n + 1)] };
    for i in 0..n {
        for j in 0..n {
            let p = i * n + j;
            let d = lu.idx(p, p);
            lu.data[d] = Complex64::new(1.0, 0.0);
            if i > 0 {
                let e = lu.idx(p, p - n);
                lu.data[e] = alpha * ts[i - 1];
            }
            if i + 1 < n {
                let e = lu.idx(p, p + n);
                lu.data[e] = alpha * ts[i];
            }
            if j > 0 {
                let e = lu.idx(p, p - 1);
                lu.data[e] = alpha * (sign * ti[j - 1]);
            }
            if j + 1 < n {
                let e = lu.idx(p, p + 1);
                lu.data[e] = alpha * (sign * ti[j]);
            }
        }
    }
    lu.factorize()?;

    let pump_chain = chain(pump.hamiltonian.as_ref());
    let mut a: Vec<Complex64> = pump.input.amplitudes.iter().copied().collect();
    let mut a_next = a.clone();
    let g = src.strength();

    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    let mut rhs = vec![Complex64::new(0.0, 0.0); dim];
    let mut states = vec![BiphotonState::vacuum(n)];
    let mut z = 0.0;
    let kick = Complex64::new(0.0, -0.5 * h * g);

    for k in 1..=intervals {
        for _ in 0..per_interval {
            if let Some(t) = &pump_chain {
                tri_apply(t, -alpha, &a, &mut a_next);
                tri_solve(t, alpha, &mut a_next)?;
            }
            // rhs = (I - alpha L) psi
            for i in 0..n {
                for j in 0..n {
                    let p = i * n + j;
                    let mut acc = Complex64::new(0.0, 0.0);
                    if i > 0 {
                        acc += psi[p - n] * ts[i - 1];
                    }
                    if i + 1 < n {
                        acc += psi[p + n] * ts[i];
                    }
                    let mut side = Complex64::new(0.0, 0.0);
                    if j > 0 {
                        side += psi[p - 1] * ti[j - 1];
                    }
                    if j + 1 < n {
                        side += psi[p + 1] * ti[j];
                    }
                    rhs[p] = psi[p] - alpha * (acc + side * sign);
                }
            }
            for i in 0..n {
                let s = a[i] * a[i] + a_next[i] * a_next[i];
                rhs[i * (n + 1)] += kick * s;
            }
            lu.solve(&mut rhs);
            std::mem::swap(&mut psi, &mut rhs);
            if pump_chain.is_some() {
                std::mem::swap(&mut a, &mut a_next);
            }
        }
        z = if k == intervals { cfg.length } else { cfg.length * k as f64 / intervals as f64 };
        states.push(BiphotonState { psi: DMatrix::from_row_slice(n, n, &psi), z });
    }
    debug_assert_eq!(z, cfg.length);

    let stats = IntegratorStats {
        method: Method::CrankNicolson,
        accepted_steps: total,
        rejected_steps: 0,
        min_step: h,
        max_step: h,
        evaluations: total,
        certified_error: None,
    };
    Ok(Trajectory { states, stats })
}
