use std::f64::consts::PI;

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::Serialize;

use super::bloch::{band_determinant, numeric_gaps};
use crate::error::{Error, Result};
use crate::lattice::UnitCellSpec;

/// Numeric gaps below this fraction of the largest coupling count as closed.
const CLOSED_RTOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct GapEntry {
    /// 1-based index of the lower band.
    pub lower_band: usize,
    pub closed_form: Option<f64>,
    pub numeric: f64,
    pub closed: bool,
    /// `|closed_form - numeric| / max(numeric, tiny)`.
    pub relative_difference: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalCoupling {
    pub label: String,
    pub tau: f64,
    /// False for roots that are not positive couplings.
    pub physical: bool,
    /// True when the formula only holds under a side condition that the cell
    /// does not satisfy.
    pub conditional: bool,
    /// 1-based gaps that close at this coupling.
    pub closes_gaps: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayLength {
    pub label: String,
    pub gaps: Vec<usize>,
    /// In units of the lattice constant's length unit; `None` when diverging
    /// or when the formula is undefined for this cell.
    pub xi: Option<f64>,
    pub diverges: bool,
}

impl DecayLength {
    fn from_kappa(label: &str, gaps: Vec<usize>, kappa: f64, a: f64) -> Self {
        let (xi, diverges) = if kappa.is_nan() {
            (None, false)
        } else if kappa.abs() < 1e-300 {
            (None, true)
        } else {
            (Some(a / kappa.abs()), false)
        };
        Self { label: label.to_string(), gaps, xi, diverges }
    }

    fn from_arcosh(label: &str, gaps: Vec<usize>, arg: f64, a: f64) -> Self {
        if arg < 1.0 {
            return Self { label: label.to_string(), gaps, xi: None, diverges: false };
        }
        Self::from_kappa(label, gaps, arg.acosh(), a)
    }
}

/// Characteristic data of `M6(k) = Q6(k)^dagger Q6(k)` at one wavevector.
#[derive(Clone, Debug, Serialize)]
pub struct CardanoPoint {
    pub k: f64,
    /// `lambda^3 + p lambda^2 + q lambda + r`.
    pub p: f64,
    pub q: f64,
    pub r: f64,
    /// Ascending eigenvalues of `M6`.
    pub eigenvalues: [f64; 3],
    /// Positive band energies `sqrt(lambda)`, ascending.
    pub energies: [f64; 3],
    /// `[2 E0, 2 (E1 - E0), 2 (E2 - E1)]`.
    pub deltas: [f64; 3],
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    #[serde(rename = "J")]
    pub j: usize,
    pub gaps: Vec<GapEntry>,
    pub critical_couplings: Vec<CriticalCoupling>,
    pub decay_lengths: Vec<DecayLength>,
    pub cardano: Vec<CardanoPoint>,
    pub notes: Vec<String>,
}

fn j6_block(t1: f64, t2: f64, t3: f64, tau: f64, k: f64) -> Matrix3<Complex64> {
    let c = |x: f64| Complex64::new(x, 0.0);
    let z = c(0.0);
    Matrix3::new(
        c(t1),
        z,
        Complex64::from_polar(tau, -k),
        c(t2),
        c(t3),
        z,
        z,
        c(t2),
        c(t1),
    )
}

/// Cardano solution of the cubic for `M6(k)`, with `p, q, r` taken from the
/// trace and determinant invariants of the matrix itself.
fn cardano_point(t1: f64, t2: f64, t3: f64, tau: f64, k: f64) -> CardanoPoint {
    let q6 = j6_block(t1, t2, t3, tau, k);
    let m = q6.adjoint() * q6;
    let tr = m.trace().re;
    let tr2 = (m * m).trace().re;
    let det = m.determinant().re;
    let (p, q, r) = (-tr, 0.5 * (tr * tr - tr2), -det);
    let cq = (3.0 * q - p * p) / 9.0;
    let cr = (9.0 * p * q - 27.0 * r - 2.0 * p * p * p) / 54.0;
    let s = (-cq).max(0.0).sqrt();
    let theta = if s > 0.0 { (cr / (s * s * s)).clamp(-1.0, 1.0).acos() } else { 0.0 };
    let mut lam = [0.0; 3];
    for (j, l) in lam.iter_mut().enumerate() {
        *l = -p / 3.0 + 2.0 * s * ((theta + 2.0 * PI * j as f64) / 3.0).cos();
    }
    lam.sort_by(f64::total_cmp);
    let e = lam.map(|l| l.max(0.0).sqrt());
    CardanoPoint {
        k,
        p,
        q,
        r,
        eigenvalues: lam,
        energies: e,
        deltas: [2.0 * e[0], 2.0 * (e[1] - e[0]), 2.0 * (e[2] - e[1])],
    }
}

/// Closure couplings of the `J = 5` cell from the exact condition
/// `t2^2 X^2 - (t1^4 - t1^2 t2^2 + 2 t2^4) X + t1^2 t2^4 = 0`, `X = tau^2`.
///
/// Returns `(outer, inner)`: the smaller root closes gaps 1 and 4, the
/// larger closes gaps 2 and 3.
pub fn j5_exact_closures(t1: f64, t2: f64) -> (f64, f64) {
    let a = t2 * t2;
    let b = -(t1.powi(4) - t1 * t1 * t2 * t2 + 2.0 * t2.powi(4));
    let c = t1 * t1 * t2.powi(4);
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    // Numerically stable pair of roots.
    let big = (-b + disc) / (2.0 * a);
    let small = c / (a * big);
    (small.sqrt(), big.sqrt())
}

/// Decay lengths per the closed forms for `J = 3..6`.
pub fn decay_lengths(cell: &UnitCellSpec) -> Result<Vec<DecayLength>> {
    let t = cell.intracell();
    let tau = cell.intercell();
    let a = cell.lattice_constant();
    Ok(match cell.j() {
        3 => vec![DecayLength::from_kappa("xi", vec![1, 2], (tau / t[0]).ln(), a)],
        4 => {
            let (t1, t2) = (t[0], t[1]);
            vec![
                DecayLength::from_kappa("xi_0", vec![2], (t1 * t1 / (tau * t2)).ln(), a),
                DecayLength::from_kappa("xi_1", vec![1, 3], (t2 / tau).ln(), a),
            ]
        }
        5 => {
            let (t1, t2) = (t[0], t[1]);
            let tau1 = t1 * t2 / (t1 * t1 + t2 * t2).sqrt();
            let tau2 = (t1 * t1 + t2 * t2).sqrt();
            vec![
                DecayLength::from_arcosh("xi_(1)", vec![1, 4], tau / tau1, a),
                DecayLength::from_arcosh("xi_(2)", vec![2, 3], tau2 / tau, a),
            ]
        }
        6 => {
            let (t1, t2, t3) = (t[0], t[1], t[2]);
            vec![
                DecayLength::from_kappa("xi_C", vec![3], (t1 * t1 * t3 / (t2 * t2 * tau)).ln(), a),
                DecayLength::from_arcosh(
                    "xi_pm",
                    vec![1, 2, 4, 5],
                    (tau * tau + t3 * t3 - t1 * t1) / (2.0 * t2 * t3),
                    a,
                ),
            ]
        }
        j => return Err(Error::Unsupported(format!("closed forms exist for J = 3..6, not {j}"))),
    })
}

/// Decay length of an evanescent solution at energy `beta` from the band
/// determinant: `det(beta - H(k)) = A + B cos(ka)`, so `cosh(kappa) = |A/B|`.
///
/// Returns `+inf` for energies inside a band.
pub fn exact_decay_length(cell: &UnitCellSpec, beta: f64) -> f64 {
    let a = cell.lattice_constant();
    let d0 = band_determinant(cell, beta, 0.0);
    let dp = band_determinant(cell, beta, PI / a);
    let (aa, bb) = (0.5 * (d0 + dp), 0.5 * (d0 - dp));
    let ratio = (aa / bb).abs();
    if !ratio.is_finite() {
        return 0.0;
    }
    if ratio <= 1.0 {
        return f64::INFINITY;
    }
    a / ratio.acosh()
}

fn closure(label: &str, tau: f64, conditional: bool, gaps: Vec<usize>) -> CriticalCoupling {
    CriticalCoupling { label: label.to_string(), tau, physical: tau > 0.0 && tau.is_finite(), conditional, closes_gaps: gaps }
}

/// Gap sizes, closure couplings and decay lengths from the closed forms,
/// next to the numeric gaps of the same cell.
pub fn closed_form_report(cell: &UnitCellSpec) -> Result<GapReport> {
    let j = cell.j();
    if !(3..=6).contains(&j) {
        return Err(Error::Unsupported(format!("closed forms exist for J = 3..6, not {j}")));
    }
    let t = cell.intracell();
    let tau = cell.intercell();
    let mut notes = Vec::new();
    let mut cardano = Vec::new();
    let (closed, crit): (Vec<Option<f64>>, Vec<CriticalCoupling>) = match j {
        3 => {
            let t1 = t[0];
            let d = 0.5 * (3.0 * tau - (8.0 * t1 * t1 + tau * tau).sqrt()).abs();
            (vec![Some(d), Some(d)], vec![closure("tau", t1, false, vec![1, 2])])
        }
        4 => {
            let (t1, t2) = (t[0], t[1]);
            let outer = (t2 - tau).abs();
            let inner = (t2 + tau - (4.0 * t1 * t1 + (t2 - tau).powi(2)).sqrt()).abs();
            (
                vec![Some(outer), Some(inner), Some(outer)],
                vec![closure("tau_1", t2, false, vec![1, 3]), closure("tau_0", t1 * t1 / t2, false, vec![2])],
            )
        }
        5 => {
            let (t1, t2) = (t[0], t[1]);
            let conditional = (t1 / t2 - 4.0 / 3.0).abs() > 1e-12;
            if conditional {
                notes.push(format!("tau_(1), tau_(2) assume t1/t2 = 4/3; this cell has t1/t2 = {:.6}", t1 / t2));
            }
            let (outer, inner) = j5_exact_closures(t1, t2);
            notes.push("J = 5 gap sizes are numeric only".to_string());
            (
                vec![None; 4],
                vec![
                    closure("tau_(1)", t1 * t2 / (t1 * t1 + t2 * t2).sqrt(), conditional, vec![1, 4]),
                    closure("tau_(2)", (t1 * t1 + t2 * t2).sqrt(), conditional, vec![2, 3]),
                    closure("tau_(1)_exact", outer, false, vec![1, 4]),
                    closure("tau_(2)_exact", inner, false, vec![2, 3]),
                ],
            )
        }
        _ => {
            let (t1, t2, t3) = (t[0], t[1], t[2]);
            let a = t1 * t1 - t3 * t3;
            let root = (a * a + 4.0 * t2 * t2 * t3 * t3).sqrt();
            let p0 = cardano_point(t1, t2, t3, tau, 0.0);
            let pp = cardano_point(t1, t2, t3, tau, PI);
            // Bands alternate monotonically in cos(k), so each gap is the
            // smaller of its two TRIM separations.
            let sep = |f: &dyn Fn(&[f64; 3]) -> f64| f(&p0.energies).min(f(&pp.energies));
            let outer = sep(&|e| e[2] - e[1]);
            let middle = sep(&|e| e[1] - e[0]);
            let centre = sep(&|e| 2.0 * e[0]);
            cardano.push(p0);
            cardano.push(pp);
            (
                vec![Some(outer), Some(middle), Some(centre), Some(middle), Some(outer)],
                vec![
                    closure("tau_C", t1 * t1 * t3 / (t2 * t2), false, vec![3]),
                    closure("tau_+", (-a + root) / (2.0 * t3), false, vec![1, 5]),
                    closure("tau_-", (-a - root) / (2.0 * t3), false, vec![]),
                ],
            )
        }
    };
    let scale = cell.max_coupling();
    let numeric = numeric_gaps(cell);
    let gaps = numeric
        .iter()
        .zip(closed)
        .map(|(g, c)| GapEntry {
            lower_band: g.lower_band,
            closed_form: c,
            numeric: g.size,
            closed: g.size < CLOSED_RTOL * scale,
            relative_difference: c.map(|c| (c - g.size).abs() / g.size.max(CLOSED_RTOL * scale)),
        })
        .collect();
    Ok(GapReport { j, gaps, critical_couplings: crit, decay_lengths: decay_lengths(cell)?, cardano, notes })
}
