//! Correlation maps, eigenmode populations, phase-mismatch predictions,
//! parity selection, Schmidt number, fidelity and intensity similarity.

use std::io::Read;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{BiphotonState, PairPhase};
use crate::error::{Error, Result};
use crate::lattice::{array_index, centered_index};
use crate::spectral::{EigenSystem, Parity};

/// Serialize a matrix as a list of rows.
pub(crate) fn serialize_rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for r in m.row_iter() {
        seq.serialize_element(&r.iter().copied().collect::<Vec<f64>>())?;
    }
    seq.end()
}

/// Orthonormality defect above which a basis is rejected.
const BASIS_TOL: f64 = 1e-8;
/// Below this `|dbeta L|` the phase-matched limit of the population is used.
const SMALL_PHASE: f64 = 1e-6;

/// `|psi|^2` over a square window of centred site labels.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationMap {
    /// Centred labels of the window, ascending.
    pub labels: Vec<i64>,
    /// `intensities[(a, b)]`: signal at `labels[a]`, idler at `labels[b]`.
    #[serde(serialize_with = "serialize_rows")]
    pub intensities: DMatrix<f64>,
}

impl CorrelationMap {
    pub fn total(&self) -> f64 {
        self.intensities.sum()
    }

    /// Label pair of the largest entry.
    pub fn peak(&self) -> (i64, i64) {
        let (mut best, mut at) = (f64::NEG_INFINITY, (0, 0));
        for b in 0..self.labels.len() {
            for a in 0..self.labels.len() {
                if self.intensities[(a, b)] > best {
                    best = self.intensities[(a, b)];
                    at = (self.labels[a], self.labels[b]);
                }
            }
        }
        at
    }
}

/// Crop `|psi|^2` to labels `lo..=hi`; with `normalize` the peak becomes 1.
pub fn correlation_map(state: &BiphotonState, lo: i64, hi: i64, normalize: bool) -> Result<CorrelationMap> {
    let n = state.n();
    if hi < lo {
        return Err(Error::validation(format!("empty window {lo}..={hi}")));
    }
    let (Some(first), Some(_)) = (array_index(lo, n), array_index(hi, n)) else {
        return Err(Error::validation(format!("window {lo}..={hi} exceeds the lattice of {n} sites")));
    };
    let w = (hi - lo + 1) as usize;
    let mut m = DMatrix::from_fn(w, w, |a, b| state.psi[(first + a, first + b)].norm_sqr());
    if normalize {
        let peak = m.max();
        if peak > 0.0 {
            m /= peak;
        }
    }
    Ok(CorrelationMap { labels: (lo..=hi).collect(), intensities: m })
}

/// Populations `B_mn = |<v_s(m)| psi |v_i(n)>|^2` over a mode subset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModePopulationMatrix {
    pub modes: Vec<usize>,
    /// `A`, `B`, ... by ascending propagation constant.
    pub labels: Vec<String>,
    /// Row: signal mode, column: idler mode.
    #[serde(serialize_with = "serialize_rows")]
    pub populations: DMatrix<f64>,
    /// Divided by `||psi||^2`.
    pub normalized: bool,
}

impl ModePopulationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.populations[(i, j)])
    }
}

/// Letter labels `A..Z`, then `M26`, `M27`, ...
pub fn mode_labels(count: usize) -> Vec<String> {
    (0..count)
        .map(|i| if i < 26 { char::from(b'A' + i as u8).to_string() } else { format!("M{i}") })
        .collect()
}

/// Projection `V_s^T psi V_i` onto the full eigenbases.
pub fn modal_amplitudes(state: &BiphotonState, eig_s: &EigenSystem, eig_i: &EigenSystem) -> Result<DMatrix<Complex64>> {
    let n = state.n();
    for e in [eig_s, eig_i] {
        if e.n() != n {
            return Err(Error::Dimension { expected: n, found: e.n() });
        }
        let defect = e.orthonormality_defect();
        if !(defect <= BASIS_TOL) {
            return Err(Error::validation(format!("eigenbasis is not orthonormal (defect {defect:.2e})")));
        }
    }
    let vs = eig_s.vectors.map(|x| Complex64::new(x, 0.0));
    let vi = eig_i.vectors.map(|x| Complex64::new(x, 0.0));
    Ok(vs.transpose() * &state.psi * vi)
}

/// Mode populations over `subset` (default: the interface modes of `eig_s`).
pub fn mode_populations(
    state: &BiphotonState,
    eig_s: &EigenSystem,
    eig_i: &EigenSystem,
    subset: Option<&[usize]>,
    normalize: bool,
) -> Result<ModePopulationMatrix> {
    let phi = modal_amplitudes(state, eig_s, eig_i)?;
    let mut modes = match subset {
        Some(s) => s.to_vec(),
        None => eig_s.interface_modes(),
    };
    modes.sort_unstable();
    modes.dedup();
    if let Some(&bad) = modes.iter().find(|&&m| m >= state.n()) {
        return Err(Error::validation(format!("mode index {bad} out of range")));
    }
    let norm2 = state.norm().powi(2);
    let scale = if normalize && norm2 > 0.0 { 1.0 / norm2 } else { 1.0 };
    let k = modes.len();
    let populations = DMatrix::from_fn(k, k, |a, b| phi[(modes[a], modes[b])].norm_sqr() * scale);
    Ok(ModePopulationMatrix { labels: mode_labels(k), modes, populations, normalized: normalize && norm2 > 0.0 })
}

/// Closed-form population for a constant pump:
/// `|2 drive C / dbeta * sin(dbeta L / 2)|^2`, or `(drive C L)^2` when phase matched.
pub fn analytic_population(c_mn: f64, dbeta: f64, length: f64, drive: f64) -> f64 {
    let x = dbeta * length;
    if x.abs() < SMALL_PHASE {
        // sinc expansion keeps the limit smooth
        let s = 1.0 - x * x / 24.0;
        return (drive * c_mn * length * s).powi(2);
    }
    (2.0 * drive * c_mn / dbeta * (0.5 * x).sin()).powi(2)
}

/// Source overlap `C_mn = v_s(m)[p] v_i(n)[p]` of a single pumped site `p`.
pub fn single_site_overlap(eig_s: &EigenSystem, eig_i: &EigenSystem, m: usize, n: usize, site: usize) -> f64 {
    eig_s.vectors[(site, m)] * eig_i.vectors[(site, n)]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MismatchPrediction {
    pub m: usize,
    pub n: usize,
    pub dbeta: f64,
    /// First node `2 pi / |dbeta|`; `None` when phase matched.
    pub l_zero: Option<f64>,
    /// First maximum `pi / |dbeta|`.
    pub l_max: Option<f64>,
}

/// Mismatch of each mode pair. `dbeta` is the pair's rotation frequency in
/// the chosen frame: `beta_m - beta_n` for [`PairPhase::Difference`],
/// `beta_m + beta_n` for [`PairPhase::Sum`].
pub fn mismatch_predictions(
    eig_s: &EigenSystem,
    eig_i: &EigenSystem,
    pairs: &[(usize, usize)],
    phase: PairPhase,
) -> Result<Vec<MismatchPrediction>> {
    pairs
        .iter()
        .map(|&(m, n)| {
            if m >= eig_s.n() || n >= eig_i.n() {
                return Err(Error::validation(format!("mode pair ({m}, {n}) out of range")));
            }
            let dbeta = phase.pair_frequency(eig_s.values[m], eig_i.values[n]);
            let scale = eig_s.values[m].abs().max(eig_i.values[n].abs());
            let matched = dbeta.abs() <= 1e-12 * scale || dbeta == 0.0;
            Ok(MismatchPrediction {
                m,
                n,
                dbeta,
                l_zero: (!matched).then(|| 2.0 * std::f64::consts::PI / dbeta.abs()),
                l_max: (!matched).then(|| std::f64::consts::PI / dbeta.abs()),
            })
        })
        .collect()
}

/// Pair-generation overlap `eta = sum_n A(n)^2 f_a(n) f_b(n)` of modes `a`
/// and `b` of one eigensystem. Both modes must have a definite mirror parity.
pub fn parity_coupling(eig: &EigenSystem, a: usize, b: usize, pump: &[Complex64]) -> Result<Complex64> {
    let n = eig.n();
    if pump.len() != n {
        return Err(Error::Dimension { expected: n, found: pump.len() });
    }
    for m in [a, b] {
        if m >= n {
            return Err(Error::validation(format!("mode {m} out of range")));
        }
        if eig.tags[m].parity == Parity::Undefined {
            return Err(Error::validation(format!(
                "mode {m} (beta = {:.6e}) has no definite mirror parity",
                eig.values[m]
            )));
        }
    }
    Ok((0..n).map(|r| pump[r] * pump[r] * (eig.vectors[(r, a)] * eig.vectors[(r, b)])).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchmidtReport {
    pub k: f64,
    /// Descending singular values of `psi`.
    pub singular_values: Vec<f64>,
}

/// Schmidt number `1 / sum p_i^2` with `p_i = s_i^2 / sum s^2`.
pub fn schmidt_number(psi: &DMatrix<Complex64>) -> Result<SchmidtReport> {
    let mut s: Vec<f64> = psi.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    schmidt_from_singular_values(s)
}

fn schmidt_from_singular_values(s: Vec<f64>) -> Result<SchmidtReport> {
    let total: f64 = s.iter().map(|x| x * x).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::validation("Schmidt number of a zero state is undefined"));
    }
    let purity: f64 = s.iter().map(|x| (x * x / total).powi(2)).sum();
    Ok(SchmidtReport { k: 1.0 / purity, singular_values: s })
}

/// `|<ref, psi>|^2 / (||ref||^2 ||psi||^2)` with the Frobenius inner product.
pub fn fidelity(state: &DMatrix<Complex64>, reference: &DMatrix<Complex64>) -> Result<f64> {
    if state.shape() != reference.shape() {
        return Err(Error::Dimension { expected: reference.len(), found: state.len() });
    }
    let mut overlap = Complex64::new(0.0, 0.0);
    let (mut na, mut nb) = (0.0, 0.0);
    // one pass so that identical inputs give exactly 1
    for (x, r) in state.iter().zip(reference.iter()) {
        overlap += r.conj() * x;
        na += x.norm_sqr();
        nb += r.norm_sqr();
    }
    if !(na > 0.0 && nb > 0.0) {
        return Err(Error::validation("fidelity needs two nonzero states"));
    }
    Ok((overlap.norm_sqr() / (na * nb)).min(1.0))
}

/// Bhattacharyya coefficient of two non-negative profiles after each is
/// normalized to unit sum.
pub fn intensity_similarity(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension { expected: p.len(), found: q.len() });
    }
    if p.iter().chain(q).any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::validation("intensities must be finite and non-negative"));
    }
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if !(sp > 0.0 && sq > 0.0) {
        return Err(Error::validation("intensity profiles must be nonzero"));
    }
    let bc: f64 = p.iter().zip(q).map(|(a, b)| (a / sp * (b / sq)).sqrt()).sum();
    Ok(bc.min(1.0))
}

/// Signal and idler output powers per waveguide: row and column sums of `|psi|^2`.
pub fn facet_powers(psi: &DMatrix<Complex64>) -> (Vec<f64>, Vec<f64>) {
    let n = psi.nrows();
    let signal = (0..n).map(|i| (0..n).map(|j| psi[(i, j)].norm_sqr()).sum()).collect();
    let idler = (0..n).map(|j| (0..n).map(|i| psi[(i, j)].norm_sqr()).sum()).collect();
    (signal, idler)
}

/// `max_n |P(n) - P(-n)| / max P`.
pub fn mirror_asymmetry(p: &[f64]) -> f64 {
    let peak = p.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    let n = p.len();
    (0..n).map(|i| (p[i] - p[n - 1 - i]).abs()).fold(0.0, f64::max) / peak
}

/// Similarity of a profile with its mirror image.
pub fn mirror_similarity(p: &[f64]) -> Result<f64> {
    let rev: Vec<f64> = p.iter().rev().copied().collect();
    intensity_similarity(p, &rev)
}

#[derive(Debug, Deserialize)]
struct MeasuredRow {
    site_s: i64,
    site_i: i64,
    counts: f64,
}

/// Read a measured coincidence map from CSV with columns
/// `site_s,site_i,counts` (centred labels). Missing pairs count as zero.
pub fn read_measured_map<R: Read>(reader: R) -> Result<CorrelationMap> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for r in rdr.deserialize() {
        let row: MeasuredRow = r?;
        if !(row.counts.is_finite() && row.counts >= 0.0) {
            return Err(Error::validation(format!(
                "counts at ({}, {}) must be non-negative",
                row.site_s, row.site_i
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::validation("measured map is empty"));
    }
    let lo = rows.iter().map(|r| r.site_s.min(r.site_i)).min().unwrap_or(0);
    let hi = rows.iter().map(|r| r.site_s.max(r.site_i)).max().unwrap_or(0);
    let w = (hi - lo + 1) as usize;
    let mut m = DMatrix::zeros(w, w);
    for r in rows {
        m[((r.site_s - lo) as usize, (r.site_i - lo) as usize)] += r.counts;
    }
    Ok(CorrelationMap { labels: (lo..=hi).collect(), intensities: m })
}

/// Approximate Schmidt number of an intensity map, treating `sqrt(I)` as a
/// real amplitude. Phases are unknown, so this is only an estimate.
pub fn schmidt_estimate_from_intensities(map: &CorrelationMap) -> Result<f64> {
    let amp = map.intensities.map(f64::sqrt);
    let mut s: Vec<f64> = amp.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(schmidt_from_singular_values(s)?.k)
}

/// Entanglement and population summary of one state.
#[derive(Clone, Debug, Serialize)]
pub struct MetricsReport {
    pub schmidt_k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    pub signal_mirror_similarity: f64,
    pub signal_mirror_asymmetry: f64,
    pub mode_populations: ModePopulationMatrix,
}

pub fn metrics_report(
    state: &BiphotonState,
    eig_s: &EigenSystem,
    eig_i: &EigenSystem,
    reference: Option<&BiphotonState>,
) -> Result<MetricsReport> {
    let (signal, _) = facet_powers(&state.psi);
    Ok(MetricsReport {
        schmidt_k: schmidt_number(&state.psi)?.k,
        fidelity: reference.map(|r| fidelity(&state.psi, &r.psi)).transpose()?,
        signal_mirror_similarity: mirror_similarity(&signal)?,
        signal_mirror_asymmetry: mirror_asymmetry(&signal),
        mode_populations: mode_populations(state, eig_s, eig_i, None, true)?,
    })
}

/// Centred label of every row of an `n`-site state.
pub fn site_labels(n: usize) -> Vec<i64> {
    (0..n).map(|i| centered_index(i, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hamiltonian, CouplingSequence};
    use crate::spectral::eigensystem;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn schmidt_of_uniform_spectrum() {
        let d = 4;
        let mut m = DMatrix::<Complex64>::zeros(6, 6);
        for i in 0..d {
            m[(i, i)] = Complex64::from_polar(0.7, i as f64);
        }
        assert!((schmidt_number(&m).unwrap().k - d as f64).abs() < 1e-10);
        let u = nalgebra::DVector::from_vec(vec![c(1.0), c(2.0), Complex64::new(0.0, 1.0)]);
        let rank1 = &u * u.transpose();
        assert!((schmidt_number(&rank1).unwrap().k - 1.0).abs() < 1e-10);
        assert!(schmidt_number(&DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn fidelity_basics() {
        let a = DMatrix::from_row_slice(2, 2, &[c(0.3), Complex64::new(0.1, 0.7), c(-0.2), c(1.1)]);
        assert_eq!(fidelity(&a, &a).unwrap(), 1.0);
        let phased = &a * Complex64::from_polar(1.0, 0.9);
        assert!((fidelity(&phased, &a).unwrap() - 1.0).abs() < 1e-14);
        let b = DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        let o = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        assert_eq!(fidelity(&b, &o).unwrap(), 0.0);
    }

    #[test]
    fn similarity_basics() {
        let p = [0.1, 0.5, 0.4];
        assert!((intensity_similarity(&p, &p).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(intensity_similarity(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
        assert!(intensity_similarity(&[-1.0, 1.0], &[1.0, 1.0]).is_err());
        assert_eq!(mirror_asymmetry(&[1.0, 3.0, 1.0]), 0.0);
    }

    #[test]
    fn analytic_population_limits() {
        let (cm, drive) = (0.3, 50.0);
        let db = 2.6025e3;
        let lz = 2.0 * std::f64::consts::PI / db;
        assert!(analytic_population(cm, db, lz, drive) < 1e-20);
        let l = 1e-4;
        assert_eq!(analytic_population(cm, 0.0, l, drive), (drive * cm * l).powi(2));
        // quadratic growth at phase matching
        let r = analytic_population(cm, 0.0, 2.0 * l, drive) / analytic_population(cm, 0.0, l, drive);
        assert!((r - 4.0).abs() < 1e-12);
        // continuity across the small-phase switch
        let a = analytic_population(cm, 0.999e-6 / l, l, drive);
        let b = analytic_population(cm, 1.001e-6 / l, l, drive);
        assert!((a - b).abs() < 1e-12 * a);
        // first maximum sits at pi / dbeta
        let lm = std::f64::consts::PI / db;
        let at = analytic_population(cm, db, lm, drive);
        assert!(at > analytic_population(cm, db, 0.99 * lm, drive));
        assert!(at > analytic_population(cm, db, 1.01 * lm, drive));
    }

    #[test]
    fn mismatch_node_length() {
        let h = build_hamiltonian(&CouplingSequence::new(vec![1.30125e3, 1.30125e3]).unwrap()).unwrap();
        let e = eigensystem(&h);
        let p = mismatch_predictions(&e, &e, &[(0, 0), (2, 0), (0, 2)], PairPhase::Difference).unwrap();
        assert_eq!(p[0].l_zero, None);
        // beta = +-sqrt(2) t
        let db = 2.0 * 2f64.sqrt() * 1.30125e3;
        assert!((p[1].dbeta - db).abs() < 1e-9 * db);
        assert!((p[2].dbeta + db).abs() < 1e-9 * db);
        assert!((p[1].l_zero.unwrap() - 2.0 * std::f64::consts::PI / db).abs() < 1e-15);
    }

    #[test]
    fn node_length_of_quoted_mismatch() {
        let l0 = 2.0 * std::f64::consts::PI / 2.6025e3;
        // 2.414 mm; the quoted value is rounded to 2.42 mm
        assert!((l0 - 2.42e-3).abs() < 5e-3 * 2.42e-3, "{l0}");
    }

    #[test]
    fn populations_of_a_product_state() {
        let h = build_hamiltonian(&CouplingSequence::new(vec![1.0, 0.6, 1.0, 0.6]).unwrap()).unwrap();
        let e = eigensystem(&h);
        let (a, b) = (1, 3);
        let psi = e.vectors.column(a) * e.vectors.column(b).transpose();
        let state = BiphotonState { psi: psi.map(c), z: 0.0 };
        let all: Vec<usize> = (0..5).collect();
        let pop = mode_populations(&state, &e, &e, Some(&all), true).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if (i, j) == (a, b) { 1.0 } else { 0.0 };
                assert!((pop.populations[(i, j)] - want).abs() < 1e-12);
            }
        }
        assert_eq!(pop.labels, ["A", "B", "C", "D", "E"]);
        assert_eq!(pop.get("B", "D"), Some(pop.populations[(1, 3)]));
    }

    #[test]
    fn rejects_broken_basis() {
        let h = build_hamiltonian(&CouplingSequence::new(vec![1.0, 1.0]).unwrap()).unwrap();
        let mut e = eigensystem(&h);
        e.vectors[(0, 0)] += 0.1;
        let state = BiphotonState::vacuum(3);
        assert!(mode_populations(&state, &e, &e, None, false).is_err());
    }

    #[test]
    fn parity_selection_rule() {
        let h = build_hamiltonian(&CouplingSequence::new(vec![1.0, 0.5, 0.5, 1.0]).unwrap()).unwrap();
        let e = eigensystem(&h);
        let mut centre = vec![c(0.0); 5];
        centre[2] = c(1.0);
        let mut off = vec![c(0.0); 5];
        off[1] = c(1.0);
        for a in 0..5 {
            for b in 0..5 {
                let sa = e.tags[a].parity.sign().unwrap();
                let sb = e.tags[b].parity.sign().unwrap();
                let eta = parity_coupling(&e, a, b, &centre).unwrap();
                if sa * sb == -1 {
                    assert!(eta.norm() < 1e-15);
                }
            }
        }
        // off-centre pumping breaks the rule
        let mixed: f64 = (0..5)
            .flat_map(|a| (0..5).map(move |b| (a, b)))
            .filter(|&(a, b)| e.tags[a].parity != e.tags[b].parity)
            .map(|(a, b)| parity_coupling(&e, a, b, &off).unwrap().norm())
            .fold(0.0, f64::max);
        assert!(mixed > 1e-3);
    }

    #[test]
    fn parity_error_names_the_mode() {
        let h = build_hamiltonian(&CouplingSequence::new(vec![1.0, 0.5]).unwrap()).unwrap();
        let e = eigensystem(&h);
        let bad = (0..3).find(|&m| e.tags[m].parity == Parity::Undefined).unwrap();
        let err = parity_coupling(&e, bad, 0, &[c(0.0), c(1.0), c(0.0)]).unwrap_err();
        assert!(err.to_string().contains(&format!("mode {bad}")));
    }

    #[test]
    fn correlation_window() {
        let mut psi = DMatrix::<Complex64>::zeros(7, 7);
        psi[(3, 3)] = c(2.0);
        psi[(4, 2)] = c(1.0);
        let s = BiphotonState { psi, z: 0.0 };
        let m = correlation_map(&s, -1, 1, true).unwrap();
        assert_eq!(m.labels, [-1, 0, 1]);
        assert_eq!(m.peak(), (0, 0));
        assert_eq!(m.intensities[(2, 0)], 0.25);
        assert!(correlation_map(&s, 2, 1, false).is_err());
        assert!(correlation_map(&s, -4, 0, false).is_err());
    }

    #[test]
    fn measured_csv_round_trip() {
        let csv = "site_s,site_i,counts\n-1,-1,4\n0,0,9\n1,1,4\n-1,1,1\n";
        let m = read_measured_map(csv.as_bytes()).unwrap();
        assert_eq!(m.labels, [-1, 0, 1]);
        assert_eq!(m.intensities[(0, 2)], 1.0);
        let k = schmidt_estimate_from_intensities(&m).unwrap();
        assert!(k > 1.0 && k < 3.0);
        assert!(read_measured_map("site_s,site_i,counts\n0,0,-1\n".as_bytes()).is_err());
    }
}
