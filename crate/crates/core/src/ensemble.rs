//! Disorder ensembles: Schmidt number and fidelity statistics over random
//! coupling realizations, and paired comparisons of two designs.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{fidelity, schmidt_number};
use crate::dynamics::{propagate_biphoton, BiphotonState, NonlinearSource, PropagationConfig, PumpSpec, Trajectory};
use crate::error::{Error, Result};
use crate::lattice::{
    apply_factors, build_hamiltonian, build_interface_sequence, disorder_factors, CouplingSequence, DisorderSpec,
    InterfaceLatticeSpec,
};

/// Where the coupling chain of a design comes from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeSource {
    Interface(InterfaceLatticeSpec),
    /// A hand-written chain, e.g. one with a detuned defect.
    Explicit(CouplingSequence),
}

impl LatticeSource {
    pub fn sequence(&self) -> CouplingSequence {
        match self {
            LatticeSource::Interface(spec) => build_interface_sequence(spec),
            LatticeSource::Explicit(seq) => seq.clone(),
        }
    }
}

/// Everything needed for one biphoton run. Pump, signal and idler share the
/// same chain and therefore the same disorder profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Design {
    pub lattice: LatticeSource,
    pub pump: PumpSpec,
    pub source: NonlinearSource,
    pub propagation: PropagationConfig,
}

impl Design {
    /// Propagate the design with optional bond disorder.
    pub fn run(&self, disorder: Option<&DisorderSpec>) -> Result<Trajectory> {
        let clean = self.lattice.sequence();
        let seq = match disorder {
            Some(d) => apply_factors(&clean, &disorder_factors(clean.values.len(), d))?,
            None => clean,
        };
        let h = build_hamiltonian(&seq)?;
        let drive = self.pump.drive(&h)?;
        propagate_biphoton(&h, &h, &drive, &self.source, &self.propagation)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub design: Design,
    /// Relative disorder levels `D`.
    pub levels: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::validation("realizations must be at least 1"));
        }
        if self.levels.is_empty() {
            return Err(Error::validation("at least one disorder level is required"));
        }
        if let Some(d) = self.levels.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::validation(format!("disorder level {d} must be >= 0")));
        }
        self.design.propagation.validate()
    }

    /// Disorder of realization `r` at level index `li`.
    pub fn disorder(&self, li: usize, r: usize) -> DisorderSpec {
        DisorderSpec { level: self.levels[li], seed: self.seed, realization_index: r as u64, stream: li as u64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RealizationRecord {
    pub level_index: usize,
    pub level: f64,
    pub realization: usize,
    pub k: Option<f64>,
    pub f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Mean, sample standard deviation and range.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// Welford accumulation in the given order.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut count, mut mean, mut m2) = (0usize, 0.0, 0.0);
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in values {
            count += 1;
            let d = x - mean;
            mean += d / count as f64;
            m2 += d * (x - mean);
            min = min.min(x);
            max = max.max(x);
        }
        if count == 0 {
            return Self { count, mean: f64::NAN, std: f64::NAN, min: f64::NAN, max: f64::NAN };
        }
        let std = if count > 1 { (m2 / (count - 1) as f64).sqrt() } else { 0.0 };
        Self { count, mean, std, min, max }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelStats {
    pub level: f64,
    pub failures: usize,
    pub k: Summary,
    pub f: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub reference_k: f64,
    pub levels: Vec<LevelStats>,
    pub records: Vec<RealizationRecord>,
}

fn final_state(t: &Trajectory) -> &BiphotonState {
    t.last()
}

/// Propagate every realization at every level and compare each output with
/// the disorder-free output of the same design.
///
/// Realizations run in parallel but each draws from its own
/// `(seed, level index, realization)` stream and results are collected in
/// order, so the statistics do not depend on scheduling. Failed propagations
/// are recorded and left out of the statistics.
pub fn run_disorder_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleStats> {
    cfg.validate()?;
    let reference = cfg.design.run(None)?;
    let psi_ref = &final_state(&reference).psi;
    let reference_k = schmidt_number(psi_ref)?.k;

    let tasks: Vec<(usize, usize)> =
        (0..cfg.levels.len()).flat_map(|li| (0..cfg.realizations).map(move |r| (li, r))).collect();
    let records: Vec<RealizationRecord> = tasks
        .par_iter()
        .map(|&(li, r)| {
            let d = cfg.disorder(li, r);
            let outcome = cfg.design.run(Some(&d)).and_then(|t| {
                let psi = &final_state(&t).psi;
                Ok((schmidt_number(psi)?.k, fidelity(psi, psi_ref)?))
            });
            let (k, f, error) = match outcome {
                Ok((k, f)) => (Some(k), Some(f), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            RealizationRecord { level_index: li, level: d.level, realization: r, k, f, error }
        })
        .collect();

    let levels = (0..cfg.levels.len())
        .map(|li| {
            let rows: Vec<&RealizationRecord> = records.iter().filter(|r| r.level_index == li).collect();
            LevelStats {
                level: cfg.levels[li],
                failures: rows.iter().filter(|r| r.error.is_some()).count(),
                k: Summary::of(rows.iter().filter_map(|r| r.k)),
                f: Summary::of(rows.iter().filter_map(|r| r.f)),
            }
        })
        .collect();
    Ok(EnsembleStats { reference_k, levels, records })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairedLevel {
    pub level: f64,
    /// Realizations where both designs succeeded.
    pub pairs: usize,
    /// `K_a - K_b` per realization.
    pub delta_k: Summary,
    /// `F_a - F_b` per realization.
    pub delta_f: Summary,
    pub a: LevelStats,
    pub b: LevelStats,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DesignComparison {
    pub reference_k: (f64, f64),
    pub levels: Vec<PairedLevel>,
}

/// Run two ensembles on identical disorder streams and pair the outcomes.
pub fn compare_designs(a: &EnsembleConfig, b: &EnsembleConfig) -> Result<DesignComparison> {
    check_pairable(a, b)?;
    let sa = run_disorder_ensemble(a)?;
    let sb = run_disorder_ensemble(b)?;
    pair_ensembles(&sa, &sb)
}

fn check_pairable(a: &EnsembleConfig, b: &EnsembleConfig) -> Result<()> {
    if a.levels != b.levels || a.seed != b.seed || a.realizations != b.realizations {
        return Err(Error::validation("paired designs need the same levels, seed and realization count"));
    }
    Ok(())
}

/// Pair two finished ensembles realization by realization. Both must come
/// from configurations with the same levels, seed and realization count.
pub fn pair_ensembles(sa: &EnsembleStats, sb: &EnsembleStats) -> Result<DesignComparison> {
    let same_grid = sa.levels.len() == sb.levels.len()
        && sa.records.len() == sb.records.len()
        && sa.levels.iter().zip(&sb.levels).all(|(x, y)| x.level == y.level)
        && sa.records.iter().zip(&sb.records).all(|(x, y)| (x.level_index, x.realization) == (y.level_index, y.realization));
    if !same_grid {
        return Err(Error::validation("ensembles cover different levels or realizations"));
    }
    let levels = (0..sa.levels.len())
        .map(|li| {
            let both: Vec<(f64, f64, f64, f64)> = sa
                .records
                .iter()
                .zip(&sb.records)
                .filter(|(x, _)| x.level_index == li)
                .filter_map(|(x, y)| Some((x.k?, y.k?, x.f?, y.f?)))
                .collect();
            PairedLevel {
                level: sa.levels[li].level,
                pairs: both.len(),
                delta_k: Summary::of(both.iter().map(|p| p.0 - p.1)),
                delta_f: Summary::of(both.iter().map(|p| p.2 - p.3)),
                a: sa.levels[li].clone(),
                b: sb.levels[li].clone(),
            }
        })
        .collect();
    Ok(DesignComparison { reference_k: (sa.reference_k, sb.reference_k), levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::UnitCellSpec;

    fn small_design() -> Design {
        let cell = UnitCellSpec::new(vec![3.0e4, 3.0e4], 6.0e4).unwrap();
        let mut propagation = PropagationConfig::new(2e-4);
        propagation.samples = 2;
        propagation.certify = false;
        Design {
            lattice: LatticeSource::Interface(InterfaceLatticeSpec::new(cell, 3, 0).unwrap()),
            pump: PumpSpec::default(),
            source: NonlinearSource::new(120.0).unwrap(),
            propagation,
        }
    }

    fn config(levels: Vec<f64>) -> EnsembleConfig {
        EnsembleConfig { design: small_design(), levels, realizations: 4, seed: 11 }
    }

    #[test]
    fn clean_level_is_exact() {
        let s = run_disorder_ensemble(&config(vec![0.0, 0.1])).unwrap();
        let clean = &s.levels[0];
        assert_eq!(clean.f.mean, 1.0);
        assert_eq!(clean.f.std, 0.0);
        assert_eq!(clean.k.std, 0.0);
        assert_eq!(clean.k.mean, s.reference_k);
        assert!(s.levels[1].f.mean < 1.0);
        assert_eq!(s.records.len(), 8);
    }

    #[test]
    fn rerun_is_identical() {
        let c = config(vec![0.05]);
        assert_eq!(run_disorder_ensemble(&c).unwrap(), run_disorder_ensemble(&c).unwrap());
    }

    #[test]
    fn paired_swap_negates() {
        let a = config(vec![0.1]);
        let mut b = config(vec![0.1]);
        b.design.pump.propagate = false;
        let ab = compare_designs(&a, &b).unwrap();
        let ba = compare_designs(&b, &a).unwrap();
        assert_eq!(ab.levels[0].delta_k.mean, -ba.levels[0].delta_k.mean);
        assert_eq!(ab.levels[0].delta_f.mean, -ba.levels[0].delta_f.mean);
        let same = compare_designs(&a, &a).unwrap();
        assert_eq!(same.levels[0].delta_k.mean, 0.0);
        assert_eq!(same.levels[0].delta_f.max, 0.0);
        let mut c = config(vec![0.2]);
        c.seed = 11;
        assert!(compare_designs(&a, &c).is_err());
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.5, 2.25, -0.5, 4.0, 3.125];
        let s = Summary::of(xs);
        let mean = xs.iter().sum::<f64>() / 5.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!((s.mean - mean).abs() < 1e-15);
        assert!((s.std - var.sqrt()).abs() < 1e-14);
        assert_eq!((s.min, s.max, s.count), (-0.5, 4.0, 5));
    }
}
