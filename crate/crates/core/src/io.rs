//! JSON run configuration (schema version 1) and CSV exports.

use serde::{Deserialize, Serialize};

use crate::analysis::CorrelationMap;
use crate::dynamics::{NonlinearSource, PropagationConfig, PumpField, PumpSpec, Trajectory};
use crate::ensemble::{Design, EnsembleConfig, EnsembleStats, LatticeSource};
use crate::error::{Error, Result};
use crate::lattice::{
    centered_index, couplings_from_gaps, CouplingMap, CouplingSequence, InterfaceLatticeSpec, PhysicalGeometry,
    UnitCellSpec,
};
use crate::spectral::BandStructure;
use crate::topology::PhasePoint;

pub const SCHEMA_VERSION: u32 = 1;

/// Lattice section. Give exactly one of
/// - `intracell` + `intercell` (couplings in 1/m, optional `J` and `lattice_constant`),
/// - `geometry` (gaps in nm, optional `coupling_map`),
/// - `couplings` (a complete chain, left to right).
///
/// The first two also need `half_cells`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intracell: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intercell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice_constant: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<PhysicalGeometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_map: Option<CouplingMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_cells: Option<usize>,
    #[serde(default)]
    pub interface_offset: usize,
}

/// A lattice section turned into library types.
#[derive(Clone, Debug)]
pub struct ResolvedLattice {
    pub source: LatticeSource,
    /// Unit cell, when the chain was built from one.
    pub cell: Option<UnitCellSpec>,
}

impl LatticeConfig {
    pub fn resolve(&self) -> Result<ResolvedLattice> {
        let by_cell = self.intracell.is_some() || self.intercell.is_some();
        let kinds = [by_cell, self.geometry.is_some(), self.couplings.is_some()];
        if kinds.iter().filter(|&&k| k).count() != 1 {
            return Err(Error::validation(
                "lattice needs exactly one of intracell/intercell, geometry or couplings",
            ));
        }
        if let Some(c) = &self.couplings {
            if self.half_cells.is_some() || self.j.is_some() || self.coupling_map.is_some() {
                return Err(Error::validation("an explicit coupling chain takes no J, half_cells or coupling_map"));
            }
            return Ok(ResolvedLattice { source: LatticeSource::Explicit(CouplingSequence::new(c.clone())?), cell: None });
        }
        let a = self.lattice_constant.unwrap_or(1.0);
        let cell = if let Some(g) = &self.geometry {
            let map = self.coupling_map.unwrap_or_default();
            let c = couplings_from_gaps(g, &map)?;
            UnitCellSpec::with_lattice_constant(c.intracell().to_vec(), c.intercell(), a)?
        } else {
            if self.coupling_map.is_some() {
                return Err(Error::validation("coupling_map only applies to a geometry"));
            }
            let (Some(t), Some(tau)) = (&self.intracell, self.intercell) else {
                return Err(Error::validation("intracell and intercell must be given together"));
            };
            UnitCellSpec::with_lattice_constant(t.clone(), tau, a)?
        };
        if let Some(j) = self.j {
            if j != cell.j() {
                return Err(Error::validation(format!("J = {j} but the cell has {} sites", cell.j())));
            }
        }
        let m = self.half_cells.ok_or_else(|| Error::validation("half_cells is required"))?;
        let spec = InterfaceLatticeSpec::new(cell.clone(), m, self.interface_offset)?;
        Ok(ResolvedLattice { source: LatticeSource::Interface(spec), cell: Some(cell) })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandsConfig {
    #[serde(default = "default_band_points")]
    pub n_k: usize,
}

impl Default for BandsConfig {
    fn default() -> Self {
        Self { n_k: default_band_points() }
    }
}

fn default_band_points() -> usize {
    201
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDiagramConfig {
    pub t_range: (f64, f64),
    pub tau_range: (f64, f64),
    pub resolution: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    #[serde(default = "default_wilson_points")]
    pub n_k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_diagram: Option<PhaseDiagramConfig>,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self { n_k: default_wilson_points(), phase_diagram: None }
    }
}

fn default_wilson_points() -> usize {
    256
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Correlation maps cover labels `-window..=window`.
    #[serde(default = "default_window")]
    pub window: i64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { window: default_window() }
    }
}

fn default_window() -> i64 {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub levels: Vec<f64>,
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Second design for a paired comparison; it shares pump, source and
    /// propagation settings with the main one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_lattice: Option<LatticeConfig>,
}

fn default_source() -> NonlinearSource {
    NonlinearSource { gamma: 120.0, psi0: 1.0, n2: None, a_eff: None, lambda0: None }
}

fn default_propagation() -> PropagationConfig {
    PropagationConfig::new(500e-6)
}

/// Top-level configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub pump: PumpSpec,
    #[serde(default = "default_source")]
    pub source: NonlinearSource,
    #[serde(default = "default_propagation")]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub bands: BandsConfig,
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSection>,
}

impl RunConfig {
    pub fn design(&self) -> Result<Design> {
        self.source.validate()?;
        self.propagation.validate()?;
        Ok(Design {
            lattice: self.lattice.resolve()?.source,
            pump: self.pump.clone(),
            source: self.source.clone(),
            propagation: self.propagation.clone(),
        })
    }

    /// Ensemble configurations: the main design and, if requested, the
    /// comparison design. Ensemble members skip the global-error certificate.
    pub fn ensembles(&self, seed_override: Option<u64>) -> Result<(EnsembleConfig, Option<EnsembleConfig>)> {
        let section = self.ensemble.as_ref().ok_or_else(|| Error::validation("config has no ensemble section"))?;
        let mut design = self.design()?;
        design.propagation.certify = false;
        let seed = seed_override.unwrap_or(section.seed);
        let main = EnsembleConfig { design, levels: section.levels.clone(), realizations: section.realizations, seed };
        main.validate()?;
        let other = match &section.compare_lattice {
            Some(l) => {
                let mut c = main.clone();
                c.design.lattice = l.resolve()?.source;
                Some(c)
            }
            None => None,
        };
        Ok((main, other))
    }
}

/// Parse a configuration, checking `schema_version` before anything else.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let found = value
        .get("schema_version")
        .ok_or_else(|| Error::validation("missing schema_version"))?
        .as_u64()
        .ok_or_else(|| Error::validation("schema_version must be an integer"))?;
    if found != u64::from(SCHEMA_VERSION) {
        return Err(Error::Schema { expected: SCHEMA_VERSION, found: found.min(u64::from(u32::MAX)) as u32 });
    }
    Ok(serde_json::from_value(value)?)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::validation(e.to_string()))
}

/// Columns `k, band_1 .. band_J`.
pub fn band_csv(b: &BandStructure) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["k".to_string()];
    header.extend((1..=b.bands.len()).map(|n| format!("band_{n}")));
    w.write_record(&header)?;
    for (i, k) in b.k.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(b.bands.iter().map(|band| band[i].to_string()));
        w.write_record(&row)?;
    }
    finish(w)
}

/// Columns `t, tau, nu_total, nu_band_1 .. nu_band_J`; band windings are
/// empty where the gap closes.
pub fn phase_diagram_csv(points: &[PhasePoint], j: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string(), "tau".into(), "nu_total".into()];
    header.extend((1..=j).map(|n| format!("nu_band_{n}")));
    w.write_record(&header)?;
    for p in points {
        let mut row = vec![p.t.to_string(), p.tau.to_string(), p.nu_total.to_string()];
        match &p.band_winding {
            Some(b) => row.extend(b.iter().map(|x| x.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), j)),
        }
        w.write_record(&row)?;
    }
    finish(w)
}

/// Columns `z, site, power` with centred site labels.
pub fn pump_csv(fields: &[PumpField]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["z", "site", "power"])?;
    for f in fields {
        let n = f.amplitudes.len();
        for (i, a) in f.amplitudes.iter().enumerate() {
            w.write_record([f.z.to_string(), centered_index(i, n).to_string(), a.norm_sqr().to_string()])?;
        }
    }
    finish(w)
}

/// Columns `snapshot, z, site_s, site_i, intensity`.
pub fn trajectory_csv(t: &Trajectory) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["snapshot", "z", "site_s", "site_i", "intensity"])?;
    for (k, s) in t.states.iter().enumerate() {
        let n = s.n();
        for a in 0..n {
            for b in 0..n {
                w.write_record([
                    k.to_string(),
                    s.z.to_string(),
                    centered_index(a, n).to_string(),
                    centered_index(b, n).to_string(),
                    s.psi[(a, b)].norm_sqr().to_string(),
                ])?;
            }
        }
    }
    finish(w)
}

/// Columns `site_s, site_i, intensity`.
pub fn correlation_csv(m: &CorrelationMap) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["site_s", "site_i", "intensity"])?;
    for (a, la) in m.labels.iter().enumerate() {
        for (b, lb) in m.labels.iter().enumerate() {
            w.write_record([la.to_string(), lb.to_string(), m.intensities[(a, b)].to_string()])?;
        }
    }
    finish(w)
}

/// Columns `level, realization, K, F`; failed realizations leave `K` and `F` empty.
pub fn ensemble_csv(s: &EnsembleStats) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["level", "realization", "K", "F"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in &s.records {
        w.write_record([r.level.to_string(), r.realization.to_string(), opt(r.k), opt(r.f)])?;
    }
    finish(w)
}
