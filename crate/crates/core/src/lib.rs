//! Simulation and analysis of one-dimensional topological waveguide
//! superlattices: band structures and invariants, pump and biphoton
//! propagation, entanglement measures and disorder ensembles.

pub mod analysis;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod lattice;
pub mod rng;
pub mod spectral;
pub mod topology;

pub use error::{Error, Result};
pub use analysis::{CorrelationMap, ModePopulationMatrix, SchmidtReport};
pub use dynamics::{BiphotonState, NonlinearSource, PropagationConfig, PumpField, PumpSpec, Trajectory};
pub use ensemble::{Design, EnsembleConfig, EnsembleStats, LatticeSource};
pub use io::RunConfig;
pub use lattice::{
    CouplingMap, CouplingSequence, DisorderSpec, InterfaceLatticeSpec, LatticeHamiltonian, PhysicalGeometry,
    UnitCellSpec,
};
pub use spectral::{BandStructure, EigenSystem, GapReport};
pub use topology::InvariantReport;
