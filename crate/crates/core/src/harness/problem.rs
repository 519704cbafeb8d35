//! Construction of the coupled model problems.

use crate::acceleration::Accelerator;
use crate::coupling::CouplingConfig;
use crate::error::Result;
use crate::fluid::{FluidSurrogate, FluidSurrogateConfig};
use crate::integrator::{Coupled, RunRecord, SimulationConfig};
use crate::predictors::Predictor;
use crate::structure::{StructureMesh, StructureSolver};

use super::config::{ExperimentConfig, StructureParams};

pub type CoolingProblem = Coupled<FluidSurrogate, StructureSolver>;

/// Hot slab (Neumann) cooled by the gas surrogate (Dirichlet). The gas
/// starts in its steady profile for the initial slab temperature.
pub fn build(structure: &StructureParams, fluid: &FluidSurrogateConfig) -> Result<CoolingProblem> {
    let mesh = StructureMesh::uniform(structure.length, structure.elements, structure.order)?;
    let solid = StructureSolver::uniform(mesh, structure.material, structure.initial_temperature)?
        .with_mode(structure.newton);
    let gas = FluidSurrogate::new(*fluid, structure.initial_temperature)?;
    Coupled::new(gas, solid)
}

/// Simulation settings of one (tolerance, method) cell.
pub fn simulation(cfg: &ExperimentConfig, tol: f64, accelerator: Accelerator, predictor: Predictor) -> SimulationConfig {
    let mut sim = SimulationConfig::new(cfg.end_time, cfg.dt0, tol);
    sim.coupling = CouplingConfig { max_iterations: cfg.max_iterations, window: cfg.window, ..CouplingConfig::new(tol) }
        .with_accelerator(accelerator)
        .with_predictor(predictor);
    sim.max_attempts = cfg.max_attempts;
    sim
}

/// Runs the cooling problem once.
pub fn run(cfg: &ExperimentConfig, sim: &SimulationConfig) -> Result<RunRecord> {
    build(&cfg.structure, &cfg.fluid)?.run(sim)
}
