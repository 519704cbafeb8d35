//! Partitioned Dirichlet-Neumann coupling for thermal fluid-structure
//! interaction under adaptive SDIRK2 time integration, with fixed-point
//! acceleration and time-history interface predictors.

pub mod acceleration;
pub mod coupling;
pub mod error;
pub mod fluid;
pub mod harness;
pub mod integrator;
pub mod linalg;
pub mod ode;
pub mod predictors;
pub mod structure;
pub mod time;

pub use acceleration::{Accelerator, IterationHistory};
pub use coupling::{gauss_seidel_stage_solve, gauss_seidel_stage_trace, CouplingConfig, InterfaceVector, Subsolver};
pub use error::{FsiError, Result};
pub use fluid::{FluidSurrogate, FluidSurrogateConfig, FluxOrder};
pub use integrator::{Coupled, RunRecord, SimulationConfig, StepLog};
pub use predictors::{Predictor, TimeHistory};
pub use structure::{Material, NewtonMode, StructureMesh, StructureSolver};
pub use time::{SdirkTableau, StageContext, StepController};
