//! Simulation and analysis of signed charges on a line that repel or
//! attract through a logarithmic potential and annihilate on contact,
//! together with the level-set view of the same system and a solver for
//! its continuum limit.

pub mod exec;
pub mod harness;
pub mod hjsolver;
pub mod integrator;
pub mod io;
pub mod levelset;
pub mod measures;
pub mod moments;
pub mod numeric;
pub mod particles;

pub use exec::Execution;
pub use integrator::{evolve, EventRecord, IntegratorConfig, IntegratorError, Trajectory};
pub use moments::{moment_distance, moments, MomentVector};
pub use particles::{ParticleError, ParticleState};
