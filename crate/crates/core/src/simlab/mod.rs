//! Simulation lab: data-generating processes with known population values,
//! oracles for each estimand and a seeded convergence runner.

pub mod dgp;
pub mod dist;
pub mod fixtures;
pub mod oracle;
pub mod paradox;
pub mod rng;
pub mod runner;
pub mod scenarios;

pub use dgp::{oracle_estimand, DgpParams, DgpSpec, Estimand, Generated, PotentialTable};
pub use dist::{Dist, MonotoneMap};
pub use oracle::{OracleMethod, OracleValue};
pub use paradox::{hand_paradox_demo, ParadoxReport};
pub use runner::{convergence_run, ConvergenceRow, ConvergenceTable, Estimator, ReplicationRecord};
pub use scenarios::Scenario;
