//! Hybrid SAT solving: a differentiable gradient phase over a sparse
//! clause-literal matrix encoding proposes confident partial assignments,
//! which seed a portfolio of CDCL workers.

pub mod bench;
pub mod cdcl;
pub mod cnf;
pub mod extract;
pub mod gen;
pub mod grad;
pub mod hybrid;
pub mod matrix;

pub use cnf::{CnfFormula, Literal, Model};
pub use cdcl::{Budget, SolveOutcome, SolveStatus};
pub use extract::PartialAssignment;
pub use grad::{GradSnapshot, OptimizerConfig};
pub use hybrid::{HybridConfig, HybridResult};
pub use matrix::ProblemMatrix;
