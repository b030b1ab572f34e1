//! Experiment harness for `inexact-opt`: seeded instances ([`generate`]), JSON
//! suite configs and reports ([`config`]), the parallel runner ([`suite`]) and CSV
//! trace output ([`emit`]).

pub mod config;
pub mod emit;
pub mod error;
pub mod generate;
pub mod suite;

pub use config::{Check, RunConfig, RunReport, SolverDescriptor, SuiteConfig};
pub use error::{BenchError, Result};
pub use generate::{generate_problem, GeneratedProblem, Instance, ProblemKind};
pub use suite::{execute, run_suite, RunOptions, SuiteSummary};
