//! Stochastic coordinate descent for L1-regularized loss minimization.
//!
//! The crate provides the sequential solver (Shooting, plus a Newton
//! line-search variant for logistic loss), its parallel counterpart Shotgun
//! in two flavours (an exact synchronous simulator and a lock-free
//! asynchronous multicore solver), a power-iteration estimate of the safe
//! amount of parallelism, pathwise λ continuation, a benchmark harness, and
//! an SGD baseline.
//!
//! ```no_run
//! use shotgun::{matrix_io, objective::{Loss, Problem}, solver_seq::{solve_sequential, SeqConfig}};
//!
//! let ds = matrix_io::load_normalized(
//!     "data.svm".as_ref(),
//!     &matrix_io::Format::Svmlight { num_features: None },
//!     Loss::Squared,
//! )?;
//! let problem = Problem::new(&ds.matrix, &ds.labels, Loss::Squared, 0.5)?;
//! let result = solve_sequential(&problem, &SeqConfig::default())?;
//! println!("F = {} after {} updates", result.objective, result.updates);
//! # Ok::<(), shotgun::Error>(())
//! ```

pub mod driver;
pub mod matrix_io;
pub mod objective;
pub mod sgd;
pub mod solver_par;
pub mod solver_seq;
pub mod spectral;
pub mod synthetic;
pub mod trace;

mod error;

pub use error::Error;
pub use objective::{Loss, Problem, SolverState};
pub use trace::{SolveResult, Termination, TraceRow};
