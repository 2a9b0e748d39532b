//! Decoherence functionals and the hierarchy of consistency conditions for
//! quantum histories: decoherence, partial decoherence, consistency and
//! linear positivity.
//!
//! A [`Scenario`] bundles a state with a [`HistorySet`] over a [`Schedule`] of
//! Heisenberg-picture projector families. From it the crate computes the
//! decoherence functional, classifies it against the four conditions, runs the
//! Diósi independence tests and phase-robustness checks, builds records for
//! decoherent sets, and searches random scenarios for region witnesses.
//!
//! ```
//! use histlab::{fine_grained_set, ProjectorFamily, Schedule, Scenario, State, Unitary};
//! use histlab::linalg::{c, CMatrix, CVector};
//!
//! let z = ProjectorFamily::validate(
//!     vec![
//!         CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])),
//!         CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)])),
//!     ],
//!     None,
//!     1e-10,
//! )
//! .unwrap();
//! let s = Schedule::new(vec![0.0, 1.0], vec![Unitary::identity(2), Unitary::hadamard()], vec![z.clone(), z]).unwrap();
//! let psi = State::from_pure(CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]), 1e-10).unwrap();
//! let sc = Scenario::new("z-then-x", fine_grained_set(&s), psi).unwrap();
//! assert!(sc.classify(1e-8).unwrap().flags.decoherent);
//! ```

pub mod conditions;
pub mod diosi;
pub mod error;
pub mod exec;
pub mod explorer;
pub mod hilbert;
pub mod history;
pub mod io;
pub mod linalg;
pub mod records;
pub mod scenario_file;

/// Construction tolerance for projectors, unitaries, states and sum rules.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Threshold applied when classifying a decoherence functional.
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-8;

pub use conditions::{
    classify, decoherence_functional, evaluate, interference_with_negation, quasi_probabilities, Condition,
    ConditionCounts, ConditionFlags, ConditionReport, ConditionResiduals, DecoherenceFunctional, VennRegion,
};
pub use diosi::{
    compose, forward_diosi_check, reverse_diosi_check, robustness_check, ReverseOptions, RobustnessOutcome, Scenario,
    TestKind, TestVerdict, Witness,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use hilbert::{
    haar_random_unitary, heisenberg_projector, tensor, HilbertDim, ProjectorFamily, Schedule, State, Unitary,
};
pub use history::{
    chain_class_operator, coarse_grain, enumerate_chains, fine_grained_set, negation, phase_perturb, ClassOperator,
    HistoryLabel, HistorySet, PhasePerturbation,
};
pub use records::{construct_records, RecordSet};
pub use scenario_file::ScenarioFile;
