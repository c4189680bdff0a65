//! Catching-up solver and verification harness for integro-differential
//! sweeping processes over prox-regular moving sets, perturbed by a
//! Lipschitz set-valued map.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod fields;
pub mod filippov;
pub mod geometry;
pub mod grid;
pub mod linalg;
pub mod scenario;
pub mod signal;
pub mod stepper;
pub mod tolerance;
pub mod verify;

pub use bounds::{BoundCertificate, ConstantModuli, Moduli, Profile};
pub use error::{Error, Result};
pub use fields::{
    DriftConfig, DriftField, KernelConfig, PerturbationConfig, PerturbationMap, PerturbationShape, Problem,
    ProblemConfig, VolterraKernel, VolterraRule,
};
pub use filippov::{iterate, IterationOutcome, IterationReport};
pub use geometry::{MovingSet, SetConfig, SetShape};
pub use grid::{GridFunction, GridKind, TimeGrid};
pub use linalg::Point;
pub use signal::Signal;
pub use stepper::{solve_fixed_selection, solve_unperturbed, Trajectory};
pub use tolerance::MAX_DIM;
