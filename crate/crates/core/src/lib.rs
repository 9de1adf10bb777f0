//! Simulation library for direct measurement of two-photon polarization
//! density matrices.
//!
//! Two reconstruction pipelines are implemented and cross-validated against a
//! brute-force oracle:
//!
//! * [`modular`]: postselected measurement with a two-mode path pointer; the
//!   matrix elements follow from modular values of single-photon and joint
//!   projectors between mutually unbiased product bases.
//! * [`sequential`]: two weak impulsive Gaussian-pointer couplings followed
//!   by a strong projection; elements are read off four-operator quadrature
//!   moments.
//!
//! [`statistics`] adds simulated shot noise on top of both, and
//! [`tomography`] projects noisy estimates back to physical states and
//! renders machine-readable reports.

pub mod error;
pub mod hilbert;
pub mod modular;
pub mod sequential;
pub mod states;
pub mod statistics;
pub mod tomography;

pub use error::{Error, Result};
pub use hilbert::{c64, mub_bases, projector, tensor, Aprime, BasisPair, Bprime, CMat, CVec, C64};
pub use modular::{
    Coupling, EstimatorMode, Method1Config, Method1Mode, Method1Outcome, ModularTarget,
    ModularValueSet, PathPointerState, ReadoutProbabilities, TargetBasis,
};
pub use sequential::{
    GaussianBranchEnsemble, GaussianKind, GaussianPointerConfig, Method2Config, PostselectedPointer,
};
pub use states::{
    density_from_pure, fidelity, random_mixed, random_pure, trace_distance, werner, RealizedState,
    StateSpec, TwoPhotonDensityMatrix, TwoPhotonPureState,
};
pub use statistics::{CountRecord, Quadrature, QuadratureMoment, ShotPlan};
pub use tomography::{
    build_report, oracle_report, physicality_project, ReconstructionReport, ReportInputs,
    ReportParams,
};
