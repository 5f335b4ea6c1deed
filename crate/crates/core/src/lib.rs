//! Continuous-time quantum dynamics on labeled finite bases, with the
//! measurement side: energy moments, speed-limit checks, resonance
//! discrimination, and action-parameter reports.
//!
//! The crate is organized around five layers:
//!
//! - [`qcore`]: state vectors, Hermitian operator specifications, exact
//!   spectral evolution and second-order driven stepping, plus the timing
//!   primitives (`first_orthogonality_time`, `peak_time`).
//! - [`models`]: constructors for the concrete model families (two-level
//!   preparation schedules, rank-2 search Hamiltonians and their closed-form
//!   reductions, driven directory and log-spectrum cavity windows, diagonal
//!   phase networks).
//! - [`perturbation`]: first-order transition-probability estimates and
//!   resonance scans over the exact stepped dynamics.
//! - [`numtheory`]: exact integer support for the cavity labels (sieve,
//!   trial-division factorization, label <-> integer bijection).
//! - [`analysis`]: energy measures, Mandelstam-Tamm bound checks, and the
//!   action/complexity hypothesis table.
//!
//! Conventions: hbar = 1 everywhere; each model declares its energy scale
//! and times are in inverse energy-scale units.

extern crate openblas_src as _openblas;

pub mod analysis;
mod eigh;
pub mod models;
pub mod numtheory;
pub mod perturbation;
pub mod qcore;

pub use num_complex::Complex64 as C64;

pub use analysis::{
    bit_rotation_stage, check_speed_limit, classical_complexity, hypothesis_table,
    make_action_report, stage_from_generator, standard_suite, ActionReport, AnalysisError,
    BoundCheck, EnergyMeasures, HypothesisTable, ModelId, StageKind, StageMeasure, TableRow,
};
pub use models::{
    build_cavity_window, build_directory, build_grover, build_prep, build_shor_phase,
    grover_reduced, shor_average_energy, CavityModel, CavityWindow, DirectoryModel, GroverModel,
    GroverReduced, GroverVariant, ModelError, PrepBuild, PrepModel, ShorPhaseBuild,
    ShorPhaseModel,
};
pub use numtheory::{
    cavity_energy, fock_label_from_integer, integer_from_fock_label, primes_up_to, FockLabel,
    NumTheoryError,
};
pub use perturbation::{
    directory_search_time, discrimination_time_estimate, first_order_probability,
    run_resonance_scan, PerturbationError, ResonanceScan, ScanConfig, ScanWarning,
};
pub use qcore::{
    energy_moments, evolve_driven, evolve_static, first_orthogonality_time, inner_product,
    peak_time, EvolutionTrace, HamiltonianSpec, QcoreError, RankTwoForm, StateVector,
    StaticEvolver, StepControl,
};
