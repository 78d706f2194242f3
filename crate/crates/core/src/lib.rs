//! Lattice path-integral laboratory for the double-well field
//! `V(φ) = (a²/2)(φ² − β²)²` and its symmetry-breaking deformations `A±`.
//!
//! The substitution `χ = φ ± a∫(φ² − β²)dτ`, discretized with left-point
//! (Ito) sums, maps the interacting lattice measure `exp(−S±/ℏ)` exactly onto
//! the Wiener measure. The crate checks that equivalence with two
//! independent samplers, tracks the `ℏ → 0` limit against the closed-form
//! kink, and exposes the classical equations for residual checks.
//!
//! With the default `parallel` feature, sampling fans out over rayon;
//! without it everything runs sequentially with identical results.

pub mod action;
pub mod analysis;
pub mod classical;
pub mod config;
pub mod error;
pub mod model;
mod par;
pub mod run;
pub mod sampler;
pub mod transform;

pub use action::{
    discrete_ito_identity_residual, interacting_action, ito_sum, kinetic_action, potential,
    symmetric_action, ActionForm,
};
pub use analysis::{equivalence_experiment, hbar_sweep, Observable};
pub use classical::{
    action_gap, kink_profile, residual, solve_broken_bvp, EquationId, KinkSolution, ProfileKind,
};
pub use error::{Error, Result};
pub use model::{make_lattice, make_params, BlowupReport, Branch, Lattice, ModelParams, Path};
pub use sampler::{
    run_metropolis, sample_mapped_batch, sample_wiener_path, tune_proposal, SampleBatch,
    SamplerConfig,
};
pub use transform::{forward_map, inverse_map, numeric_jacobian_det, scan_singularities};
