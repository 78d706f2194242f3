//! Observables, Monte Carlo error bars and the experiments built on them.

mod experiments;
mod observables;
mod stats;

pub use experiments::{
    equivalence_experiment, estimate_observable, hbar_sweep, EquivalenceReport, EquivalenceRow,
    SweepReport, SweepRow, BROKEN_RESIDUAL_TOLERANCE, SYMMETRIC_RESIDUAL_FRACTION,
};
pub use observables::{evaluate_into, evaluate_observable, Observable, DEFAULT_OBSERVABLES};
pub use stats::{compare, compare_all, estimate, Comparison, Estimate, MIN_SAMPLES, PASS_THRESHOLD};
