//! Lattice actions.
//!
//! Every `dt` integral is a left-point Riemann sum, which is also the Ito
//! prescription for the `dφ` sums. With that convention the interacting
//! action in its [`ActionForm::ExactLattice`] form is literally the free
//! kinetic action of the substituted path `χ`:
//!
//! ```text
//! S±(φ) = Σᵢ (Δφᵢ ± a(φᵢ² − β²)ε)² / (2ε)
//! ```
//!
//! [`ActionForm::BoundaryForm`] is the continuum rewriting of the cross term
//! through the Ito formula, giving a term linear in `φ` plus boundary terms.
//! The two differ pathwise by the quadratic variation of the path.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Branch, Lattice, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionForm {
    ExactLattice,
    BoundaryForm,
}

/// `(a²/2)(x² − β²)²`
pub fn potential(x: f64, params: &ModelParams) -> f64 {
    let a = params.a();
    let d = x * x - params.beta() * params.beta();
    0.5 * a * a * d * d
}

/// Per-step drift of the substitution: `±a(x² − β²)ε`.
#[inline]
pub(crate) fn drift(x: f64, sign: f64, a: f64, beta_sq: f64, eps: f64) -> f64 {
    sign * a * (x * x - beta_sq) * eps
}

pub fn kinetic_action(path: &[f64], lattice: &Lattice) -> Result<f64> {
    lattice.check(path)?;
    let eps = lattice.spacing();
    Ok(path
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            d * d
        })
        .sum::<f64>()
        / (2.0 * eps))
}

/// Kinetic term plus the left-point sum of the potential.
pub fn symmetric_action(path: &[f64], lattice: &Lattice, params: &ModelParams) -> Result<f64> {
    let kinetic = kinetic_action(path, lattice)?;
    let eps = lattice.spacing();
    let pot: f64 = path[..path.len() - 1]
        .iter()
        .map(|&x| potential(x, params))
        .sum();
    Ok(kinetic + pot * eps)
}

/// Left-point stochastic sum `Σ g(φᵢ)(φᵢ₊₁ − φᵢ)`.
pub fn ito_sum(path: &[f64], g: impl Fn(f64) -> f64) -> f64 {
    path.windows(2).map(|w| g(w[0]) * (w[1] - w[0])).sum()
}

/// `Σφᵢ²Δφᵢ + ΣφᵢΔφᵢ² + ΣΔφᵢ³/3 − (φ_N³ − φ₀³)/3`.
///
/// Zero up to roundoff for every path: it is the telescoped expansion of
/// `φᵢ₊₁³ − φᵢ³`.
pub fn discrete_ito_identity_residual(path: &[f64]) -> f64 {
    if path.len() < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for w in path.windows(2) {
        let (x, d) = (w[0], w[1] - w[0]);
        sum += x * x * d + x * d * d + d * d * d / 3.0;
    }
    let (first, last) = (path[0], path[path.len() - 1]);
    sum - (last * last * last - first * first * first) / 3.0
}

/// Scale for judging [`discrete_ito_identity_residual`]: the sum of the
/// absolute values of every term that enters it.
pub fn discrete_ito_identity_scale(path: &[f64]) -> f64 {
    if path.len() < 2 {
        return 0.0;
    }
    let mut scale = 0.0;
    for w in path.windows(2) {
        let (x, d) = (w[0], w[1] - w[0]);
        scale += (x * x * d).abs() + (x * d * d).abs() + (d * d * d).abs() / 3.0;
    }
    let (first, last) = (path[0], path[path.len() - 1]);
    scale + (last.powi(3).abs() + first.powi(3).abs()) / 3.0
}

pub fn interacting_action(
    path: &[f64],
    branch: Branch,
    form: ActionForm,
    lattice: &Lattice,
    params: &ModelParams,
) -> Result<f64> {
    lattice.check(path)?;
    let eps = lattice.spacing();
    let (a, beta) = (params.a(), params.beta());
    let sign = branch.sign();
    match form {
        ActionForm::ExactLattice => {
            let beta_sq = beta * beta;
            let sum: f64 = path
                .windows(2)
                .map(|w| {
                    let dchi = w[1] - w[0] + drift(w[0], sign, a, beta_sq, eps);
                    dchi * dchi
                })
                .sum();
            Ok(sum / (2.0 * eps))
        }
        ActionForm::BoundaryForm => {
            let base = symmetric_action(path, lattice, params)?;
            let linear: f64 = path[..path.len() - 1].iter().sum::<f64>() * eps;
            let (first, last) = (path[0], path[path.len() - 1]);
            let cubic = (last.powi(3) - first.powi(3)) / 3.0;
            let shift = beta * beta * (last - first);
            Ok(base + sign * a * (-linear + cubic - shift))
        }
    }
}
