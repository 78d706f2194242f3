//! The nonlocal substitution `χ(t) = φ(t) ± a∫(φ² − β²)dτ` on the lattice.
//!
//! With a left-point cumulative sum the map is unit lower triangular in the
//! increments, so it is an exact bijection of `ℝᴺ⁺¹` with Jacobian one.

use nalgebra::DMatrix;

use crate::action::drift;
use crate::error::{invalid, Error, Result};
use crate::model::{BlowupReport, Branch, Lattice, ModelParams, Path};

pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e6;

/// Largest `N` accepted by [`numeric_jacobian_det`].
pub const MAX_JACOBIAN_STEPS: usize = 16;

const JACOBIAN_FD_STEP: f64 = 1e-6;

pub fn forward_map(
    phi: &[f64],
    branch: Branch,
    lattice: &Lattice,
    params: &ModelParams,
) -> Result<Path> {
    lattice.check(phi)?;
    let (sign, a, beta_sq, eps) = coefficients(branch, lattice, params);
    let mut chi = Vec::with_capacity(phi.len());
    let mut integral = 0.0;
    for &x in phi {
        chi.push(x + integral);
        integral += drift(x, sign, a, beta_sq, eps);
    }
    Ok(Path::new(chi))
}

pub fn inverse_map(
    chi: &[f64],
    branch: Branch,
    lattice: &Lattice,
    params: &ModelParams,
) -> Result<Path> {
    lattice.check(chi)?;
    let mut phi = vec![0.0; chi.len()];
    let increments = chi.windows(2).map(|w| w[1] - w[0]);
    let finite = invert_increments(
        chi[0],
        increments,
        &mut phi,
        branch,
        lattice,
        params,
        f64::INFINITY,
    );
    if !finite {
        return Err(Error::Overflow(scan_singularities(&phi, DEFAULT_BLOWUP_THRESHOLD)));
    }
    Ok(Path::new(phi))
}

/// Runs `φᵢ₊₁ = φᵢ + Δχᵢ ∓ a(φᵢ² − β²)ε` into `out`.
///
/// Stops early and returns `false` as soon as a value is non-finite or
/// exceeds `threshold` in magnitude; the remaining entries of `out` are then
/// left as NaN.
pub(crate) fn invert_increments(
    start: f64,
    increments: impl Iterator<Item = f64>,
    out: &mut [f64],
    branch: Branch,
    lattice: &Lattice,
    params: &ModelParams,
    threshold: f64,
) -> bool {
    let (sign, a, beta_sq, eps) = coefficients(branch, lattice, params);
    out[0] = start;
    let mut x = start;
    if !(x.is_finite() && x.abs() <= threshold) {
        out[1..].fill(f64::NAN);
        return false;
    }
    for (i, dchi) in increments.enumerate() {
        x = x + dchi - drift(x, sign, a, beta_sq, eps);
        out[i + 1] = x;
        if !(x.is_finite() && x.abs() <= threshold) {
            out[i + 2..].fill(f64::NAN);
            return false;
        }
    }
    true
}

fn coefficients(branch: Branch, lattice: &Lattice, params: &ModelParams) -> (f64, f64, f64, f64) {
    let beta = params.beta();
    (branch.sign(), params.a(), beta * beta, lattice.spacing())
}

/// Determinant of the central finite-difference Jacobian `∂χ/∂φ`.
pub fn numeric_jacobian_det(
    phi: &[f64],
    branch: Branch,
    lattice: &Lattice,
    params: &ModelParams,
) -> Result<f64> {
    if lattice.steps() > MAX_JACOBIAN_STEPS {
        return Err(invalid(format!(
            "Jacobian assembly limited to N <= {MAX_JACOBIAN_STEPS}, got {}",
            lattice.steps()
        )));
    }
    lattice.check(phi)?;
    let n = phi.len();
    let mut jac = DMatrix::<f64>::zeros(n, n);
    let mut probe = phi.to_vec();
    for j in 0..n {
        probe[j] = phi[j] + JACOBIAN_FD_STEP;
        let up = forward_map(&probe, branch, lattice, params)?;
        probe[j] = phi[j] - JACOBIAN_FD_STEP;
        let down = forward_map(&probe, branch, lattice, params)?;
        probe[j] = phi[j];
        for i in 0..n {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * JACOBIAN_FD_STEP);
        }
    }
    Ok(jac.determinant())
}

pub fn scan_singularities(phi: &[f64], threshold: f64) -> BlowupReport {
    let flagged_indices: Vec<usize> = phi
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_finite() || v.abs() > threshold)
        .map(|(i, _)| i)
        .collect();
    let all_finite = phi.iter().all(|v| v.is_finite());
    let max_abs = if all_finite {
        phi.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    } else {
        f64::INFINITY
    };
    BlowupReport {
        flagged_indices,
        max_abs,
        all_finite,
    }
}
