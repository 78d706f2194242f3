//! Shared value types: model constants, the time lattice, discretized paths
//! and the blowup report produced when a path leaves the finite reals.

use std::ops::{Deref, Neg};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Physical constants of the double well `(a²/2)(φ² − β²)²` with `β = b/(2a)`.
///
/// `b = 0` is accepted and reduces the model to the pure quartic case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    a: f64,
    b: f64,
    beta: f64,
    hbar: f64,
}

impl ModelParams {
    pub fn new(a: f64, b: f64, hbar: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(invalid(format!("coupling a must be positive, got {a}")));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(invalid(format!("b must be non-negative, got {b}")));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(invalid(format!("hbar must be positive, got {hbar}")));
        }
        Ok(Self {
            a,
            b,
            beta: b / (2.0 * a),
            hbar,
        })
    }

    /// Same couplings at a different quantum scale.
    pub fn with_hbar(&self, hbar: f64) -> Result<Self> {
        Self::new(self.a, self.b, hbar)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Well position, always `b / (2a)`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }
}

pub fn make_params(a: f64, b: f64, hbar: f64) -> Result<ModelParams> {
    ModelParams::new(a, b, hbar)
}

/// Uniform grid on `[−T, +T]` with `N` steps and `N + 1` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    half_width: f64,
    steps: usize,
    spacing: f64,
    times: Vec<f64>,
}

impl Lattice {
    pub fn new(half_width: f64, steps: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(invalid(format!("T must be positive, got {half_width}")));
        }
        if steps < 2 {
            return Err(invalid(format!("N must be at least 2, got {steps}")));
        }
        let spacing = 2.0 * half_width / steps as f64;
        let mut times: Vec<f64> = (0..=steps)
            .map(|i| -half_width + i as f64 * spacing)
            .collect();
        times[steps] = half_width;
        Ok(Self {
            half_width,
            steps,
            spacing,
            times,
        })
    }

    /// `T`
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// `N`
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `ε = 2T / N`
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    /// Index of `t = 0`, present only for even `N`.
    pub fn midpoint_index(&self) -> Option<usize> {
        self.steps.is_multiple_of(2).then_some(self.steps / 2)
    }

    pub(crate) fn check(&self, path: &[f64]) -> Result<()> {
        if path.len() != self.nodes() {
            return Err(invalid(format!(
                "path has {} values, lattice has {} nodes",
                path.len(),
                self.nodes()
            )));
        }
        Ok(())
    }
}

pub fn make_lattice(half_width: f64, steps: usize) -> Result<Lattice> {
    Lattice::new(half_width, steps)
}

/// Field values at the lattice nodes. Plays the role of both φ and χ.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Path(Vec<f64>);

impl Path {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn constant(lattice: &Lattice, value: f64) -> Self {
        Self(vec![value; lattice.nodes()])
    }

    pub fn from_fn(lattice: &Lattice, f: impl Fn(f64) -> f64) -> Self {
        Self(lattice.times().iter().map(|&t| f(t)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn first(&self) -> f64 {
        self.0[0]
    }

    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }
}

impl Deref for Path {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Path {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl Neg for &Path {
    type Output = Path;

    fn neg(self) -> Path {
        Path(self.0.iter().map(|v| -v).collect())
    }
}

impl Neg for Path {
    type Output = Path;

    fn neg(self) -> Path {
        -&self
    }
}

/// Selects the action `A₊` / `A₋` together with its substitution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    /// `+1` for `Plus`, `−1` for `Minus`.
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn mirror(self) -> Self {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        })
    }
}

/// Grid indices where a path is non-finite or exceeds a magnitude threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    /// Sorted ascending.
    pub flagged_indices: Vec<usize>,
    pub max_abs: f64,
    pub all_finite: bool,
}

impl BlowupReport {
    pub fn is_clean(&self) -> bool {
        self.flagged_indices.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_examples() {
        let l = make_lattice(1.0, 4).unwrap();
        assert_eq!(l.spacing(), 0.5);
        assert_eq!(l.times(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);

        let l = make_lattice(2.0, 2).unwrap();
        assert_eq!(l.spacing(), 2.0);
        assert_eq!(l.times(), &[-2.0, 0.0, 2.0]);

        assert!(make_lattice(1.0, 1).is_err());
        assert!(make_lattice(0.0, 8).is_err());
        assert!(make_lattice(-1.0, 8).is_err());
    }

    #[test]
    fn lattice_spacing_is_uniform() {
        for &(t, n) in &[(1.0, 3), (0.7, 64), (3.3, 1001), (1e-3, 17)] {
            let l = make_lattice(t, n).unwrap();
            assert_eq!(l.times()[0], -t);
            assert_eq!(l.times()[n], t);
            for w in l.times().windows(2) {
                let rel = ((w[1] - w[0]) - l.spacing()).abs() / l.spacing();
                assert!(rel < 1e-12, "rel {rel} at T={t}, N={n}");
            }
        }
    }

    #[test]
    fn params_examples() {
        assert_eq!(make_params(1.0, 2.0, 1.0).unwrap().beta(), 1.0);
        assert_eq!(make_params(2.0, 2.0, 1.0).unwrap().beta(), 0.5);
        assert_eq!(make_params(1.0, 0.0, 1.0).unwrap().beta(), 0.0);
        assert!(make_params(0.0, 2.0, 1.0).is_err());
        assert!(make_params(1.0, 2.0, 0.0).is_err());
        assert!(make_params(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn beta_recomputes_bit_exactly() {
        for &(a, b) in &[(1.0, 2.0), (0.3, 0.7), (7.1, 1e-3), (1e3, 5.0)] {
            let p = make_params(a, b, 0.5).unwrap();
            assert_eq!(p.beta().to_bits(), (p.b() / (2.0 * p.a())).to_bits());
            assert_eq!(p.with_hbar(0.1).unwrap().beta(), p.beta());
        }
    }

    #[test]
    fn path_negation() {
        let p = Path::new(vec![1.0, -2.0, 0.5]);
        assert_eq!((-&p).values(), &[-1.0, 2.0, -0.5]);
    }
}
