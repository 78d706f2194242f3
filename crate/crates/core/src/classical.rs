//! Classical equations of the double well: closed-form flow solutions,
//! finite-difference residuals, shooting for the broken Euler–Lagrange
//! problem, and the action gap of the odd kink.
//!
//! The first-order flow `φ̇ = ∓a(φ² − β²)` is solved by
//! `β·tanh(±aβt + c)` inside the wells and `β·coth(±aβt + c)` outside them.

use serde::Serialize;

use crate::action::{interacting_action, symmetric_action, ActionForm};
use crate::error::{invalid, Error, Result};
use crate::model::{Branch, Lattice, ModelParams, Path};

/// Residual tolerance for [`solve_broken_bvp`].
pub const BVP_TOLERANCE: f64 = 1e-6;

const SHOOT_SUBSTEPS: usize = 4;
const SHOOT_SCAN_POINTS: usize = 400;
const SHOOT_BLOWUP: f64 = 1e6;
const SHOOT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProfileKind {
    Tanh,
    Coth,
    /// `|α| = β`: the flow sits at a fixed point.
    Constant,
    /// `β = 0`: `1 / (±at + c)`.
    Reciprocal,
}

/// Closed-form solution of the flow fixed by its left value `φ(−T) = −α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KinkSolution {
    pub kind: ProfileKind,
    pub branch: Branch,
    pub c: f64,
    pub alpha: f64,
    pub params: ModelParams,
}

impl KinkSolution {
    pub fn from_left_value(
        params: ModelParams,
        branch: Branch,
        half_width: f64,
        alpha: f64,
    ) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(invalid("alpha must be finite"));
        }
        let (a, beta, s) = (params.a(), params.beta(), branch.sign());
        let left = -alpha;
        let (kind, c) = if beta == 0.0 {
            if alpha == 0.0 {
                (ProfileKind::Constant, 0.0)
            } else {
                (ProfileKind::Reciprocal, 1.0 / left + s * a * half_width)
            }
        } else {
            let r = alpha / beta;
            let shift = s * a * beta * half_width;
            if (r.abs() - 1.0).abs() <= f64::EPSILON {
                (ProfileKind::Constant, 0.0)
            } else if r.abs() < 1.0 {
                (ProfileKind::Tanh, shift - r.atanh())
            } else {
                (ProfileKind::Coth, shift - r.recip().atanh())
            }
        };
        Ok(Self {
            kind,
            branch,
            c,
            alpha,
            params,
        })
    }

    /// The odd `c = 0` tanh kink on `[−T, T]`.
    pub fn odd(params: ModelParams, branch: Branch, half_width: f64) -> Self {
        let beta = params.beta();
        let left = beta * (-branch.sign() * params.a() * beta * half_width).tanh();
        Self {
            kind: if beta == 0.0 {
                ProfileKind::Constant
            } else {
                ProfileKind::Tanh
            },
            branch,
            c: 0.0,
            alpha: -left,
            params,
        }
    }

    fn rate(&self) -> f64 {
        let beta = self.params.beta();
        let scale = if self.kind == ProfileKind::Reciprocal {
            self.params.a()
        } else {
            self.params.a() * beta
        };
        self.branch.sign() * scale
    }

    /// Pole `t*` where the argument `±aβt + c` vanishes, for the singular
    /// branches.
    pub fn pole(&self) -> Option<f64> {
        match self.kind {
            ProfileKind::Coth | ProfileKind::Reciprocal => Some(-self.c / self.rate()),
            _ => None,
        }
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let beta = self.params.beta();
        let arg = self.rate() * t + self.c;
        let singular = |v: f64| {
            if arg.abs() <= 4.0 * f64::EPSILON * self.c.abs().max(1.0) || !v.is_finite() {
                Err(Error::Singularity {
                    pole: self.pole().unwrap_or(t),
                })
            } else {
                Ok(v)
            }
        };
        match self.kind {
            ProfileKind::Tanh => Ok(beta * arg.tanh()),
            ProfileKind::Coth => singular(beta / arg.tanh()),
            ProfileKind::Constant => Ok(-self.alpha),
            ProfileKind::Reciprocal => singular(arg.recip()),
        }
    }

    pub fn sample(&self, lattice: &Lattice) -> Result<Path> {
        lattice
            .times()
            .iter()
            .map(|&t| self.value(t))
            .collect::<Result<Vec<_>>>()
            .map(Path::new)
    }
}

pub fn kink_profile(solution: &KinkSolution, t: f64) -> Result<f64> {
    solution.value(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EquationId {
    /// `φ̈ − 2a²φ(φ² − β²) = 0`
    ElSymmetric,
    /// `φ̈ − 2a²φ(φ² − β²) + a = 0`
    ElBroken,
    /// `φ̇ + a(φ² − β²) = 0`
    FlowPlus,
    /// `φ̇ − a(φ² − β²) = 0`
    FlowMinus,
    /// `φ̇(±T) + a(φ²(±T) − β²) = 0`
    BoundaryCond,
}

/// Pointwise residual of `eq` on the grid.
///
/// Second-order equations and flows are evaluated on interior nodes
/// `1..N` with centered differences, giving `N − 1` values. The boundary
/// condition uses second-order one-sided differences at both ends and
/// returns `[left, right]`.
pub fn residual(
    path: &[f64],
    eq: EquationId,
    lattice: &Lattice,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    lattice.check(path)?;
    let eps = lattice.spacing();
    let (a, beta_sq) = (params.a(), params.beta() * params.beta());
    let force = |x: f64| 2.0 * a * a * x * (x * x - beta_sq);
    let flow = |x: f64| a * (x * x - beta_sq);
    let n = path.len() - 1;

    if eq == EquationId::BoundaryCond {
        let left = (-3.0 * path[0] + 4.0 * path[1] - path[2]) / (2.0 * eps);
        let right = (3.0 * path[n] - 4.0 * path[n - 1] + path[n - 2]) / (2.0 * eps);
        return Ok(vec![left + flow(path[0]), right + flow(path[n])]);
    }

    Ok(path
        .windows(3)
        .map(|w| {
            let x = w[1];
            let d2 = (w[2] - 2.0 * x + w[0]) / (eps * eps);
            let d1 = (w[2] - w[0]) / (2.0 * eps);
            match eq {
                EquationId::ElSymmetric => d2 - force(x),
                EquationId::ElBroken => d2 - force(x) + a,
                EquationId::FlowPlus => d1 + flow(x),
                EquationId::FlowMinus => d1 - flow(x),
                EquationId::BoundaryCond => unreachable!(),
            }
        })
        .collect())
}

pub(crate) fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// What the bracket scan saw, attached to convergence failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootingDiagnostics {
    pub scanned: usize,
    pub finite: usize,
    pub sign_changes: usize,
    /// Smallest `|mismatch|` among finite trajectories and where it occurred.
    pub best_mismatch: f64,
    pub best_start: f64,
}

impl std::fmt::Display for ShootingDiagnostics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} of {} trial starts stayed finite, {} sign changes, smallest |mismatch| {:.3e} at phi(-T) = {:.6}",
            self.finite, self.scanned, self.sign_changes, self.best_mismatch, self.best_start
        )
    }
}

/// Single-parameter shooting for `φ̈ = accel(φ, φ̇)` on `[t0, t0 + steps·h]`.
/// The unknown is `φ(t0) = p`, the left condition fixes `φ̇(t0)`, and the
/// right condition is the root of `right_mismatch`.
pub(crate) struct Shooting<'a> {
    pub accel: &'a dyn Fn(f64, f64) -> f64,
    pub left_velocity: &'a dyn Fn(f64) -> f64,
    pub right_mismatch: &'a dyn Fn(f64, f64) -> f64,
    pub steps: usize,
    pub substeps: usize,
    pub h: f64,
}

impl Shooting<'_> {
    /// Classical RK4. Records `φ` at every `substeps`-th step when asked.
    fn integrate(&self, p: f64, mut record: Option<&mut Vec<f64>>) -> Option<(f64, f64)> {
        let rhs = |y: (f64, f64)| (y.1, (self.accel)(y.0, y.1));
        let h = self.h / self.substeps as f64;
        let mut y = (p, (self.left_velocity)(p));
        if let Some(out) = record.as_deref_mut() {
            out.push(y.0);
        }
        for _ in 0..self.steps {
            for _ in 0..self.substeps {
                let k1 = rhs(y);
                let k2 = rhs((y.0 + 0.5 * h * k1.0, y.1 + 0.5 * h * k1.1));
                let k3 = rhs((y.0 + 0.5 * h * k2.0, y.1 + 0.5 * h * k2.1));
                let k4 = rhs((y.0 + h * k3.0, y.1 + h * k3.1));
                y.0 += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
                y.1 += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
                if !(y.0.is_finite() && y.1.is_finite() && y.0.abs() <= SHOOT_BLOWUP) {
                    return None;
                }
            }
            if let Some(out) = record.as_deref_mut() {
                out.push(y.0);
            }
        }
        Some(y)
    }

    fn mismatch(&self, p: f64) -> Option<f64> {
        self.integrate(p, None)
            .map(|(x, v)| (self.right_mismatch)(x, v))
            .filter(|g| g.is_finite())
    }

    /// Scans `guess ± span` for a sign change of the mismatch, takes the
    /// bracket nearest the guess and refines it by Illinois regula falsi.
    fn solve(&self, guess: f64, span: f64) -> std::result::Result<f64, ShootingDiagnostics> {
        let starts: Vec<f64> = (0..=2 * SHOOT_SCAN_POINTS)
            .map(|k| guess - span + span * k as f64 / SHOOT_SCAN_POINTS as f64)
            .collect();
        let values: Vec<Option<f64>> = starts.iter().map(|&p| self.mismatch(p)).collect();

        let mut diag = ShootingDiagnostics {
            scanned: starts.len(),
            finite: values.iter().flatten().count(),
            sign_changes: 0,
            best_mismatch: f64::INFINITY,
            best_start: f64::NAN,
        };
        for (p, g) in starts.iter().zip(&values) {
            if let Some(g) = g {
                if g.abs() < diag.best_mismatch {
                    diag.best_mismatch = g.abs();
                    diag.best_start = *p;
                }
                if *g == 0.0 {
                    return Ok(*p);
                }
            }
        }

        let mut brackets: Vec<(f64, f64, f64, f64)> = Vec::new();
        for i in 0..starts.len() - 1 {
            if let (Some(g0), Some(g1)) = (values[i], values[i + 1]) {
                if g0.signum() != g1.signum() {
                    brackets.push((starts[i], g0, starts[i + 1], g1));
                }
            }
        }
        diag.sign_changes = brackets.len();
        let Some(&(mut lo, mut g_lo, mut hi, mut g_hi)) = brackets.iter().min_by(|x, y| {
            let dx = (0.5 * (x.0 + x.2) - guess).abs();
            let dy = (0.5 * (y.0 + y.2) - guess).abs();
            dx.total_cmp(&dy)
        }) else {
            return Err(diag);
        };

        let mut side = 0i8;
        for _ in 0..SHOOT_MAX_ITER {
            let p = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
            let Some(g) = self.mismatch(p) else {
                return Err(diag);
            };
            if g == 0.0 || (hi - lo).abs() <= 4.0 * f64::EPSILON * p.abs().max(1.0) {
                return Ok(p);
            }
            if g.signum() == g_lo.signum() {
                lo = p;
                g_lo = g;
                if side == -1 {
                    g_hi *= 0.5;
                }
                side = -1;
            } else {
                hi = p;
                g_hi = g;
                if side == 1 {
                    g_lo *= 0.5;
                }
                side = 1;
            }
            if g.abs() < 1e-13 {
                return Ok(p);
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Shooting solution of `φ̈ − 2a²φ(φ² − β²) + a = 0` with
/// `φ̇(±T) + a(φ²(±T) − β²) = 0` at both ends.
///
/// The unknown is `φ(−T)`; the left condition fixes `φ̇(−T)` and the right
/// condition is solved by root finding. The starting value of
/// `initial_guess` centers the bracket scan.
///
/// Multiplying the equation by `φ̇` shows that `½φ̇² − V(φ) + aφ` is
/// conserved, and both boundary conditions pin it to `aφ` at the ends, so a
/// solution must close an orbit in the phase plane. When no continuous
/// trajectory does, the scan finds no sign change and a
/// [`Error::Convergence`] carries the scan diagnostics.
pub fn solve_broken_bvp(
    lattice: &Lattice,
    params: &ModelParams,
    initial_guess: &Path,
) -> Result<Path> {
    lattice.check(initial_guess)?;
    let (a, beta_sq) = (params.a(), params.beta() * params.beta());
    let accel = move |x: f64, _v: f64| 2.0 * a * a * x * (x * x - beta_sq) - a;
    let left_velocity = move |x: f64| -a * (x * x - beta_sq);
    let right_mismatch = move |x: f64, v: f64| v + a * (x * x - beta_sq);
    let shooting = Shooting {
        accel: &accel,
        left_velocity: &left_velocity,
        right_mismatch: &right_mismatch,
        steps: lattice.steps(),
        substeps: SHOOT_SUBSTEPS,
        h: lattice.spacing(),
    };
    let span = 4.0 * params.beta().max(1.0);
    let start = shooting.solve(initial_guess.first(), span).map_err(|d| {
        Error::Convergence(format!("no bracketed root for the right boundary condition: {d}"))
    })?;

    let mut values = Vec::with_capacity(lattice.nodes());
    shooting
        .integrate(start, Some(&mut values))
        .ok_or_else(|| Error::Convergence(format!("trajectory from phi(-T) = {start} blew up")))?;
    let path = Path::new(values);

    let el = max_abs(&residual(&path, EquationId::ElBroken, lattice, params)?);
    let bc = max_abs(&residual(&path, EquationId::BoundaryCond, lattice, params)?);
    if el >= BVP_TOLERANCE || bc >= BVP_TOLERANCE {
        return Err(Error::Convergence(format!(
            "root phi(-T) = {start} found but grid residuals exceed {BVP_TOLERANCE:e} \
             (equation {el:.3e}, boundary {bc:.3e}); refine the lattice"
        )));
    }
    Ok(path)
}

/// `A₊(φ) − A(φ)` for the odd `c = 0` kink sampled on `lattice`.
pub fn action_gap(solution: &KinkSolution, lattice: &Lattice) -> Result<f64> {
    if solution.kind != ProfileKind::Tanh || solution.c != 0.0 {
        return Err(invalid(format!(
            "action gap needs the odd tanh kink (c = 0), got {:?} with c = {}",
            solution.kind, solution.c
        )));
    }
    let path = solution.sample(lattice)?;
    let params = &solution.params;
    Ok(interacting_action(&path, Branch::Plus, ActionForm::BoundaryForm, lattice, params)?
        - symmetric_action(&path, lattice, params)?)
}

/// Continuum gap for an odd path: `2aφ(T)(φ(T)²/3 − β²)`.
pub fn odd_gap_prediction(end_value: f64, params: &ModelParams) -> f64 {
    let beta = params.beta();
    2.0 * params.a() * end_value * (end_value * end_value / 3.0 - beta * beta)
}

/// Exact gap of an odd grid path: the left-point sum of `φ` equals
/// `−φ(T)ε` instead of zero, adding `aφ(T)ε` to the continuum value.
pub fn odd_gap_on_lattice(end_value: f64, params: &ModelParams, lattice: &Lattice) -> f64 {
    odd_gap_prediction(end_value, params) + params.a() * end_value * lattice.spacing()
}
