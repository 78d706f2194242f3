//! Two-sampler equivalence runs and the ℏ sweep toward the classical limit.

use serde::Serialize;

use super::observables::{evaluate_into, Observable};
use super::stats::{compare_all, estimate, Estimate};
use crate::classical::{max_abs, residual, EquationId, KinkSolution};
use crate::error::{invalid, Result};
use crate::model::{Branch, Lattice, ModelParams, Path};
use crate::sampler::{mapped_fold, run_metropolis, sample_mapped_batch, SampleBatch, SamplerConfig};

/// Fraction of `a` that the sweep's final mean path may leave in the
/// symmetric Euler–Lagrange residual.
pub const SYMMETRIC_RESIDUAL_FRACTION: f64 = 0.2;
/// Relative tolerance on the broken residual matching `a`.
pub const BROKEN_RESIDUAL_TOLERANCE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceRow {
    pub observable: Observable,
    /// One estimate per component (a single one for scalar observables).
    pub mapped: Vec<Estimate>,
    pub metropolis: Vec<Estimate>,
    /// Largest-magnitude component z-score.
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub branch: Branch,
    pub rows: Vec<EquivalenceRow>,
    pub acceptance_rate: f64,
    pub proposal_width: f64,
    pub n_rejected_blowups: usize,
}

impl EquivalenceReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Per-component estimates of `obs` over a batch of paths.
pub fn estimate_observable(batch: &SampleBatch, obs: Observable, lattice: &Lattice) -> Result<Vec<Estimate>> {
    let width = obs.width(lattice);
    let mut columns = vec![Vec::with_capacity(batch.paths.len()); width];
    let mut scratch = Vec::with_capacity(width);
    for path in &batch.paths {
        scratch.clear();
        evaluate_into(obs, path, lattice, &mut scratch)?;
        for (col, v) in columns.iter_mut().zip(&scratch) {
            col.push(*v);
        }
    }
    columns.iter().map(|c| estimate(c)).collect()
}

/// Samples the interacting measure both ways at identical parameters and
/// compares every requested observable.
pub fn equivalence_experiment(
    lattice: &Lattice,
    params: &ModelParams,
    branch: Branch,
    config: &SamplerConfig,
    observables: &[Observable],
) -> Result<EquivalenceReport> {
    if observables.is_empty() {
        return Err(invalid("no observables requested"));
    }
    for obs in observables {
        obs.check(lattice)?;
    }
    let mapped = sample_mapped_batch(lattice, params, branch, config)?;
    let metropolis = run_metropolis(lattice, params, branch, config)?;

    let rows = observables
        .iter()
        .map(|&obs| {
            let m = estimate_observable(&mapped, obs, lattice)?;
            let r = estimate_observable(&metropolis, obs, lattice)?;
            let cmp = compare_all(&m, &r)?;
            Ok(EquivalenceRow {
                observable: obs,
                mapped: m,
                metropolis: r,
                z: cmp.z,
                pass: cmp.pass,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(EquivalenceReport {
        branch,
        rows,
        acceptance_rate: metropolis.acceptance_rate.unwrap_or(f64::NAN),
        proposal_width: config.proposal_width,
        n_rejected_blowups: mapped.n_rejected_blowups,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub hbar: f64,
    /// RMS over grid nodes of mean path minus the reference kink.
    pub rms_dev_from_kink: f64,
    /// Max |symmetric Euler–Lagrange residual| of the mean path.
    pub max_el7_residual: f64,
    /// Mean |broken Euler–Lagrange residual| of the mean path.
    pub mean_el9_residual: f64,
    pub n_blowups: usize,
    #[serde(skip)]
    pub mean_path: Path,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub branch: Branch,
    pub a: f64,
    pub kink: KinkSolution,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn rms_strictly_decreasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].rms_dev_from_kink < w[0].rms_dev_from_kink)
    }

    /// At the smallest ℏ the mean path solves the symmetric equation but
    /// misses the broken one by the constant `a`.
    pub fn final_row_restores_symmetry(&self) -> bool {
        self.rows.last().is_some_and(|r| {
            r.max_el7_residual < SYMMETRIC_RESIDUAL_FRACTION * self.a
                && (r.mean_el9_residual - self.a).abs() <= BROKEN_RESIDUAL_TOLERANCE * self.a
        })
    }

    pub fn all_pass(&self) -> bool {
        self.rms_strictly_decreasing() && self.final_row_restores_symmetry()
    }
}

/// Mapped sampling at each ℏ in a strictly decreasing list, tracking how the
/// mean path concentrates on the flow solution.
///
/// The reference kink starts at `φ(−T) = x0`. For the `Minus` branch the
/// residuals are taken on the mirrored mean path, which turns the broken
/// equation of `A₋` into that of `A₊`.
pub fn hbar_sweep(
    lattice: &Lattice,
    params: &ModelParams,
    branch: Branch,
    hbar_list: &[f64],
    config: &SamplerConfig,
) -> Result<SweepReport> {
    if hbar_list.is_empty() {
        return Err(invalid("hbar list is empty"));
    }
    if hbar_list.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(invalid("hbar values must be positive"));
    }
    if hbar_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("hbar list must be strictly decreasing"));
    }
    let kink = KinkSolution::from_left_value(*params, branch, lattice.half_width(), -config.x0)?;
    let reference = kink.sample(lattice)?;
    let nodes = lattice.nodes();

    let rows = hbar_list
        .iter()
        .map(|&hbar| {
            let p = params.with_hbar(hbar)?;
            let (sums, n_blowups) = mapped_fold(
                lattice,
                &p,
                branch,
                config,
                |_| vec![0.0; nodes],
                |acc: &mut Vec<f64>, phi| {
                    for (s, v) in acc.iter_mut().zip(phi) {
                        *s += v;
                    }
                },
            )?;
            let n = config.n_samples as f64;
            let mean: Vec<f64> = (0..nodes)
                .map(|i| sums.iter().map(|s| s[i]).sum::<f64>() / n)
                .collect();
            let rms = (mean
                .iter()
                .zip(reference.iter())
                .map(|(m, k)| (m - k).powi(2))
                .sum::<f64>()
                / nodes as f64)
                .sqrt();

            let oriented: Vec<f64> = match branch {
                Branch::Plus => mean.clone(),
                Branch::Minus => mean.iter().map(|v| -v).collect(),
            };
            let el7 = residual(&oriented, EquationId::ElSymmetric, lattice, &p)?;
            let el9 = residual(&oriented, EquationId::ElBroken, lattice, &p)?;
            let mean_el9 = el9.iter().map(|r| r.abs()).sum::<f64>() / el9.len() as f64;

            Ok(SweepRow {
                hbar,
                rms_dev_from_kink: rms,
                max_el7_residual: max_abs(&el7),
                mean_el9_residual: mean_el9,
                n_blowups,
                mean_path: Path::new(mean),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SweepReport {
        branch,
        a: params.a(),
        kink,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SamplerConfig {
        SamplerConfig {
            n_samples: 4000,
            n_burnin: 200,
            n_thin: 5,
            ..Default::default()
        }
    }

    #[test]
    fn sweep_rejects_bad_lists() {
        let l = Lattice::new(1.0, 16).unwrap();
        let p = ModelParams::new(1.0, 2.0, 1.0).unwrap();
        for list in [&[][..], &[0.1, 0.2][..], &[0.1, 0.1][..], &[0.1, -0.1][..]] {
            assert!(hbar_sweep(&l, &p, Branch::Plus, list, &quick()).is_err());
        }
    }

    #[test]
    fn single_hbar_gives_single_row() {
        let l = Lattice::new(1.0, 16).unwrap();
        let p = ModelParams::new(1.0, 2.0, 1.0).unwrap();
        let report = hbar_sweep(&l, &p, Branch::Plus, &[0.1], &quick()).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.rms_strictly_decreasing());
        let row = &report.rows[0];
        assert_eq!(row.mean_path.len(), 17);
        assert_eq!(row.mean_path[0], 0.0);
    }

    #[test]
    fn broken_residual_offset_is_exact() {
        let l = Lattice::new(1.0, 16).unwrap();
        let p = ModelParams::new(1.5, 2.0, 1.0).unwrap();
        let report = hbar_sweep(&l, &p, Branch::Minus, &[0.2, 0.1], &quick()).unwrap();
        for row in &report.rows {
            let el7 = residual(&row.mean_path.iter().map(|v| -v).collect::<Vec<_>>(), EquationId::ElSymmetric, &l, &p).unwrap();
            let el9 = residual(&row.mean_path.iter().map(|v| -v).collect::<Vec<_>>(), EquationId::ElBroken, &l, &p).unwrap();
            for (s, b) in el7.iter().zip(&el9) {
                assert!((b - s - 1.5).abs() < 1e-9 * s.abs().max(1.0));
            }
        }
    }

    #[test]
    fn equivalence_rejects_odd_midpoint() {
        let l = Lattice::new(1.0, 15).unwrap();
        let p = ModelParams::new(1.0, 2.0, 0.1).unwrap();
        assert!(equivalence_experiment(&l, &p, Branch::Plus, &quick(), &[Observable::MidpointSq]).is_err());
        assert!(equivalence_experiment(&l, &p, Branch::Plus, &quick(), &[]).is_err());
    }
}
