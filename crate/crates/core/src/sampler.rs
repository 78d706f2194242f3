//! Two independent samplers for the interacting path measure
//! `exp(−S±(φ)/ℏ)` with `φ(−T) = x0` pinned and `φ(+T)` free.
//!
//! * **Mapped**: draw a Brownian path `χ` with increments of variance `ℏε`
//!   and push it through [`inverse_map`](crate::transform::inverse_map).
//!   The unit Jacobian makes this exact at finite `N`.
//! * **Metropolis**: single-site random-walk updates of `φ` directly under
//!   the exact lattice action.
//!
//! Work is split into fixed chunks (mapped) or chains (Metropolis), each with
//! its own random stream, so results depend only on the seed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::action::drift;
use crate::error::{invalid, Error, Result};
use crate::model::{Branch, Lattice, ModelParams, Path};
use crate::par::{map_indexed, stream_rng, Stream};
use crate::transform::{invert_increments, DEFAULT_BLOWUP_THRESHOLD};

const MAPPED_CHUNK: usize = 1024;
const CENSUS_CHUNK: usize = 4096;
const BLOWUP_BUDGET_FRACTION: f64 = 0.01;

const PILOT_BURNIN: usize = 20;
const PILOT_SWEEPS: usize = 200;
const TUNE_MAX_ITER: usize = 30;
const TARGET_ACCEPTANCE: (f64, f64) = (0.3, 0.6);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerConfig {
    pub n_samples: usize,
    /// Metropolis sweeps discarded at the start of every chain.
    pub n_burnin: usize,
    /// Metropolis sweeps between recorded paths.
    pub n_thin: usize,
    pub proposal_width: f64,
    pub seed: u64,
    /// Pinned value `φ(−T) = χ(−T)`.
    pub x0: f64,
    pub blowup_threshold: f64,
    /// Independent Metropolis chains; samples are split evenly between them.
    pub n_chains: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            n_burnin: 1_000,
            n_thin: 10,
            proposal_width: 0.25,
            seed: 42,
            x0: 0.0,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            n_chains: 8,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 1 {
            return Err(invalid("n_samples must be at least 1"));
        }
        if self.n_thin < 1 {
            return Err(invalid("n_thin must be at least 1"));
        }
        if self.n_chains < 1 {
            return Err(invalid("n_chains must be at least 1"));
        }
        if !(self.proposal_width.is_finite() && self.proposal_width > 0.0) {
            return Err(invalid(format!(
                "proposal_width must be positive, got {}",
                self.proposal_width
            )));
        }
        if !self.x0.is_finite() {
            return Err(invalid("x0 must be finite"));
        }
        if self.blowup_threshold.is_nan() || self.blowup_threshold <= 0.0 {
            return Err(invalid("blowup_threshold must be positive"));
        }
        Ok(())
    }

    /// Largest number of blowup redraws tolerated by the mapped sampler.
    pub fn blowup_budget(&self) -> usize {
        (self.n_samples as f64 * BLOWUP_BUDGET_FRACTION).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub paths: Vec<Path>,
    pub n_rejected_blowups: usize,
    /// Metropolis only.
    pub acceptance_rate: Option<f64>,
    pub seed_used: u64,
}

/// Brownian path with `χ[0] = x0` and increments `N(0, ℏε)`.
pub fn sample_wiener_path<R: Rng + ?Sized>(
    lattice: &Lattice,
    params: &ModelParams,
    config: &SamplerConfig,
    rng: &mut R,
) -> Path {
    let sd = (params.hbar() * lattice.spacing()).sqrt();
    let mut chi = Vec::with_capacity(lattice.nodes());
    let mut x = config.x0;
    chi.push(x);
    for _ in 0..lattice.steps() {
        x += sd * rng.sample::<f64, _>(StandardNormal);
        chi.push(x);
    }
    Path::new(chi)
}

/// Draws mapped paths chunk by chunk and folds each accepted path into a
/// per-chunk accumulator. Returns the accumulators in chunk order and the
/// total number of blowup redraws.
pub(crate) fn mapped_fold<A, I, F>(
    lattice: &Lattice,
    params: &ModelParams,
    branch: Branch,
    config: &SamplerConfig,
    init: I,
    fold: F,
) -> Result<(Vec<A>, usize)>
where
    A: Send,
    I: Fn(usize) -> A + Sync + Send,
    F: Fn(&mut A, &[f64]) + Sync + Send,
{
    config.validate()?;
    let n = config.n_samples;
    let budget = config.blowup_budget();
    let sd = (params.hbar() * lattice.spacing()).sqrt();
    let chunks = n.div_ceil(MAPPED_CHUNK);

    let results = map_indexed(chunks, |k| {
        let want = MAPPED_CHUNK.min(n - k * MAPPED_CHUNK);
        let mut rng = stream_rng(config.seed, Stream::Mapped, k as u64);
        let mut acc = init(want);
        let mut phi = vec![0.0; lattice.nodes()];
        let (mut got, mut rejected) = (0, 0);
        while got < want {
            let increments = (0..lattice.steps()).map(|_| sd * rng.sample::<f64, _>(StandardNormal));
            let ok = invert_increments(
                config.x0,
                increments,
                &mut phi,
                branch,
                lattice,
                params,
                config.blowup_threshold,
            );
            if ok {
                fold(&mut acc, &phi);
                got += 1;
            } else {
                rejected += 1;
                if rejected > budget {
                    break;
                }
            }
        }
        (acc, rejected)
    });

    let rejected: usize = results.iter().map(|(_, r)| r).sum();
    if rejected > budget {
        return Err(Error::BlowupBudget {
            rejected,
            budget,
            n_samples: n,
        });
    }
    Ok((results.into_iter().map(|(a, _)| a).collect(), rejected))
}

/// Brownian paths pushed through the inverse substitution. Draws that blow
/// up are counted and redrawn; more than 1% of `n_samples` is an error.
pub fn sample_mapped_batch(
    lattice: &Lattice,
    params: &ModelParams,
    branch: Branch,
    config: &SamplerConfig,
) -> Result<SampleBatch> {
    let (chunks, rejected) = mapped_fold(
        lattice,
        params,
        branch,
        config,
        Vec::with_capacity,
        |acc: &mut Vec<Path>, phi| acc.push(Path::new(phi.to_vec())),
    )?;
    Ok(SampleBatch {
        paths: chunks.into_iter().flatten().collect(),
        n_rejected_blowups: rejected,
        acceptance_rate: None,
        seed_used: config.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupCensus {
    pub draws: usize,
    pub blowups: usize,
}

impl BlowupCensus {
    pub fn rate(&self) -> f64 {
        self.blowups as f64 / self.draws as f64
    }
}

/// Counts how many of `draws` mapped draws blow up, with no redraw budget.
pub fn blowup_census(
    lattice: &Lattice,
    params: &ModelParams,
    branch: Branch,
    config: &SamplerConfig,
    draws: usize,
) -> BlowupCensus {
    let sd = (params.hbar() * lattice.spacing()).sqrt();
    let chunks = draws.div_ceil(CENSUS_CHUNK);
    let blowups = map_indexed(chunks, |k| {
        let count = CENSUS_CHUNK.min(draws - k * CENSUS_CHUNK);
        let mut rng = stream_rng(config.seed, Stream::Census, k as u64);
        let mut phi = vec![0.0; lattice.nodes()];
        (0..count)
            .filter(|_| {
                let increments =
                    (0..lattice.steps()).map(|_| sd * rng.sample::<f64, _>(StandardNormal));
                !invert_increments(
                    config.x0,
                    increments,
                    &mut phi,
                    branch,
                    lattice,
                    params,
                    config.blowup_threshold,
                )
            })
            .count()
    })
    .into_iter()
    .sum();
    BlowupCensus { draws, blowups }
}

/// An action whose change under a single-site update can be evaluated
/// locally. `local` returns every term that depends on `path[site]`, with
/// `path[site]` replaced by `value`.
pub trait LocalAction: Sync {
    fn local(&self, path: &[f64], site: usize, value: f64) -> f64;
}

/// `S±(φ) = Σ (Δφᵢ ± a(φᵢ² − β²)ε)² / (2ε)`
#[derive(Debug, Clone, Copy)]
pub struct ExactLatticeAction {
    sign: f64,
    a: f64,
    beta_sq: f64,
    eps: f64,
}

impl ExactLatticeAction {
    pub fn new(branch: Branch, lattice: &Lattice, params: &ModelParams) -> Self {
        Self {
            sign: branch.sign(),
            a: params.a(),
            beta_sq: params.beta() * params.beta(),
            eps: lattice.spacing(),
        }
    }

    #[inline]
    fn step(&self, from: f64, to: f64) -> f64 {
        let d = to - from + drift(from, self.sign, self.a, self.beta_sq, self.eps);
        d * d
    }
}

impl LocalAction for ExactLatticeAction {
    fn local(&self, path: &[f64], site: usize, value: f64) -> f64 {
        let mut s = 0.0;
        if site > 0 {
            s += self.step(path[site - 1], value);
        }
        if site + 1 < path.len() {
            s += self.step(value, path[site + 1]);
        }
        s / (2.0 * self.eps)
    }
}

/// Kinetic term only: the Wiener measure.
#[derive(Debug, Clone, Copy)]
pub struct FreeAction {
    eps: f64,
}

impl FreeAction {
    pub fn new(lattice: &Lattice) -> Self {
        Self {
            eps: lattice.spacing(),
        }
    }
}

impl LocalAction for FreeAction {
    fn local(&self, path: &[f64], site: usize, value: f64) -> f64 {
        let mut s = 0.0;
        if site > 0 {
            s += (value - path[site - 1]).powi(2);
        }
        if site + 1 < path.len() {
            s += (path[site + 1] - value).powi(2);
        }
        s / (2.0 * self.eps)
    }
}

struct ChainOutput {
    paths: Vec<Path>,
    accepted: u64,
    proposed: u64,
}

#[allow(clippy::too_many_arguments)]
fn run_chain<A: LocalAction>(
    action: &A,
    hbar: f64,
    lattice: &Lattice,
    config: &SamplerConfig,
    burnin: usize,
    samples: usize,
    record: bool,
    rng: &mut ChaCha8Rng,
) -> ChainOutput {
    let mut path = vec![config.x0; lattice.nodes()];
    let width = config.proposal_width;
    let threshold = config.blowup_threshold;

    let sweep = |path: &mut [f64], rng: &mut ChaCha8Rng| -> u64 {
        let mut accepted = 0;
        for site in 1..path.len() {
            let old = path[site];
            let new = old + width * rng.sample::<f64, _>(StandardNormal);
            if new.abs() > threshold {
                continue;
            }
            let ds = action.local(path, site, new) - action.local(path, site, old);
            if ds <= 0.0 || rng.random::<f64>() < (-ds / hbar).exp() {
                path[site] = new;
                accepted += 1;
            }
        }
        accepted
    };

    for _ in 0..burnin {
        sweep(&mut path, rng);
    }
    let mut out = ChainOutput {
        paths: Vec::with_capacity(if record { samples } else { 0 }),
        accepted: 0,
        proposed: 0,
    };
    for _ in 0..samples {
        for _ in 0..config.n_thin {
            out.accepted += sweep(&mut path, rng);
            out.proposed += lattice.steps() as u64;
        }
        if record {
            out.paths.push(Path::new(path.clone()));
        }
    }
    out
}

/// Random-walk Metropolis on `exp(−S/ℏ)` for any locally evaluable action.
///
/// Proposals outside `|φ| ≤ blowup_threshold` are rejected, so both samplers
/// target the measure restricted to the same event.
pub fn run_metropolis_with<A: LocalAction>(
    action: &A,
    hbar: f64,
    lattice: &Lattice,
    config: &SamplerConfig,
) -> Result<SampleBatch> {
    config.validate()?;
    let chains = config.n_chains.min(config.n_samples);
    let base = config.n_samples / chains;
    let extra = config.n_samples % chains;

    let outputs = map_indexed(chains, |c| {
        let mut rng = stream_rng(config.seed, Stream::Metropolis, c as u64);
        let samples = base + usize::from(c < extra);
        run_chain(action, hbar, lattice, config, config.n_burnin, samples, true, &mut rng)
    });

    let accepted: u64 = outputs.iter().map(|o| o.accepted).sum();
    let proposed: u64 = outputs.iter().map(|o| o.proposed).sum();
    Ok(SampleBatch {
        paths: outputs.into_iter().flat_map(|o| o.paths).collect(),
        n_rejected_blowups: 0,
        acceptance_rate: Some(accepted as f64 / proposed.max(1) as f64),
        seed_used: config.seed,
    })
}

pub fn run_metropolis(
    lattice: &Lattice,
    params: &ModelParams,
    branch: Branch,
    config: &SamplerConfig,
) -> Result<SampleBatch> {
    let action = ExactLatticeAction::new(branch, lattice, params);
    run_metropolis_with(&action, params.hbar(), lattice, config)
}

/// Acceptance rate of a short single-chain pilot run at `width`.
pub fn pilot_acceptance<A: LocalAction>(
    action: &A,
    hbar: f64,
    lattice: &Lattice,
    config: &SamplerConfig,
    width: f64,
    stream: u64,
) -> f64 {
    let pilot = SamplerConfig {
        proposal_width: width,
        n_thin: 1,
        ..config.clone()
    };
    let mut rng = stream_rng(config.seed, Stream::Pilot, stream);
    let out = run_chain(action, hbar, lattice, &pilot, PILOT_BURNIN, PILOT_SWEEPS, false, &mut rng);
    out.accepted as f64 / out.proposed as f64
}

/// Bisects the proposal width (geometrically) until a pilot run accepts
/// between 30% and 60% of proposals.
pub fn tune_proposal_with<A: LocalAction>(
    action: &A,
    hbar: f64,
    lattice: &Lattice,
    config: &SamplerConfig,
) -> Result<f64> {
    let scale = (hbar * lattice.spacing()).sqrt();
    let (mut lo, mut hi) = (scale * 1e-3, scale * 1e3);
    let mut last = f64::NAN;
    for iter in 0..TUNE_MAX_ITER {
        let mid = (lo * hi).sqrt();
        let acc = pilot_acceptance(action, hbar, lattice, config, mid, iter as u64);
        if (TARGET_ACCEPTANCE.0..=TARGET_ACCEPTANCE.1).contains(&acc) {
            return Ok(mid);
        }
        if acc > TARGET_ACCEPTANCE.1 {
            lo = mid;
        } else {
            hi = mid;
        }
        last = acc;
    }
    Err(Error::Tuning(format!(
        "no width in [{lo:e}, {hi:e}] reached the target range after {TUNE_MAX_ITER} pilots (last acceptance {last:.3})"
    )))
}

pub fn tune_proposal(
    lattice: &Lattice,
    params: &ModelParams,
    branch: Branch,
    config: &SamplerConfig,
) -> Result<f64> {
    let action = ExactLatticeAction::new(branch, lattice, params);
    tune_proposal_with(&action, params.hbar(), lattice, config)
}
