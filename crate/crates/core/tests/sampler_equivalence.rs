//! Statistical checks on the samplers: the two samplers agree where blowups
//! are negligible, Brownian draws have the right law, and Metropolis
//! reproduces the free theory.

use pathlab::analysis::{compare_all, equivalence_experiment, estimate, estimate_observable, DEFAULT_OBSERVABLES};
use pathlab::sampler::{run_metropolis_with, FreeAction};
use pathlab::{
    sample_mapped_batch, sample_wiener_path, tune_proposal, Branch, Lattice, ModelParams, Observable,
    SampleBatch, SamplerConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn samplers_agree_at_small_hbar() {
    let lattice = Lattice::new(1.0, 32).unwrap();
    let params = ModelParams::new(1.0, 2.0, 0.1).unwrap();
    let mut observables = DEFAULT_OBSERVABLES.to_vec();
    observables.push(Observable::MeanPath);
    for branch in [Branch::Plus, Branch::Minus] {
        let mut config = SamplerConfig {
            n_samples: 100_000,
            seed: 3,
            ..Default::default()
        };
        config.proposal_width = tune_proposal(&lattice, &params, branch, &config).unwrap();
        let report = equivalence_experiment(&lattice, &params, branch, &config, &observables).unwrap();
        assert_eq!(report.n_rejected_blowups, 0);
        for row in &report.rows {
            assert!(row.pass, "{branch} {}: z = {}", row.observable, row.z);
        }
        let acc = report.acceptance_rate;
        assert!((0.3..=0.6).contains(&acc), "acceptance {acc}");
    }
}

#[test]
fn mirror_relates_branch_mean_paths() {
    // With x0 = 0, φ ~ exp(−S₋/ℏ) exactly when −φ ~ exp(−S₊/ℏ).
    let lattice = Lattice::new(1.0, 16).unwrap();
    let params = ModelParams::new(1.0, 2.0, 0.2).unwrap();
    let plus_cfg = SamplerConfig {
        n_samples: 50_000,
        seed: 1,
        ..Default::default()
    };
    let minus_cfg = SamplerConfig { seed: 2, ..plus_cfg.clone() };
    let plus = sample_mapped_batch(&lattice, &params, Branch::Plus, &plus_cfg).unwrap();
    let minus = sample_mapped_batch(&lattice, &params, Branch::Minus, &minus_cfg).unwrap();
    let flipped = SampleBatch {
        paths: plus.paths.iter().map(|p| -p).collect(),
        ..plus
    };
    let e_plus = estimate_observable(&flipped, Observable::MeanPath, &lattice).unwrap();
    let e_minus = estimate_observable(&minus, Observable::MeanPath, &lattice).unwrap();
    let cmp = compare_all(&e_plus[1..], &e_minus[1..]).unwrap();
    assert!(cmp.z.abs() < 4.0, "worst node z = {}", cmp.z);
    assert!(e_minus.last().unwrap().mean < -0.1, "MINUS paths settle near −β");
}

#[test]
fn wiener_increments_have_the_right_law() {
    let lattice = Lattice::new(1.0, 8).unwrap();
    let hbar = 0.7;
    let params = ModelParams::new(1.0, 2.0, hbar).unwrap();
    let config = SamplerConfig {
        x0: 0.5,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 50_000;
    let ends: Vec<f64> = (0..n)
        .map(|_| sample_wiener_path(&lattice, &params, &config, &mut rng).last())
        .collect();

    let e = estimate(&ends).unwrap();
    assert!((e.mean - 0.5).abs() < 4.0 * e.stderr);
    let var = ends.iter().map(|x| (x - e.mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let expected = hbar * 2.0;
    assert!((var / expected - 1.0).abs() < 0.03, "variance {var} vs {expected}");

    // Kolmogorov–Smirnov against N(x0, 2Tℏ).
    let law = Normal::new(0.5, expected.sqrt()).unwrap();
    let mut sorted = ends.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = law.cdf(x);
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value.
    assert!(d < 1.63 / (n as f64).sqrt(), "KS statistic {d}");
}

#[test]
fn metropolis_reproduces_free_theory() {
    let lattice = Lattice::new(1.0, 16).unwrap();
    let hbar = 0.5;
    let config = SamplerConfig {
        n_samples: 80_000,
        proposal_width: 0.3,
        n_thin: 5,
        ..Default::default()
    };
    let batch = run_metropolis_with(&FreeAction::new(&lattice), hbar, &lattice, &config).unwrap();
    let ends: Vec<f64> = batch.paths.iter().map(|p| p.last()).collect();
    let e = estimate(&ends).unwrap();
    assert!(e.mean.abs() < 4.0 * e.stderr, "mean {} ± {}", e.mean, e.stderr);
    let sq: Vec<f64> = ends.iter().map(|x| x * x).collect();
    let v = estimate(&sq).unwrap();
    let expected = 2.0 * hbar;
    assert!((v.mean / expected - 1.0).abs() < 0.05, "Var {} ± {} vs {expected}", v.mean, v.stderr);
}

#[test]
fn quadratic_variation_matches_hbar() {
    // Σ φᵢ Δφᵢ² ≈ ℏ Σ φᵢ ε for mapped paths: the Ito correction the
    // left-point discretization carries.
    let lattice = Lattice::new(1.0, 256).unwrap();
    let hbar = 0.05;
    let params = ModelParams::new(1.0, 2.0, hbar).unwrap();
    let config = SamplerConfig {
        n_samples: 4_000,
        x0: 1.0,
        ..Default::default()
    };
    let batch = sample_mapped_batch(&lattice, &params, Branch::Plus, &config).unwrap();
    let eps = lattice.spacing();
    let (lhs, rhs) = batch.paths.iter().fold((0.0, 0.0), |(l, r), p| {
        let qv: f64 = p.windows(2).map(|w| w[0] * (w[1] - w[0]).powi(2)).sum();
        let lin: f64 = p[..p.len() - 1].iter().sum::<f64>() * eps;
        (l + qv, r + hbar * lin)
    });
    assert!((lhs / rhs - 1.0).abs() < 0.02, "{lhs} vs {rhs}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let lattice = Lattice::new(1.0, 16).unwrap();
    let params = ModelParams::new(1.0, 2.0, 0.3).unwrap();
    let config = SamplerConfig {
        n_samples: 5_000,
        ..Default::default()
    };
    let reference = sample_mapped_batch(&lattice, &params, Branch::Plus, &config).unwrap();
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(|| sample_mapped_batch(&lattice, &params, Branch::Plus, &config).unwrap());
        assert_eq!(single, reference);
    }
    let again = sample_mapped_batch(&lattice, &params, Branch::Plus, &config).unwrap();
    assert_eq!(again, reference);
}
