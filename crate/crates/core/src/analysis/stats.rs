//! Blocking error bars and z-score comparison.

use serde::Serialize;

use crate::error::{invalid, Error, Result};

pub const MIN_SAMPLES: usize = 16;
pub const PASS_THRESHOLD: f64 = 3.0;
const PLATEAU_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub block_size: usize,
}

/// Standard error of the mean of `data` grouped into blocks of `size`
/// (trailing samples that do not fill a block are dropped).
fn blocked_stderr(data: &[f64], size: usize) -> f64 {
    let blocks = data.len() / size;
    if blocks < 2 {
        return 0.0;
    }
    let means: Vec<f64> = data
        .chunks_exact(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let m = means.iter().sum::<f64>() / blocks as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (blocks - 1) as f64;
    (var / blocks as f64).sqrt()
}

/// Sample mean with a blocking error bar.
///
/// The block size doubles from 1 until the error bar changes by less than
/// 10% over one doubling, or until it would exceed `n / 16`.
pub fn estimate(samples: &[f64]) -> Result<Estimate> {
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(invalid(format!(
            "need at least {MIN_SAMPLES} samples for an estimate, got {n}"
        )));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let max_block = n / MIN_SAMPLES;

    let mut block_size = 1;
    let mut stderr = blocked_stderr(samples, 1);
    while 2 * block_size <= max_block {
        let next = blocked_stderr(samples, 2 * block_size);
        block_size *= 2;
        let plateau = if stderr == 0.0 {
            next == 0.0
        } else {
            ((next - stderr) / stderr).abs() < PLATEAU_TOLERANCE
        };
        stderr = next;
        if plateau {
            break;
        }
    }
    Ok(Estimate {
        mean,
        stderr,
        n_samples: n,
        block_size,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub z: f64,
    pub pass: bool,
}

pub fn compare(e1: &Estimate, e2: &Estimate) -> Result<Comparison> {
    let diff = e1.mean - e2.mean;
    let sigma = e1.stderr.hypot(e2.stderr);
    let z = if sigma == 0.0 {
        if diff != 0.0 {
            return Err(Error::DegenerateComparison(e1.mean, e2.mean));
        }
        0.0
    } else {
        diff / sigma
    };
    Ok(Comparison {
        z,
        pass: z.abs() < PASS_THRESHOLD,
    })
}

/// Component-wise comparison; reports the z-score of largest magnitude.
pub fn compare_all(e1: &[Estimate], e2: &[Estimate]) -> Result<Comparison> {
    if e1.len() != e2.len() || e1.is_empty() {
        return Err(invalid(format!(
            "cannot compare estimates of shapes {} and {}",
            e1.len(),
            e2.len()
        )));
    }
    let mut worst = Comparison { z: 0.0, pass: true };
    for (a, b) in e1.iter().zip(e2) {
        let c = compare(a, b)?;
        if c.z.abs() > worst.z.abs() {
            worst = c;
        }
    }
    Ok(worst)
}
