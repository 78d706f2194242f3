use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::Lattice;

/// Test functionals `F(φ)` of a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Observable {
    /// `φ(0)²`, needs even `N`.
    MidpointSq,
    /// `(1/2T)·Σφᵢ²ε` over `i < N`.
    MeanSq,
    /// `φ(+T)`
    Endpoint,
    /// The whole path, node by node.
    MeanPath,
}

pub const DEFAULT_OBSERVABLES: [Observable; 3] =
    [Observable::MidpointSq, Observable::MeanSq, Observable::Endpoint];

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::MidpointSq => "MIDPOINT_SQ",
            Observable::MeanSq => "MEAN_SQ",
            Observable::Endpoint => "ENDPOINT",
            Observable::MeanPath => "MEAN_PATH",
        }
    }

    pub fn is_vector(self) -> bool {
        self == Observable::MeanPath
    }

    /// Number of components the observable produces on `lattice`.
    pub fn width(self, lattice: &Lattice) -> usize {
        if self.is_vector() {
            lattice.nodes()
        } else {
            1
        }
    }

    pub fn check(self, lattice: &Lattice) -> Result<()> {
        if self == Observable::MidpointSq && lattice.midpoint_index().is_none() {
            return Err(invalid(format!(
                "MIDPOINT_SQ needs an even step count, got N = {}",
                lattice.steps()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MIDPOINT_SQ" => Ok(Observable::MidpointSq),
            "MEAN_SQ" => Ok(Observable::MeanSq),
            "ENDPOINT" => Ok(Observable::Endpoint),
            "MEAN_PATH" => Ok(Observable::MeanPath),
            other => Err(invalid(format!("unknown observable `{other}`"))),
        }
    }
}

/// Appends the observable's components for `path` to `out`.
pub fn evaluate_into(obs: Observable, path: &[f64], lattice: &Lattice, out: &mut Vec<f64>) -> Result<()> {
    lattice.check(path)?;
    obs.check(lattice)?;
    match obs {
        Observable::MidpointSq => {
            let x = path[lattice.steps() / 2];
            out.push(x * x);
        }
        Observable::MeanSq => {
            let sum: f64 = path[..path.len() - 1].iter().map(|x| x * x).sum();
            out.push(sum * lattice.spacing() / (2.0 * lattice.half_width()));
        }
        Observable::Endpoint => out.push(path[path.len() - 1]),
        Observable::MeanPath => out.extend_from_slice(path),
    }
    Ok(())
}

pub fn evaluate_observable(path: &[f64], obs: Observable, lattice: &Lattice) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(obs.width(lattice));
    evaluate_into(obs, path, lattice, &mut out)?;
    Ok(out)
}
