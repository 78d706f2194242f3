//! JSON experiment documents for the batch runner.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analysis::{Observable, DEFAULT_OBSERVABLES};
use crate::error::{Error, Result};
use crate::model::{Branch, Lattice, ModelParams};
use crate::sampler::SamplerConfig;
use crate::transform::{DEFAULT_BLOWUP_THRESHOLD, MAX_JACOBIAN_STEPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Equivalence,
    ClassicalLimit,
    Bvp,
    Kink,
    ItoCheck,
    JacobianCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Equivalence => "equivalence",
            Command::ClassicalLimit => "classical-limit",
            Command::Bvp => "bvp",
            Command::Kink => "kink",
            Command::ItoCheck => "ito-check",
            Command::JacobianCheck => "jacobian-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Format {
    #[default]
    #[serde(rename = "CSV", alias = "csv")]
    Csv,
    #[serde(rename = "JSON", alias = "json")]
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub a: f64,
    pub b: f64,
    pub hbar: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self { a: 1.0, b: 2.0, hbar: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    #[serde(rename = "T")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub steps: usize,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self { half_width: 1.0, steps: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub n_samples: usize,
    pub n_burnin: usize,
    pub n_thin: usize,
    /// Tuned by pilot runs when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposal_width: Option<f64>,
    pub seed: u64,
    pub x0: f64,
    pub blowup_threshold: f64,
    pub chains: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            n_samples: d.n_samples,
            n_burnin: d.n_burnin,
            n_thin: d.n_thin,
            proposal_width: None,
            seed: d.seed,
            x0: d.x0,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            chains: d.n_chains,
        }
    }
}

fn default_observables() -> Vec<Observable> {
    DEFAULT_OBSERVABLES.to_vec()
}

fn default_branch() -> Branch {
    Branch::Plus
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub command: Command,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub lattice: LatticeSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default = "default_branch")]
    pub branch: Branch,
    #[serde(default = "default_observables")]
    pub observables: Vec<Observable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar_list: Option<Vec<f64>>,
    /// Left boundary value `φ(−T) = −alpha` for the `kink` command; the odd
    /// kink when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    #[serde(default)]
    pub format: Format,
    /// Worker threads for sampling; all available when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

fn field_error(field: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(field_error(field, format!("must be a positive number, got {v}")))
    }
}

impl ExperimentSpec {
    pub fn model_params(&self) -> Result<ModelParams> {
        let p = &self.params;
        ModelParams::new(p.a, p.b, p.hbar)
    }

    pub fn make_lattice(&self) -> Result<Lattice> {
        Lattice::new(self.lattice.half_width, self.lattice.steps)
    }

    /// Sampler settings; the proposal width falls back to the library
    /// default when not given (callers tune it instead).
    pub fn sampler_config(&self) -> SamplerConfig {
        let s = &self.sampler;
        SamplerConfig {
            n_samples: s.n_samples,
            n_burnin: s.n_burnin,
            n_thin: s.n_thin,
            proposal_width: s.proposal_width.unwrap_or(SamplerConfig::default().proposal_width),
            seed: s.seed,
            x0: s.x0,
            blowup_threshold: s.blowup_threshold,
            n_chains: s.chains,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("params.a", self.params.a)?;
        if !(self.params.b.is_finite() && self.params.b >= 0.0) {
            return Err(field_error("params.b", format!("must be non-negative, got {}", self.params.b)));
        }
        positive("params.hbar", self.params.hbar)?;
        positive("lattice.T", self.lattice.half_width)?;
        if self.lattice.steps < 2 {
            return Err(field_error("lattice.N", format!("must be at least 2, got {}", self.lattice.steps)));
        }

        let s = &self.sampler;
        for (field, v) in [("sampler.n_samples", s.n_samples), ("sampler.n_thin", s.n_thin), ("sampler.chains", s.chains)] {
            if v < 1 {
                return Err(field_error(field, "must be at least 1"));
            }
        }
        if let Some(w) = s.proposal_width {
            positive("sampler.proposal_width", w)?;
        }
        if !s.x0.is_finite() {
            return Err(field_error("sampler.x0", "must be finite"));
        }
        if s.blowup_threshold.is_nan() || s.blowup_threshold <= 0.0 {
            return Err(field_error("sampler.blowup_threshold", "must be positive"));
        }

        if self.observables.is_empty() {
            return Err(field_error("observables", "at least one observable is required"));
        }
        let lattice = self.make_lattice()?;
        for obs in &self.observables {
            obs.check(&lattice).map_err(|e| field_error("observables", e.to_string()))?;
        }

        if let Some(list) = &self.hbar_list {
            if list.is_empty() {
                return Err(field_error("hbar_list", "must not be empty"));
            }
            for &h in list {
                positive("hbar_list", h)?;
            }
            if list.windows(2).any(|w| w[1] >= w[0]) {
                return Err(field_error("hbar_list", "must be strictly decreasing"));
            }
        }
        if let Some(alpha) = self.alpha {
            if !alpha.is_finite() {
                return Err(field_error("alpha", "must be finite"));
            }
        }
        if self.threads == Some(0) {
            return Err(field_error("threads", "must be at least 1"));
        }
        if self.command == Command::JacobianCheck && self.lattice.steps > MAX_JACOBIAN_STEPS {
            return Err(field_error(
                "lattice.N",
                format!("jacobian-check supports N <= {MAX_JACOBIAN_STEPS}"),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses and validates an experiment document, filling in defaults.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    parse_config_with_overrides(text, &[])
}

/// Like [`parse_config`], with `key.path=value` overrides applied to the
/// document first. Values are read as JSON when possible and as plain
/// strings otherwise, so `sampler.seed=7` and `branch=minus` both work.
pub fn parse_config_with_overrides(text: &str, overrides: &[String]) -> Result<ExperimentSpec> {
    let mut doc: Value = serde_json::from_str(text).map_err(parse_error)?;
    for item in overrides {
        apply_override(&mut doc, item)?;
    }
    let spec: ExperimentSpec = serde_json::from_value(doc).map_err(|e| Error::Parse {
        line: 0,
        column: 0,
        message: e.to_string(),
    })?;
    spec.validate()?;
    Ok(spec)
}

fn apply_override(doc: &mut Value, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| field_error(item, "override must look like key.path=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(field_error(key, "empty path segment"));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| field_error(key, "override path runs through a non-object"))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_document_gets_defaults() {
        let spec = parse_config(r#"{"command": "equivalence"}"#).unwrap();
        assert_eq!(spec.params, ParamsSection { a: 1.0, b: 2.0, hbar: 1.0 });
        assert_eq!(spec.lattice, LatticeSection { half_width: 1.0, steps: 32 });
        assert_eq!(spec.sampler.n_samples, 100_000);
        assert_eq!(spec.sampler.seed, 42);
        assert_eq!(spec.sampler.x0, 0.0);
        assert_eq!(spec.sampler.blowup_threshold, 1e6);
        assert_eq!(spec.format, Format::Csv);
        assert_eq!(spec.observables, DEFAULT_OBSERVABLES.to_vec());
        assert_eq!(spec.branch, Branch::Plus);
    }

    #[test]
    fn validation_names_field() {
        match parse_config(r#"{"command": "equivalence", "lattice": {"N": 0}}"#) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "lattice.N"),
            other => panic!("{other:?}"),
        }
        match parse_config(r#"{"command": "classical-limit", "hbar_list": [0.1, 0.5]}"#) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "hbar_list"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_document_reports_line() {
        match parse_config("{\n  \"command\": \"bvp\",\n  oops\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse_config(r#"{"command": "bvp", "colour": 1}"#).is_err());
        assert!(parse_config(r#"{"command": "bvp", "params": {"c": 1}}"#).is_err());
        assert!(parse_config(r#"{"command": "paint"}"#).is_err());
    }

    #[test]
    fn overrides() {
        let spec = parse_config_with_overrides(
            r#"{"command": "equivalence"}"#,
            &["sampler.seed=7".into(), "branch=minus".into(), "lattice.N=16".into(), "format=JSON".into()],
        )
        .unwrap();
        assert_eq!(spec.sampler.seed, 7);
        assert_eq!(spec.branch, Branch::Minus);
        assert_eq!(spec.lattice.steps, 16);
        assert_eq!(spec.format, Format::Json);
        assert!(parse_config_with_overrides("{}", &["command".into()]).is_err());
    }

    fn spec_strategy() -> impl Strategy<Value = ExperimentSpec> {
        (
            prop_oneof![Just(Command::Equivalence), Just(Command::ClassicalLimit), Just(Command::Kink)],
            0.1f64..5.0,
            0.0f64..5.0,
            1e-3f64..2.0,
            1usize..40,
            any::<u64>(),
            -3.0f64..3.0,
            proptest::option::of(1e-3f64..1.0),
            proptest::option::of(proptest::collection::vec(1e-3f64..1.0, 1..5)),
            any::<bool>(),
        )
            .prop_map(|(command, a, b, hbar, half_n, seed, x0, width, hbars, json)| {
                let hbar_list = hbars.map(|mut v| {
                    v.sort_by(|x, y| y.partial_cmp(x).unwrap());
                    v.dedup();
                    v
                });
                ExperimentSpec {
                    command,
                    params: ParamsSection { a, b, hbar },
                    lattice: LatticeSection { half_width: 1.0, steps: 2 * half_n },
                    sampler: SamplerSection { seed, x0, proposal_width: width, ..Default::default() },
                    branch: if json { Branch::Minus } else { Branch::Plus },
                    observables: default_observables(),
                    hbar_list,
                    alpha: None,
                    output_path: Some("out/run".into()),
                    format: if json { Format::Json } else { Format::Csv },
                    threads: None,
                }
            })
    }

    proptest! {
        #[test]
        fn roundtrip(spec in spec_strategy()) {
            let text = spec.to_json();
            let back = parse_config(&text).unwrap();
            prop_assert_eq!(&back, &spec);
            prop_assert_eq!(back.to_json(), text);
        }
    }
}
