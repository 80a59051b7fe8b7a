//! Experiment configuration: JSON documents and shipped presets.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algorithms::{Algorithm, AlphaMode};
use crate::environment::{ContextKind, LossModel};
use crate::error::{Error, Result};
use crate::graph::GraphSpec;

const PRESETS: &[(&str, &str)] = &[("paper_fig2", include_str!("../presets/paper_fig2.json"))];

/// Names of the shipped presets.
pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

fn default_checkpoints() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    /// Number of evenly spaced rounds written per algorithm.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            format: OutputFormat::Csv,
            checkpoints: default_checkpoints(),
        }
    }
}

/// One algorithm entry with optional parameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: Algorithm,
    /// Fixed learning rate for the uniform-exploration variants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Exploration rate; defaults to the coupled value for the given `eta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub alpha_bounds: AlphaMode,
    /// Use the directed-graph tuning; defaults to whether the graph is directed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directed: Option<bool>,
}

impl AlgorithmConfig {
    pub fn new(name: Algorithm) -> Self {
        Self {
            name,
            eta: None,
            gamma: None,
            alpha_bounds: AlphaMode::Exact,
            directed: None,
        }
    }
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Number of actions `K`.
    pub actions: usize,
    /// Context dimension `d`.
    pub dimension: usize,
    /// Horizon `T`.
    pub horizon: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub context: ContextKind,
    pub adversary: LossModel,
    pub graph: GraphSpec,
    pub algorithms: Vec<AlgorithmConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub trials: Option<usize>,
    pub horizon: Option<usize>,
    pub base_seed: Option<u64>,
    pub directory: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

impl ExperimentConfig {
    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, with_suggestion(&e.into_inner().to_string()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let names: Vec<_> = preset_names().collect();
            Error::config(".", format!("unknown preset `{name}`; available: {}", names.join(", ")))
        })?;
        Self::from_json(text)
    }

    /// Reads a file, or a preset when no file of that name exists.
    pub fn load(path_or_preset: &str) -> Result<Self> {
        let path = Path::new(path_or_preset);
        if path.is_file() {
            Self::from_json(&std::fs::read_to_string(path)?)
        } else if PRESETS.iter().any(|(n, _)| *n == path_or_preset) {
            Self::preset(path_or_preset)
        } else {
            Err(Error::config(
                ".",
                format!("`{path_or_preset}` is neither a readable file nor a preset name"),
            ))
        }
    }

    pub fn with_overrides(mut self, overrides: &Overrides) -> Result<Self> {
        if let Some(trials) = overrides.trials {
            self.trials = trials;
        }
        if let Some(horizon) = overrides.horizon {
            self.horizon = horizon;
        }
        if let Some(seed) = overrides.base_seed {
            self.base_seed = seed;
        }
        if let Some(dir) = &overrides.directory {
            self.output.directory = Some(dir.clone());
        }
        if let Some(format) = overrides.format {
            self.output.format = format;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("actions", "K", self.actions),
            ("dimension", "d", self.dimension),
            ("horizon", "T", self.horizon),
            ("trials", "trials", self.trials),
        ];
        for (path, symbol, value) in positive {
            if value == 0 {
                let name = if path == symbol { path.to_string() } else { format!("{path} ({symbol})") };
                return Err(Error::config(path, format!("{name} must be at least 1")));
            }
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms", "at least one algorithm is required"));
        }
        if self.output.checkpoints == 0 {
            return Err(Error::config("output.checkpoints", "must be at least 1"));
        }
        let mut seen = HashSet::new();
        for (n, alg) in self.algorithms.iter().enumerate() {
            let path = |field: &str| format!("algorithms[{n}].{field}");
            if !seen.insert(alg.name) {
                return Err(Error::config(path("name"), format!("{} listed twice", alg.name)));
            }
            if alg.name.is_implicit_exploration() {
                for (field, set) in [("eta", alg.eta.is_some()), ("gamma", alg.gamma.is_some()), ("directed", alg.directed.is_some())] {
                    if set {
                        return Err(Error::config(
                            path(field),
                            format!("{} tunes its rates every round and takes no `{field}`", alg.name),
                        ));
                    }
                }
            } else if alg.gamma.is_some() && alg.eta.is_none() {
                return Err(Error::config(path("gamma"), "an exploration rate needs an explicit `eta`"));
            }
            if let AlphaMode::Fixed(v) = alg.alpha_bounds {
                if v > self.actions as f64 {
                    return Err(Error::config(
                        path("alpha_bounds"),
                        format!("bound {v} exceeds the number of actions {}", self.actions),
                    ));
                }
            }
        }
        self.graph
            .validate(self.actions)
            .map_err(|e| Error::config("graph", e.to_string()))?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut content = self.clone();
        content.output.directory = None;
        let canonical = serde_json::to_vec(&content).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Spelled-out names for terse keys, used when suggesting corrections.
const SYNONYMS: &[(&str, &str)] = &[
    ("learning_rate", "eta"),
    ("exploration_rate", "gamma"),
    ("independence_bounds", "alpha_bounds"),
    ("num_actions", "actions"),
    ("dim", "dimension"),
    ("rounds", "horizon"),
    ("seed", "base_seed"),
];

/// Appends a "did you mean" hint to serde's unknown-field and unknown-variant
/// messages.
fn with_suggestion(message: &str) -> String {
    let unknown = ["unknown field `", "unknown variant `"]
        .iter()
        .find_map(|prefix| message.strip_prefix(prefix))
        .and_then(|rest| rest.split_once('`'));
    let Some((given, rest)) = unknown else {
        return message.to_string();
    };
    let candidates: Vec<&str> = rest.split('`').skip(1).step_by(2).collect();
    let named = candidates.iter().map(|c| (*c, *c));
    let described = SYNONYMS
        .iter()
        .filter(|(_, key)| candidates.contains(key))
        .map(|(long, key)| (*long, *key));
    let best = named
        .chain(described)
        .map(|(spelling, key)| (strsim::normalized_damerau_levenshtein(given, spelling), key))
        .filter(|(score, _)| *score >= 0.6)
        .max_by(|a, b| a.0.total_cmp(&b.0));
    match best {
        Some((_, key)) => format!("{message}; did you mean `{key}`?"),
        None => message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_matches_paper_setup() {
        let c = ExperimentConfig::preset("paper_fig2").unwrap();
        assert_eq!((c.actions, c.dimension, c.horizon, c.trials), (10, 10, 100_000, 100));
        assert_eq!(c.graph, GraphSpec::CompletePlusIsolated { clique: 9, isolated: 1 });
        assert_eq!(c.context, ContextKind::BernoulliScaled { p: 0.5 });
        assert!(matches!(
            c.adversary,
            LossModel::SuddenChangeSynthetic { change_point: None, .. }
        ));
        let names: Vec<_> = c.algorithms.iter().map(|a| a.name).collect();
        assert_eq!(names.len(), 4);
        for a in Algorithm::ALL {
            assert!(names.contains(&a));
        }
    }

    #[test]
    fn zero_horizon_names_t() {
        let text = include_str!("../presets/paper_fig2.json").replace("100000", "0");
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("horizon (T)"), "{err}");
    }

    #[test]
    fn unknown_key_gets_suggestion() {
        let text = include_str!("../presets/paper_fig2.json")
            .replace("{ \"name\": \"exp3-lgc-u\" }", "{ \"name\": \"exp3-lgc-u\", \"learning_rte\": 0.1 }");
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("algorithms[0]"), "{err}");
        assert!(err.contains("learning_rte"), "{err}");
        assert!(err.contains("did you mean `eta`"), "{err}");
    }

    #[test]
    fn unknown_selector_has_path() {
        let text = include_str!("../presets/paper_fig2.json").replace("\"exp3-lgc-ix-star\"", "\"exp3-lgc-x\"");
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("algorithms[3].name"), "{err}");
        assert!(err.contains("did you mean `exp3-lgc-ix`"), "{err}");
    }

    #[test]
    fn missing_field_reported() {
        let err = ExperimentConfig::from_json(r#"{"actions": 2}"#).unwrap_err().to_string();
        assert!(err.contains("missing field"), "{err}");
    }

    #[test]
    fn ix_overrides_rejected() {
        let text = include_str!("../presets/paper_fig2.json")
            .replace("{ \"name\": \"exp3-lgc-ix\" }", "{ \"name\": \"exp3-lgc-ix\", \"eta\": 0.1 }");
        let err = ExperimentConfig::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("algorithms[2].eta"), "{err}");
    }

    #[test]
    fn overrides_take_precedence() {
        let c = ExperimentConfig::preset("paper_fig2")
            .unwrap()
            .with_overrides(&Overrides {
                trials: Some(20),
                horizon: Some(20_000),
                base_seed: Some(7),
                ..Default::default()
            })
            .unwrap();
        assert_eq!((c.trials, c.horizon, c.base_seed), (20, 20_000, 7));
        let bad = c.with_overrides(&Overrides {
            trials: Some(0),
            ..Default::default()
        });
        assert!(bad.is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::preset("paper_fig2").unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.base_seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let mut moved = a.clone();
        moved.output.directory = Some("elsewhere".into());
        assert_eq!(a.hash(), moved.hash());
    }

    #[test]
    fn round_trips_through_json() {
        let a = ExperimentConfig::preset("paper_fig2").unwrap();
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), a);
    }
}
