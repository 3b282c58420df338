//! Experiment configuration: a JSON document, optionally overridden by flags.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ader_core::ader::Variant;
use ader_core::environments::Contraction;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Environment kinds the harness can instantiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    QuadraticTracking,
    LinearAdversary,
    LowerBound,
    /// Quadratic losses whose minimizer follows the configured model exactly.
    ModelTracking,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::QuadraticTracking => "quadratic-tracking",
            EnvKind::LinearAdversary => "linear-adversary",
            EnvKind::LowerBound => "lower-bound",
            EnvKind::ModelTracking => "model-tracking",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub family: EnvKind,
    /// Label used in file names and summaries; defaults to the family name.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub switches: usize,
    /// Switch the quadratic target every this many rounds; wins over `switches`.
    #[serde(default)]
    pub switch_every: Option<usize>,
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "one")]
    pub gradient_bound: f64,
    /// Contraction schedule used by the dynamical variants and `model-tracking`.
    #[serde(default)]
    pub model: Vec<Contraction>,
    /// Initial minimizer for `model-tracking`; defaults to 0.8·(D/2)·e₁.
    #[serde(default)]
    pub start: Option<Vec<f64>>,
}

impl EnvironmentConfig {
    pub fn new(family: EnvKind) -> Self {
        EnvironmentConfig {
            family,
            name: None,
            drift: 0.0,
            switches: 0,
            switch_every: None,
            tau: 0.0,
            gradient_bound: 1.0,
            model: Vec::new(),
            start: None,
        }
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or(self.family.name())
    }

    /// Effective switch count at horizon `t`.
    pub fn switches_at(&self, t: usize) -> usize {
        match self.switch_every {
            Some(p) => t.div_ceil(p).saturating_sub(1),
            None => self.switches,
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Comparator sequences registered against every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ComparatorSpec {
    ConstantBest,
    PerRoundMinimizer,
    /// Best point per block. Without `blocks` the environment's own segmentation is used.
    BlockBest {
        #[serde(default)]
        blocks: Option<usize>,
    },
    /// Starts at the round-1 minimizer and follows the environment's model.
    FollowDynamics,
    /// JSON array of points; the first `T` are used.
    Custom { path: PathBuf },
}

impl ComparatorSpec {
    pub fn name(&self) -> String {
        match self {
            ComparatorSpec::ConstantBest => "constant-best".into(),
            ComparatorSpec::PerRoundMinimizer => "per-round-minimizer".into(),
            ComparatorSpec::BlockBest { blocks: None } => "block-best".into(),
            ComparatorSpec::BlockBest { blocks: Some(b) } => format!("block-best-{b}"),
            ComparatorSpec::FollowDynamics => "follow-dynamics".into(),
            ComparatorSpec::Custom { path } => format!(
                "custom-{}",
                path.file_stem().and_then(|s| s.to_str()).unwrap_or("file")
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Variant>,
    pub environments: Vec<EnvironmentConfig>,
    pub horizons: Vec<usize>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_diameter")]
    pub diameter: f64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_comparators")]
    pub comparators: Vec<ComparatorSpec>,
    /// Overrides the family's loss range `c`.
    #[serde(default)]
    pub loss_range: Option<f64>,
    /// Step size of the OGD baselines.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_dim() -> usize {
    2
}

fn default_diameter() -> f64 {
    2.0
}

fn default_comparators() -> Vec<ComparatorSpec> {
    vec![ComparatorSpec::PerRoundMinimizer]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithms: vec![Variant::AderBasic],
            environments: vec![EnvironmentConfig {
                drift: 0.05,
                ..EnvironmentConfig::new(EnvKind::QuadraticTracking)
            }],
            horizons: vec![1000],
            dim: default_dim(),
            diameter: default_diameter(),
            seeds: vec![0],
            comparators: default_comparators(),
            loss_range: None,
            eta: None,
            out: None,
        }
    }
}

/// Command-line values that replace the corresponding config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub algorithms: Vec<Variant>,
    pub horizons: Vec<usize>,
    pub dim: Option<usize>,
    pub seeds: Vec<u64>,
    pub tau: Option<f64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses `text`; errors are anchored as `origin:line:col`.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let suffix = format!(" at line {} column {}", e.line(), e.column());
            let msg = msg.strip_suffix(&suffix).unwrap_or(&msg);
            CliError::Usage(format!("{origin}:{}:{}: {msg}", e.line(), e.column()))
        })
    }

    /// Reads and validates a config file. Relative `custom` comparator paths are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let origin = path.display().to_string();
        let mut config = Self::parse(&text, &origin)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for c in &mut config.comparators {
            if let ComparatorSpec::Custom { path } = c {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
        config
            .validate()
            .map_err(|(key, msg)| CliError::Usage(anchor(&text, &origin, key, &msg)))?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if !o.algorithms.is_empty() {
            self.algorithms = o.algorithms.clone();
        }
        if !o.horizons.is_empty() {
            self.horizons = o.horizons.clone();
        }
        if let Some(d) = o.dim {
            self.dim = d;
        }
        if !o.seeds.is_empty() {
            self.seeds = o.seeds.clone();
        }
        if let Some(tau) = o.tau {
            for env in &mut self.environments {
                env.tau = tau;
            }
        }
        if o.out.is_some() {
            self.out = o.out.clone();
        }
    }

    /// Semantic checks; the error names the offending top-level key.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let nonempty = |key: &'static str, n: usize| {
            if n == 0 {
                Err((key, format!("`{key}` needs at least one entry")))
            } else {
                Ok(())
            }
        };
        nonempty("algorithms", self.algorithms.len())?;
        nonempty("environments", self.environments.len())?;
        nonempty("horizons", self.horizons.len())?;
        nonempty("seeds", self.seeds.len())?;
        nonempty("comparators", self.comparators.len())?;
        if self.horizons.contains(&0) {
            return Err(("horizons", "horizons must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(("dim", "dim must be at least 1".into()));
        }
        if !(self.diameter.is_finite() && self.diameter > 0.0) {
            return Err(("diameter", format!("diameter must be positive, got {}", self.diameter)));
        }
        if let Some(c) = self.loss_range {
            if !(c.is_finite() && c > 0.0) {
                return Err(("loss_range", format!("loss_range must be positive, got {c}")));
            }
        }
        if let Some(eta) = self.eta {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(("eta", format!("eta must be positive, got {eta}")));
            }
        }
        let mut labels = BTreeSet::new();
        for env in &self.environments {
            let label = env.label();
            if !is_safe_label(label) {
                return Err((
                    "environments",
                    format!("environment name `{label}` may only use letters, digits, `-`, `_` and `.`"),
                ));
            }
            if !labels.insert(label.to_string()) {
                return Err(("environments", format!("duplicate environment name `{label}`")));
            }
            if env.switch_every == Some(0) {
                return Err(("switch_every", "switch_every must be at least 1".into()));
            }
            if let Some(start) = &env.start {
                if start.len() != self.dim {
                    return Err(("start", format!("start has {} coordinates, dim is {}", start.len(), self.dim)));
                }
            }
            if env.family == EnvKind::ModelTracking && env.model.is_empty() {
                return Err(("model", format!("environment `{label}` (model-tracking) needs a model")));
            }
            if env.model.is_empty() {
                if let Some(v) = self.algorithms.iter().find(|v| v.needs_model()) {
                    return Err(("model", format!("{v} needs a model on environment `{label}`")));
                }
                if self.comparators.contains(&ComparatorSpec::FollowDynamics) {
                    return Err(("model", format!("follow-dynamics needs a model on environment `{label}`")));
                }
            }
        }
        let mut names = BTreeSet::new();
        for c in &self.comparators {
            let name = c.name();
            if !is_safe_label(&name) {
                return Err(("comparators", format!("comparator name `{name}` has unsupported characters")));
            }
            if !names.insert(name.clone()) {
                return Err(("comparators", format!("comparator `{name}` registered twice")));
            }
            if let ComparatorSpec::Custom { path } = c {
                if !path.is_file() {
                    return Err(("comparators", format!("comparator file {} does not exist", path.display())));
                }
            }
            if let ComparatorSpec::BlockBest { blocks: Some(0) } = c {
                return Err(("comparators", "block-best needs at least one block".into()));
            }
        }
        Ok(())
    }

    pub fn validated(self) -> Result<Self, CliError> {
        self.validate().map_err(|(_, msg)| CliError::Usage(msg))?;
        Ok(self)
    }
}

fn is_safe_label(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// `origin:line:col: msg` at the first occurrence of `"key"`, or `origin: msg`.
fn anchor(text: &str, origin: &str, key: &str, msg: &str) -> String {
    let needle = format!("\"{key}\"");
    match text.find(&needle) {
        Some(offset) => {
            let before = &text[..offset];
            let line = before.matches('\n').count() + 1;
            let col = offset - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            format!("{origin}:{line}:{col}: {msg}")
        }
        None => format!("{origin}: {msg}"),
    }
}
