//! Experiment configuration: a JSON document with defaults for everything
//! except the network size.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use coopbf::amp::{FirstMemory, OnsagerOrder};
use coopbf::channel::{CorrelationPolicy, EdgeCorrelation};
use coopbf::codec::SCHEMA_VERSION;
use coopbf::harness::Algorithm;
use coopbf::symbols::SymbolKind;
use coopbf::topology::TopologyMode;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot parse config at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config value at `{path}`: {message}")]
    Validation { path: String, message: String },
}

impl ConfigError {
    pub fn path(&self) -> &str {
        match self {
            ConfigError::Parse { path, .. } | ConfigError::Validation { path, .. } => path,
        }
    }
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Shorthand for `topology.L`; folded into the topology block on parse.
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub num_bs: Option<usize>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub num_ue: Option<usize>,
    #[serde(rename = "N_l", default, skip_serializing_if = "Option::is_none")]
    pub bs_antennas: Option<usize>,
    #[serde(rename = "M_k", default, skip_serializing_if = "Option::is_none")]
    pub ue_antennas: Option<usize>,
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub algorithms: AlgorithmConfig,
    #[serde(default)]
    pub metric: MetricConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Full,
    #[default]
    NearestB,
    Geometric,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    #[serde(default)]
    pub mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(rename = "L", default)]
    pub num_bs: Option<usize>,
    #[serde(rename = "K", default)]
    pub num_ue: Option<usize>,
    #[serde(rename = "N_l", default)]
    pub bs_antennas: Option<usize>,
    #[serde(rename = "M_k", default)]
    pub ue_antennas: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    #[default]
    Random,
    Fixed,
    PerEdge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default)]
    pub policy: PolicyName,
    /// Upper end of the uniform draw of both correlation coefficients.
    #[serde(default = "default_rho_max")]
    pub rho_max: f64,
    #[serde(default = "default_gain_min")]
    pub gain_min: f64,
    #[serde(default = "default_gain_max")]
    pub gain_max: f64,
    /// Used by the `fixed` policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<EdgeCorrelation>,
    /// Used by the `per_edge` policy, in edge order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<EdgeCorrelation>>,
    /// When set, topology and covariances come from this seed and only the
    /// fading and symbols from the experiment seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistics_seed: Option<u64>,
}

fn default_rho_max() -> f64 {
    0.7
}
fn default_gain_min() -> f64 {
    0.1
}
fn default_gain_max() -> f64 {
    1.0
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            policy: PolicyName::Random,
            rho_max: default_rho_max(),
            gain_min: default_gain_min(),
            gain_max: default_gain_max(),
            fixed: None,
            edges: None,
            statistics_seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    #[serde(default = "default_run")]
    pub run: Vec<Algorithm>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_user_beta: Option<Vec<f64>>,
    /// BP damping on `(x, V)` messages.
    #[serde(default)]
    pub damping: f64,
    #[serde(default = "default_admm_rho")]
    pub admm_rho: f64,
    #[serde(default)]
    pub onsager_order: OnsagerOrder,
    /// First-round memory term of AMP and CCoI.
    #[serde(default)]
    pub first_memory: FirstMemory,
    /// Channel realizations per covariance epoch, for amortizing the
    /// CCoI statics in the complexity report.
    #[serde(default = "default_epoch")]
    pub statistics_epoch: u64,
}

fn default_run() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}
fn default_iterations() -> usize {
    50
}
fn default_beta() -> f64 {
    1e-2
}
fn default_admm_rho() -> f64 {
    1.0
}
fn default_epoch() -> u64 {
    1
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            run: default_run(),
            iterations: default_iterations(),
            beta: default_beta(),
            per_user_beta: None,
            damping: 0.0,
            admm_rho: default_admm_rho(),
            onsager_order: OnsagerOrder::default(),
            first_memory: FirstMemory::default(),
            statistics_epoch: default_epoch(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    #[serde(default = "default_beta")]
    pub sigma2: f64,
    #[serde(default)]
    pub symbols: SymbolKind,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            sigma2: default_beta(),
            symbols: SymbolKind::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

/// Parses and validates a config document, filling in defaults and
/// folding the top-level size shorthand into the topology block.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        if message.starts_with("unknown field") || message.starts_with("unknown variant") {
            ConfigError::Validation { path, message }
        } else {
            ConfigError::Parse { path, message }
        }
    })?;
    config.normalize()?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    fn normalize(&mut self) -> Result<(), ConfigError> {
        let pairs = [
            ("L", self.num_bs.take(), &mut self.topology.num_bs),
            ("K", self.num_ue.take(), &mut self.topology.num_ue),
            ("N_l", self.bs_antennas.take(), &mut self.topology.bs_antennas),
            ("M_k", self.ue_antennas.take(), &mut self.topology.ue_antennas),
        ];
        for (key, short, slot) in pairs {
            match (short, *slot) {
                (Some(a), Some(b)) if a != b => {
                    return Err(invalid(key, format!("{a} conflicts with topology.{key} = {b}")));
                }
                (Some(a), _) => *slot = Some(a),
                (None, Some(_)) => {}
                (None, None) => {
                    return Err(invalid(
                        &format!("topology.{key}"),
                        "missing (set it here or at the top level)",
                    ))
                }
            }
        }
        if self.topology.mode == ModeName::NearestB && self.topology.b.is_none() {
            // default 3, but never more servers than there are BSs
            self.topology.b = Some(self.topology.num_bs.map_or(3, |l| l.clamp(1, 3)));
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, found {}", self.schema_version),
            ));
        }
        let t = &self.topology;
        let (l, k, n, m) = self.sizes();
        for (key, v) in [("L", l), ("K", k), ("N_l", n), ("M_k", m)] {
            if v == 0 {
                return Err(invalid(&format!("topology.{key}"), "must be at least 1"));
            }
        }
        match t.mode {
            ModeName::Full => {}
            ModeName::NearestB => {
                let b = t.b.unwrap_or(0);
                if b == 0 || b > l {
                    return Err(invalid("topology.b", format!("must lie in 1..={l}, found {b}")));
                }
            }
            ModeName::Geometric => match t.radius {
                Some(r) if r > 0.0 && r.is_finite() => {}
                Some(r) => return Err(invalid("topology.radius", format!("must be positive, found {r}"))),
                None => return Err(invalid("topology.radius", "required by the geometric mode")),
            },
        }
        if t.mode != ModeName::NearestB && t.b.is_some() {
            return Err(invalid("topology.b", "only used by the nearest_b mode"));
        }
        if t.mode != ModeName::Geometric && t.radius.is_some() {
            return Err(invalid("topology.radius", "only used by the geometric mode"));
        }

        let c = &self.channel;
        if !(0.0..1.0).contains(&c.rho_max) {
            return Err(invalid(
                "channel.rho_max",
                format!("must lie in [0, 1), found {}", c.rho_max),
            ));
        }
        if !(c.gain_min > 0.0 && c.gain_min.is_finite()) {
            return Err(invalid(
                "channel.gain_min",
                format!("must be positive, found {}", c.gain_min),
            ));
        }
        if !(c.gain_max >= c.gain_min && c.gain_max.is_finite()) {
            return Err(invalid(
                "channel.gain_max",
                format!("must be at least gain_min, found {}", c.gain_max),
            ));
        }
        let check_edge = |path: &str, e: &EdgeCorrelation| {
            for (name, rho) in [("rho_r", e.rho_r), ("rho_t", e.rho_t)] {
                if !(0.0..1.0).contains(&rho) {
                    return Err(invalid(
                        &format!("{path}.{name}"),
                        format!("must lie in [0, 1), found {rho}"),
                    ));
                }
            }
            if !(e.gain > 0.0 && e.gain.is_finite()) {
                return Err(invalid(
                    &format!("{path}.gain"),
                    format!("must be positive, found {}", e.gain),
                ));
            }
            Ok(())
        };
        match c.policy {
            PolicyName::Random => {}
            PolicyName::Fixed => match &c.fixed {
                Some(e) => check_edge("channel.fixed", e)?,
                None => return Err(invalid("channel.fixed", "required by the fixed policy")),
            },
            PolicyName::PerEdge => match &c.edges {
                Some(list) => {
                    for (i, e) in list.iter().enumerate() {
                        check_edge(&format!("channel.edges[{i}]"), e)?;
                    }
                }
                None => return Err(invalid("channel.edges", "required by the per_edge policy")),
            },
        }

        let a = &self.algorithms;
        if a.run.is_empty() {
            return Err(invalid("algorithms.run", "must name at least one algorithm"));
        }
        for (i, alg) in a.run.iter().enumerate() {
            if a.run[..i].contains(alg) {
                return Err(invalid(&format!("algorithms.run[{i}]"), format!("{alg} listed twice")));
            }
        }
        if a.iterations == 0 {
            return Err(invalid("algorithms.iterations", "must be at least 1"));
        }
        if !(a.beta > 0.0 && a.beta.is_finite()) {
            return Err(invalid(
                "algorithms.beta",
                format!("must be positive, found {}", a.beta),
            ));
        }
        if let Some(list) = &a.per_user_beta {
            if list.len() != k {
                return Err(invalid(
                    "algorithms.per_user_beta",
                    format!("needs {k} entries, found {}", list.len()),
                ));
            }
            if let Some(i) = list.iter().position(|b| !(*b > 0.0 && b.is_finite())) {
                return Err(invalid(
                    &format!("algorithms.per_user_beta[{i}]"),
                    format!("must be positive, found {}", list[i]),
                ));
            }
        }
        if !(0.0..1.0).contains(&a.damping) {
            return Err(invalid(
                "algorithms.damping",
                format!("must lie in [0, 1), found {}", a.damping),
            ));
        }
        if !(a.admm_rho > 0.0 && a.admm_rho.is_finite()) {
            return Err(invalid(
                "algorithms.admm_rho",
                format!("must be positive, found {}", a.admm_rho),
            ));
        }
        if a.statistics_epoch == 0 {
            return Err(invalid("algorithms.statistics_epoch", "must be at least 1"));
        }
        if !(self.metric.sigma2 > 0.0 && self.metric.sigma2.is_finite()) {
            return Err(invalid(
                "metric.sigma2",
                format!("must be positive, found {}", self.metric.sigma2),
            ));
        }
        if self.output.dir.is_empty() {
            return Err(invalid("output.dir", "must not be empty"));
        }
        Ok(())
    }

    /// `(L, K, N_l, M_k)`; valid only after parsing.
    pub fn sizes(&self) -> (usize, usize, usize, usize) {
        let t = &self.topology;
        (
            t.num_bs.unwrap_or(0),
            t.num_ue.unwrap_or(0),
            t.bs_antennas.unwrap_or(0),
            t.ue_antennas.unwrap_or(0),
        )
    }

    pub fn topology_mode(&self) -> TopologyMode {
        match self.topology.mode {
            ModeName::Full => TopologyMode::Full,
            ModeName::NearestB => TopologyMode::NearestB {
                b: self.topology.b.unwrap_or(3),
            },
            ModeName::Geometric => TopologyMode::Geometric {
                radius: self.topology.radius.unwrap_or(0.0),
            },
        }
    }

    pub fn correlation_policy(&self) -> CorrelationPolicy {
        let c = &self.channel;
        match c.policy {
            PolicyName::Random => CorrelationPolicy::Random {
                rho_max: c.rho_max,
                gain_min: c.gain_min,
                gain_max: c.gain_max,
            },
            PolicyName::Fixed => CorrelationPolicy::Fixed(c.fixed.expect("validated")),
            PolicyName::PerEdge => CorrelationPolicy::PerEdge(c.edges.clone().expect("validated")),
        }
    }

    /// Canonical JSON form; parses back to an equal config.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
