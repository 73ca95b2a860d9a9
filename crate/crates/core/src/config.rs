//! JSON run configuration and its validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::CrashPolicy;
use crate::engine::Placement;
use crate::grid::{Grid, GridError, GridSpec, Orientation};
use crate::protocols::ProtocolId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotsConfig {
    pub k: usize,
    pub placement: Placement,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    /// One summary row is appended here (header written if the file is new).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub robots: RobotsConfig,
    pub protocol: ProtocolId,
    #[serde(default)]
    pub adversary: CrashPolicy,
    /// Defaults to a protocol-specific budget well above its round bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round_budget: Option<u64>,
    /// Scouts stop enumerating once both return walks are found.
    #[serde(default = "yes")]
    pub early_stop: bool,
    #[serde(default)]
    pub outputs: Outputs,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid grid: {0}")]
    Grid(#[from] GridError),
    #[error("k must be at least 1")]
    NoRobots,
    #[error("k = {k} exceeds the {n} grid nodes")]
    TooManyRobots { k: usize, n: usize },
    #[error("explicit placement lists {got} nodes for k = {k}")]
    PlacementSize { got: usize, k: usize },
    #[error("placement node {node} is outside the grid ({n} nodes)")]
    PlacementNode { node: usize, n: usize },
    #[error("{protocol} needs a {needed} grid")]
    Orientation { protocol: &'static str, needed: &'static str },
    #[error("alg2 is not fault-tolerant; adversary must be none, got {0}")]
    NotFaultTolerant(String),
    #[error("crash budget f = {f} exceeds k = {k}")]
    Budget { f: usize, k: usize },
    #[error("probability {0} is outside [0, 1]")]
    Probability(f64),
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
        RunConfig::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let grid = Grid::build(&self.grid)?;
        let n = grid.node_count();
        let k = self.robots.k;
        if k == 0 {
            return Err(ConfigError::NoRobots);
        }
        if k > n {
            return Err(ConfigError::TooManyRobots { k, n });
        }
        match &self.robots.placement {
            Placement::Explicit { nodes } => {
                if nodes.len() != k {
                    return Err(ConfigError::PlacementSize { got: nodes.len(), k });
                }
                if let Some(&node) = nodes.iter().find(|&&v| v >= n) {
                    return Err(ConfigError::PlacementNode { node, n });
                }
            }
            Placement::Single { node } if *node >= n => return Err(ConfigError::PlacementNode { node: *node, n }),
            _ => {}
        }
        let (needed, label) = match self.protocol {
            ProtocolId::Alg1 => (Orientation::Oriented, "oriented"),
            ProtocolId::Alg2 | ProtocolId::Alg3 => (Orientation::Unoriented, "unoriented"),
        };
        if self.grid.orientation != needed {
            return Err(ConfigError::Orientation {
                protocol: self.protocol.as_str(),
                needed: label,
            });
        }
        if self.protocol == ProtocolId::Alg2 && !self.adversary.is_none() {
            return Err(ConfigError::NotFaultTolerant(self.adversary.label()));
        }
        match self.adversary {
            CrashPolicy::Random { p, f, .. } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(ConfigError::Probability(p));
                }
                if f > k {
                    return Err(ConfigError::Budget { f, k });
                }
            }
            CrashPolicy::TargetScouts { q, f, .. } => {
                if !(0.0..=1.0).contains(&q) {
                    return Err(ConfigError::Probability(q));
                }
                if f > k {
                    return Err(ConfigError::Budget { f, k });
                }
            }
            CrashPolicy::Fixed { ref schedule } if schedule.len() > k => return Err(ConfigError::Budget { f: schedule.len(), k }),
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "grid": {"kind": "square", "side": 4, "orientation": "unoriented"},
        "robots": {"k": 8, "placement": {"mode": "seeded", "seed": 1}},
        "protocol": "alg2"
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.protocol, ProtocolId::Alg2);
        assert!(cfg.adversary.is_none());
        assert!(cfg.early_stop);
        assert_eq!(cfg.round_budget, None);
        assert_eq!(cfg.grid.port_seed, 0);
    }

    #[test]
    fn alg2_rejects_crashes() {
        let text = MINIMAL.replace(
            r#""protocol": "alg2""#,
            r#""protocol": "alg2", "adversary": {"policy": "random", "p": 0.1, "seed": 1, "f": 2}"#,
        );
        assert!(matches!(RunConfig::from_json(&text), Err(ConfigError::NotFaultTolerant(_))));
    }

    #[test]
    fn orientation_must_match() {
        let text = MINIMAL.replace("alg2", "alg1");
        assert!(matches!(RunConfig::from_json(&text), Err(ConfigError::Orientation { .. })));
    }

    #[test]
    fn size_and_budget_checks() {
        let text = MINIMAL.replace(r#""k": 8"#, r#""k": 17"#);
        assert!(matches!(RunConfig::from_json(&text), Err(ConfigError::TooManyRobots { k: 17, n: 16 })));
        let text = MINIMAL.replace("alg2", "alg3").replace(
            r#""protocol": "alg3""#,
            r#""protocol": "alg3", "adversary": {"policy": "target_scouts", "seed": 1, "f": 9}"#,
        );
        assert!(matches!(RunConfig::from_json(&text), Err(ConfigError::Budget { f: 9, k: 8 })));
        let text = MINIMAL.replace(r#"{"mode": "seeded", "seed": 1}"#, r#"{"mode": "explicit", "nodes": [0, 1]}"#);
        assert!(matches!(RunConfig::from_json(&text), Err(ConfigError::PlacementSize { got: 2, k: 8 })));
        assert!(matches!(RunConfig::from_json("{"), Err(ConfigError::Json(_))));
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        let again = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
