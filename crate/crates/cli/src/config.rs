//! `--config` file: one TOML table per concern, every key optional.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use intermodal::experiments::fed::{self, DisruptionMode, FedConfig};
use intermodal::experiments::mc::{McConfig, NoiseDistribution, DEFAULT_SAMPLES};
use intermodal::mifr::ModelConfig;
use intermodal::netmodel::RateConfig;
use intermodal::solver::SolverConfig;
use intermodal::vulnerability::{DisruptionKind, DEFAULT_MULTIPLIER};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub rates: RateConfig,
    pub model: ModelSection,
    pub solver: SolverSection,
    pub fed: FedSection,
    pub mc: McSection,
    pub vulnerability: VulnerabilitySection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub psi: Option<f64>,
    pub big_m: f64,
    pub epsilon: f64,
    pub cutoff_factor: f64,
    pub max_paths: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        ModelSection {
            psi: m.psi,
            big_m: m.big_m,
            epsilon: m.epsilon,
            cutoff_factor: m.cutoff_factor,
            max_paths: m.max_paths,
        }
    }
}

impl ModelSection {
    pub fn build(&self) -> ModelConfig {
        ModelConfig {
            psi: self.psi,
            big_m: self.big_m,
            epsilon: self.epsilon,
            cutoff_factor: self.cutoff_factor,
            max_paths: self.max_paths,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub optimality_gap: f64,
    pub time_limit: Option<f64>,
    pub node_limit: Option<usize>,
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        SolverSection {
            optimality_gap: s.optimality_gap,
            time_limit: s.time_limit,
            node_limit: s.node_limit,
            feasibility_tol: s.feasibility_tol,
            integrality_tol: s.integrality_tol,
        }
    }
}

impl SolverSection {
    pub fn build(&self, seed: Option<u64>) -> SolverConfig {
        SolverConfig {
            optimality_gap: self.optimality_gap,
            time_limit: self.time_limit,
            node_limit: self.node_limit,
            feasibility_tol: self.feasibility_tol,
            integrality_tol: self.integrality_tol,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FedSection {
    pub kinds: Vec<String>,
    pub links: Vec<usize>,
    pub nodes: Vec<usize>,
    pub terminals: Vec<usize>,
    pub q: Vec<f64>,
    pub lambda: Vec<f64>,
    pub od_subset: Option<usize>,
    pub mode: String,
}

impl Default for FedSection {
    fn default() -> Self {
        FedSection {
            kinds: vec!["links".into(), "nodes".into(), "terminals".into()],
            links: fed::LINK_LEVELS.to_vec(),
            nodes: fed::NODE_LEVELS.to_vec(),
            terminals: fed::TERMINAL_LEVELS.to_vec(),
            q: fed::Q_LEVELS.to_vec(),
            lambda: fed::LAMBDA_LEVELS.to_vec(),
            od_subset: None,
            mode: DisruptionMode::RobustReduce.as_str().into(),
        }
    }
}

impl FedSection {
    pub fn build(&self, jobs: usize) -> Result<FedConfig> {
        let mut levels = std::collections::BTreeMap::new();
        for k in &self.kinds {
            let kind = DisruptionKind::parse(k).with_context(|| format!("unknown disruption kind {k:?}"))?;
            let l = match kind {
                DisruptionKind::Link => &self.links,
                DisruptionKind::Node => &self.nodes,
                DisruptionKind::Terminal => &self.terminals,
            };
            levels.insert(kind, l.clone());
        }
        let Some(mode) = DisruptionMode::parse(&self.mode) else {
            bail!("unknown disruption mode {:?} (robust-reduce or knockout)", self.mode);
        };
        Ok(FedConfig {
            levels,
            q_levels: self.q.clone(),
            lambda_levels: self.lambda.clone(),
            od_subset: self.od_subset,
            mode,
            jobs,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub distribution: String,
    pub samples: u64,
    pub half_width: f64,
    /// Applied to every capacitated element when no scenario file is given.
    pub q: f64,
    pub lambda: f64,
}

impl Default for McSection {
    fn default() -> Self {
        McSection {
            distribution: NoiseDistribution::Uniform.as_str().into(),
            samples: DEFAULT_SAMPLES,
            half_width: 1.0,
            q: 0.1,
            lambda: 0.3,
        }
    }
}

impl McSection {
    pub fn build(&self, seed: u64) -> Result<McConfig> {
        let Some(distribution) = NoiseDistribution::parse(&self.distribution) else {
            bail!(
                "unknown distribution {:?} (uniform, two-point or triangular)",
                self.distribution
            );
        };
        Ok(McConfig {
            distribution,
            half_width: self.half_width,
            samples: self.samples,
            seed,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VulnerabilitySection {
    pub multiplier: f64,
    /// Hours; defaults to 10 × the largest deadline.
    pub dummy_link_time: Option<f64>,
}

impl Default for VulnerabilitySection {
    fn default() -> Self {
        VulnerabilitySection {
            multiplier: DEFAULT_MULTIPLIER,
            dummy_link_time: None,
        }
    }
}

pub fn load(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c: FileConfig = toml::from_str("").unwrap();
        assert_eq!(c.rates, RateConfig::default());
        assert_eq!(c.model.build(), ModelConfig::default());
        assert_eq!(c.fed.build(1).unwrap(), FedConfig::default());
    }

    #[test]
    fn sections_override() {
        let c: FileConfig = toml::from_str(
            "[model]\npsi = 5000.0\n[fed]\nkinds = [\"links\"]\nlambda = [0.0]\nmode = \"knockout\"\n[mc]\ndistribution = \"two-point\"\n",
        )
        .unwrap();
        assert_eq!(c.model.build().psi, Some(5000.0));
        let f = c.fed.build(2).unwrap();
        assert_eq!(f.levels.len(), 1);
        assert_eq!(f.mode, DisruptionMode::Knockout);
        assert_eq!(c.mc.build(0).unwrap().distribution, NoiseDistribution::TwoPoint);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<FileConfig>("[model]\npsii = 1.0\n").is_err());
        assert!(toml::from_str::<FileConfig>("[extra]\n").is_err());
    }
}
