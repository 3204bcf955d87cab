//! JSON instance files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linloss::{Partition, SearchConfig};
use crate::models::{
    Costs, LotSizingInstance, PenaltyBasis, Service, ServiceMeasure, Shortage,
};
use crate::probdist::{DemandProcess, Distribution};
use crate::workflow::PartitionStrategy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec {
    pub measure: ServiceMeasure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Uniform,
    Search,
    NormalTable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub strategy: StrategyName,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub w: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchSpec>,
}

impl PartitionSpec {
    pub fn strategy(&self) -> PartitionStrategy {
        match self.strategy {
            StrategyName::Uniform => PartitionStrategy::Uniform,
            StrategyName::NormalTable => PartitionStrategy::NormalTable,
            StrategyName::Search => {
                let mut cfg = SearchConfig::default();
                if let Some(s) = &self.search {
                    cfg.population_size = s.population.or(cfg.population_size);
                    cfg.step_size = s.step.unwrap_or(cfg.step_size);
                    cfg.seed = s.seed.unwrap_or(cfg.seed);
                }
                PartitionStrategy::Search(cfg)
            }
        }
    }
}

/// On-disk form of a [`LotSizingInstance`] plus optional partition settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub horizon: usize,
    pub costs: Costs,
    #[serde(default)]
    pub initial_inventory: f64,
    pub service: ServiceSpec,
    pub shortage: Shortage,
    #[serde(default, skip_serializing_if = "is_per_period")]
    pub penalty_basis: PenaltyBasis,
    pub demand: Vec<Distribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionSpec>,
}

fn is_per_period(b: &PenaltyBasis) -> bool {
    *b == PenaltyBasis::PerPeriod
}

impl InstanceFile {
    pub fn from_instance(inst: &LotSizingInstance) -> Self {
        Self {
            horizon: inst.horizon(),
            costs: inst.costs,
            initial_inventory: inst.initial_inventory,
            service: ServiceSpec {
                measure: inst.service.measure(),
                level: inst.service.level(),
            },
            shortage: inst.shortage,
            penalty_basis: inst.penalty_basis,
            demand: inst.demand.periods().to_vec(),
            partition: None,
        }
    }

    pub fn to_instance(&self) -> Result<LotSizingInstance> {
        if self.demand.len() != self.horizon {
            return Err(Error::Parse(format!(
                "key \"demand\": {} distributions for horizon {}",
                self.demand.len(),
                self.horizon
            )));
        }
        let service = Service::from_parts(self.service.measure, self.service.level)
            .map_err(|e| Error::Parse(format!("key \"service\": {e}")))?;
        LotSizingInstance::new(
            self.costs,
            self.initial_inventory,
            service,
            self.shortage,
            DemandProcess::new(self.demand.clone())?,
        )?
        .with_penalty_basis(self.penalty_basis)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance files always serialize")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// Reads a partition dump or a whitespace-separated list of masses. Lines
/// starting with `#` are ignored.
pub fn parse_partition(text: &str) -> Result<Partition> {
    let probs = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.split(|c: char| c.is_whitespace() || c == ','))
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad partition mass {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Partition::new(probs)
}
