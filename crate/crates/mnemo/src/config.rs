//! TOML configuration: tiers and cost model, policies, workload shape, and
//! seeds, with every section optional and defaulted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{default_vocabulary, ExtractorConfig, ExtractorKind, FramePolicy};
use crate::prefetch::Strategy;
use crate::replay::{QueryCost, ReductionConfig, SystemConfig};
use crate::tier::{AllocatorKind, BackendCost, TierConfig};
use crate::workload::{QueryMix, WorkloadSpec};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub store: StoreSection,
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub prefetch: PrefetchSection,
    #[serde(default)]
    pub query_cost: QueryCostSection,
    #[serde(default)]
    pub workload: WorkloadSection,
    #[serde(default)]
    pub reduction: ReductionConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StoreSection {
    pub allocator: String,
    pub evictor: String,
    pub tiers: Vec<TierConfig>,
    pub backend: BackendCost,
}

impl Default for StoreSection {
    fn default() -> Self {
        let defaults = SystemConfig::default();
        Self {
            allocator: defaults.allocator.to_string(),
            evictor: defaults.evictor,
            tiers: defaults.tiers,
            backend: defaults.backend_cost,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub frame_interval: f64,
    pub labels_per_frame: usize,
    #[serde(default)]
    pub vocabulary: Option<Vec<String>>,
    #[serde(default)]
    pub extractor_endpoint: Option<String>,
}

impl Default for PipelineSection {
    fn default() -> Self {
        Self { frame_interval: 2.0, labels_per_frame: 2, vocabulary: None, extractor_endpoint: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrefetchSection {
    pub strategy: String,
    pub byte_budget: u64,
    pub maintenance_free_bytes: u64,
    pub load_threshold: f64,
}

impl Default for PrefetchSection {
    fn default() -> Self {
        let defaults = SystemConfig::default();
        Self {
            strategy: defaults.prefetch_strategy.to_string(),
            byte_budget: defaults.prefetch_budget,
            maintenance_free_bytes: defaults.maintenance_free_bytes,
            load_threshold: defaults.load_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QueryCostSection {
    pub base_ms: f64,
    pub per_record_ms: f64,
}

impl Default for QueryCostSection {
    fn default() -> Self {
        let defaults = QueryCost::default();
        Self { base_ms: defaults.base_ms, per_record_ms: defaults.per_record_ms }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadSection {
    pub days: u32,
    pub users: u32,
    pub streams_per_user_per_day: u32,
    pub avg_object_size: u64,
    pub label_popularity: f64,
    pub group_popularity: f64,
    pub period_locality: f64,
    pub reads_per_period: u32,
    pub queries_per_period: u32,
    pub hot_read_fraction: f64,
    pub query_mix: QueryMix,
    #[serde(default)]
    pub locations: Option<Vec<String>>,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        let defaults = WorkloadSpec::default();
        Self {
            days: defaults.days,
            users: defaults.users,
            streams_per_user_per_day: defaults.streams_per_user_per_day,
            avg_object_size: defaults.avg_object_size,
            label_popularity: defaults.label_popularity,
            group_popularity: defaults.group_popularity,
            period_locality: defaults.period_locality,
            reads_per_period: defaults.reads_per_period,
            queries_per_period: defaults.queries_per_period,
            hot_read_fraction: defaults.hot_read_fraction,
            query_mix: defaults.query_mix,
            locations: None,
        }
    }
}

impl AppConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: AppConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.system_config()?;
        self.workload_spec()?;
        Ok(())
    }

    /// Assemble the replay system configuration.
    pub fn system_config(&self) -> Result<SystemConfig> {
        let allocator: AllocatorKind = self.store.allocator.parse()?;
        let strategy: Strategy = self.prefetch.strategy.parse()?;
        let vocabulary = self.pipeline.vocabulary.clone().unwrap_or_else(default_vocabulary);
        let extractor = match &self.pipeline.extractor_endpoint {
            Some(endpoint) => ExtractorConfig {
                kind: ExtractorKind::ExternalEndpoint,
                vocabulary,
                labels_per_frame: self.pipeline.labels_per_frame,
                endpoint: Some(endpoint.clone()),
            },
            None => ExtractorConfig {
                kind: ExtractorKind::SyntheticHash,
                vocabulary,
                labels_per_frame: self.pipeline.labels_per_frame,
                endpoint: None,
            },
        };
        extractor.validate()?;
        if let Some(policy) = &self.reduction.pre_learning {
            policy.validate()?;
        }
        if let Some(policy) = &self.reduction.pre_memorization {
            policy.validate()?;
        }
        Ok(SystemConfig {
            tiers: self.store.tiers.clone(),
            backend_cost: self.store.backend.clone(),
            allocator,
            evictor: self.store.evictor.clone(),
            prefetch_strategy: strategy,
            prefetch_budget: self.prefetch.byte_budget,
            maintenance_free_bytes: self.prefetch.maintenance_free_bytes,
            load_threshold: self.prefetch.load_threshold,
            frame_policy: FramePolicy::new(self.pipeline.frame_interval)?,
            extractor,
            query_cost: QueryCost { base_ms: self.query_cost.base_ms, per_record_ms: self.query_cost.per_record_ms },
            reduction: self.reduction.clone(),
        })
    }

    /// Assemble the workload description; the top-level seed wins.
    pub fn workload_spec(&self) -> Result<WorkloadSpec> {
        let w = &self.workload;
        let spec = WorkloadSpec {
            days: w.days,
            users: w.users,
            streams_per_user_per_day: w.streams_per_user_per_day,
            avg_object_size: w.avg_object_size,
            label_popularity: w.label_popularity,
            group_popularity: w.group_popularity,
            period_locality: w.period_locality,
            query_mix: w.query_mix,
            seed: self.seed.unwrap_or(42),
            reads_per_period: w.reads_per_period,
            queries_per_period: w.queries_per_period,
            hot_read_fraction: w.hot_read_fraction,
            locations: w.locations.clone().unwrap_or_else(crate::ingest::default_locations),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let config = AppConfig::from_toml_str("").unwrap();
        let system = config.system_config().unwrap();
        assert_eq!(system.allocator, AllocatorKind::DefaultCascade);
        assert_eq!(system.evictor, "lru");
        assert_eq!(system.tiers.len(), 3);
        let spec = config.workload_spec().unwrap();
        assert_eq!(spec.seed, 42);
        assert_eq!(spec.days, 30);
    }

    #[test]
    fn full_round_trip_and_overrides() {
        let text = r#"
seed = 7

[store]
allocator = "direct-write"
evictor = "fifo"
backend = { read_overhead_ms = 100.0, write_overhead_ms = 100.0, throughput = 40e6 }

[[store.tiers]]
name = "memory"
capacity = 1000000
read_overhead_ms = 0.1
write_overhead_ms = 0.1
throughput = 650e6

[pipeline]
frame_interval = 1.0
labels_per_frame = 3

[prefetch]
strategy = "time-period"
byte_budget = 5000000
maintenance_free_bytes = 6000000
load_threshold = 2.0

[workload]
days = 5
users = 3
streams_per_user_per_day = 2
avg_object_size = 100000
label_popularity = 1.0
group_popularity = 1.5
period_locality = 0.8
reads_per_period = 10
queries_per_period = 5
hot_read_fraction = 0.7
query_mix = { key_lookup = 0.25, label = 0.25, location = 0.25, time_range = 0.25 }
"#;
        let config = AppConfig::from_toml_str(text).unwrap();
        let system = config.system_config().unwrap();
        assert_eq!(system.allocator, AllocatorKind::DirectWrite);
        assert_eq!(system.evictor, "fifo");
        assert_eq!(system.tiers.len(), 1);
        assert_eq!(system.prefetch_strategy, Strategy::TimePeriod);
        assert_eq!(system.frame_policy.interval, 1.0);
        let spec = config.workload_spec().unwrap();
        assert_eq!(spec.seed, 7);
        assert_eq!(spec.days, 5);
        // Round trip through TOML keeps the settings.
        let reparsed = AppConfig::from_toml_str(&config.to_toml_string()).unwrap();
        assert_eq!(reparsed.workload_spec().unwrap(), spec);
    }

    #[test]
    fn bad_values_rejected() {
        assert!(AppConfig::from_toml_str("[store]\nallocator = \"mystery\"").is_err());
        let text = "[workload]\nquery_mix = { key_lookup = 0.9, label = 0.9, location = 0.0, time_range = 0.0 }";
        assert!(AppConfig::from_toml_str(text).is_err());
        assert!(AppConfig::from_toml_str("unknown_key = 1").is_err());
    }

    #[test]
    fn reduction_policies_parse_and_validate() {
        let text = r#"
[reduction.pre_learning]
kind = "uniform"
base_rate = 0.5
p_min = 0.01
seed = 9

[reduction.pre_memorization]
kind = "label-weighted"
base_rate = 0.3
label_weights = { dog = 1.0, chair = 0.2 }
p_min = 0.01
seed = 10
"#;
        let config = AppConfig::from_toml_str(text).unwrap();
        let system = config.system_config().unwrap();
        assert!(system.reduction.pre_learning.is_some());
        assert!(system.reduction.pre_memorization.is_some());

        let bad = "[reduction.pre_learning]\nkind = \"uniform\"\nbase_rate = 2.0\np_min = 0.01\nseed = 1";
        assert!(AppConfig::from_toml_str(bad).is_err());
    }
}
