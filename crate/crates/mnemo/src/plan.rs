//! Capacity planning arithmetic: machines and per-machine resources in,
//! cache size, buffered files, stream/query/user headroom out.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs to the planner. Byte quantities use decimal units (1 GB = 1e9).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityInputs {
    pub machines: u64,
    pub mem_per_machine: u64,
    pub hdd_per_machine: u64,
    pub avg_file: u64,
    /// Seconds the recognition engine spends per image.
    pub per_image_latency: f64,
    /// Seconds between extracted frames per stream.
    pub frame_interval: f64,
    /// Fraction of engine capacity the planner commits, in (0, 1].
    pub utilization: f64,
    pub queries_per_server: u64,
    /// Fraction of users active concurrently, in (0, 1].
    pub concurrency_factor: f64,
}

impl Default for CapacityInputs {
    fn default() -> Self {
        Self {
            machines: 10,
            mem_per_machine: 20_000_000_000,
            hdd_per_machine: 200_000_000_000,
            avg_file: 10_000_000,
            per_image_latency: 0.16,
            frame_interval: 2.0,
            utilization: 0.8,
            queries_per_server: 100,
            concurrency_factor: 0.1,
        }
    }
}

impl CapacityInputs {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("machines", self.machines as f64),
            ("mem_per_machine", self.mem_per_machine as f64),
            ("hdd_per_machine", self.hdd_per_machine as f64),
            ("avg_file", self.avg_file as f64),
            ("per_image_latency", self.per_image_latency),
            ("frame_interval", self.frame_interval),
            ("queries_per_server", self.queries_per_server as f64),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidCapacityInput(format!("{name} must be positive")));
            }
        }
        for (name, value) in [("utilization", self.utilization), ("concurrency_factor", self.concurrency_factor)] {
            if !value.is_finite() || value <= 0.0 || value > 1.0 {
                return Err(Error::InvalidCapacityInput(format!("{name} must be in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// The planner's output; every field recomputes from the inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapacityPlan {
    pub machines: u64,
    pub cache_bytes: u64,
    pub buffered_files: u64,
    pub streams_per_server: u64,
    pub concurrent_queries: u64,
    pub supported_users: u64,
}

// Decimal inputs like 0.16 are not exact binary doubles, so products that
// are mathematically whole can land a hair under the integer. Nudge before
// flooring.
fn floor_eps(x: f64) -> u64 {
    (x + 1e-9).floor() as u64
}

/// cache = machines * (mem + hdd); files = cache / avg_file;
/// streams/server = floor(frame_interval / per_image_latency * utilization);
/// queries = machines * queries_per_server; users = queries / concurrency.
pub fn capacity_plan(inputs: &CapacityInputs) -> Result<CapacityPlan> {
    inputs.validate()?;
    let cache_bytes = inputs.machines * (inputs.mem_per_machine + inputs.hdd_per_machine);
    let buffered_files = cache_bytes / inputs.avg_file;
    let streams_per_server = floor_eps(inputs.frame_interval / inputs.per_image_latency * inputs.utilization);
    let concurrent_queries = inputs.machines * inputs.queries_per_server;
    let supported_users = floor_eps(concurrent_queries as f64 / inputs.concurrency_factor);
    Ok(CapacityPlan {
        machines: inputs.machines,
        cache_bytes,
        buffered_files,
        streams_per_server,
        concurrent_queries,
        supported_users,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_deployment_numbers() {
        let plan = capacity_plan(&CapacityInputs::default()).unwrap();
        assert_eq!(plan.cache_bytes, 2_200_000_000_000); // 2.2 TB
        assert_eq!(plan.buffered_files, 220_000);
        assert_eq!(plan.streams_per_server, 10);
        assert_eq!(plan.concurrent_queries, 1_000);
        assert_eq!(plan.supported_users, 10_000);
    }

    #[test]
    fn non_positive_inputs_rejected() {
        let mut inputs = CapacityInputs { machines: 0, ..Default::default() };
        assert!(capacity_plan(&inputs).is_err());
        inputs = CapacityInputs { utilization: 0.0, ..Default::default() };
        assert!(capacity_plan(&inputs).is_err());
        inputs = CapacityInputs { concurrency_factor: 1.5, ..Default::default() };
        assert!(capacity_plan(&inputs).is_err());
        inputs = CapacityInputs { per_image_latency: -0.1, ..Default::default() };
        assert!(capacity_plan(&inputs).is_err());
    }

    #[test]
    fn formulas_recompute_from_inputs() {
        let inputs = CapacityInputs {
            machines: 3,
            mem_per_machine: 1_000,
            hdd_per_machine: 9_000,
            avg_file: 100,
            per_image_latency: 0.5,
            frame_interval: 2.0,
            utilization: 1.0,
            queries_per_server: 7,
            concurrency_factor: 0.5,
        };
        let plan = capacity_plan(&inputs).unwrap();
        assert_eq!(plan.cache_bytes, 30_000);
        assert_eq!(plan.buffered_files, 300);
        assert_eq!(plan.streams_per_server, 4);
        assert_eq!(plan.concurrent_queries, 21);
        assert_eq!(plan.supported_users, 42);
    }
}
