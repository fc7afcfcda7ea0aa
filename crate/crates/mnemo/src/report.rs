//! Experiment reports: deterministic aggregates with stable serialization.
//!
//! Every latency in a report is modeled, so identical inputs and seeds
//! produce byte-identical JSON and CSV exports.

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Count, mean, and 95th percentile of a latency sample set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: u64,
    pub mean_ms: f64,
    pub p95_ms: f64,
}

impl LatencyStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("latencies are finite"));
        let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
        let idx = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
        Self { count: sorted.len() as u64, mean_ms: mean, p95_ms: sorted[idx] }
    }
}

/// Outcome of one replay run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub strategy: String,
    pub allocator: String,
    pub events: u64,
    pub ingests: u64,
    pub records_stored: u64,
    pub skipped_pre_learning: u64,
    pub skipped_pre_memorization: u64,
    pub reads: u64,
    pub skipped_reads: u64,
    pub hits: u64,
    pub misses: u64,
    pub hit_rate: f64,
    pub queries: u64,
    pub write_latency: LatencyStats,
    pub read_latency: LatencyStats,
    pub query_latency: LatencyStats,
    pub moves_total: u64,
    pub prefetch_plans: u64,
    pub prefetch_candidates: u64,
    pub prefetch_promoted: u64,
    pub prefetch_skipped: u64,
}

/// Stable CSV column order; one header plus one row per report.
pub const CSV_COLUMNS: [&str; 27] = [
    "strategy",
    "allocator",
    "events",
    "ingests",
    "records_stored",
    "skipped_pre_learning",
    "skipped_pre_memorization",
    "reads",
    "skipped_reads",
    "hits",
    "misses",
    "hit_rate",
    "queries",
    "write_count",
    "write_mean_ms",
    "write_p95_ms",
    "read_count",
    "read_mean_ms",
    "read_p95_ms",
    "query_count",
    "query_mean_ms",
    "query_p95_ms",
    "moves_total",
    "prefetch_plans",
    "prefetch_candidates",
    "prefetch_promoted",
    "prefetch_skipped",
];

impl MetricsReport {
    pub fn to_json_string(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn csv_row(&self) -> String {
        [
            self.strategy.clone(),
            self.allocator.clone(),
            self.events.to_string(),
            self.ingests.to_string(),
            self.records_stored.to_string(),
            self.skipped_pre_learning.to_string(),
            self.skipped_pre_memorization.to_string(),
            self.reads.to_string(),
            self.skipped_reads.to_string(),
            self.hits.to_string(),
            self.misses.to_string(),
            self.hit_rate.to_string(),
            self.queries.to_string(),
            self.write_latency.count.to_string(),
            self.write_latency.mean_ms.to_string(),
            self.write_latency.p95_ms.to_string(),
            self.read_latency.count.to_string(),
            self.read_latency.mean_ms.to_string(),
            self.read_latency.p95_ms.to_string(),
            self.query_latency.count.to_string(),
            self.query_latency.mean_ms.to_string(),
            self.query_latency.p95_ms.to_string(),
            self.moves_total.to_string(),
            self.prefetch_plans.to_string(),
            self.prefetch_candidates.to_string(),
            self.prefetch_promoted.to_string(),
            self.prefetch_skipped.to_string(),
        ]
        .join(",")
    }

    pub fn to_csv_string(&self) -> String {
        format!("{}\n{}\n", CSV_COLUMNS.join(","), self.csv_row())
    }

    /// Shared header plus one row per report, for side-by-side strategy runs.
    pub fn many_to_csv_string(reports: &[MetricsReport]) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for report in reports {
            out.push_str(&report.csv_row());
            out.push('\n');
        }
        out
    }
}

/// Export format for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(crate::error::Error::InvalidConfig(format!("unknown report format `{other}`"))),
        }
    }
}

/// Write a report to `path` in the requested format.
pub fn export_report(report: &MetricsReport, format: ReportFormat, path: &std::path::Path) -> Result<()> {
    let text = match format {
        ReportFormat::Json => report.to_json_string(),
        ReportFormat::Csv => report.to_csv_string(),
    };
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_stats_handle_empty_and_percentiles() {
        assert_eq!(LatencyStats::from_samples(&[]), LatencyStats::default());
        let samples: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let stats = LatencyStats::from_samples(&samples);
        assert_eq!(stats.count, 100);
        assert!((stats.mean_ms - 50.5).abs() < 1e-12);
        assert_eq!(stats.p95_ms, 95.0);
        let one = LatencyStats::from_samples(&[7.0]);
        assert_eq!(one.p95_ms, 7.0);
    }

    #[test]
    fn zero_report_exports_header_and_zeros() {
        let report = MetricsReport::default();
        let csv = report.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert!(lines.next().is_some());
    }

    #[test]
    fn exports_are_byte_stable_and_round_trip() {
        let report = MetricsReport {
            strategy: "time-period".into(),
            allocator: "direct-write".into(),
            events: 12,
            hits: 3,
            misses: 1,
            hit_rate: 0.75,
            write_latency: LatencyStats { count: 4, mean_ms: 1.5, p95_ms: 2.25 },
            ..Default::default()
        };
        assert_eq!(report.to_json_string(), report.to_json_string());
        assert_eq!(report.to_csv_string(), report.to_csv_string());
        let reparsed = MetricsReport::from_json_str(&report.to_json_string()).unwrap();
        assert_eq!(reparsed, report);
        assert_eq!(reparsed.to_json_string(), report.to_json_string());
    }

    #[test]
    fn export_to_files_identical_on_rewrite() {
        let dir = tempfile::tempdir().unwrap();
        let report = MetricsReport { strategy: "none".into(), hit_rate: 0.5, ..Default::default() };
        let json_path = dir.path().join("r.json");
        export_report(&report, ReportFormat::Json, &json_path).unwrap();
        let first = std::fs::read(&json_path).unwrap();
        export_report(&report, ReportFormat::Json, &json_path).unwrap();
        assert_eq!(std::fs::read(&json_path).unwrap(), first);
        let csv_path = dir.path().join("r.csv");
        export_report(&report, ReportFormat::Csv, &csv_path).unwrap();
        let csv_first = std::fs::read(&csv_path).unwrap();
        export_report(&report, ReportFormat::Csv, &csv_path).unwrap();
        assert_eq!(std::fs::read(&csv_path).unwrap(), csv_first);
    }
}
