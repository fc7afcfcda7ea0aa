//! Samplers and approximate aggregation.
//!
//! Three sampler placements cut data volume at different pipeline points:
//! before any extraction work (per-stream, from meta only), before storage
//! (per-record, from its labels), and online at query time. Every admitted
//! row carries its exact inclusion probability, so a count query can be
//! rewritten into an unbiased rescaled sum: each sampled matching row
//! contributes `1/p`, the variance estimate is `sum (1-p)/p^2` over sampled
//! matches, and the 95% interval uses the normal approximation at z = 1.96.
//!
//! Per-tuple decisions are derived by hashing the policy seed with the
//! tuple's own key, so a decision is reproducible from seed + tuple alone,
//! independent of evaluation order. Only the online sampler consumes a
//! sequential seeded stream.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::meta::{MetaStore, QueryPredicate, SessionRecord};

const Z_95: f64 = 1.96;

/// Probability floor: keeps `1/p` rescaling from amplifying variance without
/// bound.
pub const DEFAULT_P_MIN: f64 = 0.01;

fn default_p_min() -> f64 {
    DEFAULT_P_MIN
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Per-stream rate from meta (base rate, optionally scaled by location).
    MetaRate,
    /// Per-record rate from labels: the hottest label's weight wins.
    LabelWeighted,
    /// One flat rate.
    Uniform,
}

/// A validated sampling policy. All probabilities live in `(0, 1]` and every
/// effective probability is clamped to at least `p_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionPolicy {
    pub kind: PolicyKind,
    pub base_rate: f64,
    #[serde(default)]
    pub label_weights: BTreeMap<String, f64>,
    #[serde(default)]
    pub location_multipliers: BTreeMap<String, f64>,
    #[serde(default = "default_p_min")]
    pub p_min: f64,
    #[serde(default)]
    pub seed: u64,
}

impl InclusionPolicy {
    pub fn uniform(base_rate: f64, seed: u64) -> Result<Self> {
        Self::build(PolicyKind::Uniform, base_rate, BTreeMap::new(), BTreeMap::new(), seed)
    }

    pub fn meta_rate(base_rate: f64, location_multipliers: BTreeMap<String, f64>, seed: u64) -> Result<Self> {
        Self::build(PolicyKind::MetaRate, base_rate, BTreeMap::new(), location_multipliers, seed)
    }

    pub fn label_weighted(base_rate: f64, label_weights: BTreeMap<String, f64>, seed: u64) -> Result<Self> {
        Self::build(PolicyKind::LabelWeighted, base_rate, label_weights, BTreeMap::new(), seed)
    }

    fn build(
        kind: PolicyKind,
        base_rate: f64,
        label_weights: BTreeMap<String, f64>,
        location_multipliers: BTreeMap<String, f64>,
        seed: u64,
    ) -> Result<Self> {
        let policy = Self { kind, base_rate, label_weights, location_multipliers, p_min: DEFAULT_P_MIN, seed };
        policy.validate()?;
        Ok(policy)
    }

    pub fn with_p_min(mut self, p_min: f64) -> Result<Self> {
        self.p_min = p_min;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability(self.base_rate)?;
        check_probability(self.p_min)?;
        for (label, weight) in &self.label_weights {
            check_probability(*weight)
                .map_err(|_| Error::InvalidPolicy(format!("weight {weight} for label `{label}`")))?;
        }
        for (location, mult) in &self.location_multipliers {
            if !mult.is_finite() || *mult <= 0.0 {
                return Err(Error::InvalidPolicy(format!("multiplier {mult} for location `{location}`")));
            }
        }
        Ok(())
    }

    fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.p_min, 1.0)
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !p.is_finite() || p <= 0.0 || p > 1.0 {
        return Err(Error::InvalidProbability(p));
    }
    Ok(())
}

/// The meta a pre-learning decision may look at.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamMeta {
    pub timestamp: i64,
    pub location: String,
}

/// A sampler verdict with the exact probability it was drawn under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub include: bool,
    pub probability: f64,
}

/// Uniform unit draw derived from hashing `seed` with a domain tag and key.
fn unit_from_hash(seed: u64, tag: &str, key: &[u8]) -> f64 {
    let mut hasher = Sha256::new();
    hasher.update(tag.as_bytes());
    hasher.update(seed.to_le_bytes());
    hasher.update(key);
    let digest = hasher.finalize();
    let word = u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
    // Top 53 bits give a uniform double in [0, 1).
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Decide stream admission from meta alone. The probability is the base
/// rate, scaled by the location's multiplier when one is configured, clamped
/// to `[p_min, 1]`. Reproducible from seed + meta.
pub fn pre_learning_decide(meta: &StreamMeta, policy: &InclusionPolicy) -> Result<Decision> {
    if policy.kind == PolicyKind::LabelWeighted {
        return Err(Error::InvalidPolicy("pre-learning decisions need meta-rate or uniform".into()));
    }
    policy.validate()?;
    let mut p = policy.base_rate;
    if policy.kind == PolicyKind::MetaRate {
        if let Some(mult) = policy.location_multipliers.get(&meta.location) {
            p *= mult;
        }
    }
    let p = policy.clamp(p);
    let key = format!("{}|{}", meta.timestamp, meta.location);
    let unit = unit_from_hash(policy.seed, "pre-learning", key.as_bytes());
    Ok(Decision { include: unit < p, probability: p })
}

/// Decide record admission from its labels: the probability is the maximum
/// weight over the record's labels (labels without a weight count as the
/// base rate; no labels at all means the base rate), clamped to `[p_min, 1]`.
pub fn pre_memorization_decide(record: &SessionRecord, policy: &InclusionPolicy) -> Result<Decision> {
    if policy.kind != PolicyKind::LabelWeighted {
        return Err(Error::InvalidPolicy("pre-memorization decisions need a label-weighted policy".into()));
    }
    policy.validate()?;
    let p = record
        .labels
        .iter()
        .map(|label| policy.label_weights.get(label).copied().unwrap_or(policy.base_rate))
        .fold(f64::NEG_INFINITY, f64::max);
    let p = policy.clamp(if p.is_finite() { p } else { policy.base_rate });
    let key = format!("{}|{}", record.session_id, record.timestamp);
    let unit = unit_from_hash(policy.seed, "pre-memorization", key.as_bytes());
    Ok(Decision { include: unit < p, probability: p })
}

/// A record together with the exact probability it was sampled under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledRow {
    pub record: SessionRecord,
    pub inclusion_probability: f64,
}

/// Bernoulli-sample rows independently at rate `q` using one unit draw per
/// row, in row order. This is the deterministic core of [`online_sample`];
/// tests drive it with stratified draws to enumerate outcomes exhaustively.
pub fn online_sample_from_units(rows: &[SessionRecord], q: f64, units: &[f64]) -> Result<Vec<SampledRow>> {
    check_probability(q)?;
    assert_eq!(rows.len(), units.len(), "one unit draw per row");
    Ok(rows
        .iter()
        .zip(units)
        .filter(|(_, &u)| u < q)
        .map(|(record, _)| SampledRow { record: record.clone(), inclusion_probability: q })
        .collect())
}

/// Bernoulli-sample rows independently at rate `q` from a seeded stream.
pub fn online_sample(rows: &[SessionRecord], q: f64, seed: u64) -> Result<Vec<SampledRow>> {
    check_probability(q)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let units: Vec<f64> = (0..rows.len()).map(|_| rng.random::<f64>()).collect();
    online_sample_from_units(rows, q, &units)
}

/// A rescaled estimate with its error bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxAnswer {
    pub estimate: f64,
    pub standard_error: f64,
    pub ci95: (f64, f64),
    pub sample_size: usize,
    pub method: String,
}

impl ApproxAnswer {
    fn from_moments(estimate: f64, variance: f64, sample_size: usize, method: &str) -> Self {
        let standard_error = variance.max(0.0).sqrt();
        let low = (estimate - Z_95 * standard_error).max(0.0);
        let high = estimate + Z_95 * standard_error;
        Self { estimate, standard_error, ci95: (low, high), sample_size, method: method.to_string() }
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.ci95.0 <= truth && truth <= self.ci95.1
    }
}

/// Unbiased count of predicate matches from a sample: each sampled matching
/// row contributes `1/p`.
pub fn approx_count(sampled: &[SampledRow], predicate: &QueryPredicate) -> Result<ApproxAnswer> {
    predicate.validate()?;
    let mut estimate = 0.0;
    let mut variance = 0.0;
    for row in sampled {
        let p = row.inclusion_probability;
        check_probability(p)?;
        if predicate.matches(&row.record) {
            estimate += 1.0 / p;
            variance += (1.0 - p) / (p * p);
        }
    }
    Ok(ApproxAnswer::from_moments(estimate, variance, sampled.len(), "rescaled-count"))
}

/// Same rescaling applied to the records' durations: an unbiased estimate of
/// the total duration over matching rows.
pub fn approx_sum_duration(sampled: &[SampledRow], predicate: &QueryPredicate) -> Result<ApproxAnswer> {
    predicate.validate()?;
    let mut estimate = 0.0;
    let mut variance = 0.0;
    for row in sampled {
        let p = row.inclusion_probability;
        check_probability(p)?;
        if predicate.matches(&row.record) {
            let y = row.record.duration;
            estimate += y / p;
            variance += y * y * (1.0 - p) / (p * p);
        }
    }
    Ok(ApproxAnswer::from_moments(estimate, variance, sampled.len(), "rescaled-sum-duration"))
}

/// Full composition: snapshot the store, sample online at rate `q`, and
/// estimate the predicate's count. With `q = 1` this equals the exact count.
pub fn approx_query(meta: &MetaStore, predicate: &QueryPredicate, q: f64, seed: u64) -> Result<ApproxAnswer> {
    predicate.validate()?;
    let rows: Vec<SessionRecord> = meta.scan().cloned().collect();
    let sampled = online_sample(&rows, q, seed)?;
    approx_count(&sampled, predicate)
}
