//! Audit reports: the JSON record every suite emits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Named integer parameters identifying one checked instance.
pub type Params = BTreeMap<String, i64>;

/// Build a [`Params`] map from `(name, value)` pairs.
pub fn params<const N: usize>(pairs: [(&str, i64); N]) -> Params {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Observed value divided by a bound shape; violations exceed the threshold.
    Ratio,
    /// Absolute difference between two evaluations of the same quantity.
    Residual,
    /// Empirical growth exponent.
    Exponent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub params: Params,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub params: Params,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub suite: String,
    pub tool_version: String,
    pub config_hash: String,
    pub registry_hash: String,
    pub modulus_range: [u64; 2],
    pub metric: Metric,
    pub threshold: f64,
    pub checked: u64,
    pub max_ratio: f64,
    pub worst_witness: Option<Witness>,
    pub violation_count: u64,
    pub violations: Vec<Violation>,
    /// Auxiliary recorded quantities (secondary maxima, envelope constants).
    pub recorded: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn stamp(&mut self, config_hash: &str, registry_hash: &str) {
        self.config_hash = config_hash.to_string();
        self.registry_hash = registry_hash.to_string();
    }
}

/// Keep at most this many violation records; the count is always exact.
const MAX_STORED_VIOLATIONS: usize = 256;

/// Accumulates observations in canonical order.
///
/// The first instance attaining the maximum is the witness, so feeding
/// observations in a fixed order gives a fixed report.
pub struct AuditBuilder {
    report: AuditReport,
}

impl AuditBuilder {
    pub fn new(suite: &str, metric: Metric, threshold: f64, modulus_range: [u64; 2]) -> Self {
        Self {
            report: AuditReport {
                suite: suite.to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config_hash: String::new(),
                registry_hash: crate::registry::Registry::builtin_hash(),
                modulus_range,
                metric,
                threshold,
                checked: 0,
                max_ratio: 0.0,
                worst_witness: None,
                violation_count: 0,
                violations: Vec::new(),
                recorded: BTreeMap::new(),
                notes: Vec::new(),
            },
        }
    }

    /// Record one instance. A value above the threshold (or NaN) is a violation.
    pub fn observe(&mut self, params: Params, value: f64) {
        let r = &mut self.report;
        r.checked += 1;
        let v = if value.is_nan() { f64::INFINITY } else { value };
        if r.worst_witness.is_none() || v > r.max_ratio {
            r.max_ratio = v;
            r.worst_witness = Some(Witness {
                params: params.clone(),
                value: v,
            });
        }
        if !(value <= r.threshold) {
            r.violation_count += 1;
            if r.violations.len() < MAX_STORED_VIOLATIONS {
                r.violations.push(Violation {
                    params,
                    value: v,
                    threshold: r.threshold,
                });
            }
        }
    }

    /// Record an instance that counts toward the total but cannot be a
    /// witness or violation (e.g. a branch only tracked separately).
    pub fn count_only(&mut self) {
        self.report.checked += 1;
    }

    /// Track the running maximum of a secondary quantity.
    pub fn record_max(&mut self, key: &str, value: f64) {
        let slot = self
            .report
            .recorded
            .entry(key.to_string())
            .or_insert(f64::NEG_INFINITY);
        if value > *slot {
            *slot = value;
        }
    }

    pub fn record(&mut self, key: &str, value: f64) {
        self.report.recorded.insert(key.to_string(), value);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.report.notes.push(note.into());
    }

    /// Record an explicit failure that is not a numeric threshold crossing.
    pub fn fail(&mut self, params: Params, value: f64) {
        let r = &mut self.report;
        r.violation_count += 1;
        if r.violations.len() < MAX_STORED_VIOLATIONS {
            r.violations.push(Violation {
                params,
                value,
                threshold: r.threshold,
            });
        }
    }

    /// An empty builder with the same suite, metric and threshold, for one
    /// chunk of a parallel audit.
    pub fn fork(&self) -> Self {
        let r = &self.report;
        let mut b = Self::new(&r.suite, r.metric, r.threshold, r.modulus_range);
        b.report.registry_hash = r.registry_hash.clone();
        b
    }

    /// Append a chunk observed after everything already in `self`. Merging
    /// chunks in canonical order reproduces the sequential report exactly.
    pub fn merge(&mut self, other: AuditBuilder) {
        let o = other.report;
        let r = &mut self.report;
        r.checked += o.checked;
        if let Some(w) = o.worst_witness {
            if r.worst_witness.is_none() || w.value > r.max_ratio {
                r.max_ratio = w.value;
                r.worst_witness = Some(w);
            }
        }
        r.violation_count += o.violation_count;
        let room = MAX_STORED_VIOLATIONS.saturating_sub(r.violations.len());
        r.violations.extend(o.violations.into_iter().take(room));
        for (k, v) in o.recorded {
            let slot = r.recorded.entry(k).or_insert(f64::NEG_INFINITY);
            if v > *slot {
                *slot = v;
            }
        }
        r.notes.extend(o.notes);
    }

    /// Largest value observed so far (zero before any observation).
    pub fn max_value(&self) -> f64 {
        self.report.max_ratio
    }

    pub fn threshold(&self) -> f64 {
        self.report.threshold
    }

    pub fn finish(mut self) -> AuditReport {
        for v in self.report.recorded.values_mut() {
            if !v.is_finite() {
                *v = 0.0;
            }
        }
        self.report
    }
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_maximum_is_witness() {
        let mut b = AuditBuilder::new("t", Metric::Ratio, 1.0, [1, 2]);
        b.observe(params([("a", 1)]), 0.5);
        b.observe(params([("a", 2)]), 0.9);
        b.observe(params([("a", 3)]), 0.9);
        b.observe(params([("a", 4)]), 1.5);
        b.observe(params([("a", 5)]), 1.5);
        let r = b.finish();
        assert_eq!(r.checked, 5);
        assert_eq!(r.worst_witness.as_ref().unwrap().params["a"], 4);
        assert_eq!(r.violation_count, 2);
        assert!(!r.passed());
    }

    #[test]
    fn nan_is_a_violation() {
        let mut b = AuditBuilder::new("t", Metric::Residual, 1e-9, [1, 2]);
        b.observe(params([("a", 1)]), 0.0);
        b.observe(params([("a", 2)]), f64::NAN);
        let r = b.finish();
        assert_eq!(r.violation_count, 1);
        assert!(r.max_ratio.is_infinite());
        // infinities are not JSON; they are written as null and must not panic
        let _ = r.to_json();
    }

    #[test]
    fn chunked_merge_matches_sequential() {
        let values: Vec<f64> = (0..600).map(|k| ((k * 37) % 101) as f64 / 50.0).collect();
        let mut seq = AuditBuilder::new("t", Metric::Ratio, 1.5, [1, 2]);
        for (k, v) in values.iter().enumerate() {
            seq.observe(params([("k", k as i64)]), *v);
            seq.record_max("m", *v);
        }
        let mut merged = seq.fork();
        for chunk in values.chunks(77).enumerate() {
            let mut part = merged.fork();
            for (j, v) in chunk.1.iter().enumerate() {
                part.observe(params([("k", (chunk.0 * 77 + j) as i64)]), *v);
                part.record_max("m", *v);
            }
            merged.merge(part);
        }
        assert_eq!(seq.finish(), merged.finish());
    }

    #[test]
    fn json_shape() {
        let mut b = AuditBuilder::new("weil", Metric::Ratio, 1.0, [2, 200]);
        b.observe(params([("c", 3), ("a", 1), ("b", 1)]), 0.3);
        let r = b.finish();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["suite"], "weil");
        assert_eq!(v["modulus_range"][1], 200);
        assert_eq!(v["worst_witness"]["params"]["c"], 3);
        assert!(v["violations"].as_array().unwrap().is_empty());
    }
}
