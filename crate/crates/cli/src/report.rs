//! Structured benchmark reports: line-oriented JSON chosen for
//! diff-ability, lossless float round-trips, and a config digest tying
//! every number to the exact configuration that produced it.
//!
//! Layout: line 1 echoes the configuration, line 2 carries the run
//! record, every further line is one dense trajectory sample. Identical
//! config and seed reproduce the file byte-for-byte apart from the
//! wall-clock field.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot access report {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("report layout: {message}")]
    Layout { message: String },
    #[error("config digest mismatch: the record does not belong to the embedded config")]
    DigestMismatch,
}

/// Outcome digest of one multistart seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartDigest {
    pub seed: u64,
    pub status: String,
    pub major_iterations: usize,
    pub cost: f64,
    pub feasibility: f64,
}

/// A named optimized design parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignValue {
    pub name: String,
    pub value: f64,
}

/// Informational comparison against published benchmark figures for the
/// same problem; never an assertion target (different solver stacks and
/// unstated model constants make iteration counts incomparable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceComparison {
    pub note: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub major_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub params: Option<Vec<f64>>,
}

/// Per-run record. Numeric fields are absent (not null, not NaN) when the
/// run failed before producing them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Digest of the semantic configuration fields.
    pub digest: String,
    /// Solver status label, or `"error"` for failures before solving.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub major_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cost: Option<f64>,
    /// `max |c(x*)|` at the returned iterate.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub feasibility: Option<f64>,
    /// Optimized horizon (equals the fixed one when the horizon is fixed).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t_f: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub design_params: Vec<DesignValue>,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub starts: Vec<StartDigest>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference: Option<ReferenceComparison>,
}

/// One dense sample: configuration, velocity, control, and momentum at a
/// physical time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

/// A full benchmark report: configuration echo, run record, and (for
/// feasible runs) the dense trajectory resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub config: RunConfig,
    pub record: RunRecord,
    pub trajectory: Vec<TrajectorySample>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum ReportLine {
    Config { config: RunConfig },
    Result(RunRecord),
    Sample(TrajectorySample),
}

impl BenchmarkReport {
    pub fn write_jsonl<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let config_line = ReportLine::Config {
            config: self.config.clone(),
        };
        writeln!(out, "{}", serde_json::to_string(&config_line)?)?;
        let result_line = ReportLine::Result(self.record.clone());
        writeln!(out, "{}", serde_json::to_string(&result_line)?)?;
        for sample in &self.trajectory {
            let line = ReportLine::Sample(sample.clone());
            writeln!(out, "{}", serde_json::to_string(&line)?)?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buffer = Vec::new();
        self.write_jsonl(&mut buffer)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buffer).expect("serde_json emits UTF-8")
    }

    pub fn from_jsonl_str(text: &str) -> Result<Self, ReportError> {
        let mut config = None;
        let mut record = None;
        let mut trajectory = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: ReportLine =
                serde_json::from_str(raw).map_err(|e| ReportError::Malformed {
                    line: index + 1,
                    message: e.to_string(),
                })?;
            match line {
                ReportLine::Config { config: cfg } => {
                    if config.replace(cfg).is_some() {
                        return Err(ReportError::Layout {
                            message: "more than one config line".into(),
                        });
                    }
                }
                ReportLine::Result(r) => {
                    if record.replace(r).is_some() {
                        return Err(ReportError::Layout {
                            message: "more than one result line".into(),
                        });
                    }
                }
                ReportLine::Sample(s) => trajectory.push(s),
            }
        }
        let config = config.ok_or_else(|| ReportError::Layout {
            message: "missing config line".into(),
        })?;
        let record = record.ok_or_else(|| ReportError::Layout {
            message: "missing result line".into(),
        })?;
        if record.digest != config.digest() {
            return Err(ReportError::DigestMismatch);
        }
        Ok(BenchmarkReport {
            config,
            record,
            trajectory,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ReportError> {
        let mut buffer = Vec::new();
        self.write_jsonl(&mut buffer).map_err(|source| ReportError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, buffer).map_err(|source| ReportError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_jsonl_str(&text)
    }

    /// True when the record's status admits a usable trajectory.
    pub fn is_feasible(&self) -> bool {
        matches!(self.record.status.as_str(), "optimal" | "feasible")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> BenchmarkReport {
        let config = RunConfig::default();
        let digest = config.digest();
        BenchmarkReport {
            config,
            record: RunRecord {
                digest,
                status: "optimal".into(),
                message: None,
                major_iterations: Some(17),
                cost: Some(12.000000000001),
                feasibility: Some(3.5e-12),
                t_f: Some(1.0),
                design_params: vec![DesignValue {
                    name: "l2".into(),
                    value: 0.1 + 0.2, // deliberately not representable exactly
                }],
                wall_time_s: 0.25,
                starts: vec![StartDigest {
                    seed: 0,
                    status: "optimal".into(),
                    major_iterations: 17,
                    cost: 12.000000000001,
                    feasibility: 3.5e-12,
                }],
                reference: Some(ReferenceComparison {
                    note: "published benchmark (informational)".into(),
                    cost: Some(0.63),
                    major_iterations: Some(218),
                    params: None,
                }),
            },
            trajectory: vec![
                TrajectorySample {
                    t: 0.0,
                    q: vec![0.0],
                    v: vec![-0.0],
                    u: vec![6.0],
                    p: vec![1e-300],
                },
                TrajectorySample {
                    t: 1.0,
                    q: vec![1.0],
                    v: vec![2.220446049250313e-16],
                    u: vec![-6.0],
                    p: vec![6.02214076e23],
                },
            ],
        }
    }

    #[test]
    fn serialization_round_trips_byte_for_byte() {
        let report = sample_report();
        let text = report.to_jsonl_string();
        let back = BenchmarkReport::from_jsonl_str(&text).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.to_jsonl_string(), text);
    }

    #[test]
    fn awkward_floats_survive_exactly() {
        let report = sample_report();
        let back = BenchmarkReport::from_jsonl_str(&report.to_jsonl_string()).unwrap();
        let (a, b) = (&report.trajectory[1], &back.trajectory[1]);
        assert_eq!(a.v[0].to_bits(), b.v[0].to_bits());
        assert_eq!(a.p[0].to_bits(), b.p[0].to_bits());
        assert_eq!(
            report.trajectory[0].p[0].to_bits(),
            back.trajectory[0].p[0].to_bits()
        );
        // The negative-zero velocity keeps its sign bit.
        assert_eq!(
            report.trajectory[0].v[0].to_bits(),
            back.trajectory[0].v[0].to_bits()
        );
    }

    #[test]
    fn line_layout_is_config_result_samples() {
        let text = sample_report().to_jsonl_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].contains("\"kind\":\"config\""));
        assert!(lines[1].contains("\"kind\":\"result\""));
        assert!(lines[2].contains("\"kind\":\"sample\""));
    }

    #[test]
    fn tampered_config_fails_the_digest_check() {
        let report = sample_report();
        let tampered = report.to_jsonl_string().replace("\"n\":64", "\"n\":32");
        assert_ne!(tampered, report.to_jsonl_string());
        match BenchmarkReport::from_jsonl_str(&tampered) {
            Err(ReportError::DigestMismatch) => {}
            other => panic!("expected a digest mismatch, got {other:?}"),
        }
    }

    #[test]
    fn missing_result_line_is_a_layout_error() {
        let report = sample_report();
        let text: String = report
            .to_jsonl_string()
            .lines()
            .filter(|l| !l.contains("\"kind\":\"result\""))
            .map(|l| format!("{l}\n"))
            .collect();
        match BenchmarkReport::from_jsonl_str(&text) {
            Err(ReportError::Layout { message }) => assert!(message.contains("result")),
            other => panic!("expected a layout error, got {other:?}"),
        }
    }

    #[test]
    fn error_records_serialize_without_numeric_fields() {
        let config = RunConfig::default();
        let digest = config.digest();
        let report = BenchmarkReport {
            config,
            record: RunRecord {
                digest,
                status: "error".into(),
                message: Some("model construction failed".into()),
                major_iterations: None,
                cost: None,
                feasibility: None,
                t_f: None,
                design_params: vec![],
                wall_time_s: 0.001,
                starts: vec![],
                reference: None,
            },
            trajectory: vec![],
        };
        let text = report.to_jsonl_string();
        assert!(!text.contains("\"cost\""));
        assert!(!text.contains("null"));
        let back = BenchmarkReport::from_jsonl_str(&text).unwrap();
        assert_eq!(back, report);
    }
}
