//! Machine-readable report documents.
//!
//! One JSON schema serves every command; the top-level keys are always
//! `config`, `structural`, `envelopes`, `norms`, `theorems`, `violations`
//! and `meta`, with `null` for sections a command does not produce. All
//! numbers are IEEE doubles in decimal. CSV output is a single table with a
//! header row, comma separators and `.` decimal points, no locale.
//!
//! Reports are deterministic byte-for-byte for a fixed configuration: row
//! order is pinned (ascending time, then partner time, then probe index) and
//! nothing time- or machine-dependent is serialized. Wall time is reported on
//! stderr only.

use serde::Serialize;

use crate::norms::NormKind;
use crate::systems::{CocycleCheck, InvarianceCheck, VIdentitiesCheck};
use crate::verify::{
    CorollaryCheck, EnvelopeReport, Theorem1Check, Theorem2Check, UniformityReport,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Overall verdict vocabulary used across report sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    PreconditionFailed,
    Inconclusive,
}

impl Verdict {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Echo of the effective run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub command: String,
    pub example: Option<String>,
    pub system_label: String,
    pub h: String,
    pub k: String,
    pub u: Option<String>,
    pub t_max: f64,
    pub grid_points: usize,
    pub tol_structural: f64,
    pub tol_envelope: f64,
    pub seed: u64,
    pub format: String,
}

/// Structural check results: identity/composition, invariance and the
/// kernel-inverse identities.
#[derive(Debug, Clone, Serialize)]
pub struct StructuralSection {
    pub verdict: Verdict,
    pub cocycle: CocycleCheck,
    pub invariance: InvarianceCheck,
    pub v_identities: Option<VIdentitiesCheck>,
    /// Set when the kernel inverse could not be built (system not
    /// compatible); the identities are then skipped, not failed.
    pub v_note: Option<String>,
}

/// Summary statistics of an envelope run at one horizon.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeSummary {
    pub horizon: f64,
    pub max_value: f64,
    pub n1_req_first: f64,
    pub n2_req_last: f64,
}

impl EnvelopeSummary {
    pub fn of(report: &EnvelopeReport) -> Self {
        EnvelopeSummary {
            horizon: *report.grid_points.last().unwrap(),
            max_value: report.max_value,
            n1_req_first: report.n1_req[0],
            n2_req_last: *report.n2_req.last().unwrap(),
        }
    }
}

/// Envelope tables at the configured horizon plus double-horizon summaries
/// and the uniformity verdicts derived from them.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeSection {
    pub dichotomy: Option<EnvelopeReport>,
    pub dichotomy_double_horizon: Option<EnvelopeSummary>,
    pub dichotomy_uniformity: Option<UniformityReport>,
    pub growth: Option<EnvelopeReport>,
    pub growth_double_horizon: Option<EnvelopeSummary>,
    pub growth_uniformity: Option<UniformityReport>,
    /// Diagnostics for envelope preconditions that failed.
    pub notes: Vec<String>,
}

/// One norm-table row: the grid value is a certified lower bound of the
/// continuous supremum, `upper_bound` the certified envelope-based cap.
#[derive(Debug, Clone, Serialize)]
pub struct NormRow {
    pub t: f64,
    pub probe: usize,
    pub value: f64,
    pub upper_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormSection {
    pub kind: NormKind,
    pub rows: Vec<NormRow>,
}

/// One golden comparison of a reproduction run.
#[derive(Debug, Clone, Serialize)]
pub struct GoldenRecord {
    pub name: String,
    /// `within-rel`, `at-most`, `at-least` or `flag`.
    pub comparison: String,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl GoldenRecord {
    pub fn within_rel(name: &str, expected: f64, actual: f64, tol: f64) -> Self {
        GoldenRecord {
            name: name.into(),
            comparison: "within-rel".into(),
            expected,
            actual,
            tolerance: tol,
            pass: (actual - expected).abs() <= tol * expected.abs(),
        }
    }

    pub fn at_most(name: &str, bound: f64, actual: f64) -> Self {
        GoldenRecord {
            name: name.into(),
            comparison: "at-most".into(),
            expected: bound,
            actual,
            tolerance: 0.0,
            pass: actual <= bound,
        }
    }

    pub fn at_least(name: &str, bound: f64, actual: f64) -> Self {
        GoldenRecord {
            name: name.into(),
            comparison: "at-least".into(),
            expected: bound,
            actual,
            tolerance: 0.0,
            pass: actual >= bound,
        }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        GoldenRecord {
            name: name.into(),
            comparison: "flag".into(),
            expected: 1.0,
            actual: if ok { 1.0 } else { 0.0 },
            tolerance: 0.0,
            pass: ok,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremSection {
    pub theorem1: Vec<(String, Theorem1Check)>,
    pub theorem2: Vec<(String, Theorem2Check)>,
    pub corollaries: Vec<CorollaryCheck>,
    pub goldens: Vec<GoldenRecord>,
}

impl TheoremSection {
    pub fn empty() -> Self {
        TheoremSection {
            theorem1: Vec::new(),
            theorem2: Vec::new(),
            corollaries: Vec::new(),
            goldens: Vec::new(),
        }
    }
}

/// A failed check, with enough context to locate it.
#[derive(Debug, Clone, Serialize)]
pub struct ViolationRecord {
    pub source: String,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub schema_version: u32,
    pub toolkit: String,
    pub version: String,
    pub seed: u64,
    pub probe_count: usize,
}

impl Meta {
    pub fn new(seed: u64, probe_count: usize) -> Self {
        Meta {
            schema_version: SCHEMA_VERSION,
            toolkit: "hkdlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            probe_count,
        }
    }
}

/// The complete report document emitted by every command.
#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub config: ConfigEcho,
    pub structural: Option<StructuralSection>,
    pub envelopes: Option<EnvelopeSection>,
    pub norms: Option<NormSection>,
    pub theorems: Option<TheoremSection>,
    pub violations: Vec<ViolationRecord>,
    pub meta: Meta,
}

impl ReportDocument {
    /// True when no recorded check failed.
    pub fn all_pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serialization");
        out.push('\n');
        out
    }

    /// CSV rendering: the norm table when present, otherwise the envelope
    /// plot table `t,n1_req,n2_req,hull` of the dichotomy (or growth) run.
    pub fn to_csv(&self) -> String {
        if let Some(norms) = &self.norms {
            let mut out = String::from("t,probe,value,upper_bound\n");
            for row in &norms.rows {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    row.t, row.probe, row.value, row.upper_bound
                ));
            }
            return out;
        }
        let envelope = self
            .envelopes
            .as_ref()
            .and_then(|e| e.dichotomy.as_ref().or(e.growth.as_ref()));
        let mut out = String::from("t,n1_req,n2_req,hull\n");
        if let Some(report) = envelope {
            for idx in 0..report.grid_points.len() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    report.grid_points[idx],
                    report.n1_req[idx],
                    report.n2_req[idx],
                    report.hull[idx]
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_comparisons() {
        assert!(GoldenRecord::within_rel("x", 10.0, 10.05, 0.01).pass);
        assert!(!GoldenRecord::within_rel("x", 10.0, 10.2, 0.01).pass);
        assert!(GoldenRecord::at_most("x", 1e-9, 3e-10).pass);
        assert!(GoldenRecord::at_least("x", 65.0, 65.6).pass);
        assert!(!GoldenRecord::flag("x", false).pass);
    }

    #[test]
    fn json_has_all_top_level_keys() {
        let doc = ReportDocument {
            config: ConfigEcho {
                command: "check".into(),
                example: None,
                system_label: "test".into(),
                h: "exp:1".into(),
                k: "exp:1".into(),
                u: None,
                t_max: 10.0,
                grid_points: 101,
                tol_structural: 1e-9,
                tol_envelope: 1e-6,
                seed: 0x5EED,
                format: "json".into(),
            },
            structural: None,
            envelopes: None,
            norms: None,
            theorems: None,
            violations: Vec::new(),
            meta: Meta::new(0x5EED, 10),
        };
        let json: serde_json::Value = serde_json::from_str(&doc.to_json()).unwrap();
        for key in [
            "config",
            "structural",
            "envelopes",
            "norms",
            "theorems",
            "violations",
            "meta",
        ] {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
    }
}
