use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::metrics::GroupAuditRow;
use super::roc::{OperatingPoint, RocCurve};

/// Canonical string key for a level or FPR target (shortest round-trip
/// float formatting, so "0.99" stays "0.99").
pub fn level_key(value: f64) -> String {
    format!("{value}")
}

/// Precision at each configured FPR target, with the achieved FPR of the
/// chosen operating point alongside. Unreachable targets serialize as null.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrecisionAtTable {
    #[serde(flatten)]
    pub by_target: BTreeMap<String, Option<f64>>,
    pub achieved_fpr: BTreeMap<String, Option<f64>>,
}

impl PrecisionAtTable {
    pub fn insert(&mut self, target: f64, point: &OperatingPoint) {
        self.by_target.insert(level_key(target), point.precision);
        self.achieved_fpr
            .insert(level_key(target), point.achieved_fpr);
    }

    pub fn precision(&self, target: f64) -> Option<f64> {
        self.by_target.get(&level_key(target)).copied().flatten()
    }
}

/// A serialized ROC point: `param` is the sweep parameter, absent on the
/// two synthetic endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocReportPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub param: Option<f64>,
}

/// The full evaluation record of one attack method. Serializes losslessly
/// and deterministically (maps are ordered, floats shortest-round-trip).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub method: String,
    pub seed: u64,
    pub config_hash: String,
    pub levels: Vec<f64>,
    pub roc: Vec<RocReportPoint>,
    pub auc: f64,
    pub precision_at: PrecisionAtTable,
    /// Mean public pinball loss keyed by level.
    pub pinball: BTreeMap<String, f64>,
    pub group_audit: Vec<GroupAuditRow>,
    pub warnings: Vec<String>,
}

impl AttackReport {
    pub fn set_roc(&mut self, curve: &RocCurve) {
        self.roc = curve
            .points
            .iter()
            .map(|p| RocReportPoint {
                fpr: p.fpr,
                tpr: p.tpr,
                param: p.param,
            })
            .collect();
        self.auc = curve.auc;
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Plot-data CSV: raw `fpr,tpr` rows (log-log ready, no log applied).
    pub fn roc_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for p in &self.roc {
            out.push_str(&format!("{},{}\n", p.fpr, p.tpr));
        }
        out
    }

    /// Flat pinball table CSV: `method,level,loss`.
    pub fn pinball_csv(&self) -> String {
        let mut out = String::from("method,level,loss\n");
        for (level, loss) in &self.pinball {
            out.push_str(&format!("{},{level},{loss}\n", self.method));
        }
        out
    }

    /// Flat group audit CSV: `group,n,fpr,deviation` (empty fields for
    /// groups with no members).
    pub fn group_audit_csv(&self) -> String {
        let mut out = String::from("group,n,fpr,deviation\n");
        for row in &self.group_audit {
            let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.group,
                row.n,
                fmt(row.fpr),
                fmt(row.deviation)
            ));
        }
        out
    }

    /// Write the JSON report plus its flat CSV companions next to it:
    /// `<stem>.json`, `<stem>_roc.csv`, `<stem>_pinball.csv`, and (when the
    /// audit is non-empty) `<stem>_groups.csv`.
    pub fn emit(&self, dir: impl AsRef<Path>, stem: &str) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        let mut written = Vec::new();
        let mut write = |name: String, contents: String| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        write(format!("{stem}.json"), self.to_json()?)?;
        write(format!("{stem}_roc.csv"), self.roc_csv())?;
        write(format!("{stem}_pinball.csv"), self.pinball_csv())?;
        if !self.group_audit.is_empty() {
            write(format!("{stem}_groups.csv"), self.group_audit_csv())?;
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> AttackReport {
        let mut precision_at = PrecisionAtTable::default();
        precision_at.insert(
            0.01,
            &OperatingPoint {
                precision: Some(0.83),
                achieved_fpr: Some(0.0098),
                param: Some(0.99),
            },
        );
        precision_at.insert(0.001, &OperatingPoint::undefined());
        let mut pinball = BTreeMap::new();
        pinball.insert(level_key(0.99), 0.173);
        pinball.insert(level_key(0.999), 0.021);
        AttackReport {
            method: "gaussian".into(),
            seed: 7,
            config_hash: "00ff00ff00ff00ff".into(),
            levels: vec![0.99, 0.999],
            roc: vec![
                RocReportPoint {
                    fpr: 0.0,
                    tpr: 0.0,
                    param: None,
                },
                RocReportPoint {
                    fpr: 0.0098,
                    tpr: 0.41,
                    param: Some(0.99),
                },
                RocReportPoint {
                    fpr: 1.0,
                    tpr: 1.0,
                    param: None,
                },
            ],
            auc: 0.71,
            precision_at,
            pinball,
            group_audit: vec![GroupAuditRow {
                group: "hi".into(),
                n: 120,
                fpr: Some(0.05),
                deviation: Some(0.0),
            }],
            warnings: vec![],
        }
    }

    #[test]
    fn json_round_trip_is_structural_identity() {
        let report = sample_report();
        let json = report.to_json().unwrap();
        let back = AttackReport::from_json(&json).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn serialization_is_byte_deterministic() {
        let a = sample_report().to_json().unwrap();
        let b = sample_report().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn precision_table_keys_and_nulls() {
        let report = sample_report();
        let json = report.to_json().unwrap();
        assert!(json.contains("\"0.01\": 0.83"));
        assert!(json.contains("\"0.001\": null"));
        assert!(json.contains("\"achieved_fpr\""));
        assert_eq!(report.precision_at.precision(0.001), None);
    }

    #[test]
    fn one_pinball_row_per_level() {
        let report = sample_report();
        let csv = report.pinball_csv();
        let rows: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(rows.len(), 1 + report.pinball.len());
        assert!(rows[1].starts_with("gaussian,"));
    }
}
