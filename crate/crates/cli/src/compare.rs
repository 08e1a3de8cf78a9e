//! Cross-method comparison over emitted reports: the fixed-column table
//! (precision and pinball at the 1% / 0.1% FPR operating points) and the
//! best-pinball / best-precision diagnostic ranking.

use std::path::Path;

use qrmia_core::{level_key, AttackReport};

use crate::config::{Method, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{read_manifest, recorded_wall_ms, run_stage, StageStatus};
use crate::stages::{comparison_path, ranking_path, report_path};

#[derive(Clone, Debug)]
pub struct ComparisonRow {
    pub method: String,
    pub precision_primary: Option<f64>,
    pub pinball_primary: Option<f64>,
    pub auc: f64,
    pub train_cost_ms: Option<u64>,
}

/// The ranking diagnostic: rows sorted by precision at the primary FPR
/// target, with the pinball loss at the matching primary level alongside.
#[derive(Clone, Debug)]
pub struct ComparisonSummary {
    pub primary_fpr_target: f64,
    pub primary_level: f64,
    pub rows: Vec<ComparisonRow>,
    pub best_by_precision: Option<String>,
    pub best_by_pinball: Option<String>,
}

const METHODS: [Method; 4] = [
    Method::Marginal,
    Method::Gbdt,
    Method::Gaussian,
    Method::Lira,
];

fn load_reports(workdir: &Path) -> CliResult<Vec<(Method, AttackReport)>> {
    let mut reports = Vec::new();
    for method in METHODS {
        let path = report_path(workdir, method);
        if !path.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        reports.push((method, AttackReport::from_json(&text)?));
    }
    if reports.len() < 2 {
        return Err(CliError::MissingArtifact {
            path: report_path(workdir, Method::Gaussian),
            hint: "compare needs at least 2 reports; run `qrmia evaluate --method <name>` first"
                .into(),
        });
    }
    Ok(reports)
}

/// Compute the comparison without touching the manifest (library entry
/// point; `cmd_compare` wraps this as a cached stage).
pub fn build_comparison(config: &RunConfig, workdir: &Path) -> CliResult<ComparisonSummary> {
    let reports = load_reports(workdir)?;
    let manifest = read_manifest(workdir)?;
    let primary_fpr_target = config.fpr_targets.first().copied().unwrap_or(0.01);
    let primary_level = config.compare_pinball_level;
    // Fall back from the configured diagnostic level to the highest level a
    // report actually carries.
    let pinball_level_of = |report: &AttackReport| -> Option<f64> {
        if report.pinball.contains_key(&level_key(primary_level)) {
            Some(primary_level)
        } else {
            report
                .levels
                .iter()
                .cloned()
                .filter(|l| report.pinball.contains_key(&level_key(*l)))
                .fold(None, |acc: Option<f64>, l| {
                    Some(acc.map_or(l, |a| if l > a { l } else { a }))
                })
        }
    };

    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|(method, report)| {
            let cost_commands: Vec<(&str, Option<&str>)> = match method {
                Method::Lira => vec![
                    ("shadow", None),
                    ("train-attack", Some(method.as_str())),
                ],
                _ => vec![("train-attack", Some(method.as_str()))],
            };
            ComparisonRow {
                method: method.as_str().to_string(),
                precision_primary: report.precision_at.precision(primary_fpr_target),
                pinball_primary: pinball_level_of(report)
                    .and_then(|l| report.pinball.get(&level_key(l)).copied()),
                auc: report.auc,
                train_cost_ms: recorded_wall_ms(&manifest, &cost_commands),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.precision_primary
            .unwrap_or(f64::NEG_INFINITY)
            .partial_cmp(&a.precision_primary.unwrap_or(f64::NEG_INFINITY))
            .expect("finite precision")
            .then(a.method.cmp(&b.method))
    });

    let best_by_precision = rows
        .iter()
        .filter(|r| r.precision_primary.is_some())
        .max_by(|a, b| {
            a.precision_primary
                .partial_cmp(&b.precision_primary)
                .expect("finite precision")
        })
        .map(|r| r.method.clone());
    let best_by_pinball = rows
        .iter()
        .filter(|r| r.pinball_primary.is_some())
        .min_by(|a, b| {
            a.pinball_primary
                .partial_cmp(&b.pinball_primary)
                .expect("finite pinball")
        })
        .map(|r| r.method.clone());

    Ok(ComparisonSummary {
        primary_fpr_target,
        primary_level,
        rows,
        best_by_precision,
        best_by_pinball,
    })
}

fn table_csv(reports: &[(Method, AttackReport)]) -> String {
    let mut out =
        String::from("method,precision_at_1pct,precision_at_0p1pct,pinball_at_1pct,pinball_at_0p1pct\n");
    let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for (method, report) in reports {
        let pinball_at = |level: f64| report.pinball.get(&level_key(level)).copied();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            method.as_str(),
            fmt(report.precision_at.precision(0.01)),
            fmt(report.precision_at.precision(0.001)),
            fmt(pinball_at(0.99)),
            fmt(pinball_at(0.999)),
        ));
    }
    out
}

fn ranking_csv(summary: &ComparisonSummary) -> String {
    let mut out = String::from(
        "rank,method,precision_at_target,target_fpr,pinball_at_level,level,auc,train_cost_ms\n",
    );
    let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for (rank, row) in summary.rows.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            rank + 1,
            row.method,
            fmt(row.precision_primary),
            summary.primary_fpr_target,
            fmt(row.pinball_primary),
            summary.primary_level,
            row.auc,
            row.train_cost_ms
                .map(|ms| ms.to_string())
                .unwrap_or_default(),
        ));
    }
    out
}

/// The `compare` command: emits the comparison table and the diagnostic
/// ranking, and prints which method wins each reading.
pub fn cmd_compare(config: &RunConfig, workdir: &Path, force: bool) -> CliResult<StageStatus> {
    let inputs: Vec<(std::path::PathBuf, &str)> = METHODS
        .iter()
        .map(|m| report_path(workdir, *m))
        .filter(|p| p.exists())
        .map(|p| (p, "evaluate"))
        .collect();
    if inputs.len() < 2 {
        return Err(CliError::MissingArtifact {
            path: report_path(workdir, Method::Gaussian),
            hint: "compare needs at least 2 reports; run `qrmia evaluate --method <name>` first"
                .into(),
        });
    }
    let outs = [comparison_path(workdir), ranking_path(workdir)];
    run_stage(
        workdir,
        "compare",
        vec![],
        config.seed,
        &config.stage_digest("compare"),
        &inputs,
        &outs.clone(),
        force,
        || {
            let reports = load_reports(workdir)?;
            let summary = build_comparison(config, workdir)?;
            std::fs::write(&outs[0], table_csv(&reports))
                .map_err(|e| CliError::io(&outs[0], e))?;
            std::fs::write(&outs[1], ranking_csv(&summary))
                .map_err(|e| CliError::io(&outs[1], e))?;
            println!(
                "[compare] best by precision@{}: {} | best by pinball@{}: {}",
                summary.primary_fpr_target,
                summary.best_by_precision.as_deref().unwrap_or("n/a"),
                summary.primary_level,
                summary.best_by_pinball.as_deref().unwrap_or("n/a"),
            );
            Ok(())
        },
    )
}
