//! The pipeline stages. Each command consumes its upstream artifacts from
//! the workdir, writes exactly its declared outputs, and appends a manifest
//! line; re-running with unchanged inputs is a no-op.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use qrmia_core::seed::derive_seed;
use qrmia_core::{
    conformal_shift, group_shift_correct, join_scores, lira_attack, lira_fit, lira_quantile_model,
    precision_at_fpr, quantile_attack, roc_sweep, score_dataset, Attack,
    AttackReport, ClassifierFile, CsvSchema, Dataset, GbdtHyperParams, LiraGaussians, Membership,
    PredictionMatrix, QuantileLevel, QuantileModel, RocCurve, ScoreKind, ScoreSet, ScoredRow,
    SplitManifest, TuneObjective,
};
use serde::{Deserialize, Serialize};

use crate::config::{Method, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{run_stage, StageStatus};

pub fn dataset_path(workdir: &Path) -> PathBuf {
    workdir.join("dataset.csv")
}
pub fn split_path(workdir: &Path) -> PathBuf {
    workdir.join("split.json")
}
pub fn target_path(workdir: &Path) -> PathBuf {
    workdir.join("target_model.json")
}
pub fn scores_path(workdir: &Path, part: &str) -> PathBuf {
    workdir.join(format!("scores_{part}.csv"))
}
pub fn tuned_hp_path(workdir: &Path) -> PathBuf {
    workdir.join("tuned_hp.json")
}
pub fn trials_path(workdir: &Path) -> PathBuf {
    workdir.join("tuner_trials.csv")
}
pub fn attack_path(workdir: &Path, method: Method) -> PathBuf {
    workdir.join(format!("attack_{}.json", method.as_str()))
}
pub fn shadow_masks_path(workdir: &Path) -> PathBuf {
    workdir.join("shadow_masks.csv")
}
pub fn shadow_scores_path(workdir: &Path) -> PathBuf {
    workdir.join("shadow_scores.csv")
}
pub fn shadow_manifest_path(workdir: &Path) -> PathBuf {
    workdir.join("shadow_manifest.json")
}
pub fn report_path(workdir: &Path, method: Method) -> PathBuf {
    workdir.join(format!("report_{}.json", method.as_str()))
}
pub fn comparison_path(workdir: &Path) -> PathBuf {
    workdir.join("comparison.csv")
}
pub fn ranking_path(workdir: &Path) -> PathBuf {
    workdir.join("ranking.csv")
}

/// Serialized attack artifact: the decision rule (with its embedded
/// threshold model), the global shift, and the per-group shifts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttackFile {
    pub version: u32,
    pub method: Method,
    pub level: f64,
    pub attack: Attack<f64>,
}

impl AttackFile {
    pub const VERSION: u32 = 1;
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShadowManifest {
    pub seed: u64,
    pub n_shadows: usize,
    pub score_kind: ScoreKind,
    pub hp: GbdtHyperParams,
}

fn write_text(path: &Path, text: String) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Generate (or import) the dataset CSV.
pub fn cmd_gen(config: &RunConfig, workdir: &Path, force: bool) -> CliResult<StageStatus> {
    let out = dataset_path(workdir);
    let inputs: Vec<(PathBuf, &str)> = match &config.dataset {
        Some(src) => vec![(src.clone(), "gen (external dataset missing)")],
        None => vec![],
    };
    run_stage(
        workdir,
        "gen",
        vec![],
        derive_seed(config.seed, "gen"),
        &config.stage_digest("gen"),
        &inputs,
        &[out.clone()],
        force,
        || {
            let data: Dataset<f64> = match &config.dataset {
                Some(src) => qrmia_core::load_csv(src, &CsvSchema::default())?,
                None => qrmia_core::generate_synthetic(&config.synthetic_spec())?,
            };
            qrmia_core::save_csv(&data, &out)?;
            Ok(())
        },
    )
}

/// Partition the dataset into private/public/holdout and persist the ids.
pub fn cmd_split(config: &RunConfig, workdir: &Path, force: bool) -> CliResult<StageStatus> {
    let data_path = dataset_path(workdir);
    let out = split_path(workdir);
    run_stage(
        workdir,
        "split",
        vec![],
        config.split_spec().seed,
        &config.stage_digest("split"),
        &[(data_path.clone(), "gen")],
        &[out.clone()],
        force,
        || {
            let data: Dataset<f64> = qrmia_core::load_csv(&data_path, &CsvSchema::default())?;
            let spec = config.split_spec();
            let (private, public, holdout) = qrmia_core::split_dataset(&data, &spec)?;
            let manifest = qrmia_core::split_manifest(&spec, &private, &public, &holdout);
            write_text(
                &out,
                serde_json::to_string_pretty(&manifest).expect("split manifest serializes"),
            )
        },
    )
}

fn load_dataset(workdir: &Path) -> CliResult<Dataset<f64>> {
    Ok(qrmia_core::load_csv(
        dataset_path(workdir),
        &CsvSchema::default(),
    )?)
}

fn load_parts(
    config_workdir: &Path,
) -> CliResult<(Dataset<f64>, Dataset<f64>, Dataset<f64>, Dataset<f64>)> {
    let data = load_dataset(config_workdir)?;
    let manifest: SplitManifest = serde_json::from_str(&read_text(&split_path(config_workdir))?)
        .map_err(|e| CliError::Config(format!("cannot parse split.json: {e}")))?;
    let private = data.select_by_ids(&manifest.private_ids, format!("{}/private", data.name))?;
    let public = data.select_by_ids(&manifest.public_ids, format!("{}/public", data.name))?;
    let holdout = data.select_by_ids(&manifest.holdout_ids, format!("{}/holdout", data.name))?;
    Ok((data, private, public, holdout))
}

/// Train the target classifier on the private split.
pub fn cmd_train_target(config: &RunConfig, workdir: &Path, force: bool) -> CliResult<StageStatus> {
    let out = target_path(workdir);
    let seed = derive_seed(config.seed, "train-target");
    run_stage(
        workdir,
        "train-target",
        vec![],
        seed,
        &config.stage_digest("train-target"),
        &[
            (dataset_path(workdir), "gen"),
            (split_path(workdir), "split"),
        ],
        &[out.clone()],
        force,
        || {
            let (data, private, _, _) = load_parts(workdir)?;
            let hp = config.target_hp.with_seed(seed);
            let model = qrmia_core::fit_gbdt_classifier(
                &private.feature_rows(),
                &private.labels(),
                data.num_classes,
                &hp,
            )?;
            let train_acc = model.accuracy(&private.feature_rows(), &private.labels());
            println!("[train-target] training accuracy {train_acc:.4}");
            ClassifierFile::new(model).save(&out)?;
            Ok(())
        },
    )
}

/// Score every split with the target model.
pub fn cmd_score(config: &RunConfig, workdir: &Path, force: bool) -> CliResult<StageStatus> {
    let outs = [
        scores_path(workdir, "private"),
        scores_path(workdir, "public"),
        scores_path(workdir, "holdout"),
    ];
    run_stage(
        workdir,
        "score",
        vec![],
        derive_seed(config.seed, "score"),
        &config.stage_digest("score"),
        &[
            (dataset_path(workdir), "gen"),
            (split_path(workdir), "split"),
            (target_path(workdir), "train-target"),
        ],
        &outs.clone(),
        force,
        || {
            let (_, private, public, holdout) = load_parts(workdir)?;
            let target = ClassifierFile::<f64>::load(target_path(workdir))?.model;
            let score = |part: &Dataset<f64>, tag: Membership| -> CliResult<ScoreSet<f64>> {
                let rows = part.feature_rows();
                let preds = match config.score_kind {
                    ScoreKind::LogitGap => PredictionMatrix::Logits(target.predict_logits(&rows)),
                    _ => PredictionMatrix::Probabilities(target.predict_proba(&rows)),
                };
                Ok(score_dataset(
                    &preds,
                    part,
                    config.score_kind,
                    tag,
                    "target",
                )?)
            };
            score(&private, Membership::Member)?.save_csv(&outs[0])?;
            score(&public, Membership::NonMember)?.save_csv(&outs[1])?;
            score(&holdout, Membership::NonMember)?.save_csv(&outs[2])?;
            Ok(())
        },
    )
}

/// Random-search the attack model's hyperparameters on public scores.
pub fn cmd_tune(config: &RunConfig, workdir: &Path, force: bool) -> CliResult<StageStatus> {
    let outs = [tuned_hp_path(workdir), trials_path(workdir)];
    let seed = derive_seed(config.seed, "tune");
    run_stage(
        workdir,
        "tune",
        vec![],
        seed,
        &config.stage_digest("tune"),
        &[
            (dataset_path(workdir), "gen"),
            (scores_path(workdir, "public"), "score"),
        ],
        &outs.clone(),
        force,
        || {
            let data = load_dataset(workdir)?;
            let scores =
                ScoreSet::<f64>::load_csv(scores_path(workdir, "public"), config.score_kind, "target")?;
            let rows = join_scores(&data, &scores)?;
            let feats: Vec<&[f64]> = rows.iter().map(|r| r.features).collect();
            let vals: Vec<f64> = rows.iter().map(|r| r.score).collect();
            let objective = match config.method {
                Method::Gaussian => TuneObjective::GaussianNll,
                _ => TuneObjective::PinballLevels(config.report_levels()?),
            };
            let result = qrmia_core::tune_hyperparameters(
                &feats,
                &vals,
                &objective,
                config.tuner.budget,
                config.tuner.folds,
                seed,
            )?;
            write_text(
                &outs[0],
                serde_json::to_string_pretty(&result.best).expect("hp serializes"),
            )?;
            write_text(&outs[1], result.trials_csv())
        },
    )
}

/// Shadow-model ensemble over the full dataset pool.
///
/// The pool is the whole dataset so every example the audit later scores
/// (members and holdout alike) has in/out shadow estimates, mirroring the
/// membership game where candidate examples are known to the attacker.
pub fn cmd_shadow(config: &RunConfig, workdir: &Path, force: bool) -> CliResult<StageStatus> {
    let outs = [
        shadow_masks_path(workdir),
        shadow_scores_path(workdir),
        shadow_manifest_path(workdir),
    ];
    let seed = derive_seed(config.seed, "shadow");
    run_stage(
        workdir,
        "shadow",
        vec![format!("n={}", config.n_shadows)],
        seed,
        &config.stage_digest("shadow"),
        &[(dataset_path(workdir), "gen")],
        &outs.clone(),
        force,
        || {
            let data: Dataset<f64> =
                qrmia_core::load_csv(dataset_path(workdir), &CsvSchema::default())?;
            let hp = config
                .shadow_hp
                .unwrap_or(config.target_hp)
                .with_seed(derive_seed(seed, "shadow-hp"));
            let ensemble = qrmia_core::train_shadow_ensemble(
                &data,
                config.n_shadows,
                &hp,
                config.score_kind,
                seed,
            )?;
            write_text(&outs[0], ensemble.masks_csv())?;
            write_text(&outs[1], ensemble.scores_csv())?;
            let manifest = ShadowManifest {
                seed,
                n_shadows: config.n_shadows,
                score_kind: config.score_kind,
                hp,
            };
            write_text(
                &outs[2],
                serde_json::to_string_pretty(&manifest).expect("shadow manifest serializes"),
            )
        },
    )
}

fn load_shadow_ensemble(workdir: &Path) -> CliResult<qrmia_core::ShadowEnsembleF64> {
    let manifest: ShadowManifest =
        serde_json::from_str(&read_text(&shadow_manifest_path(workdir))?)
            .map_err(|e| CliError::Config(format!("cannot parse shadow_manifest.json: {e}")))?;
    let parse_matrix = |path: &Path| -> CliResult<(Vec<u64>, Vec<Vec<f64>>)> {
        let text = read_text(path)?;
        let mut lines = text.lines();
        let ids: Vec<u64> = lines
            .next()
            .unwrap_or("")
            .split(',')
            .map(|f| {
                f.trim().parse().map_err(|_| CliError::StaleArtifact {
                    path: path.to_path_buf(),
                    detail: format!("bad id `{f}` in header"),
                })
            })
            .collect::<CliResult<_>>()?;
        let rows = lines
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                line.split(',')
                    .map(|f| {
                        f.trim().parse::<f64>().map_err(|_| CliError::StaleArtifact {
                            path: path.to_path_buf(),
                            detail: format!("bad value `{f}`"),
                        })
                    })
                    .collect::<CliResult<Vec<f64>>>()
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok((ids, rows))
    };
    let (ids, mask_rows) = parse_matrix(&shadow_masks_path(workdir))?;
    let (score_ids, scores) = parse_matrix(&shadow_scores_path(workdir))?;
    if ids != score_ids {
        return Err(CliError::StaleArtifact {
            path: shadow_scores_path(workdir),
            detail: "mask and score matrices disagree on example ids".into(),
        });
    }
    let masks = mask_rows
        .into_iter()
        .map(|row| row.into_iter().map(|v| v != 0.0).collect())
        .collect();
    Ok(qrmia_core::ShadowEnsemble {
        example_ids: ids,
        masks,
        scores,
        score_kind: manifest.score_kind,
        trainer_config: manifest.hp,
        seed: manifest.seed,
    })
}

/// Deterministic fit/calibration partition of the public score records.
fn fit_calib_partition(n: usize, fit_fraction: f64, master: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    qrmia_core::seed::shuffle(
        &mut qrmia_core::seed::rng_for(master, "attack-calib"),
        &mut idx,
    );
    let n_fit = ((fit_fraction * n as f64).floor() as usize).clamp(1, n - 1);
    let calib = idx.split_off(n_fit);
    (idx, calib)
}

/// All level grids used by sweeps: dense grid plus configured levels.
fn dense_levels(config: &RunConfig) -> CliResult<Vec<QuantileLevel>> {
    let mut levels: Vec<f64> = (1..=config.roc_grid)
        .map(|i| i as f64 / (config.roc_grid + 1) as f64)
        .collect();
    levels.extend(&config.levels);
    levels.push(config.level);
    levels.sort_by(|a, b| a.partial_cmp(b).expect("levels are finite"));
    levels.dedup();
    levels
        .into_iter()
        .map(|l| QuantileLevel::new(l).map_err(CliError::from))
        .collect()
}

fn gbdt_levels(config: &RunConfig) -> CliResult<Vec<QuantileLevel>> {
    let mut levels = config.gbdt_levels.clone();
    levels.extend(&config.levels);
    levels.push(config.level);
    levels.sort_by(|a, b| a.partial_cmp(b).expect("levels are finite"));
    levels.dedup();
    levels
        .into_iter()
        .map(|l| QuantileLevel::new(l).map_err(CliError::from))
        .collect()
}

struct PublicRows<'a> {
    fit_features: Vec<&'a [f64]>,
    fit_scores: Vec<f64>,
    calib: Vec<ScoredRow<'a, f64>>,
}

fn split_public<'a>(
    public: &'a Dataset<f64>,
    scores: &ScoreSet<f64>,
    config: &RunConfig,
) -> CliResult<PublicRows<'a>> {
    let all = join_scores(public, scores)?;
    let (fit_idx, calib_idx) = fit_calib_partition(all.len(), config.fit_fraction, config.seed);
    let fit_features: Vec<&[f64]> = fit_idx.iter().map(|&i| all[i].features).collect();
    let fit_scores: Vec<f64> = fit_idx.iter().map(|&i| all[i].score).collect();
    let calib: Vec<ScoredRow<'a, f64>> = calib_idx.iter().map(|&i| all[i]).collect();
    Ok(PublicRows {
        fit_features,
        fit_scores,
        calib,
    })
}

/// Build and persist the configured attack.
pub fn cmd_train_attack(config: &RunConfig, workdir: &Path, force: bool) -> CliResult<StageStatus> {
    let method = config.method;
    let out = attack_path(workdir, method);
    let seed = derive_seed(config.seed, "train-attack");
    let mut inputs = vec![
        (dataset_path(workdir), "gen"),
        (scores_path(workdir, "public"), "score"),
    ];
    if method == Method::Lira {
        inputs.push((shadow_masks_path(workdir), "shadow"));
        inputs.push((shadow_scores_path(workdir), "shadow"));
        inputs.push((shadow_manifest_path(workdir), "shadow"));
    }
    run_stage(
        workdir,
        "train-attack",
        vec![method.as_str().to_string()],
        seed,
        &config.stage_digest("train-attack"),
        &inputs,
        &[out.clone()],
        force,
        || {
            let data = load_dataset(workdir)?;
            let public_scores =
                ScoreSet::<f64>::load_csv(scores_path(workdir, "public"), config.score_kind, "target")?;
            let level = QuantileLevel::new(config.level)?;
            let attack = match method {
                Method::Marginal => {
                    let model = QuantileModel::fit_constant(
                        &public_scores.scores(),
                        &dense_levels(config)?,
                    )?;
                    quantile_attack(Arc::new(model), level)?
                }
                Method::Gaussian | Method::Gbdt => {
                    let rows = split_public(&data, &public_scores, config)?;
                    let hp = attack_hp(config, workdir, seed)?;
                    let model = if method == Method::Gaussian {
                        QuantileModel::GaussianHead(qrmia_core::fit_gaussian_regressor(
                            &rows.fit_features,
                            &rows.fit_scores,
                            &hp,
                        )?)
                    } else {
                        qrmia_core::fit_gbdt_quantile_multi(
                            &rows.fit_features,
                            &rows.fit_scores,
                            &gbdt_levels(config)?,
                            &hp,
                        )?
                    };
                    let attack = quantile_attack(Arc::new(model), level)?;
                    let shifted = conformal_shift(&attack, &rows.calib, level)?;
                    let groups = config.group_specs();
                    if groups.is_empty() {
                        shifted
                    } else {
                        let outcome = group_shift_correct(&shifted, &groups, &rows.calib)?;
                        if !outcome.converged {
                            println!(
                                "[train-attack] group correction did not converge; using best iterate"
                            );
                        }
                        outcome.attack
                    }
                }
                Method::Lira => {
                    let ensemble = load_shadow_ensemble(workdir)?;
                    let gaussians = lira_fit(&ensemble, config.variance_mode)?;
                    let loglr = gaussians.log_lr_scores(&public_scores)?;
                    let tau = qrmia_core::fit_constant_quantile(&loglr.scores(), level)?;
                    lira_attack(tau)
                }
            };
            let file = AttackFile {
                version: AttackFile::VERSION,
                method,
                level: config.level,
                attack,
            };
            write_text(
                &out,
                serde_json::to_string_pretty(&file).expect("attack serializes"),
            )
        },
    )
}

/// The attack hyperparameters: tuned ones when the tune stage ran,
/// otherwise the config defaults; per-method derived seed either way.
fn attack_hp(config: &RunConfig, workdir: &Path, seed: u64) -> CliResult<GbdtHyperParams> {
    let tuned = tuned_hp_path(workdir);
    let hp = if tuned.exists() {
        serde_json::from_str::<GbdtHyperParams>(&read_text(&tuned)?)
            .map_err(|e| CliError::Config(format!("cannot parse tuned_hp.json: {e}")))?
    } else {
        config.attack_hp
    };
    Ok(hp.with_seed(derive_seed(seed, "attack-fit")))
}

/// Evaluate the persisted attack on the held-out split and emit the report.
pub fn cmd_evaluate(config: &RunConfig, workdir: &Path, force: bool) -> CliResult<StageStatus> {
    let method = config.method;
    let report_file = report_path(workdir, method);
    let stem = format!("report_{}", method.as_str());
    let mut outputs = vec![
        report_file.clone(),
        workdir.join(format!("{stem}_roc.csv")),
        workdir.join(format!("{stem}_pinball.csv")),
    ];
    if !config.groups.is_empty() && method != Method::Lira {
        outputs.push(workdir.join(format!("{stem}_groups.csv")));
    }
    let mut inputs = vec![
        (dataset_path(workdir), "gen"),
        (scores_path(workdir, "private"), "score"),
        (scores_path(workdir, "public"), "score"),
        (scores_path(workdir, "holdout"), "score"),
        (attack_path(workdir, method), "train-attack"),
    ];
    if method == Method::Lira {
        inputs.push((shadow_masks_path(workdir), "shadow"));
        inputs.push((shadow_scores_path(workdir), "shadow"));
        inputs.push((shadow_manifest_path(workdir), "shadow"));
    }
    run_stage(
        workdir,
        "evaluate",
        vec![method.as_str().to_string()],
        derive_seed(config.seed, "evaluate"),
        &config.stage_digest("evaluate"),
        &inputs,
        &outputs,
        force,
        || {
            let report = build_report(config, workdir)?;
            report.emit(workdir, &stem)?;
            Ok(())
        },
    )
}

/// Assemble the full report for the configured method. All metrics are
/// computed on the held-out split; public data only fits and calibrates.
pub fn build_report(config: &RunConfig, workdir: &Path) -> CliResult<AttackReport> {
    let method = config.method;
    let data = load_dataset(workdir)?;
    let load_scores = |part: &str| -> CliResult<ScoreSet<f64>> {
        Ok(ScoreSet::load_csv(
            scores_path(workdir, part),
            config.score_kind,
            "target",
        )?)
    };
    let private_scores = load_scores("private")?;
    let public_scores = load_scores("public")?;
    let holdout_scores = load_scores("holdout")?;

    let attack_file: AttackFile = serde_json::from_str(&read_text(&attack_path(workdir, method))?)
        .map_err(|e| CliError::Config(format!("cannot parse attack file: {e}")))?;
    let mut warnings = Vec::new();

    let members = join_scores(&data, &private_scores)?;
    let nonmembers = join_scores(&data, &holdout_scores)?;
    let pub_rows = split_public(&data, &public_scores, config)?;

    // ROC sweep and the pinball-comparable threshold model, per method.
    let (curve, pinball_model): (RocCurve, Arc<QuantileModel<f64>>) = match method {
        Method::Marginal => {
            let model = attack_file
                .attack
                .model()
                .ok_or_else(|| CliError::Config("marginal attack file lacks a model".into()))?
                .clone();
            let family: Vec<(f64, Attack<f64>)> = dense_levels(config)?
                .into_iter()
                .map(|lv| Ok((lv.value(), quantile_attack(model.clone(), lv)?)))
                .collect::<CliResult<_>>()?;
            (roc_sweep(&family, &members, &nonmembers)?, model)
        }
        Method::Gaussian | Method::Gbdt => {
            let model = attack_file
                .attack
                .model()
                .ok_or_else(|| CliError::Config("attack file lacks a model".into()))?
                .clone();
            let sweep_levels = match method {
                Method::Gaussian => dense_levels(config)?,
                _ => gbdt_levels(config)?,
            };
            let family: Vec<(f64, Attack<f64>)> = sweep_levels
                .into_iter()
                .map(|lv| {
                    let attack = quantile_attack(model.clone(), lv)?;
                    Ok((lv.value(), conformal_shift(&attack, &pub_rows.calib, lv)?))
                })
                .collect::<CliResult<_>>()?;
            (roc_sweep(&family, &members, &nonmembers)?, model)
        }
        Method::Lira => {
            let ensemble = load_shadow_ensemble(workdir)?;
            let gaussians: LiraGaussians<f64> = lira_fit(&ensemble, config.variance_mode)?;
            let lr_members = join_scores(&data, &gaussians.log_lr_scores(&private_scores)?)?;
            let lr_nonmembers =
                join_scores(&data, &gaussians.log_lr_scores(&holdout_scores)?)?;
            let mut grid: Vec<f64> = lr_nonmembers.iter().map(|r| r.score).collect();
            grid.sort_by(|a, b| a.partial_cmp(b).expect("finite log-LR"));
            let family: Vec<(f64, Attack<f64>)> = (1..=config.roc_grid)
                .map(|i| {
                    let t = grid[(i * grid.len() - 1) / (config.roc_grid + 1)];
                    (t, lira_attack(t))
                })
                .collect();
            let curve = roc_sweep(&family, &lr_members, &lr_nonmembers)?;
            warnings.push("group audit is not defined for log-LR threshold attacks".into());
            (curve, Arc::new(lira_quantile_model(&gaussians)))
        }
    };

    let mut precision_at = qrmia_core::PrecisionAtTable::default();
    for &target in &config.fpr_targets {
        precision_at.insert(target, &precision_at_fpr(&curve, target));
    }

    // Pinball diagnostics measure each method's thresholds as deployed:
    // the model read at the level plus its conformal shift from the
    // calibration rows. Every method goes through the identical sample,
    // levels, and recalibration, so the cross-method comparison reflects
    // conditional quality rather than raw calibration offsets.
    let report_levels = config.report_levels()?;
    let mut pinball = std::collections::BTreeMap::new();
    for &lv in &report_levels {
        let attack = quantile_attack(pinball_model.clone(), lv)?;
        let attack = conformal_shift(&attack, &pub_rows.calib, lv)?;
        let mut sum = 0.0f64;
        for r in &nonmembers {
            let thr = attack.effective_threshold(qrmia_core::FeatureRow::new(r.id, r.features))?;
            sum += qrmia_core::pinball_loss(thr, r.score, lv);
        }
        pinball.insert(
            qrmia_core::level_key(lv.value()),
            sum / nonmembers.len() as f64,
        );
    }

    let group_audit = if config.groups.is_empty() || method == Method::Lira {
        Vec::new()
    } else {
        qrmia_core::group_fpr_audit(&attack_file.attack, &config.group_specs(), &nonmembers)?
    };

    let mut report = AttackReport {
        method: method.as_str().to_string(),
        seed: config.seed,
        config_hash: config.hash(),
        levels: config.levels.clone(),
        roc: Vec::new(),
        auc: 0.0,
        precision_at,
        pinball,
        group_audit,
        warnings,
    };
    report.set_roc(&curve);
    Ok(report)
}

/// Re-expose the decision rule from an attack file (used by external
/// score-file audits and tests).
pub fn load_attack(workdir: &Path, method: Method) -> CliResult<AttackFile> {
    serde_json::from_str(&read_text(&attack_path(workdir, method))?)
        .map_err(|e| CliError::Config(format!("cannot parse attack file: {e}")))
}
