//! Additive-shift recalibrations: a global conformal shift restoring the
//! marginal coverage rate on fresh public data, and an iterative per-group
//! correction restoring coverage conditionally on each group.

use serde::{Deserialize, Serialize};

use crate::data::{evaluate_group, GroupSpec};
use crate::error::{Error, Result};
use crate::float::Float;
use crate::learners::{fit_constant_quantile, FeatureRow, QuantileLevel};
use crate::scoring::{Membership, ScoredRow};

use super::decision::Attack;

fn check_fresh_nonmembers<T: Float>(rows: &[ScoredRow<'_, T>], what: &str) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("{what} needs calibration data")));
    }
    if rows.iter().any(|r| r.membership != Membership::NonMember) {
        return Err(Error::InvalidInput(format!(
            "{what} calibration data must be nonmember scores"
        )));
    }
    Ok(())
}

/// Residuals `s_i - threshold(x_i)` of the attack on calibration rows.
fn residuals<T: Float>(attack: &Attack<T>, rows: &[ScoredRow<'_, T>]) -> Result<Vec<T>> {
    rows.iter()
        .map(|r| {
            let thr = attack.effective_threshold(FeatureRow::new(r.id, r.features))?;
            Ok(r.score - thr)
        })
        .collect()
}

/// Set the attack's global shift so its empirical coverage on fresh public
/// scores matches the rank rule at the given level.
///
/// The calibration set must be disjoint from whatever data fit the attack;
/// under exchangeability the fresh-draw FPR then lies within `1/(n+1)` of
/// `alpha = 1 - level` in expectation.
pub fn conformal_shift<T: Float>(
    attack: &Attack<T>,
    fresh_public: &[ScoredRow<'_, T>],
    level: QuantileLevel,
) -> Result<Attack<T>> {
    check_fresh_nonmembers(fresh_public, "conformal shift")?;
    let res = residuals(attack, fresh_public)?;
    let delta = fit_constant_quantile(&res, level)?;
    let mut shifted = attack.clone();
    shifted.shift += delta;
    Ok(shifted)
}

/// One round of the group correction log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupShiftRound {
    pub round: usize,
    pub group: String,
    pub eta_increment: f64,
    /// Worst per-group |FPR - alpha| after applying this round's increment.
    pub worst_abs_deviation: f64,
}

/// Result of the iterative group correction.
#[derive(Clone, Debug)]
pub struct GroupShiftOutcome<T: Float> {
    pub attack: Attack<T>,
    pub rounds: Vec<GroupShiftRound>,
    /// False when the round budget ran out before every group fit inside
    /// its tolerance; the attack is then the best iterate seen.
    pub converged: bool,
}

/// Iteratively restore per-group coverage on public data.
///
/// Each round picks the group with the largest |empirical group FPR - alpha|
/// and applies the additive correction that restores that group's rank-rule
/// coverage, until every group is within `2/(n_g+1)` or the round budget
/// `50 * |G|` is exhausted. Groups may overlap; total pinball loss on the
/// public sample is non-increasing round over round because each increment
/// re-centers exactly the group's own residuals.
pub fn group_shift_correct<T: Float>(
    attack: &Attack<T>,
    groups: &[GroupSpec<T>],
    public: &[ScoredRow<'_, T>],
) -> Result<GroupShiftOutcome<T>> {
    check_fresh_nonmembers(public, "group correction")?;
    if groups.is_empty() {
        return Err(Error::InvalidInput("no groups to correct".into()));
    }
    let level = attack.level().ok_or_else(|| {
        Error::InvalidInput("group correction needs a quantile-level attack".into())
    })?;
    let alpha = level.alpha();

    // Precompute membership of every row in every group.
    let membership: Vec<Vec<usize>> = groups
        .iter()
        .map(|g| {
            let mut rows = Vec::new();
            for (i, r) in public.iter().enumerate() {
                if evaluate_group(g, r.features)? == 1 {
                    rows.push(i);
                }
            }
            if rows.is_empty() {
                return Err(Error::InvalidGroup(format!(
                    "group `{}` has no members in the calibration data",
                    g.name
                )));
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let mut current = attack.clone();
    let max_rounds = 50 * groups.len();
    let mut rounds = Vec::new();
    let mut best: Option<(f64, Attack<T>)> = None;
    let mut converged = false;

    for round in 0..=max_rounds {
        let res = residuals(&current, public)?;
        // Per-group deviation |fpr_g - alpha|; reject on s >= threshold,
        // i.e. residual >= 0.
        let deviations: Vec<f64> = membership
            .iter()
            .map(|rows| {
                let rejected = rows.iter().filter(|&&i| res[i] >= T::zero()).count();
                (rejected as f64 / rows.len() as f64 - alpha).abs()
            })
            .collect();
        let (worst_idx, worst_dev) = deviations
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| {
                if d > acc.1 {
                    (i, d)
                } else {
                    acc
                }
            });
        if best.as_ref().is_none_or(|(b, _)| worst_dev < *b) {
            best = Some((worst_dev, current.clone()));
        }
        let all_within = deviations
            .iter()
            .enumerate()
            .all(|(i, &d)| d <= 2.0 / (membership[i].len() as f64 + 1.0));
        if all_within {
            converged = true;
            break;
        }
        if round == max_rounds {
            break;
        }

        // Rank-rule re-centering of the worst group's residuals.
        let group_res: Vec<T> = membership[worst_idx].iter().map(|&i| res[i]).collect();
        let eta = fit_constant_quantile(&group_res, level)?;
        let name = &groups[worst_idx].name;
        match current
            .group_shifts
            .iter_mut()
            .find(|(g, _)| g.name == *name)
        {
            Some((_, existing)) => *existing += eta,
            None => current
                .group_shifts
                .push((groups[worst_idx].clone(), eta)),
        }
        rounds.push(GroupShiftRound {
            round,
            group: name.clone(),
            eta_increment: eta.as_f64(),
            worst_abs_deviation: worst_dev,
        });
    }

    let attack = if converged {
        current
    } else {
        best.expect("at least one iterate").1
    };
    Ok(GroupShiftOutcome {
        attack,
        rounds,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::decision::marginal_attack;
    use crate::data::CmpOp;
    use crate::learners::pinball_loss;
    use crate::scoring::{ScoreKind, ScoreRecord, ScoreSet};
    use crate::seed::{rng_for, uniform_open01};
    use crate::stats::sample_std_normal;

    fn level(l: f64) -> QuantileLevel {
        QuantileLevel::new(l).unwrap()
    }

    /// Synthetic rows whose score location depends on feature 0.
    fn grouped_rows(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = rng_for(seed, "shift-bench");
        let mut xs = Vec::with_capacity(n);
        let mut ss = Vec::with_capacity(n);
        for _ in 0..n {
            let x0 = uniform_open01(&mut rng);
            let bump = if x0 > 0.5 { 2.0 } else { 0.0 };
            ss.push(bump + sample_std_normal(&mut rng));
            xs.push(vec![x0, sample_std_normal(&mut rng)]);
        }
        (xs, ss)
    }

    fn rows_of<'a>(
        xs: &'a [Vec<f64>],
        ss: &[f64],
    ) -> Vec<ScoredRow<'a, f64>> {
        xs.iter()
            .zip(ss)
            .enumerate()
            .map(|(i, (x, &s))| ScoredRow {
                id: i as u64,
                features: x.as_slice(),
                score: s,
                membership: Membership::NonMember,
            })
            .collect()
    }

    fn fpr_on(attack: &Attack<f64>, rows: &[ScoredRow<'_, f64>]) -> f64 {
        let rejected = rows
            .iter()
            .filter(|r| {
                attack
                    .decide(FeatureRow::new(r.id, r.features), r.score)
                    .unwrap()
                    == crate::attacks::Verdict::RejectNull
            })
            .count();
        rejected as f64 / rows.len() as f64
    }

    #[test]
    fn calibrated_attack_barely_moves() {
        let (xs, ss) = grouped_rows(1, 2000);
        let rows = rows_of(&xs, &ss);
        let set = ScoreSet::new(
            rows.iter()
                .map(|r| ScoreRecord {
                    example_id: r.id,
                    score: r.score,
                    membership: Membership::NonMember,
                })
                .collect(),
            ScoreKind::LogitGap,
            "test",
        )
        .unwrap();
        let attack = marginal_attack(&set, level(0.9)).unwrap();
        // Re-calibrating on its own fitting sample: the shift is within one
        // inter-residual gap of zero.
        let shifted = conformal_shift(&attack, &rows, level(0.9)).unwrap();
        let mut res: Vec<f64> = rows
            .iter()
            .map(|r| r.score - attack.effective_threshold(FeatureRow::new(r.id, r.features)).unwrap())
            .collect();
        res.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let gaps = res.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
        assert!(shifted.shift.abs() <= gaps + 1e-12, "shift {}", shifted.shift);
    }

    #[test]
    fn uniform_offset_is_recovered() {
        let (xs, ss) = grouped_rows(2, 4000);
        let rows = rows_of(&xs, &ss);
        let set = ScoreSet::new(
            rows.iter()
                .map(|r| ScoreRecord {
                    example_id: r.id,
                    score: r.score,
                    membership: Membership::NonMember,
                })
                .collect(),
            ScoreKind::LogitGap,
            "test",
        )
        .unwrap();
        let calibrated = conformal_shift(&marginal_attack(&set, level(0.95)).unwrap(), &rows, level(0.95)).unwrap();
        let mut too_high = calibrated.clone();
        too_high.shift += 5.0;
        let fixed = conformal_shift(&too_high, &rows, level(0.95)).unwrap();
        let correction = fixed.shift - too_high.shift;
        assert!(
            (correction + 5.0).abs() < 0.2,
            "expected roughly -5, got {correction}"
        );
    }

    #[test]
    fn shift_does_not_increase_calibration_pinball() {
        let (xs, ss) = grouped_rows(3, 3000);
        let rows = rows_of(&xs, &ss);
        let lv = level(0.9);
        // Deliberately miscalibrated fixed-threshold attack.
        let attack = crate::attacks::lira_attack(4.0f64);
        let shifted = conformal_shift(&attack, &rows, lv).unwrap();
        let pinball_of = |a: &Attack<f64>| {
            rows.iter()
                .map(|r| {
                    let thr = a
                        .effective_threshold(FeatureRow::new(r.id, r.features))
                        .unwrap();
                    pinball_loss(thr, r.score, lv)
                })
                .sum::<f64>()
                / rows.len() as f64
        };
        assert!(pinball_of(&shifted) <= pinball_of(&attack) + 1e-12);
    }

    #[test]
    fn disjoint_groups_converge_in_one_pass() {
        let (xs, ss) = grouped_rows(4, 4000);
        let rows = rows_of(&xs, &ss);
        let set = ScoreSet::new(
            rows.iter()
                .map(|r| ScoreRecord {
                    example_id: r.id,
                    score: r.score,
                    membership: Membership::NonMember,
                })
                .collect(),
            ScoreKind::LogitGap,
            "test",
        )
        .unwrap();
        let lv = level(0.95);
        let attack = marginal_attack(&set, lv).unwrap();
        let hi = GroupSpec::threshold("hi", 0, CmpOp::Gt, 0.5);
        let lo = hi.complement("lo").unwrap();
        let groups = vec![hi.clone(), lo.clone()];
        let outcome = group_shift_correct(&attack, &groups, &rows).unwrap();
        assert!(outcome.converged);
        for g in &groups {
            let g_rows: Vec<_> = rows
                .iter()
                .filter(|r| g.contains(r.features).unwrap())
                .cloned()
                .collect();
            let fpr = fpr_on(&outcome.attack, &g_rows);
            let tol = 1.0 / (g_rows.len() as f64 + 1.0) + 1e-12;
            assert!(
                (fpr - lv.alpha()).abs() <= tol + 0.002,
                "group {}: fpr {fpr}",
                g.name
            );
        }
    }

    #[test]
    fn trivial_group_reduces_to_conformal_shift() {
        let (xs, ss) = grouped_rows(5, 2000);
        let rows = rows_of(&xs, &ss);
        let lv = level(0.9);
        let set = ScoreSet::new(
            rows.iter()
                .map(|r| ScoreRecord {
                    example_id: r.id,
                    score: r.score,
                    membership: Membership::NonMember,
                })
                .collect(),
            ScoreKind::LogitGap,
            "test",
        )
        .unwrap();
        let mut attack = marginal_attack(&set, lv).unwrap();
        attack.shift = 3.0; // miscalibrate
        let all = vec![GroupSpec::always("all")];
        let corrected = group_shift_correct(&attack, &all, &rows).unwrap();
        let conformal = conformal_shift(&attack, &rows, lv).unwrap();
        // The always-group correction applies the same rank-rule increment.
        let total_group: f64 = corrected
            .attack
            .group_shifts
            .iter()
            .map(|(_, eta)| eta)
            .sum();
        let expected = conformal.shift - attack.shift;
        assert!(
            (total_group - expected).abs() < 1e-12,
            "group {total_group} vs conformal {expected}"
        );
        for r in rows.iter().take(50) {
            let x = FeatureRow::new(r.id, r.features);
            assert_eq!(
                corrected.attack.decide(x, r.score).unwrap(),
                conformal.decide(x, r.score).unwrap()
            );
        }
    }

    #[test]
    fn overlapping_groups_keep_total_pinball_non_increasing() {
        let (xs, ss) = grouped_rows(6, 3000);
        let rows = rows_of(&xs, &ss);
        let lv = level(0.9);
        let set = ScoreSet::new(
            rows.iter()
                .map(|r| ScoreRecord {
                    example_id: r.id,
                    score: r.score,
                    membership: Membership::NonMember,
                })
                .collect(),
            ScoreKind::LogitGap,
            "test",
        )
        .unwrap();
        let attack = marginal_attack(&set, lv).unwrap();
        // Overlapping: "hi" (x0 > 0.5), "wide" (x0 > 0.25), and all rows.
        let groups = vec![
            GroupSpec::threshold("hi", 0, CmpOp::Gt, 0.5),
            GroupSpec::threshold("wide", 0, CmpOp::Gt, 0.25),
            GroupSpec::always("all"),
        ];
        let pinball_of = |a: &Attack<f64>| {
            rows.iter()
                .map(|r| {
                    let thr = a
                        .effective_threshold(FeatureRow::new(r.id, r.features))
                        .unwrap();
                    pinball_loss(thr, r.score, lv)
                })
                .sum::<f64>()
                / rows.len() as f64
        };
        // Replay the correction round by round through the rounds log.
        let outcome = group_shift_correct(&attack, &groups, &rows).unwrap();
        let mut replay = attack.clone();
        let mut last = pinball_of(&replay);
        for round in &outcome.rounds {
            let group = groups.iter().find(|g| g.name == round.group).unwrap();
            match replay
                .group_shifts
                .iter_mut()
                .find(|(g, _)| g.name == round.group)
            {
                Some((_, eta)) => *eta += round.eta_increment,
                None => replay
                    .group_shifts
                    .push((group.clone(), round.eta_increment)),
            }
            let now = pinball_of(&replay);
            assert!(
                now <= last + 1e-10,
                "round {}: pinball {last} -> {now}",
                round.round
            );
            last = now;
        }
    }
}
