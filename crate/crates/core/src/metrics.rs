//! Outcome metrics and rule-vs-rule comparison reports.
//!
//! Ratio metrics use plain f64; they summarize outcomes and never feed back
//! into selection, so exact arithmetic is not needed here.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ballots::{utilities, UtilityProfile};
use crate::model::{Amount, Election};
use crate::rules::{run_rule_with_profile, Outcome, RuleConfig, RuleError, RuleKind};

/// Fraction of ballots with at least one positive-utility project among the
/// winners. Zero-ballot elections score 0.
pub fn voter_satisfaction(election: &Election, profile: &UtilityProfile, outcome: &Outcome) -> f64 {
    let n = election.ballots.len();
    if n == 0 {
        return 0.0;
    }
    let satisfied = (0..n)
        .filter(|&v| outcome.winners.iter().any(|w| profile.utility(v, w) > 0))
        .count();
    satisfied as f64 / n as f64
}

/// Mean over ballots of the utility mass landing on winners divided by the
/// ballot's total mass. Ballots with zero total mass are left out of the mean.
pub fn point_representation(
    election: &Election,
    profile: &UtilityProfile,
    outcome: &Outcome,
) -> f64 {
    let mut sum = 0.0;
    let mut counted = 0usize;
    for v in 0..election.ballots.len() {
        let total: u64 = election
            .projects
            .iter()
            .map(|p| profile.utility(v, &p.id))
            .sum();
        if total == 0 {
            continue;
        }
        let on_winners: u64 = outcome
            .winners
            .iter()
            .map(|w| profile.utility(v, w))
            .sum();
        sum += on_winners as f64 / total as f64;
        counted += 1;
    }
    if counted == 0 {
        0.0
    } else {
        sum / counted as f64
    }
}

/// Winner counts per district plus summary statistics; `Unavailable` when no
/// project carries a district label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum DistrictCoverage {
    Unavailable,
    Available {
        /// Winners per district, including zero-winner districts that have at
        /// least one candidate project.
        counts: BTreeMap<String, usize>,
        /// Districts with a winner over districts with a candidate.
        covered_fraction: f64,
        /// Shannon entropy of the count distribution, normalized by the log
        /// of the candidate-district count: 0 when one district takes all
        /// winners, 1 when they spread uniformly.
        entropy: f64,
    },
}

pub fn district_coverage(election: &Election, outcome: &Outcome) -> DistrictCoverage {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for p in &election.projects {
        if let Some(d) = &p.district {
            counts.entry(d.clone()).or_insert(0);
        }
    }
    if counts.is_empty() {
        return DistrictCoverage::Unavailable;
    }
    for w in &outcome.winners {
        if let Some(d) = election.project(w).and_then(|p| p.district.as_ref()) {
            *counts.get_mut(d).expect("candidate district present") += 1;
        }
    }
    let candidate_districts = counts.len();
    let covered = counts.values().filter(|c| **c > 0).count();
    let total: usize = counts.values().sum();
    let entropy = if total == 0 || candidate_districts < 2 {
        0.0
    } else {
        let h: f64 = counts
            .values()
            .filter(|c| **c > 0)
            .map(|&c| {
                let p = c as f64 / total as f64;
                -p * p.ln()
            })
            .sum();
        h / (candidate_districts as f64).ln()
    };
    DistrictCoverage::Available {
        counts,
        covered_fraction: covered as f64 / candidate_districts as f64,
        entropy,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    /// Winners carrying the label over all winners.
    pub count_share: f64,
    /// Spend on winners carrying the label over total winner spend.
    pub cost_share: f64,
}

/// Shares per impact-area label appearing on any project. A multi-label
/// winner counts fully toward each of its labels, so shares can sum above 1.
pub fn category_shares(election: &Election, outcome: &Outcome) -> BTreeMap<String, CategoryShare> {
    let mut shares: BTreeMap<String, (usize, Amount)> = BTreeMap::new();
    for p in &election.projects {
        for c in &p.categories {
            shares.entry(c.clone()).or_insert((0, 0));
        }
    }
    if shares.is_empty() {
        return BTreeMap::new();
    }
    let mut spend: Amount = 0;
    for w in &outcome.winners {
        let Some(p) = election.project(w) else { continue };
        spend += p.cost;
        for c in &p.categories {
            let entry = shares.get_mut(c).expect("label registered above");
            entry.0 += 1;
            entry.1 += p.cost;
        }
    }
    let winners = outcome.winners.len();
    shares
        .into_iter()
        .map(|(label, (count, cost))| {
            let share = CategoryShare {
                count_share: if winners == 0 {
                    0.0
                } else {
                    count as f64 / winners as f64
                },
                cost_share: if spend == 0 {
                    0.0
                } else {
                    cost as f64 / spend as f64
                },
            };
            (label, share)
        })
        .collect()
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("outcome has no winners")]
    EmptyOutcome,
}

/// Mean over winners of cost divided by budget.
pub fn mean_winner_cost_share(election: &Election, outcome: &Outcome) -> Result<f64, MetricsError> {
    if outcome.winners.is_empty() {
        return Err(MetricsError::EmptyOutcome);
    }
    let budget = election.budget() as f64;
    let sum: f64 = outcome
        .winners
        .iter()
        .filter_map(|w| election.project(w))
        .map(|p| p.cost as f64 / budget)
        .sum();
    Ok(sum / outcome.winners.len() as f64)
}

/// Every metric for one outcome, as reported per rule in comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleMetrics {
    pub winner_count: usize,
    pub spend: Amount,
    pub budget_utilization: f64,
    pub voter_satisfaction: f64,
    pub point_representation: f64,
    pub district_coverage: DistrictCoverage,
    pub category_shares: BTreeMap<String, CategoryShare>,
    /// Absent for empty outcomes.
    pub mean_winner_cost_share: Option<f64>,
}

pub fn rule_metrics(
    election: &Election,
    profile: &UtilityProfile,
    outcome: &Outcome,
) -> RuleMetrics {
    RuleMetrics {
        winner_count: outcome.winners.len(),
        spend: outcome.spend,
        budget_utilization: outcome.spend as f64 / election.budget() as f64,
        voter_satisfaction: voter_satisfaction(election, profile, outcome),
        point_representation: point_representation(election, profile, outcome),
        district_coverage: district_coverage(election, outcome),
        category_shares: category_shares(election, outcome),
        mean_winner_cost_share: mean_winner_cost_share(election, outcome).ok(),
    }
}

/// One rule's results inside a comparison; `error` is set (and `metrics`
/// empty) when the rule could not run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleReport {
    pub rule: String,
    pub winners: Vec<String>,
    pub metrics: Option<RuleMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseComparison {
    pub rule_a: String,
    pub rule_b: String,
    /// Jaccard overlap of the winner sets; two empty sets count as 1.
    pub winner_overlap_jaccard: f64,
    /// Winner count of b over a; absent when a selected nothing.
    pub winner_count_ratio: Option<f64>,
    pub satisfaction_delta: f64,
    /// Point-representation change b − a, in absolute terms.
    pub representation_delta_abs: f64,
    /// Point-representation change relative to a; absent when a scored 0.
    pub representation_delta_rel: Option<f64>,
    pub mean_cost_share_delta: Option<f64>,
    /// Winner-count change per district (b − a).
    pub district_deltas: BTreeMap<String, i64>,
    /// Districts where b placed strictly more winners than a.
    pub districts_improved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rules: Vec<RuleReport>,
    pub pairwise: Vec<PairwiseComparison>,
}

pub fn jaccard(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let intersection = a.intersection(b).count();
    let union = a.union(b).count();
    intersection as f64 / union as f64
}

/// Runs every rule on the election and fills per-rule metrics plus pairwise
/// comparisons for each index pair. A failing rule is annotated in its row
/// and skipped in the pairwise section. Deterministic given the election.
pub fn compare_rules(
    election: &Election,
    rules: &[RuleKind],
    cfg: &RuleConfig,
) -> Result<ComparisonReport, RuleError> {
    let profile = utilities(election)?;
    let runs: Vec<(String, Result<Outcome, RuleError>)> = rules
        .iter()
        .map(|&kind| {
            (
                kind.as_str().to_string(),
                run_rule_with_profile(kind, election, &profile, cfg),
            )
        })
        .collect();

    let reports: Vec<RuleReport> = runs
        .iter()
        .map(|(name, run)| match run {
            Ok(outcome) => RuleReport {
                rule: name.clone(),
                winners: outcome.winners.clone(),
                metrics: Some(rule_metrics(election, &profile, outcome)),
                error: None,
            },
            Err(e) => RuleReport {
                rule: name.clone(),
                winners: Vec::new(),
                metrics: None,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let mut pairwise = Vec::new();
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let (Ok(a), Ok(b)) = (&runs[i].1, &runs[j].1) else {
                continue;
            };
            let ma = reports[i].metrics.as_ref().expect("metrics for ok rule");
            let mb = reports[j].metrics.as_ref().expect("metrics for ok rule");

            let district_deltas = district_delta_map(election, a, b);
            let districts_improved = district_deltas.values().filter(|d| **d > 0).count();
            pairwise.push(PairwiseComparison {
                rule_a: runs[i].0.clone(),
                rule_b: runs[j].0.clone(),
                winner_overlap_jaccard: jaccard(&a.winner_set(), &b.winner_set()),
                winner_count_ratio: (ma.winner_count > 0)
                    .then(|| mb.winner_count as f64 / ma.winner_count as f64),
                satisfaction_delta: mb.voter_satisfaction - ma.voter_satisfaction,
                representation_delta_abs: mb.point_representation - ma.point_representation,
                representation_delta_rel: (ma.point_representation > 0.0).then(|| {
                    (mb.point_representation - ma.point_representation) / ma.point_representation
                }),
                mean_cost_share_delta: match (ma.mean_winner_cost_share, mb.mean_winner_cost_share)
                {
                    (Some(a), Some(b)) => Some(b - a),
                    _ => None,
                },
                district_deltas,
                districts_improved,
            });
        }
    }

    Ok(ComparisonReport {
        rules: reports,
        pairwise,
    })
}

fn district_delta_map(election: &Election, a: &Outcome, b: &Outcome) -> BTreeMap<String, i64> {
    let count_per_district = |o: &Outcome| -> BTreeMap<&str, i64> {
        let mut m = BTreeMap::new();
        for w in &o.winners {
            if let Some(d) = election.project(w).and_then(|p| p.district.as_deref()) {
                *m.entry(d).or_insert(0) += 1;
            }
        }
        m
    };
    let ca = count_per_district(a);
    let cb = count_per_district(b);
    let mut deltas = BTreeMap::new();
    for p in &election.projects {
        if let Some(d) = &p.district {
            let delta = cb.get(d.as_str()).copied().unwrap_or(0)
                - ca.get(d.as_str()).copied().unwrap_or(0);
            deltas.insert(d.clone(), delta);
        }
    }
    deltas
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ballots::{Ballot, BallotRules};
    use crate::model::{ElectionMeta, Project, VoteType};
    use crate::testutil::{approval_election, e1};

    fn outcome_of(winners: &[&str], election: &Election) -> Outcome {
        let spend = winners
            .iter()
            .map(|w| election.project(w).unwrap().cost)
            .sum();
        Outcome {
            rule: "test".to_string(),
            winners: winners.iter().map(|s| s.to_string()).collect(),
            spend,
            audit: Vec::new(),
            endowment_used: None,
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn satisfaction_counts_supported_winners() {
        let e = e1();
        let profile = utilities(&e).unwrap();
        assert_eq!(voter_satisfaction(&e, &profile, &outcome_of(&["A"], &e)), 1.0);
        assert!(close(
            voter_satisfaction(&e, &profile, &outcome_of(&["C"], &e)),
            2.0 / 3.0
        ));
        assert_eq!(voter_satisfaction(&e, &profile, &outcome_of(&[], &e)), 0.0);
    }

    #[test]
    fn representation_is_mass_on_winners() {
        let e = e1();
        let profile = utilities(&e).unwrap();
        assert!(close(
            point_representation(&e, &profile, &outcome_of(&["A"], &e)),
            0.5
        ));
        assert!(close(
            point_representation(&e, &profile, &outcome_of(&["A", "B", "C"], &e)),
            1.0
        ));
    }

    #[test]
    fn representation_weights_cumulative_points() {
        let meta = ElectionMeta::new(100, VoteType::Cumulative);
        let e = Election::new(
            meta,
            BallotRules::unconstrained(VoteType::Cumulative),
            vec![
                Project::new("p1", 10),
                Project::new("p2", 10),
                Project::new("p3", 10),
            ],
            vec![Ballot::points("v1", [("p1", 8), ("p2", 1), ("p3", 1)])],
        );
        let profile = utilities(&e).unwrap();
        assert!(close(
            point_representation(&e, &profile, &outcome_of(&["p2", "p3"], &e)),
            0.2
        ));
    }

    #[test]
    fn zero_mass_ballots_left_out_of_the_mean() {
        let e = approval_election(
            100,
            &[("p", 50)],
            &[("v1", &["p"]), ("v2", &[])],
        );
        let profile = utilities(&e).unwrap();
        assert_eq!(point_representation(&e, &profile, &outcome_of(&["p"], &e)), 1.0);
    }

    fn with_districts(mut e: Election, districts: &[(&str, &str)]) -> Election {
        for (id, d) in districts {
            let p = e.projects.iter_mut().find(|p| p.id == *id).unwrap();
            p.district = Some(d.to_string());
        }
        e
    }

    #[test]
    fn district_coverage_concentrated_and_split() {
        let e = with_districts(e1(), &[("A", "d1"), ("C", "d1"), ("B", "d2")]);

        match district_coverage(&e, &outcome_of(&["A", "C"], &e)) {
            DistrictCoverage::Available {
                counts,
                covered_fraction,
                entropy,
            } => {
                assert_eq!(counts["d1"], 2);
                assert_eq!(counts["d2"], 0);
                assert!(close(covered_fraction, 0.5));
                assert_eq!(entropy, 0.0);
            }
            other => panic!("expected coverage, got {other:?}"),
        }

        match district_coverage(&e, &outcome_of(&["C", "B"], &e)) {
            DistrictCoverage::Available {
                covered_fraction,
                entropy,
                ..
            } => {
                assert_eq!(covered_fraction, 1.0);
                assert!(close(entropy, 1.0));
            }
            other => panic!("expected coverage, got {other:?}"),
        }
    }

    #[test]
    fn district_coverage_unavailable_without_labels() {
        let e = e1();
        assert_eq!(
            district_coverage(&e, &outcome_of(&["A"], &e)),
            DistrictCoverage::Unavailable
        );
    }

    fn with_categories(mut e: Election, cats: &[(&str, &[&str])]) -> Election {
        for (id, labels) in cats {
            let p = e.projects.iter_mut().find(|p| p.id == *id).unwrap();
            p.categories = labels.iter().map(|s| s.to_string()).collect();
        }
        e
    }

    #[test]
    fn category_cost_shares_split_the_spend() {
        let e = with_categories(
            approval_election(200, &[("edu", 60), ("cult", 40)], &[("v1", &["edu", "cult"])]),
            &[("edu", &["education"]), ("cult", &["culture"])],
        );
        let shares = category_shares(&e, &outcome_of(&["edu", "cult"], &e));
        assert!(close(shares["education"].cost_share, 0.6));
        assert!(close(shares["culture"].cost_share, 0.4));
        assert!(close(shares["education"].count_share, 0.5));
    }

    #[test]
    fn category_shares_empty_without_labels() {
        let e = e1();
        assert!(category_shares(&e, &outcome_of(&["A"], &e)).is_empty());
    }

    #[test]
    fn multi_label_winner_counts_toward_each() {
        let e = with_categories(
            approval_election(100, &[("p", 50)], &[("v1", &["p"])]),
            &[("p", &["welfare", "culture"])],
        );
        let shares = category_shares(&e, &outcome_of(&["p"], &e));
        assert_eq!(shares["welfare"].count_share, 1.0);
        assert_eq!(shares["culture"].count_share, 1.0);
    }

    #[test]
    fn cost_share_means() {
        let single = approval_election(100, &[("p", 50)], &[("v1", &["p"])]);
        assert!(close(
            mean_winner_cost_share(&single, &outcome_of(&["p"], &single)).unwrap(),
            0.5
        ));

        let pair = approval_election(400, &[("a", 50), ("b", 150)], &[("v1", &["a", "b"])]);
        assert!(close(
            mean_winner_cost_share(&pair, &outcome_of(&["a", "b"], &pair)).unwrap(),
            0.25
        ));

        let e = e1();
        assert_eq!(
            mean_winner_cost_share(&e, &outcome_of(&["A"], &e)).unwrap(),
            1.0
        );
        assert_eq!(
            mean_winner_cost_share(&e, &outcome_of(&[], &e)).unwrap_err(),
            MetricsError::EmptyOutcome
        );
    }

    #[test]
    fn compare_separates_majoritarian_and_fair_counts() {
        let e = e1();
        let report = compare_rules(
            &e,
            &[RuleKind::Greedy, RuleKind::MesAdd1u],
            &RuleConfig::default(),
        )
        .unwrap();
        assert_eq!(report.rules[0].metrics.as_ref().unwrap().winner_count, 1);
        assert_eq!(report.rules[1].metrics.as_ref().unwrap().winner_count, 2);
        assert_eq!(report.pairwise.len(), 1);
        assert_eq!(report.pairwise[0].winner_overlap_jaccard, 0.0);
        assert_eq!(report.pairwise[0].winner_count_ratio, Some(2.0));
    }

    #[test]
    fn compare_same_rule_twice_is_identity() {
        let e = e1();
        let report = compare_rules(
            &e,
            &[RuleKind::Greedy, RuleKind::Greedy],
            &RuleConfig::default(),
        )
        .unwrap();
        assert_eq!(report.rules[0].winners, report.rules[1].winners);
        assert_eq!(report.pairwise[0].winner_overlap_jaccard, 1.0);
        assert_eq!(report.pairwise[0].satisfaction_delta, 0.0);
    }

    #[test]
    fn compare_annotates_failing_rules() {
        let mut e = e1();
        e.ballots.clear();
        e.meta.num_votes = 0;
        let report = compare_rules(
            &e,
            &[RuleKind::Greedy, RuleKind::Phragmen],
            &RuleConfig::default(),
        )
        .unwrap();
        assert!(report.rules[1].error.is_some());
        assert!(report.pairwise.is_empty());
    }

    #[test]
    fn jaccard_of_two_empty_sets_is_one() {
        assert_eq!(jaccard(&BTreeSet::new(), &BTreeSet::new()), 1.0);
    }
}
