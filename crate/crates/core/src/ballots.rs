//! Ballot formats, per-ballot validation, and the conversion of every
//! format into integer utilities consumed by the aggregation rules.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::model::{Election, VoteType};

/// One voter's expressed preferences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum BallotContent {
    /// Set of approved project ids.
    Approval(BTreeSet<String>),
    /// Project id → positive points (cumulative voting).
    Points(BTreeMap<String, u64>),
    /// Distinct project ids, best first.
    Ranking(Vec<String>),
    /// Project id → score within the configured range.
    Scores(BTreeMap<String, u64>),
}

impl BallotContent {
    pub fn project_ids(&self) -> Vec<&String> {
        match self {
            BallotContent::Approval(set) => set.iter().collect(),
            BallotContent::Points(map) | BallotContent::Scores(map) => map.keys().collect(),
            BallotContent::Ranking(list) => list.iter().collect(),
        }
    }

    pub fn distinct_count(&self) -> usize {
        match self {
            BallotContent::Approval(set) => set.len(),
            BallotContent::Points(map) | BallotContent::Scores(map) => map.len(),
            BallotContent::Ranking(list) => list.len(),
        }
    }

    pub fn vote_type(&self) -> VoteType {
        match self {
            BallotContent::Approval(_) => VoteType::Approval,
            BallotContent::Points(_) => VoteType::Cumulative,
            BallotContent::Ranking(_) => VoteType::Ordinal,
            BallotContent::Scores(_) => VoteType::Scoring,
        }
    }
}

/// A ballot: voter identity, preference content, and any auxiliary profile
/// columns carried by the source file (age, sex, district, ...).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub voter_id: String,
    pub content: BallotContent,
    pub attributes: IndexMap<String, String>,
}

impl Ballot {
    pub fn new(voter_id: impl Into<String>, content: BallotContent) -> Self {
        Ballot {
            voter_id: voter_id.into(),
            content,
            attributes: IndexMap::new(),
        }
    }

    pub fn approval<I, S>(voter_id: impl Into<String>, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Ballot::new(
            voter_id,
            BallotContent::Approval(ids.into_iter().map(Into::into).collect()),
        )
    }

    pub fn points<I, S>(voter_id: impl Into<String>, entries: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        Ballot::new(
            voter_id,
            BallotContent::Points(entries.into_iter().map(|(k, v)| (k.into(), v)).collect()),
        )
    }

    pub fn ranking<I, S>(voter_id: impl Into<String>, ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Ballot::new(
            voter_id,
            BallotContent::Ranking(ids.into_iter().map(Into::into).collect()),
        )
    }
}

/// Ballot-validity configuration for one election.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BallotRules {
    pub vote_type: VoteType,
    pub min_distinct: Option<usize>,
    pub max_distinct: Option<usize>,
    /// Point budget for cumulative ballots.
    pub total_points: Option<u64>,
    /// When set, cumulative ballots must spend `total_points` exactly;
    /// otherwise the total is an upper bound.
    pub require_exact_total: bool,
    pub score_range: Option<(u64, u64)>,
}

impl BallotRules {
    pub fn unconstrained(vote_type: VoteType) -> Self {
        BallotRules {
            vote_type,
            min_distinct: None,
            max_distinct: None,
            total_points: None,
            require_exact_total: false,
            score_range: None,
        }
    }

    /// The Aarau 2023 cumulative profile: 10 points spent exactly, spread
    /// over at least three projects.
    pub fn aarau() -> Self {
        BallotRules {
            vote_type: VoteType::Cumulative,
            min_distinct: Some(3),
            max_distinct: None,
            total_points: Some(10),
            require_exact_total: true,
            score_range: None,
        }
    }
}

/// A named reason a ballot fails its rules. Violations are data, not errors:
/// collecting them is part of normal validation flow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum Violation {
    FormatMismatch { expected: VoteType, found: VoteType },
    TooFewDistinct { min: usize, found: usize },
    TooManyDistinct { max: usize, found: usize },
    PointsNotPositive { project: String },
    TotalPointsExceeded { limit: u64, found: u64 },
    TotalPointsNotExact { required: u64, found: u64 },
    ScoreOutOfRange { project: String, lo: u64, hi: u64, found: u64 },
    DuplicateEntry { project: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::FormatMismatch { expected, found } => {
                write!(f, "ballot format {found} does not match election vote_type {expected}")
            }
            Violation::TooFewDistinct { min, found } => {
                write!(f, "ballot names {found} distinct projects, fewer than the minimum {min}")
            }
            Violation::TooManyDistinct { max, found } => {
                write!(f, "ballot names {found} distinct projects, more than the maximum {max}")
            }
            Violation::PointsNotPositive { project } => {
                write!(f, "project `{project}` received zero points")
            }
            Violation::TotalPointsExceeded { limit, found } => {
                write!(f, "ballot spends {found} points, above the limit {limit}")
            }
            Violation::TotalPointsNotExact { required, found } => {
                write!(f, "ballot spends {found} points instead of exactly {required}")
            }
            Violation::ScoreOutOfRange { project, lo, hi, found } => {
                write!(f, "score {found} for `{project}` outside [{lo}, {hi}]")
            }
            Violation::DuplicateEntry { project } => {
                write!(f, "project `{project}` appears more than once")
            }
        }
    }
}

/// Result of validating one ballot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationOutcome {
    pub violations: Vec<Violation>,
}

impl ValidationOutcome {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks one ballot against the election's ballot rules.
pub fn validate_ballot(ballot: &Ballot, rules: &BallotRules) -> ValidationOutcome {
    let mut violations = Vec::new();

    let found_type = ballot.content.vote_type();
    if found_type != rules.vote_type {
        violations.push(Violation::FormatMismatch {
            expected: rules.vote_type,
            found: found_type,
        });
        return ValidationOutcome { violations };
    }

    if let BallotContent::Ranking(list) = &ballot.content {
        let mut seen = BTreeSet::new();
        for id in list {
            if !seen.insert(id.as_str()) {
                violations.push(Violation::DuplicateEntry { project: id.clone() });
            }
        }
    }

    let distinct = ballot.content.distinct_count();
    if let Some(min) = rules.min_distinct {
        if distinct < min {
            violations.push(Violation::TooFewDistinct { min, found: distinct });
        }
    }
    if let Some(max) = rules.max_distinct {
        if distinct > max {
            violations.push(Violation::TooManyDistinct { max, found: distinct });
        }
    }

    match &ballot.content {
        BallotContent::Points(map) => {
            for (id, pts) in map {
                if *pts == 0 {
                    violations.push(Violation::PointsNotPositive { project: id.clone() });
                }
            }
            if let Some(total) = rules.total_points {
                let spent: u64 = map.values().sum();
                if rules.require_exact_total {
                    if spent != total {
                        violations.push(Violation::TotalPointsNotExact {
                            required: total,
                            found: spent,
                        });
                    }
                } else if spent > total {
                    violations.push(Violation::TotalPointsExceeded {
                        limit: total,
                        found: spent,
                    });
                }
            }
        }
        BallotContent::Scores(map) => {
            if let Some((lo, hi)) = rules.score_range {
                for (id, score) in map {
                    if *score < lo || *score > hi {
                        violations.push(Violation::ScoreOutOfRange {
                            project: id.clone(),
                            lo,
                            hi,
                            found: *score,
                        });
                    }
                }
            }
        }
        BallotContent::Approval(_) | BallotContent::Ranking(_) => {}
    }

    ValidationOutcome { violations }
}

/// Modified Borda conversion: in an `m`-item ranking the top option earns
/// `m` points, the next `m - 1`, and so on down to 1. Ranking more options
/// raises the points of the top choice, which is the compromise incentive
/// of the format.
pub fn modified_borda_points(ranking: &[String]) -> BTreeMap<String, u64> {
    let m = ranking.len() as u64;
    ranking
        .iter()
        .enumerate()
        .map(|(j, id)| (id.clone(), m - j as u64))
        .collect()
}

/// Per-voter utilities, aligned with the election's ballot order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtilityProfile {
    entries: Vec<BTreeMap<String, u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UtilityError {
    #[error("ballot of voter `{voter}` fails validation: {detail}")]
    InvalidBallotPresent { voter: String, detail: String },
}

impl UtilityProfile {
    /// Utility the `voter_idx`-th ballot assigns to `project`; 0 when the
    /// project is absent from the ballot.
    pub fn utility(&self, voter_idx: usize, project: &str) -> u64 {
        self.entries[voter_idx].get(project).copied().unwrap_or(0)
    }

    pub fn voter(&self, voter_idx: usize) -> &BTreeMap<String, u64> {
        &self.entries[voter_idx]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BTreeMap<String, u64>> {
        self.entries.iter()
    }
}

/// Normalizes every ballot format into integer utilities: approval → 1 per
/// approved project, cumulative → points, scoring → score, ranking →
/// modified Borda points.
pub fn utilities(election: &Election) -> Result<UtilityProfile, UtilityError> {
    let mut entries = Vec::with_capacity(election.ballots.len());
    for ballot in &election.ballots {
        let outcome = validate_ballot(ballot, &election.rules);
        if let Some(v) = outcome.violations.first() {
            return Err(UtilityError::InvalidBallotPresent {
                voter: ballot.voter_id.clone(),
                detail: v.to_string(),
            });
        }
        let map = match &ballot.content {
            BallotContent::Approval(set) => set.iter().map(|id| (id.clone(), 1)).collect(),
            BallotContent::Points(map) => map.clone(),
            BallotContent::Scores(map) => {
                // Zero scores are valid ballot entries but carry no utility.
                map.iter()
                    .filter(|(_, s)| **s > 0)
                    .map(|(k, v)| (k.clone(), *v))
                    .collect()
            }
            BallotContent::Ranking(list) => modified_borda_points(list),
        };
        entries.push(map);
    }
    Ok(UtilityProfile { entries })
}
