//! Core election data model: metadata, projects, and whole elections.
//!
//! Money is kept in integer minor currency units throughout; the voting
//! rules convert to exact rationals where division is unavoidable.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;

use crate::ballots::{Ballot, BallotRules};

/// Currency amount in minor units (whatever integer grain the source file uses).
pub type Amount = u64;

/// Ballot format declared by an election.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteType {
    Approval,
    Cumulative,
    Ordinal,
    Scoring,
}

impl VoteType {
    pub fn as_str(&self) -> &'static str {
        match self {
            VoteType::Approval => "approval",
            VoteType::Cumulative => "cumulative",
            VoteType::Ordinal => "ordinal",
            VoteType::Scoring => "scoring",
        }
    }

    pub fn parse(s: &str) -> Option<VoteType> {
        match s {
            "approval" => Some(VoteType::Approval),
            "cumulative" => Some(VoteType::Cumulative),
            "ordinal" => Some(VoteType::Ordinal),
            "scoring" => Some(VoteType::Scoring),
            _ => None,
        }
    }
}

impl fmt::Display for VoteType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Election-level metadata.
///
/// Unrecognized keys are preserved in `extra` in file order so that a parsed
/// election serializes back without losing information.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionMeta {
    pub budget: Amount,
    pub vote_type: VoteType,
    pub num_projects: usize,
    pub num_votes: usize,
    pub min_length: Option<usize>,
    pub max_length: Option<usize>,
    pub max_sum_points: Option<u64>,
    pub description: Option<String>,
    pub country: Option<String>,
    pub unit: Option<String>,
    pub instance: Option<String>,
    pub date_begin: Option<String>,
    pub date_end: Option<String>,
    pub extra: IndexMap<String, String>,
}

impl ElectionMeta {
    /// Minimal metadata for programmatically built elections.
    pub fn new(budget: Amount, vote_type: VoteType) -> Self {
        ElectionMeta {
            budget,
            vote_type,
            num_projects: 0,
            num_votes: 0,
            min_length: None,
            max_length: None,
            max_sum_points: None,
            description: None,
            country: None,
            unit: None,
            instance: None,
            date_begin: None,
            date_end: None,
            extra: IndexMap::new(),
        }
    }
}

/// A fundable project on the ballot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub id: String,
    pub cost: Amount,
    pub name: Option<String>,
    pub district: Option<String>,
    pub categories: BTreeSet<String>,
    /// Unrecognized project columns, preserved verbatim.
    pub extra: IndexMap<String, String>,
}

impl Project {
    pub fn new(id: impl Into<String>, cost: Amount) -> Self {
        Project {
            id: id.into(),
            cost,
            name: None,
            district: None,
            categories: BTreeSet::new(),
            extra: IndexMap::new(),
        }
    }

    pub fn with_district(mut self, district: impl Into<String>) -> Self {
        self.district = Some(district.into());
        self
    }

    pub fn with_categories<I, S>(mut self, categories: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.categories = categories.into_iter().map(Into::into).collect();
        self
    }
}

/// A complete election instance: the unit all rules and metrics operate on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Election {
    pub meta: ElectionMeta,
    pub rules: BallotRules,
    pub projects: Vec<Project>,
    pub ballots: Vec<Ballot>,
}

/// Violation of a structural election invariant.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("budget must be positive")]
    ZeroBudget,
    #[error("election must declare at least one project")]
    NoProjects,
    #[error("duplicate project id `{0}`")]
    DuplicateProjectId(String),
    #[error("duplicate voter id `{0}`")]
    DuplicateVoterId(String),
    #[error("project `{0}` has zero cost")]
    ZeroCost(String),
    #[error("declared num_projects {declared} does not match actual {actual}")]
    ProjectCountMismatch { declared: usize, actual: usize },
    #[error("declared num_votes {declared} does not match actual {actual}")]
    VoteCountMismatch { declared: usize, actual: usize },
    #[error("min_length {min} exceeds max_length {max}")]
    LengthBoundsInverted { min: usize, max: usize },
    #[error("ballot of voter `{voter}` is invalid: {detail}")]
    InvalidBallot { voter: String, detail: String },
    #[error("identifier `{0}` contains a reserved character (`;`, `,`, or newline)")]
    ReservedCharacter(String),
    #[error("field value `{0}` contains a reserved character (`;` or newline)")]
    ReservedInText(String),
}

impl Election {
    /// Builds an election and synchronizes the declared counts with the
    /// actual project and ballot lists.
    pub fn new(
        mut meta: ElectionMeta,
        rules: BallotRules,
        projects: Vec<Project>,
        ballots: Vec<Ballot>,
    ) -> Self {
        meta.num_projects = projects.len();
        meta.num_votes = ballots.len();
        Election {
            meta,
            rules,
            projects,
            ballots,
        }
    }

    pub fn budget(&self) -> Amount {
        self.meta.budget
    }

    pub fn project(&self, id: &str) -> Option<&Project> {
        self.projects.iter().find(|p| p.id == id)
    }

    /// Replaces the ballot list, keeping the declared vote count in sync.
    /// Used by the abstention simulator when shrinking the electorate.
    pub fn with_ballots(&self, ballots: Vec<Ballot>) -> Election {
        let mut e = self.clone();
        e.meta.num_votes = ballots.len();
        e.ballots = ballots;
        e
    }

    /// Checks every structural invariant. Rule implementations assume a
    /// validated election; parsers and simulators call this before handing
    /// one over.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.meta.budget == 0 {
            return Err(ModelError::ZeroBudget);
        }
        if self.projects.is_empty() {
            return Err(ModelError::NoProjects);
        }
        if self.meta.num_projects != self.projects.len() {
            return Err(ModelError::ProjectCountMismatch {
                declared: self.meta.num_projects,
                actual: self.projects.len(),
            });
        }
        if self.meta.num_votes != self.ballots.len() {
            return Err(ModelError::VoteCountMismatch {
                declared: self.meta.num_votes,
                actual: self.ballots.len(),
            });
        }
        if let (Some(min), Some(max)) = (self.meta.min_length, self.meta.max_length) {
            if min > max {
                return Err(ModelError::LengthBoundsInverted { min, max });
            }
        }

        let mut project_ids = BTreeSet::new();
        for p in &self.projects {
            check_identifier(&p.id)?;
            if p.cost == 0 {
                return Err(ModelError::ZeroCost(p.id.clone()));
            }
            if !project_ids.insert(p.id.as_str()) {
                return Err(ModelError::DuplicateProjectId(p.id.clone()));
            }
            if let Some(name) = &p.name {
                check_text(name)?;
            }
            if let Some(d) = &p.district {
                check_text(d)?;
            }
            for c in &p.categories {
                check_identifier(c)?;
            }
            for (k, v) in &p.extra {
                check_text(k)?;
                check_text(v)?;
            }
        }

        let mut voter_ids = BTreeSet::new();
        for b in &self.ballots {
            check_identifier(&b.voter_id)?;
            if !voter_ids.insert(b.voter_id.as_str()) {
                return Err(ModelError::DuplicateVoterId(b.voter_id.clone()));
            }
            for id in b.content.project_ids() {
                if !project_ids.contains(id.as_str()) {
                    return Err(ModelError::InvalidBallot {
                        voter: b.voter_id.clone(),
                        detail: format!("references unknown project `{id}`"),
                    });
                }
            }
            let check = crate::ballots::validate_ballot(b, &self.rules);
            if let Some(v) = check.violations.first() {
                return Err(ModelError::InvalidBallot {
                    voter: b.voter_id.clone(),
                    detail: v.to_string(),
                });
            }
            for (k, v) in &b.attributes {
                check_text(k)?;
                check_text(v)?;
            }
        }
        Ok(())
    }
}

// Identifiers flow into comma-separated vote lists, so the comma is reserved
// for them in addition to the field separator.
fn check_identifier(s: &str) -> Result<(), ModelError> {
    if s.is_empty() || s.contains(';') || s.contains(',') || s.contains('\n') || s.contains('\r') {
        return Err(ModelError::ReservedCharacter(s.to_string()));
    }
    Ok(())
}

fn check_text(s: &str) -> Result<(), ModelError> {
    if s.contains(';') || s.contains('\n') || s.contains('\r') {
        return Err(ModelError::ReservedInText(s.to_string()));
    }
    Ok(())
}
