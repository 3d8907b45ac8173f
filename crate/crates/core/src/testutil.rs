//! Shared fixtures for unit tests.

use crate::ballots::{Ballot, BallotRules};
use crate::model::{Amount, Election, ElectionMeta, Project, VoteType};

/// Builds an approval election from `(project id, cost)` and
/// `(voter id, approved ids)` lists, keeping the given order.
pub fn approval_election(
    budget: Amount,
    projects: &[(&str, Amount)],
    ballots: &[(&str, &[&str])],
) -> Election {
    let projects: Vec<Project> = projects
        .iter()
        .map(|(id, cost)| Project::new(*id, *cost))
        .collect();
    let ballots: Vec<Ballot> = ballots
        .iter()
        .map(|(voter, ids)| Ballot::approval(*voter, ids.iter().copied()))
        .collect();
    Election::new(
        ElectionMeta::new(budget, VoteType::Approval),
        BallotRules::unconstrained(VoteType::Approval),
        projects,
        ballots,
    )
}

/// Three projects, three approval voters, budget 300: A(300) approved by all,
/// C(150) by v1 and v2, B(150) by v3 alone. Small enough to trace every rule
/// by hand yet rich enough to separate the rules' outcomes.
pub fn e1() -> Election {
    approval_election(
        300,
        &[("A", 300), ("C", 150), ("B", 150)],
        &[("v1", &["A", "C"]), ("v2", &["A", "C"]), ("v3", &["A", "B"])],
    )
}
