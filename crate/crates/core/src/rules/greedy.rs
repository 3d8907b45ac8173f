//! Utilitarian greedy: fund the most popular projects first.

use crate::ballots::UtilityProfile;
use crate::model::{Amount, Election};

use super::{total_utilities, Outcome, Selection, SelectionKey, TieBreak};

/// Sorts projects by total utility descending (ties per `tiebreak`) and
/// selects every project that still fits the remaining budget, continuing to
/// the end of the list rather than stopping at the first miss.
pub fn utilitarian_greedy(
    election: &Election,
    profile: &UtilityProfile,
    tiebreak: TieBreak,
) -> Outcome {
    let totals = total_utilities(election, profile);
    let order = greedy_order(election, &totals, tiebreak);

    let mut winners = Vec::new();
    let mut audit = Vec::new();
    let mut spend: Amount = 0;
    let budget = election.budget();

    for idx in order {
        let project = &election.projects[idx];
        if spend + project.cost > budget {
            continue;
        }
        spend += project.cost;
        audit.push(Selection {
            project: project.id.clone(),
            round: winners.len() + 1,
            cost: project.cost,
            key: SelectionKey::Score(totals[idx]),
            completion: false,
            charges: Vec::new(),
        });
        winners.push(project.id.clone());
    }

    Outcome {
        rule: "greedy".to_string(),
        winners,
        spend,
        audit,
        endowment_used: None,
    }
}

/// Project indices in greedy traversal order. The sort is stable, so
/// `FileOrder` ties keep their input position.
pub(crate) fn greedy_order(election: &Election, totals: &[u128], tiebreak: TieBreak) -> Vec<usize> {
    let mut order: Vec<usize> = (0..election.projects.len()).collect();
    match tiebreak {
        TieBreak::CheaperFirst => order.sort_by(|&a, &b| {
            let pa = &election.projects[a];
            let pb = &election.projects[b];
            totals[b]
                .cmp(&totals[a])
                .then(pa.cost.cmp(&pb.cost))
                .then(pa.id.cmp(&pb.id))
        }),
        TieBreak::CostlierFirst => order.sort_by(|&a, &b| {
            let pa = &election.projects[a];
            let pb = &election.projects[b];
            totals[b]
                .cmp(&totals[a])
                .then(pb.cost.cmp(&pa.cost))
                .then(pa.id.cmp(&pb.id))
        }),
        TieBreak::FileOrder => order.sort_by(|&a, &b| totals[b].cmp(&totals[a])),
    }
    order
}
