//! Sequential Phragmén, continuous-income variant.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::Zero;

use crate::ballots::UtilityProfile;
use crate::model::{Amount, Election};

use super::{ratio, Outcome, RuleError, Selection, SelectionKey};

/// Every voter earns money at rate 1; a project is purchased at the earliest
/// time its approvers' combined balances reach its cost, and those balances
/// reset to zero. Cardinal ballots are thresholded at utility > 0 to obtain
/// approvals. Projects whose cost exceeds the remaining budget are skipped;
/// the run stops when no candidate is left.
pub fn phragmen_sequential(
    election: &Election,
    profile: &UtilityProfile,
) -> Result<Outcome, RuleError> {
    let n = election.ballots.len();
    if n == 0 {
        return Err(RuleError::NoBallots);
    }

    let approvers: Vec<Vec<usize>> = election
        .projects
        .iter()
        .map(|p| {
            (0..n)
                .filter(|&v| profile.utility(v, &p.id) > 0)
                .collect()
        })
        .collect();

    let mut balances = vec![BigRational::zero(); n];
    let mut now = BigRational::zero();
    let mut selected = vec![false; election.projects.len()];
    let mut remaining = election.budget();
    let mut winners = Vec::new();
    let mut audit = Vec::new();
    let mut spend: Amount = 0;

    loop {
        let mut best: Option<(BigRational, Amount, usize)> = None;
        for (idx, project) in election.projects.iter().enumerate() {
            if selected[idx] || approvers[idx].is_empty() || project.cost > remaining {
                continue;
            }
            let saved: BigRational = approvers[idx].iter().map(|&v| balances[v].clone()).sum();
            let cost = ratio(project.cost);
            let at = if saved >= cost {
                now.clone()
            } else {
                let group = BigRational::from_integer(BigInt::from(approvers[idx].len()));
                &now + (cost - saved) / group
            };
            let better = match &best {
                None => true,
                Some((best_at, best_cost, best_idx)) => at
                    .cmp(best_at)
                    .then(project.cost.cmp(best_cost))
                    .then_with(|| project.id.cmp(&election.projects[*best_idx].id))
                    .is_lt(),
            };
            if better {
                best = Some((at, project.cost, idx));
            }
        }
        let Some((at, cost, idx)) = best else { break };

        let elapsed = &at - &now;
        let mut charges = Vec::with_capacity(approvers[idx].len());
        for (v, balance) in balances.iter_mut().enumerate() {
            *balance += &elapsed;
            if approvers[idx].contains(&v) {
                charges.push((v, balance.clone()));
                *balance = BigRational::zero();
            }
        }
        now = at.clone();
        remaining -= cost;
        spend += cost;
        selected[idx] = true;
        audit.push(Selection {
            project: election.projects[idx].id.clone(),
            round: winners.len() + 1,
            cost,
            key: SelectionKey::PurchaseTime(at),
            completion: false,
            charges,
        });
        winners.push(election.projects[idx].id.clone());
    }

    Ok(Outcome {
        rule: "phragmen".to_string(),
        winners,
        spend,
        audit,
        endowment_used: None,
    })
}
