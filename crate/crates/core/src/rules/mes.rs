//! Method of Equal Shares with exact rational arithmetic, plus the Add1U
//! endowment climb and utilitarian completion.

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{ToPrimitive, Zero};

use crate::ballots::UtilityProfile;
use crate::model::{Amount, Election};

use super::greedy::greedy_order;
use super::{
    ratio, supporters_by_project, total_utilities, Outcome, RuleError, Selection, SelectionKey,
    TieBreak,
};

/// Smallest ρ ≥ 0 with Σ_i min(endowment_i, ρ·utility_i) = cost, as an exact
/// rational, or `None` when the supporters' endowments sum below the cost.
///
/// Sorts supporters by their cap point endowment/utility and sweeps: within a
/// segment the uncapped suffix pays linearly in ρ, so the candidate
/// ρ = (cost − capped endowments) / remaining utility is exact, and it is the
/// answer as soon as it falls inside the segment.
pub fn compute_rho(cost: Amount, supporters: &[(BigRational, u64)]) -> Option<BigRational> {
    let cost = ratio(cost);
    if cost.is_zero() {
        return Some(BigRational::zero());
    }
    let mut total = BigRational::zero();
    for (endowment, _) in supporters {
        total += endowment;
    }
    if total < cost {
        return None;
    }

    let mut items: Vec<(BigRational, &BigRational, u64)> = supporters
        .iter()
        .map(|(endowment, utility)| {
            debug_assert!(*utility > 0);
            let cap_point = endowment / BigRational::from_integer(BigInt::from(*utility));
            (cap_point, endowment, *utility)
        })
        .collect();
    items.sort_by(|a, b| a.0.cmp(&b.0));

    let mut capped = BigRational::zero();
    let mut utility_rest: BigInt = items.iter().map(|(_, _, u)| BigInt::from(*u)).sum();
    for (cap_point, endowment, utility) in &items {
        let candidate = (&cost - &capped) / BigRational::from_integer(utility_rest.clone());
        if candidate <= *cap_point {
            return Some(candidate);
        }
        capped += *endowment;
        utility_rest -= BigInt::from(*utility);
    }
    unreachable!("total endowment covers cost, the sweep settles in-segment")
}

/// Runs equal shares at a fixed per-voter endowment: repeatedly select the
/// affordable project with minimum ρ (ties: lower cost, then id) among those
/// with at least one positive-utility supporter, charging each supporter
/// min(balance, ρ·utility), until nothing is affordable.
pub fn method_of_equal_shares(
    election: &Election,
    profile: &UtilityProfile,
    endowment: &BigRational,
    label: &str,
) -> Outcome {
    let supporters = supporters_by_project(election, profile);
    let mut balances = vec![endowment.clone(); election.ballots.len()];
    let mut selected = vec![false; election.projects.len()];
    let mut winners: Vec<String> = Vec::new();
    let mut audit = Vec::new();
    let mut spend: Amount = 0;

    loop {
        let mut best: Option<(BigRational, Amount, usize)> = None;
        for (idx, project) in election.projects.iter().enumerate() {
            if selected[idx] || supporters[idx].is_empty() {
                continue;
            }
            let current: Vec<(BigRational, u64)> = supporters[idx]
                .iter()
                .map(|&(voter, utility)| (balances[voter].clone(), utility))
                .collect();
            let Some(rho) = compute_rho(project.cost, &current) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some((best_rho, best_cost, best_idx)) => rho
                    .cmp(best_rho)
                    .then(project.cost.cmp(best_cost))
                    .then_with(|| project.id.cmp(&election.projects[*best_idx].id))
                    .is_lt(),
            };
            if better {
                best = Some((rho, project.cost, idx));
            }
        }
        let Some((rho, cost, idx)) = best else { break };

        let mut charges = Vec::with_capacity(supporters[idx].len());
        for &(voter, utility) in &supporters[idx] {
            let share = &rho * BigRational::from_integer(BigInt::from(utility));
            let pay = if balances[voter] <= share {
                balances[voter].clone()
            } else {
                share
            };
            balances[voter] -= &pay;
            charges.push((voter, pay));
        }

        spend += cost;
        selected[idx] = true;
        audit.push(Selection {
            project: election.projects[idx].id.clone(),
            round: winners.len() + 1,
            cost,
            key: SelectionKey::Rho(rho),
            completion: false,
            charges,
        });
        winners.push(election.projects[idx].id.clone());
    }

    Outcome {
        rule: label.to_string(),
        winners,
        spend,
        audit,
        endowment_used: Some(endowment.clone()),
    }
}

#[derive(Debug, Clone)]
pub struct Add1uConfig {
    /// Start the climb from floor(budget/ballots) instead of the exact
    /// rational budget/ballots.
    pub floor_base: bool,
    /// Abort the climb once endowment·ballots exceeds this multiple of the
    /// budget.
    pub cap_multiple: u64,
    /// Probe endowment increments one by one instead of doubling plus binary
    /// search. Both must land on the same increment.
    pub linear_search: bool,
}

impl Default for Add1uConfig {
    fn default() -> Self {
        Add1uConfig {
            floor_base: false,
            cap_multiple: 2,
            linear_search: false,
        }
    }
}

/// Equal shares with the Add1U completion: climb the per-voter endowment from
/// the base in steps of one minor currency unit, keep the largest increment
/// whose outcome still spends within budget, then fill the residual budget
/// with remaining projects in greedy order.
pub fn equal_shares_add1u(
    election: &Election,
    profile: &UtilityProfile,
    tiebreak: TieBreak,
    cfg: &Add1uConfig,
) -> Result<Outcome, RuleError> {
    let n = election.ballots.len();
    if n == 0 {
        return Err(RuleError::NoBallots);
    }
    let budget = election.budget();
    let n_big = BigInt::from(n);
    let base = if cfg.floor_base {
        ratio(budget / n as Amount)
    } else {
        ratio(budget) / BigRational::from_integer(n_big.clone())
    };

    // Largest increment the endowment cap allows: (base + k)·n ≤ cap·budget.
    let max_endowment =
        ratio(budget.saturating_mul(cfg.cap_multiple)) / BigRational::from_integer(n_big);
    let k_cap: u64 = if max_endowment <= base {
        0
    } else {
        (&max_endowment - &base)
            .floor()
            .to_integer()
            .to_u64()
            .unwrap_or(u64::MAX)
    };

    let mut memo: BTreeMap<u64, Outcome> = BTreeMap::new();
    let run = |k: u64, memo: &mut BTreeMap<u64, Outcome>| -> Amount {
        memo.entry(k)
            .or_insert_with(|| {
                let endowment = &base + BigRational::from_integer(BigInt::from(k));
                method_of_equal_shares(election, profile, &endowment, "mes-add1u")
            })
            .spend
    };

    // k = 0 always fits: total charges never exceed n·base ≤ cap of one budget.
    let best_k = if cfg.linear_search {
        let mut best = 0;
        for k in 1..=k_cap {
            if run(k, &mut memo) > budget {
                break;
            }
            best = k;
        }
        best
    } else {
        let mut lo = 0u64; // within budget
        let mut hi: Option<u64> = None; // overspends
        let mut step = 1u64;
        while hi.is_none() && lo < k_cap {
            let k = lo.saturating_add(step).min(k_cap);
            if run(k, &mut memo) > budget {
                hi = Some(k);
            } else {
                lo = k;
                step = step.saturating_mul(2);
            }
        }
        if let Some(mut hi) = hi {
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if run(mid, &mut memo) > budget {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
        }
        lo
    };

    run(best_k, &mut memo);
    let mut outcome = memo.remove(&best_k).expect("kept increment was evaluated");

    let mut residual = budget - outcome.spend;
    let totals = total_utilities(election, profile);
    for idx in greedy_order(election, &totals, tiebreak) {
        let project = &election.projects[idx];
        if project.cost > residual || outcome.winners.iter().any(|w| *w == project.id) {
            continue;
        }
        residual -= project.cost;
        outcome.spend += project.cost;
        outcome.audit.push(Selection {
            project: project.id.clone(),
            round: outcome.winners.len() + 1,
            cost: project.cost,
            key: SelectionKey::Score(totals[idx]),
            completion: true,
            charges: Vec::new(),
        });
        outcome.winners.push(project.id.clone());
    }
    Ok(outcome)
}
