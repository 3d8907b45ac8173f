//! Independent reference implementations used to cross-check the voting
//! rules, plus the exhaustive small-election enumerator.

use std::collections::BTreeMap;

use pbvote_core::{
    utilities, Ballot, BallotContent, BallotRules, Election, ElectionMeta, Project, UtilityProfile,
    VoteType,
};

/// Small exact fraction on i64, enough for elections with single-digit
/// budgets and utilities. Panics on overflow rather than losing precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frac {
    num: i64,
    den: i64,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl Frac {
    pub fn new(num: i64, den: i64) -> Frac {
        assert!(den != 0);
        let g = gcd(num, den);
        let sign = den.signum();
        Frac { num: sign * num / g, den: den.abs() / g }
    }

    pub fn int(v: i64) -> Frac {
        Frac { num: v, den: 1 }
    }

    pub fn zero() -> Frac {
        Frac::int(0)
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }
}

impl std::ops::Add for Frac {
    type Output = Frac;
    fn add(self, other: Frac) -> Frac {
        Frac::new(self.num * other.den + other.num * self.den, self.den * other.den)
    }
}

impl std::ops::Sub for Frac {
    type Output = Frac;
    fn sub(self, other: Frac) -> Frac {
        Frac::new(self.num * other.den - other.num * self.den, self.den * other.den)
    }
}

impl std::ops::Mul for Frac {
    type Output = Frac;
    fn mul(self, other: Frac) -> Frac {
        Frac::new(self.num * other.num, self.den * other.den)
    }
}

impl std::ops::Div for Frac {
    type Output = Frac;
    fn div(self, other: Frac) -> Frac {
        assert!(other.num != 0);
        Frac::new(self.num * other.den, self.den * other.num)
    }
}

impl Ord for Frac {
    fn cmp(&self, other: &Frac) -> std::cmp::Ordering {
        (self.num as i128 * other.den as i128).cmp(&(other.num as i128 * self.den as i128))
    }
}

impl PartialOrd for Frac {
    fn partial_cmp(&self, other: &Frac) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Smallest per-utility price at which the supporters can jointly pay
/// `cost`, found by brute force: every subset of supporters is tried as the
/// set paying its full balance, and the implied price is kept when it is
/// self-consistent.
pub fn clearing_price(cost: u64, supporters: &[(Frac, i64)]) -> Option<Frac> {
    let cost = Frac::int(cost as i64);
    let mut best: Option<Frac> = None;
    for mask in 0u32..(1 << supporters.len()) {
        let mut capped = Frac::zero();
        let mut free_util = 0i64;
        for (i, &(balance, utility)) in supporters.iter().enumerate() {
            if mask >> i & 1 == 1 {
                capped = capped + balance;
            } else {
                free_util += utility;
            }
        }
        let price = if free_util == 0 {
            if capped != cost {
                continue;
            }
            match supporters
                .iter()
                .map(|&(balance, utility)| balance / Frac::int(utility))
                .max()
            {
                Some(p) => p,
                None => {
                    // No supporters at all: only cost 0 clears, at price 0.
                    if cost == Frac::zero() {
                        Frac::zero()
                    } else {
                        continue;
                    }
                }
            }
        } else {
            (cost - capped) / Frac::int(free_util)
        };
        if price < Frac::zero() {
            continue;
        }
        let consistent = supporters.iter().enumerate().all(|(i, &(balance, utility))| {
            let cap_point = balance / Frac::int(utility);
            if mask >> i & 1 == 1 {
                cap_point <= price
            } else {
                price <= cap_point
            }
        });
        if !consistent {
            continue;
        }
        best = Some(match best {
            Some(b) if b <= price => b,
            _ => price,
        });
    }
    best
}

/// Reference Method of Equal Shares: equal endowments, repeatedly buy the
/// (price, cost, id)-minimal affordable project, charging
/// min(balance, price·utility). Returns the winner sequence with prices.
///
/// Assumes project ids sort like their file positions (p0, p1, ...), which
/// holds for the enumerated elections.
pub fn equal_shares_oracle(
    election: &Election,
    profile: &UtilityProfile,
) -> Vec<(String, Frac)> {
    let n = election.ballots.len();
    assert!(n > 0);
    let endowment = Frac::new(election.budget() as i64, n as i64);
    let mut balances = vec![endowment; n];
    let mut remaining: Vec<usize> = (0..election.projects.len()).collect();
    let mut winners = Vec::new();

    loop {
        let mut best: Option<(Frac, u64, usize)> = None;
        for &pi in &remaining {
            let project = &election.projects[pi];
            let supporters: Vec<(Frac, i64)> = (0..n)
                .filter_map(|v| {
                    let u = profile.utility(v, &project.id);
                    (u > 0).then(|| (balances[v], u as i64))
                })
                .collect();
            if supporters.is_empty() {
                continue;
            }
            let Some(price) = clearing_price(project.cost, &supporters) else {
                continue;
            };
            let candidate = (price, project.cost, pi);
            if best.map_or(true, |b| candidate < b) {
                best = Some(candidate);
            }
        }
        let Some((price, _, pi)) = best else { break };
        let project = &election.projects[pi];
        for v in 0..n {
            let u = profile.utility(v, &project.id);
            if u > 0 {
                let charge = balances[v].min(price * Frac::int(u as i64));
                balances[v] = balances[v] - charge;
            }
        }
        winners.push((project.id.clone(), price));
        remaining.retain(|&x| x != pi);
    }
    winners
}

/// Reference utilitarian greedy: recompute scores straight from the raw
/// ballots, sort by (score desc, cost asc, id asc), and take everything
/// that still fits.
pub fn greedy_oracle(election: &Election) -> Vec<String> {
    let mut scores: BTreeMap<&str, u128> =
        election.projects.iter().map(|p| (p.id.as_str(), 0)).collect();
    for ballot in &election.ballots {
        match &ballot.content {
            BallotContent::Approval(ids) => {
                for id in ids {
                    *scores.get_mut(id.as_str()).unwrap() += 1;
                }
            }
            BallotContent::Points(entries) | BallotContent::Scores(entries) => {
                for (id, value) in entries {
                    *scores.get_mut(id.as_str()).unwrap() += u128::from(*value);
                }
            }
            BallotContent::Ranking(ids) => {
                let m = ids.len();
                for (i, id) in ids.iter().enumerate() {
                    *scores.get_mut(id.as_str()).unwrap() += (m - i) as u128;
                }
            }
        }
    }

    let mut order: Vec<&Project> = election.projects.iter().collect();
    order.sort_by(|a, b| {
        scores[b.id.as_str()]
            .cmp(&scores[a.id.as_str()])
            .then(a.cost.cmp(&b.cost))
            .then(a.id.cmp(&b.id))
    });

    let mut left = election.budget();
    let mut out = Vec::new();
    for project in order {
        if project.cost <= left {
            left -= project.cost;
            out.push(project.id.clone());
        }
    }
    out
}

/// Every non-decreasing index vector of length `picks` over `0..options`:
/// voter profiles up to reordering, since voters are interchangeable.
pub fn multisets(options: usize, picks: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; picks];
    fn rec(out: &mut Vec<Vec<usize>>, current: &mut Vec<usize>, depth: usize, from: usize, options: usize) {
        if depth == current.len() {
            out.push(current.clone());
            return;
        }
        for choice in from..options {
            current[depth] = choice;
            rec(out, current, depth + 1, choice, options);
        }
    }
    rec(&mut out, &mut current, 0, 0, options);
    out
}

/// All per-voter ballot options for `m` projects: approval subsets, or
/// cumulative point vectors handing out at most two points.
pub fn ballot_options(m: usize, vote_type: VoteType) -> Vec<Vec<(usize, u64)>> {
    match vote_type {
        VoteType::Approval => (0u32..(1 << m))
            .map(|mask| {
                (0..m)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| (i, 1))
                    .collect()
            })
            .collect(),
        VoteType::Cumulative => {
            let mut out = Vec::new();
            let mut entries = vec![0u64; m];
            fn rec(out: &mut Vec<Vec<(usize, u64)>>, entries: &mut Vec<u64>, i: usize, left: u64) {
                if i == entries.len() {
                    out.push(
                        entries
                            .iter()
                            .enumerate()
                            .filter(|&(_, &v)| v > 0)
                            .map(|(idx, &v)| (idx, v))
                            .collect(),
                    );
                    return;
                }
                for v in 0..=left {
                    entries[i] = v;
                    rec(out, entries, i + 1, left - v);
                }
                entries[i] = 0;
            }
            rec(&mut out, &mut entries, 0, 2);
            out.sort();
            out.dedup();
            out
        }
        other => panic!("no enumerated ballots for {other}"),
    }
}

/// Builds one enumerated election; the budget can be adjusted afterwards
/// without rebuilding (`election.meta.budget`).
pub fn grid_election(
    vote_type: VoteType,
    costs: &[u64],
    profile: &[Vec<(usize, u64)>],
    budget: u64,
) -> Election {
    let projects: Vec<Project> = costs
        .iter()
        .enumerate()
        .map(|(i, &c)| Project::new(format!("p{i}"), c))
        .collect();
    let ballots: Vec<Ballot> = profile
        .iter()
        .enumerate()
        .map(|(v, entries)| {
            let id = format!("v{v}");
            match vote_type {
                VoteType::Approval => {
                    Ballot::approval(id, entries.iter().map(|&(i, _)| format!("p{i}")))
                }
                _ => Ballot::points(id, entries.iter().map(|&(i, w)| (format!("p{i}"), w))),
            }
        })
        .collect();
    Election::new(
        ElectionMeta::new(budget, vote_type),
        BallotRules::unconstrained(vote_type),
        projects,
        ballots,
    )
}

/// Recomputes utilities; separate fn so call sites read clearly.
pub fn profile_of(election: &Election) -> UtilityProfile {
    utilities(election).expect("enumerated ballots are valid")
}
