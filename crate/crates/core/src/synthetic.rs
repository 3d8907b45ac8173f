//! Deterministic generator for synthetic elections, used to build committed
//! test corpora and benchmark inputs without shipping third-party data.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ballots::{Ballot, BallotContent, BallotRules};
use crate::model::{Amount, Election, ElectionMeta, Project, VoteType};

/// Impact-area vocabulary for generated projects.
const CATEGORY_POOL: [&str; 9] = [
    "education",
    "public transit",
    "health",
    "welfare",
    "public space",
    "urban greenery",
    "culture",
    "sport",
    "environmental protection",
];

#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub vote_type: VoteType,
    pub projects: usize,
    pub voters: usize,
    pub budget: Amount,
    /// Number of district labels to spread projects over; 0 for none.
    pub districts: usize,
    /// Number of impact-area labels drawn from a fixed pool; 0 for none.
    pub categories: usize,
    pub min_ballot: usize,
    pub max_ballot: usize,
    /// Exact points each cumulative ballot distributes.
    pub points_total: u64,
    /// Upper score for scoring ballots (lower is 1).
    pub score_max: u64,
    /// Attach a coarse demographic attribute to each voter.
    pub with_attributes: bool,
}

impl SyntheticSpec {
    pub fn new(seed: u64, vote_type: VoteType) -> Self {
        SyntheticSpec {
            seed,
            vote_type,
            projects: 8,
            voters: 40,
            budget: 100_000,
            districts: 0,
            categories: 0,
            min_ballot: 1,
            max_ballot: 4,
            points_total: 10,
            score_max: 5,
            with_attributes: false,
        }
    }
}

/// Builds an election from the spec. The same spec always yields the same
/// election, byte for byte.
pub fn synthetic_election(spec: &SyntheticSpec) -> Election {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let max_ballot = spec.max_ballot.min(spec.projects).max(spec.min_ballot);
    let min_ballot = spec.min_ballot.min(max_ballot);

    let mut projects = Vec::with_capacity(spec.projects);
    let mut weights = Vec::with_capacity(spec.projects);
    for i in 0..spec.projects {
        let cost = rng.gen_range(spec.budget / 20..=spec.budget / 3).max(1);
        let mut p = Project::new(format!("p{i:02}"), cost);
        if spec.districts > 0 {
            p.district = Some(format!("d{}", i % spec.districts));
        }
        if spec.categories > 0 {
            let pool = spec.categories.min(CATEGORY_POOL.len());
            let first = rng.gen_range(0..pool);
            p.categories.insert(CATEGORY_POOL[first].to_string());
            if pool > 1 && rng.gen_bool(0.3) {
                let second = rng.gen_range(0..pool);
                p.categories.insert(CATEGORY_POOL[second].to_string());
            }
        }
        projects.push(p);
        let w: u32 = rng.gen_range(1..=100);
        weights.push((w as f64).powi(2));
    }

    let mut ballots = Vec::with_capacity(spec.voters);
    for v in 0..spec.voters {
        let size = rng.gen_range(min_ballot..=max_ballot);
        let picks = weighted_picks(&projects, &weights, size, &mut rng);
        let content = match spec.vote_type {
            VoteType::Approval => BallotContent::Approval(picks.into_iter().collect()),
            VoteType::Ordinal => BallotContent::Ranking(picks),
            VoteType::Cumulative => {
                let split = random_split(spec.points_total, picks.len(), &mut rng);
                BallotContent::Points(picks.into_iter().zip(split).collect())
            }
            VoteType::Scoring => {
                let scores: BTreeMap<String, u64> = picks
                    .into_iter()
                    .map(|id| (id, rng.gen_range(1..=spec.score_max.max(1))))
                    .collect();
                BallotContent::Scores(scores)
            }
        };
        let mut ballot = Ballot::new(format!("v{v:03}"), content);
        if spec.with_attributes {
            ballot
                .attributes
                .insert("group".to_string(), format!("g{}", rng.gen_range(0..4)));
        }
        ballots.push(ballot);
    }

    let mut meta = ElectionMeta::new(spec.budget, spec.vote_type);
    meta.description = Some(format!("synthetic seed {}", spec.seed));
    meta.min_length = Some(min_ballot);
    meta.max_length = Some(max_ballot);
    let mut rules = BallotRules::unconstrained(spec.vote_type);
    rules.min_distinct = Some(min_ballot);
    rules.max_distinct = Some(max_ballot);
    if spec.vote_type == VoteType::Cumulative {
        meta.max_sum_points = Some(spec.points_total);
        meta.extra
            .insert("min_sum_points".to_string(), spec.points_total.to_string());
        rules.total_points = Some(spec.points_total);
        rules.require_exact_total = true;
    }
    if spec.vote_type == VoteType::Scoring {
        rules.score_range = Some((1, spec.score_max.max(1)));
        meta.extra.insert("min_points".to_string(), "1".to_string());
        meta.extra
            .insert("max_points".to_string(), spec.score_max.max(1).to_string());
    }
    Election::new(meta, rules, projects, ballots)
}

fn weighted_picks(
    projects: &[Project],
    weights: &[f64],
    size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    let mut pool: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
    let mut picks = Vec::with_capacity(size);
    for _ in 0..size.min(pool.len()) {
        let total: f64 = pool.iter().map(|(_, w)| w).sum();
        let x = rng.gen_range(0.0..total);
        let mut acc = 0.0;
        let mut pos = pool.len() - 1;
        for (i, (_, w)) in pool.iter().enumerate() {
            acc += w;
            if x < acc {
                pos = i;
                break;
            }
        }
        let (idx, _) = pool.remove(pos);
        picks.push(projects[idx].id.clone());
    }
    picks
}

/// Splits `total` into `parts` values ≥ 1 summing exactly to `total`.
fn random_split(total: u64, parts: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
    if parts == 0 {
        return Vec::new();
    }
    let mut values = vec![1u64; parts];
    let mut rest = total.saturating_sub(parts as u64);
    while rest > 0 {
        let i = rng.gen_range(0..parts);
        values[i] += 1;
        rest -= 1;
    }
    values
}
