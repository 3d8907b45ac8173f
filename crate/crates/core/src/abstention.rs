//! Abstention simulation: remove a sampled share of voters, give a share of
//! them back as imputed ballots, and measure how much each rule's outcome
//! moves.
//!
//! All sampling is driven by ChaCha8 streams derived from the scenario seed
//! and the cell's rates, so grids are reproducible and independent of thread
//! scheduling. Dropped voters shrink the electorate: equal-shares endowments
//! are recomputed from the effective ballot count.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ballots::{utilities, validate_ballot, Ballot, BallotContent, UtilityProfile};
use crate::metrics::jaccard;
use crate::model::{Election, VoteType};
use crate::rules::{run_rule, Outcome, RuleConfig, RuleError, RuleKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    /// Copy the true ballot, perturbing each entry with probability `bias`.
    NoisyCopy,
    /// Sample fresh ballots from the participants' aggregate choices.
    PopularityPrior,
    /// Copy the ballot of the most similar participant.
    NearestProfile,
    /// Look imputed ballots up in an external table (e.g. persona outputs).
    Replay,
}

impl PredictorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PredictorKind::NoisyCopy => "noisy_copy",
            PredictorKind::PopularityPrior => "popularity_prior",
            PredictorKind::NearestProfile => "nearest_profile",
            PredictorKind::Replay => "replay",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "noisy_copy" | "noisy-copy" => Some(PredictorKind::NoisyCopy),
            "popularity_prior" | "popularity-prior" => Some(PredictorKind::PopularityPrior),
            "nearest_profile" | "nearest-profile" => Some(PredictorKind::NearestProfile),
            "replay" => Some(PredictorKind::Replay),
            _ => None,
        }
    }
}

impl std::fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    /// Probability of perturbing each ballot entry (noisy_copy). 0 means
    /// perfect reconstruction.
    pub bias: f64,
    /// Imputed content per voter id, required for `Replay`.
    pub replay: Option<BTreeMap<String, BallotContent>>,
}

impl PredictorConfig {
    pub fn noisy_copy(bias: f64) -> Self {
        PredictorConfig {
            kind: PredictorKind::NoisyCopy,
            bias,
            replay: None,
        }
    }

    pub fn of_kind(kind: PredictorKind) -> Self {
        PredictorConfig {
            kind,
            bias: 0.0,
            replay: None,
        }
    }

    fn check(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.bias) {
            return Err(SimError::InvalidConfig(format!(
                "bias {} outside [0, 1]",
                self.bias
            )));
        }
        if self.kind == PredictorKind::Replay && self.replay.is_none() {
            return Err(SimError::InvalidConfig(
                "replay predictor needs a replay table".to_string(),
            ));
        }
        Ok(())
    }
}

/// One point of the simulation grid. The seed fully determines all sampling.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub abstention_rate: f64,
    pub representation_rate: f64,
    pub predictor: PredictorConfig,
    pub seed: u64,
}

/// Outcome agreement with the full-electorate reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyResult {
    /// |W_ref ∩ W_s| / |W_ref ∪ W_s|; 1 when both sets are empty.
    pub jaccard: f64,
    /// Reference winners that survive in the scenario.
    pub preserved_winners: usize,
    /// Scenario winners that disappear when the abstainers are simply
    /// dropped instead of represented.
    pub recovered_winners: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("replay file: {0}")]
    ReplayFile(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn abstainer_rng(seed: u64, abstention_rate: f64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // The stream depends on the abstention level only, so every
    // representation level sees the same abstainer set.
    rng.set_stream(abstention_rate.to_bits() ^ 0xF00D_F00D_F00D_F00D);
    rng
}

fn cell_rng(seed: u64, abstention_rate: f64, representation_rate: f64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(abstention_rate.to_bits().rotate_left(17) ^ representation_rate.to_bits());
    rng
}

fn round_half_up(x: f64) -> usize {
    x.round() as usize
}

/// Splits voters into participants and abstainers: a uniform sample without
/// replacement of round(rate·n) voters abstains. Both halves come back as
/// sorted ballot indices. Deterministic given the seed.
pub fn sample_abstainers(election: &Election, rate: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = abstainer_rng(seed, rate);
    sample_abstainers_with(&mut rng, election.ballots.len(), rate)
}

fn sample_abstainers_with(rng: &mut ChaCha8Rng, n: usize, rate: f64) -> (Vec<usize>, Vec<usize>) {
    let rate = rate.clamp(0.0, 1.0);
    let k = round_half_up(rate * n as f64).min(n);
    let mut abstainers: Vec<usize> = index::sample(rng, n, k).into_iter().collect();
    abstainers.sort_unstable();
    let abstainer_set: BTreeSet<usize> = abstainers.iter().copied().collect();
    let participants: Vec<usize> = (0..n).filter(|i| !abstainer_set.contains(i)).collect();
    (participants, abstainers)
}

/// Produces one ballot per abstainer according to the predictor. Imputed
/// ballots keep the abstainer's voter id and profile attributes.
pub fn impute_ballots(
    election: &Election,
    abstainers: &[usize],
    cfg: &PredictorConfig,
    seed: u64,
) -> Result<Vec<Ballot>, SimError> {
    cfg.check()?;
    let abstainer_set: BTreeSet<usize> = abstainers.iter().copied().collect();
    let participants: Vec<usize> = (0..election.ballots.len())
        .filter(|i| !abstainer_set.contains(i))
        .collect();
    let profile = utilities(election).map_err(RuleError::from)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    impute_with(election, &profile, &participants, abstainers, cfg, &mut rng)
}

fn impute_with(
    election: &Election,
    profile: &UtilityProfile,
    participants: &[usize],
    abstainers: &[usize],
    cfg: &PredictorConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Ballot>, SimError> {
    let model = match cfg.kind {
        PredictorKind::PopularityPrior => Some(PopularityModel::build(election, profile, participants)),
        _ => None,
    };
    let mut out = Vec::with_capacity(abstainers.len());
    for &idx in abstainers {
        let truth = &election.ballots[idx];
        let content = match cfg.kind {
            PredictorKind::NoisyCopy => noisy_copy(election, truth, cfg.bias, rng),
            PredictorKind::PopularityPrior => match &model {
                Some(m) if !participants.is_empty() => m.sample(election, rng),
                // No participants leaves the aggregate undefined; fall back
                // to the true ballot so the scenario stays runnable.
                _ => truth.content.clone(),
            },
            PredictorKind::NearestProfile => {
                nearest_profile(election, profile, participants, idx)
            }
            PredictorKind::Replay => {
                let table = cfg.replay.as_ref().expect("checked in cfg.check");
                table
                    .get(&truth.voter_id)
                    .cloned()
                    .ok_or_else(|| {
                        SimError::InvalidConfig(format!(
                            "replay table has no ballot for voter `{}`",
                            truth.voter_id
                        ))
                    })?
            }
        };
        let mut ballot = Ballot::new(truth.voter_id.clone(), content);
        ballot.attributes = truth.attributes.clone();
        if !validate_ballot(&ballot, &election.rules).is_ok() {
            // Repair step: the perturbation schemes preserve entry counts and
            // totals, so an invalid result means no valid variation exists;
            // keep the truth.
            ballot.content = truth.content.clone();
        }
        out.push(ballot);
    }
    Ok(out)
}

/// Perturbs each entry of the true ballot independently with probability
/// `bias`, drawing the replacement uniformly from currently unchosen
/// projects. Entry counts and point values stay fixed.
fn noisy_copy(election: &Election, truth: &Ballot, bias: f64, rng: &mut ChaCha8Rng) -> BallotContent {
    let all_ids: Vec<&str> = election.projects.iter().map(|p| p.id.as_str()).collect();
    match &truth.content {
        BallotContent::Approval(set) => {
            let mut chosen = set.clone();
            for id in set {
                if !rng.gen_bool(bias) {
                    continue;
                }
                chosen.remove(id);
                let candidates: Vec<&str> = all_ids
                    .iter()
                    .filter(|c| !chosen.contains(**c) && **c != id.as_str())
                    .copied()
                    .collect();
                if candidates.is_empty() {
                    chosen.insert(id.clone());
                } else {
                    let pick = candidates[rng.gen_range(0..candidates.len())];
                    chosen.insert(pick.to_string());
                }
            }
            BallotContent::Approval(chosen)
        }
        BallotContent::Points(map) | BallotContent::Scores(map) => {
            let mut chosen = map.clone();
            for (id, value) in map {
                if !rng.gen_bool(bias) {
                    continue;
                }
                chosen.remove(id);
                let candidates: Vec<&str> = all_ids
                    .iter()
                    .filter(|c| !chosen.contains_key(**c) && **c != id.as_str())
                    .copied()
                    .collect();
                if candidates.is_empty() {
                    chosen.insert(id.clone(), *value);
                } else {
                    let pick = candidates[rng.gen_range(0..candidates.len())];
                    chosen.insert(pick.to_string(), *value);
                }
            }
            if matches!(truth.content, BallotContent::Points(_)) {
                BallotContent::Points(chosen)
            } else {
                BallotContent::Scores(chosen)
            }
        }
        BallotContent::Ranking(list) => {
            let mut ranked = list.clone();
            for pos in 0..ranked.len() {
                if !rng.gen_bool(bias) {
                    continue;
                }
                let current: BTreeSet<&str> = ranked.iter().map(String::as_str).collect();
                let candidates: Vec<&str> = all_ids
                    .iter()
                    .filter(|c| !current.contains(**c))
                    .copied()
                    .collect();
                if !candidates.is_empty() {
                    ranked[pos] = candidates[rng.gen_range(0..candidates.len())].to_string();
                }
            }
            BallotContent::Ranking(ranked)
        }
    }
}

/// Aggregate choice behavior of the participants: ballot-size and point-total
/// multisets plus per-project utility mass.
struct PopularityModel {
    sizes: Vec<usize>,
    totals: Vec<u64>,
    mass: Vec<f64>,
}

impl PopularityModel {
    fn build(election: &Election, profile: &UtilityProfile, participants: &[usize]) -> Self {
        let sizes = participants
            .iter()
            .map(|&v| election.ballots[v].content.distinct_count())
            .collect();
        let totals = participants
            .iter()
            .map(|&v| {
                election
                    .projects
                    .iter()
                    .map(|p| profile.utility(v, &p.id))
                    .sum()
            })
            .collect();
        let mass = election
            .projects
            .iter()
            .map(|p| {
                participants
                    .iter()
                    .map(|&v| profile.utility(v, &p.id) as f64)
                    .sum()
            })
            .collect();
        PopularityModel {
            sizes,
            totals,
            mass,
        }
    }

    fn sample(&self, election: &Election, rng: &mut ChaCha8Rng) -> BallotContent {
        let mut size = self.sizes[rng.gen_range(0..self.sizes.len())];
        size = size.min(election.projects.len());
        let picks = self.pick_projects(election, size, rng);
        match election.meta.vote_type {
            VoteType::Approval => {
                BallotContent::Approval(picks.into_iter().collect())
            }
            VoteType::Ordinal => BallotContent::Ranking(picks),
            VoteType::Cumulative | VoteType::Scoring => {
                let total = self.totals[rng.gen_range(0..self.totals.len())];
                let mut picks = picks;
                if (total as usize) < picks.len() {
                    picks.truncate(total.max(0) as usize);
                }
                let weights: Vec<f64> = picks
                    .iter()
                    .map(|id| {
                        let i = election.projects.iter().position(|p| p.id == *id).unwrap();
                        self.mass[i]
                    })
                    .collect();
                let mut values = apportion(total, &weights);
                if election.meta.vote_type == VoteType::Scoring {
                    if let Some((lo, hi)) = election.rules.score_range {
                        for v in &mut values {
                            *v = (*v).clamp(lo, hi);
                        }
                    }
                }
                let map: BTreeMap<String, u64> = picks.into_iter().zip(values).collect();
                if election.meta.vote_type == VoteType::Cumulative {
                    BallotContent::Points(map)
                } else {
                    BallotContent::Scores(map)
                }
            }
        }
    }

    /// Weighted sampling without replacement by aggregate mass; uniform when
    /// the remaining pool carries no mass.
    fn pick_projects(&self, election: &Election, size: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
        let mut pool: Vec<(usize, f64)> = self.mass.iter().copied().enumerate().collect();
        let mut picks = Vec::with_capacity(size);
        for _ in 0..size {
            if pool.is_empty() {
                break;
            }
            let total: f64 = pool.iter().map(|(_, w)| w).sum();
            let pos = if total <= 0.0 {
                rng.gen_range(0..pool.len())
            } else {
                let x = rng.gen_range(0.0..total);
                let mut acc = 0.0;
                let mut found = pool.len() - 1;
                for (i, (_, w)) in pool.iter().enumerate() {
                    acc += w;
                    if x < acc {
                        found = i;
                        break;
                    }
                }
                found
            };
            let (project_idx, _) = pool.remove(pos);
            picks.push(election.projects[project_idx].id.clone());
        }
        picks
    }
}

/// Largest-remainder split of `total` into one value ≥ 1 per weight,
/// summing exactly to `total` (which must be ≥ the weight count).
fn apportion(total: u64, weights: &[f64]) -> Vec<u64> {
    let s = weights.len();
    if s == 0 {
        return Vec::new();
    }
    let weight_sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = if weight_sum <= 0.0 {
        vec![total as f64 / s as f64; s]
    } else {
        weights.iter().map(|w| total as f64 * w / weight_sum).collect()
    };
    let mut values: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = values.iter().sum();
    let mut leftover = total.saturating_sub(assigned);
    let mut by_remainder: Vec<usize> = (0..s).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in &by_remainder {
        if leftover == 0 {
            break;
        }
        values[i] += 1;
        leftover -= 1;
    }
    // Everybody gets at least one unit, taken from the largest entries.
    for i in 0..s {
        while values[i] == 0 {
            let donor = (0..s)
                .max_by(|&a, &b| values[a].cmp(&values[b]).then(b.cmp(&a)))
                .expect("non-empty");
            if values[donor] <= 1 {
                values[i] = 1;
                break;
            }
            values[donor] -= 1;
            values[i] += 1;
        }
    }
    values
}

/// Copies the most similar participant's ballot: similarity is the count of
/// matching profile attributes when both sides carry them, else the cosine
/// between utility vectors (the abstainer's true ballot serves as simulation
/// ground truth). Ties go to the earliest participant; with no participants
/// the true ballot is kept.
fn nearest_profile(
    election: &Election,
    profile: &UtilityProfile,
    participants: &[usize],
    abstainer: usize,
) -> BallotContent {
    if participants.is_empty() {
        return election.ballots[abstainer].content.clone();
    }
    let target = &election.ballots[abstainer];
    let use_attributes = !target.attributes.is_empty()
        && participants
            .iter()
            .any(|&p| !election.ballots[p].attributes.is_empty());

    let vector = |v: usize| -> Vec<f64> {
        election
            .projects
            .iter()
            .map(|p| profile.utility(v, &p.id) as f64)
            .collect()
    };
    let target_vec = vector(abstainer);

    let mut best = participants[0];
    let mut best_score = f64::MIN;
    for &p in participants {
        let score = if use_attributes {
            let other = &election.ballots[p].attributes;
            target
                .attributes
                .iter()
                .filter(|(k, v)| other.get(*k) == Some(v))
                .count() as f64
        } else {
            cosine(&target_vec, &vector(p))
        };
        if score > best_score {
            best_score = score;
            best = p;
        }
    }
    election.ballots[best].content.clone()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Builds the represented election (participants plus imputed ballots for
/// the represented abstainers) and the dropped one (participants only),
/// both in original ballot order.
pub(crate) fn scenario_elections(
    election: &Election,
    scenario: &Scenario,
) -> Result<(Election, Election), SimError> {
    scenario.predictor.check()?;
    for (label, rate) in [
        ("abstention_rate", scenario.abstention_rate),
        ("representation_rate", scenario.representation_rate),
    ] {
        if !(0.0..=1.0).contains(&rate) {
            return Err(SimError::InvalidConfig(format!(
                "{label} {rate} outside [0, 1]"
            )));
        }
    }

    let mut rng = abstainer_rng(scenario.seed, scenario.abstention_rate);
    let (participants, abstainers) =
        sample_abstainers_with(&mut rng, election.ballots.len(), scenario.abstention_rate);

    let mut cell = cell_rng(
        scenario.seed,
        scenario.abstention_rate,
        scenario.representation_rate,
    );
    let k_rep = round_half_up(scenario.representation_rate * abstainers.len() as f64)
        .min(abstainers.len());
    let mut represented: Vec<usize> = index::sample(&mut cell, abstainers.len(), k_rep)
        .into_iter()
        .map(|i| abstainers[i])
        .collect();
    represented.sort_unstable();

    let profile = utilities(election).map_err(RuleError::from)?;
    let imputed = impute_with(
        election,
        &profile,
        &participants,
        &represented,
        &scenario.predictor,
        &mut cell,
    )?;
    let imputed_by_idx: BTreeMap<usize, Ballot> =
        represented.iter().copied().zip(imputed).collect();
    let participant_set: BTreeSet<usize> = participants.iter().copied().collect();

    let mut scenario_ballots = Vec::with_capacity(participants.len() + represented.len());
    let mut dropped_ballots = Vec::with_capacity(participants.len());
    for (idx, ballot) in election.ballots.iter().enumerate() {
        if participant_set.contains(&idx) {
            scenario_ballots.push(ballot.clone());
            dropped_ballots.push(ballot.clone());
        } else if let Some(imp) = imputed_by_idx.get(&idx) {
            scenario_ballots.push(imp.clone());
        }
    }
    Ok((
        election.with_ballots(scenario_ballots),
        election.with_ballots(dropped_ballots),
    ))
}

fn consistency(reference: &Outcome, scenario: &Outcome, dropped: &Outcome) -> ConsistencyResult {
    let w_ref = reference.winner_set();
    let w_s = scenario.winner_set();
    let w_d = dropped.winner_set();
    ConsistencyResult {
        jaccard: jaccard(&w_ref, &w_s),
        preserved_winners: w_ref.intersection(&w_s).count(),
        recovered_winners: w_s.difference(&w_d).count(),
    }
}

/// Runs one scenario for each rule against precomputed reference outcomes.
pub fn run_scenario(
    election: &Election,
    scenario: &Scenario,
    rules: &[RuleKind],
    rule_cfg: &RuleConfig,
) -> Result<Vec<(String, ConsistencyResult)>, SimError> {
    let reference: Vec<Outcome> = rules
        .iter()
        .map(|&kind| run_rule(kind, election, rule_cfg))
        .collect::<Result<_, _>>()?;
    let results = scenario_results(election, scenario, rules, rule_cfg, &reference)?;
    Ok(rules
        .iter()
        .map(|k| k.as_str().to_string())
        .zip(results)
        .collect())
}

fn scenario_results(
    election: &Election,
    scenario: &Scenario,
    rules: &[RuleKind],
    rule_cfg: &RuleConfig,
    reference: &[Outcome],
) -> Result<Vec<ConsistencyResult>, SimError> {
    let (scenario_e, dropped_e) = scenario_elections(election, scenario)?;
    let mut results = Vec::with_capacity(rules.len());
    for (i, &kind) in rules.iter().enumerate() {
        let w_s = run_rule(kind, &scenario_e, rule_cfg)?;
        let w_d = run_rule(kind, &dropped_e, rule_cfg)?;
        results.push(consistency(&reference[i], &w_s, &w_d));
    }
    Ok(results)
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub abstention_levels: Vec<f64>,
    pub representation_levels: Vec<f64>,
    pub predictor: PredictorConfig,
    pub seeds: Vec<u64>,
    pub rules: Vec<RuleKind>,
    pub rule_config: RuleConfig,
}

/// Seed-averaged consistency for one (rule, abstention, representation) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub rule: String,
    pub abstention: f64,
    pub representation: f64,
    pub seed_count: usize,
    pub mean_jaccard: f64,
    /// Sample standard deviation across seeds (0 for a single seed).
    pub sd_jaccard: f64,
    pub mean_preserved: f64,
    pub mean_recovered: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyGrid {
    /// Reference winner count per rule on the full electorate.
    pub reference_winner_counts: BTreeMap<String, usize>,
    pub cells: Vec<GridCell>,
}

impl ConsistencyGrid {
    /// Mean of `mean_jaccard` over all cells of one rule.
    pub fn aggregate_mean_jaccard(&self, rule: &str) -> Option<f64> {
        let values: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.rule == rule)
            .map(|c| c.mean_jaccard)
            .collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    }
}

/// Evaluates the whole abstention × representation grid for every rule and
/// seed. Cells run in parallel; per-cell random streams are derived from the
/// seed and the cell's rates, so scheduling cannot change any result.
pub fn run_grid(election: &Election, cfg: &GridConfig) -> Result<ConsistencyGrid, SimError> {
    if cfg.abstention_levels.is_empty()
        || cfg.representation_levels.is_empty()
        || cfg.seeds.is_empty()
        || cfg.rules.is_empty()
    {
        return Err(SimError::InvalidConfig(
            "grid needs abstention levels, representation levels, seeds and rules".to_string(),
        ));
    }
    cfg.predictor.check()?;

    let reference: Vec<Outcome> = cfg
        .rules
        .iter()
        .map(|&kind| run_rule(kind, election, &cfg.rule_config))
        .collect::<Result<_, _>>()?;

    let mut jobs = Vec::new();
    for &a in &cfg.abstention_levels {
        for &r in &cfg.representation_levels {
            for &seed in &cfg.seeds {
                jobs.push((a, r, seed));
            }
        }
    }
    let per_job: Vec<Vec<ConsistencyResult>> = jobs
        .par_iter()
        .map(|&(a, r, seed)| {
            let scenario = Scenario {
                abstention_rate: a,
                representation_rate: r,
                predictor: cfg.predictor.clone(),
                seed,
            };
            scenario_results(election, &scenario, &cfg.rules, &cfg.rule_config, &reference)
        })
        .collect::<Result<_, _>>()?;

    let seeds = cfg.seeds.len();
    let r_levels = cfg.representation_levels.len();
    let mut cells = Vec::new();
    for (rule_idx, kind) in cfg.rules.iter().enumerate() {
        for (ai, &a) in cfg.abstention_levels.iter().enumerate() {
            for (ri, &r) in cfg.representation_levels.iter().enumerate() {
                let base = (ai * r_levels + ri) * seeds;
                let samples: Vec<&ConsistencyResult> = (0..seeds)
                    .map(|si| &per_job[base + si][rule_idx])
                    .collect();
                let mean = |f: &dyn Fn(&ConsistencyResult) -> f64| -> f64 {
                    samples.iter().map(|s| f(s)).sum::<f64>() / samples.len() as f64
                };
                let mean_jaccard = mean(&|s| s.jaccard);
                let sd_jaccard = if samples.len() < 2 {
                    0.0
                } else {
                    let var = samples
                        .iter()
                        .map(|s| (s.jaccard - mean_jaccard).powi(2))
                        .sum::<f64>()
                        / (samples.len() - 1) as f64;
                    var.sqrt()
                };
                cells.push(GridCell {
                    rule: kind.as_str().to_string(),
                    abstention: a,
                    representation: r,
                    seed_count: seeds,
                    mean_jaccard,
                    sd_jaccard,
                    mean_preserved: mean(&|s| s.preserved_winners as f64),
                    mean_recovered: mean(&|s| s.recovered_winners as f64),
                });
            }
        }
    }

    let reference_winner_counts = cfg
        .rules
        .iter()
        .zip(&reference)
        .map(|(k, o)| (k.as_str().to_string(), o.winners.len()))
        .collect();
    Ok(ConsistencyGrid {
        reference_winner_counts,
        cells,
    })
}

/// Reads an imputation replay table: CSV with columns `voter_id`, `vote` and
/// optionally `points`, the vote and points lists using the same
/// comma-separated syntax as `.pb` VOTES rows.
pub fn load_replay(
    path: &Path,
    vote_type: VoteType,
) -> Result<BTreeMap<String, BallotContent>, SimError> {
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let voter_col = col("voter_id").ok_or_else(|| {
        SimError::InvalidConfig("replay table needs a voter_id column".to_string())
    })?;
    let vote_col = col("vote")
        .ok_or_else(|| SimError::InvalidConfig("replay table needs a vote column".to_string()))?;
    let points_col = col("points");

    let mut table = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let voter = record
            .get(voter_col)
            .unwrap_or_default()
            .to_string();
        let vote_field = record.get(vote_col).unwrap_or_default();
        let ids: Vec<String> = if vote_field.is_empty() {
            Vec::new()
        } else {
            vote_field.split(',').map(str::to_string).collect()
        };
        let content = match vote_type {
            VoteType::Approval => BallotContent::Approval(ids.into_iter().collect()),
            VoteType::Ordinal => BallotContent::Ranking(ids),
            VoteType::Cumulative | VoteType::Scoring => {
                let points_field = points_col
                    .and_then(|c| record.get(c))
                    .unwrap_or_default();
                let points: Vec<u64> = if points_field.is_empty() {
                    Vec::new()
                } else {
                    points_field
                        .split(',')
                        .map(|p| {
                            p.trim().parse::<u64>().map_err(|_| {
                                SimError::InvalidConfig(format!(
                                    "replay points `{p}` is not an integer"
                                ))
                            })
                        })
                        .collect::<Result<_, _>>()?
                };
                if points.len() != ids.len() {
                    return Err(SimError::InvalidConfig(format!(
                        "replay row for `{voter}` has {} votes but {} points",
                        ids.len(),
                        points.len()
                    )));
                }
                let map: BTreeMap<String, u64> = ids.into_iter().zip(points).collect();
                if vote_type == VoteType::Cumulative {
                    BallotContent::Points(map)
                } else {
                    BallotContent::Scores(map)
                }
            }
        };
        table.insert(voter, content);
    }
    Ok(table)
}
