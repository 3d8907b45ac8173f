//! Selection rules: utilitarian greedy, the Method of Equal Shares (base and
//! with Add1U completion), and sequential Phragmén.
//!
//! All rules are pure functions of the election and a utility profile, so a
//! batch runner may evaluate election/rule pairs in parallel. Ties are broken
//! the same way everywhere: rule-specific key first, then lower cost, then
//! lexicographic project id. Money stays integral; ρ values, balances and
//! purchase times are exact rationals.

mod greedy;
mod mes;
mod phragmen;

pub use greedy::utilitarian_greedy;
pub use mes::{compute_rho, equal_shares_add1u, method_of_equal_shares, Add1uConfig};
pub use phragmen::phragmen_sequential;

use num::bigint::BigInt;
use num::rational::BigRational;

use crate::ballots::{utilities, UtilityError, UtilityProfile};
use crate::model::{Amount, Election};

/// Ordering preference among equal-score projects in greedy traversal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Cheaper project first, then lexicographic id.
    #[default]
    CheaperFirst,
    /// Costlier project first, then lexicographic id.
    CostlierFirst,
    /// Keep the input file order.
    FileOrder,
}

impl TieBreak {
    pub fn as_str(self) -> &'static str {
        match self {
            TieBreak::CheaperFirst => "cheaper-first",
            TieBreak::CostlierFirst => "costlier-first",
            TieBreak::FileOrder => "file-order",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cheaper-first" | "cheaper_first" => Some(TieBreak::CheaperFirst),
            "costlier-first" | "costlier_first" => Some(TieBreak::CostlierFirst),
            "file-order" | "file_order" => Some(TieBreak::FileOrder),
            _ => None,
        }
    }
}

impl std::fmt::Display for TieBreak {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleKind {
    Greedy,
    Mes,
    MesAdd1u,
    Phragmen,
}

impl RuleKind {
    pub const ALL: [RuleKind; 4] = [
        RuleKind::Greedy,
        RuleKind::Mes,
        RuleKind::MesAdd1u,
        RuleKind::Phragmen,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::Greedy => "greedy",
            RuleKind::Mes => "mes",
            RuleKind::MesAdd1u => "mes-add1u",
            RuleKind::Phragmen => "phragmen",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "greedy" => Some(RuleKind::Greedy),
            "mes" => Some(RuleKind::Mes),
            "mes-add1u" | "mes_add1u" | "add1u" => Some(RuleKind::MesAdd1u),
            "phragmen" => Some(RuleKind::Phragmen),
            _ => None,
        }
    }
}

impl std::fmt::Display for RuleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-round selection key, recorded in the audit trail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectionKey {
    /// Total utility (greedy and completion phases).
    Score(u128),
    /// Price per utility unit at selection (equal shares).
    Rho(BigRational),
    /// Time of purchase (Phragmén).
    PurchaseTime(BigRational),
}

/// One selected project with everything needed to audit the decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub project: String,
    pub round: usize,
    pub cost: Amount,
    pub key: SelectionKey,
    /// True for winners added by Add1U's utilitarian completion phase.
    pub completion: bool,
    /// Voter-indexed payments, empty for greedy. Equal-shares charges sum to
    /// the project cost exactly; Phragmén records the balances spent.
    pub charges: Vec<(usize, BigRational)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub rule: String,
    /// Winning project ids in selection order.
    pub winners: Vec<String>,
    pub spend: Amount,
    pub audit: Vec<Selection>,
    /// Per-voter endowment actually used (equal-shares rules only; for Add1U,
    /// the endowment of the final kept iteration).
    pub endowment_used: Option<BigRational>,
}

impl Outcome {
    pub fn winner_set(&self) -> std::collections::BTreeSet<&str> {
        self.winners.iter().map(String::as_str).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("election has no ballots")]
    NoBallots,
    #[error(transparent)]
    InvalidBallot(#[from] UtilityError),
}

/// Knobs shared by the rule implementations; the defaults reproduce the
/// documented behavior of every rule.
#[derive(Debug, Clone)]
pub struct RuleConfig {
    pub tiebreak: TieBreak,
    pub add1u: Add1uConfig,
    /// Per-voter endowment for plain `mes`; defaults to budget/ballots as an
    /// exact rational.
    pub mes_endowment: Option<Amount>,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            tiebreak: TieBreak::default(),
            add1u: Add1uConfig::default(),
            mes_endowment: None,
        }
    }
}

/// Runs one rule over an election, deriving utilities from the ballots.
pub fn run_rule(kind: RuleKind, election: &Election, cfg: &RuleConfig) -> Result<Outcome, RuleError> {
    let profile = utilities(election)?;
    run_rule_with_profile(kind, election, &profile, cfg)
}

pub fn run_rule_with_profile(
    kind: RuleKind,
    election: &Election,
    profile: &UtilityProfile,
    cfg: &RuleConfig,
) -> Result<Outcome, RuleError> {
    match kind {
        RuleKind::Greedy => Ok(utilitarian_greedy(election, profile, cfg.tiebreak)),
        RuleKind::Mes => {
            let endowment = match cfg.mes_endowment {
                Some(amount) => ratio(amount),
                None => {
                    if election.ballots.is_empty() {
                        return Err(RuleError::NoBallots);
                    }
                    ratio(election.budget()) / BigRational::from_integer(BigInt::from(election.ballots.len()))
                }
            };
            Ok(method_of_equal_shares(election, profile, &endowment, "mes"))
        }
        RuleKind::MesAdd1u => equal_shares_add1u(election, profile, cfg.tiebreak, &cfg.add1u),
        RuleKind::Phragmen => phragmen_sequential(election, profile),
    }
}

pub(crate) fn ratio(amount: Amount) -> BigRational {
    BigRational::from_integer(BigInt::from(amount))
}

/// Supporters of each project: `(voter index, positive utility)` pairs, in
/// ballot order, indexed like `election.projects`.
pub(crate) fn supporters_by_project(
    election: &Election,
    profile: &UtilityProfile,
) -> Vec<Vec<(usize, u64)>> {
    election
        .projects
        .iter()
        .map(|p| {
            (0..election.ballots.len())
                .filter_map(|v| {
                    let u = profile.utility(v, &p.id);
                    (u > 0).then_some((v, u))
                })
                .collect()
        })
        .collect()
}

/// Total utility per project, indexed like `election.projects`.
pub(crate) fn total_utilities(election: &Election, profile: &UtilityProfile) -> Vec<u128> {
    election
        .projects
        .iter()
        .map(|p| {
            (0..election.ballots.len())
                .map(|v| profile.utility(v, &p.id) as u128)
                .sum()
        })
        .collect()
}
