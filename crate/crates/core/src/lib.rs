//! Core library for tallying participatory-budgeting elections.
//!
//! The crate reads Pabulib `.pb` instances, validates ballots, runs the
//! selection rules (utilitarian greedy, the Method of Equal Shares with and
//! without completion, sequential Phragmén), computes outcome metrics, and
//! simulates abstention with imputed ballots.

pub mod abstention;
pub mod ballots;
pub mod metrics;
pub mod model;
pub mod pabulib;
pub mod rules;
pub mod synthetic;

#[cfg(test)]
pub(crate) mod testutil;

pub use abstention::{
    impute_ballots, load_replay, run_grid, run_scenario, sample_abstainers, ConsistencyGrid,
    ConsistencyResult, GridCell, GridConfig, PredictorConfig, PredictorKind, Scenario, SimError,
};
pub use ballots::{
    modified_borda_points, utilities, validate_ballot, Ballot, BallotContent, BallotRules,
    UtilityProfile, ValidationOutcome, Violation,
};
pub use metrics::{
    compare_rules, rule_metrics, ComparisonReport, DistrictCoverage, MetricsError, RuleMetrics,
};
pub use model::{Amount, Election, ElectionMeta, ModelError, Project, VoteType};
pub use pabulib::{
    load_directory, load_file, parse_election, parse_election_with, serialize_election,
    DirectoryLoad, LoadError, LoadFailure, LoadedElection, ParseError, ParseMode, ParseOptions,
    ParseWarning, Parsed,
};
pub use rules::{
    compute_rho, equal_shares_add1u, method_of_equal_shares, phragmen_sequential, run_rule,
    utilitarian_greedy, Add1uConfig, Outcome, RuleConfig, RuleError, RuleKind, Selection,
    SelectionKey, TieBreak,
};
pub use synthetic::{synthetic_election, SyntheticSpec};
