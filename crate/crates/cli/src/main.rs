//! `pbvote`: tally, compare and stress-test participatory budgeting elections
//! stored as Pabulib `.pb` files.
//!
//! Exit codes: 0 on success, 1 when an input fails validation or a rule
//! cannot run, 2 on I/O and usage errors.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use pbvote_core::{
    compare_rules, load_directory, load_file, load_replay, run_grid, run_rule, Add1uConfig,
    ComparisonReport, GridConfig, LoadError, LoadedElection, Outcome, ParseMode, PredictorConfig,
    PredictorKind, RuleConfig, RuleError, RuleKind, SelectionKey, SimError, TieBreak,
};

const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default corpus directory for `compare`.
const CORPUS_DIR_VAR: &str = "PBVOTE_CORPUS_DIR";

#[derive(Parser)]
#[command(
    name = "pbvote",
    version,
    about = "Participatory budgeting: validate elections, tally rules, compare outcomes, simulate abstention"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Parse .pb files (or directories of them) and report violations
    Validate {
        /// Files or directories to check
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Repair recoverable problems instead of rejecting the file
        #[arg(long)]
        lenient: bool,
    },
    /// Run one voting rule over an election and print the outcome
    Tally {
        path: PathBuf,
        /// greedy | mes | mes-add1u | phragmen
        #[arg(long, value_parser = parse_rule)]
        rule: RuleKind,
        /// Report format
        #[arg(long, value_enum, default_value = "json")]
        out: OutFormat,
        /// Write the report to this file (atomically) instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        rule_opts: RuleOpts,
    },
    /// Run several rules over an election (or a corpus directory) and
    /// report per-election metrics plus corpus means
    Compare {
        /// Election file or corpus directory; defaults to $PBVOTE_CORPUS_DIR
        path: Option<PathBuf>,
        /// Comma-separated rules to compare
        #[arg(long, value_parser = parse_rule, value_delimiter = ',',
              default_values = ["greedy", "mes-add1u"])]
        rules: Vec<RuleKind>,
        #[arg(long, value_enum, default_value = "json")]
        out: OutFormat,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        rule_opts: RuleOpts,
    },
    /// Sweep an abstention × representation grid and report outcome
    /// consistency per rule
    Simulate {
        path: PathBuf,
        /// Comma-separated abstention rates in [0, 1]
        #[arg(long, value_delimiter = ',', required = true)]
        abstention: Vec<f64>,
        /// Comma-separated representation rates in [0, 1]
        #[arg(long, value_delimiter = ',', required = true)]
        representation: Vec<f64>,
        /// noisy_copy | popularity_prior | nearest_profile | replay
        #[arg(long, value_parser = parse_predictor, default_value = "noisy_copy")]
        predictor: PredictorKind,
        /// Per-entry perturbation probability for noisy_copy
        #[arg(long, default_value_t = 0.0)]
        bias: f64,
        /// CSV table of imputed ballots (for --predictor replay)
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Number of seeds per grid cell
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// First seed; the run uses seed-base .. seed-base + seeds
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        #[arg(long, value_parser = parse_rule, value_delimiter = ',',
              default_values = ["greedy", "mes-add1u"])]
        rules: Vec<RuleKind>,
        /// Write the grid CSV here (plus a .manifest.json sidecar)
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        rule_opts: RuleOpts,
    },
}

/// Rule knobs shared by tally, compare and simulate.
#[derive(clap::Args)]
struct RuleOpts {
    /// cheaper-first | costlier-first | file-order
    #[arg(long, value_parser = parse_tiebreak, default_value = "cheaper-first")]
    tiebreak: TieBreak,
    /// Fixed per-voter endowment for plain mes (minor units); defaults to
    /// budget/ballots
    #[arg(long)]
    endowment: Option<u64>,
    /// Start the Add1U climb from floor(budget/ballots)
    #[arg(long)]
    floor_base: bool,
    /// Probe Add1U increments one by one instead of doubling + bisection
    #[arg(long)]
    linear_search: bool,
    /// Stop the Add1U climb once endowment·ballots exceeds this budget
    /// multiple
    #[arg(long, default_value_t = 2)]
    cap_multiple: u64,
}

impl RuleOpts {
    fn to_config(&self) -> Result<RuleConfig, Fail> {
        if self.cap_multiple == 0 {
            return Err(Fail::usage("--cap-multiple must be at least 1"));
        }
        Ok(RuleConfig {
            tiebreak: self.tiebreak,
            add1u: Add1uConfig {
                floor_base: self.floor_base,
                cap_multiple: self.cap_multiple,
                linear_search: self.linear_search,
            },
            mes_endowment: self.endowment,
        })
    }
}

fn parse_rule(s: &str) -> Result<RuleKind, String> {
    RuleKind::parse(s).ok_or_else(|| format!("unknown rule `{s}` (greedy, mes, mes-add1u, phragmen)"))
}

fn parse_tiebreak(s: &str) -> Result<TieBreak, String> {
    TieBreak::parse(s)
        .ok_or_else(|| format!("unknown tie-break `{s}` (cheaper-first, costlier-first, file-order)"))
}

fn parse_predictor(s: &str) -> Result<PredictorKind, String> {
    PredictorKind::parse(s).ok_or_else(|| {
        format!("unknown predictor `{s}` (noisy_copy, popularity_prior, nearest_profile, replay)")
    })
}

/// A command failure carrying its process exit code.
struct Fail {
    code: u8,
    message: String,
}

impl Fail {
    fn domain(message: impl Into<String>) -> Self {
        Fail { code: 1, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        Fail { code: 2, message: message.into() }
    }

    fn usage(message: impl Into<String>) -> Self {
        Fail { code: 2, message: message.into() }
    }
}

impl From<LoadError> for Fail {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Parse(_) => Fail::domain(e.to_string()),
            LoadError::PathNotFound(_) | LoadError::Io(_) => Fail::io(e.to_string()),
        }
    }
}

impl From<RuleError> for Fail {
    fn from(e: RuleError) -> Self {
        Fail::domain(e.to_string())
    }
}

impl From<SimError> for Fail {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_) => Fail::usage(e.to_string()),
            SimError::Rule(_) => Fail::domain(e.to_string()),
            SimError::ReplayFile(_) | SimError::Io(_) => Fail::io(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::io(e.to_string())
    }
}

impl From<serde_json::Error> for Fail {
    fn from(e: serde_json::Error) -> Self {
        Fail::io(format!("serializing report: {e}"))
    }
}

/// Everything needed to reproduce a run: identical manifests (timestamp
/// aside) imply identical report bodies.
#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    timestamp_unix: u64,
    /// Sha-256 of every input file, keyed by path as given.
    inputs: Vec<InputDigest>,
    rules: Vec<String>,
    tiebreak: String,
    add1u_base: &'static str,
    add1u_search: &'static str,
    add1u_cap_multiple: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mes_endowment: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    predictor: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bias: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    abstention: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    representation: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    seeds: Vec<u64>,
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

impl RunManifest {
    fn new(command: &'static str, cfg: &RuleConfig, rules: &[RuleKind]) -> Self {
        RunManifest {
            tool: "pbvote",
            version: env!("CARGO_PKG_VERSION"),
            command,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            inputs: Vec::new(),
            rules: rules.iter().map(|r| r.to_string()).collect(),
            tiebreak: cfg.tiebreak.to_string(),
            add1u_base: if cfg.add1u.floor_base { "floor" } else { "exact" },
            add1u_search: if cfg.add1u.linear_search { "linear" } else { "geometric" },
            add1u_cap_multiple: cfg.add1u.cap_multiple,
            mes_endowment: cfg.mes_endowment,
            predictor: None,
            bias: None,
            abstention: Vec::new(),
            representation: Vec::new(),
            seeds: Vec::new(),
        }
    }

    fn add_input(&mut self, path: &Path) -> Result<(), Fail> {
        let bytes = std::fs::read(path)
            .map_err(|e| Fail::io(format!("{}: {e}", path.display())))?;
        let mut hex = String::with_capacity(64);
        for b in Sha256::digest(&bytes) {
            hex.push_str(&format!("{b:02x}"));
        }
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256: hex });
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Fail> {
    match command {
        Command::Validate { paths, lenient } => cmd_validate(&paths, lenient),
        Command::Tally { path, rule, out, output, rule_opts } => {
            cmd_tally(&path, rule, out, output.as_deref(), &rule_opts)
        }
        Command::Compare { path, rules, out, output, rule_opts } => {
            cmd_compare(path, &rules, out, output.as_deref(), &rule_opts)
        }
        Command::Simulate {
            path,
            abstention,
            representation,
            predictor,
            bias,
            replay,
            seeds,
            seed_base,
            rules,
            output,
            rule_opts,
        } => cmd_simulate(SimulateArgs {
            path,
            abstention,
            representation,
            predictor,
            bias,
            replay,
            seeds,
            seed_base,
            rules,
            output,
            rule_opts,
        }),
    }
}

// ---------------------------------------------------------------- validate

fn cmd_validate(paths: &[PathBuf], lenient: bool) -> Result<(), Fail> {
    let mode = if lenient { ParseMode::Lenient } else { ParseMode::Strict };
    let mut io_failure = false;
    let mut parse_failure = false;

    for path in paths {
        if path.is_dir() {
            match load_directory(path, mode) {
                Ok(load) => {
                    for entry in &load.entries {
                        report_ok(entry);
                    }
                    for failure in &load.failures {
                        report_failure(&failure.path, &failure.error, &mut io_failure, &mut parse_failure);
                    }
                }
                Err(e) => report_failure(path, &e, &mut io_failure, &mut parse_failure),
            }
        } else {
            match load_file(path, mode) {
                Ok(entry) => report_ok(&entry),
                Err(e) => report_failure(path, &e, &mut io_failure, &mut parse_failure),
            }
        }
    }

    if io_failure {
        Err(Fail::io("some inputs could not be read"))
    } else if parse_failure {
        Err(Fail::domain("some inputs failed validation"))
    } else {
        Ok(())
    }
}

fn report_ok(entry: &LoadedElection) {
    let e = &entry.election;
    print!(
        "{}: ok ({} projects, {} ballots",
        entry.path.display(),
        e.projects.len(),
        e.ballots.len()
    );
    if entry.warnings.is_empty() {
        println!(")");
    } else {
        let n = entry.warnings.len();
        println!(", {n} warning{})", if n == 1 { "" } else { "s" });
        for w in &entry.warnings {
            println!("{}: line {}: warning: {}", entry.path.display(), w.line, w.message);
        }
    }
}

fn report_failure(path: &Path, error: &LoadError, io: &mut bool, parse: &mut bool) {
    println!("{}: error: {error}", path.display());
    match error {
        LoadError::Parse(_) => *parse = true,
        LoadError::PathNotFound(_) | LoadError::Io(_) => *io = true,
    }
}

// ------------------------------------------------------------------- tally

#[derive(Serialize)]
struct TallyReport {
    schema_version: u32,
    manifest: RunManifest,
    election: String,
    rule: String,
    winners: Vec<WinnerRow>,
    spend: u64,
    budget: u64,
    budget_utilization: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    endowment_used: Option<String>,
}

#[derive(Serialize)]
struct WinnerRow {
    id: String,
    cost: u64,
    key_kind: &'static str,
    key: String,
    phase: &'static str,
    round: usize,
}

fn key_parts(key: &SelectionKey) -> (&'static str, String) {
    match key {
        SelectionKey::Score(s) => ("score", s.to_string()),
        SelectionKey::Rho(r) => ("rho", r.to_string()),
        SelectionKey::PurchaseTime(t) => ("time", t.to_string()),
    }
}

fn winner_rows(outcome: &Outcome) -> Vec<WinnerRow> {
    outcome
        .audit
        .iter()
        .map(|s| {
            let (kind, value) = key_parts(&s.key);
            WinnerRow {
                id: s.project.clone(),
                cost: s.cost,
                key_kind: kind,
                key: value,
                phase: if s.completion { "completion" } else { "core" },
                round: s.round,
            }
        })
        .collect()
}

fn cmd_tally(
    path: &Path,
    rule: RuleKind,
    out: OutFormat,
    output: Option<&Path>,
    rule_opts: &RuleOpts,
) -> Result<(), Fail> {
    let cfg = rule_opts.to_config()?;
    let mut manifest = RunManifest::new("tally", &cfg, &[rule]);
    manifest.add_input(path)?;
    let loaded = load_file(path, ParseMode::Strict)?;
    let outcome = run_rule(rule, &loaded.election, &cfg)?;

    let report = TallyReport {
        schema_version: SCHEMA_VERSION,
        election: loaded.name.clone(),
        rule: outcome.rule.clone(),
        winners: winner_rows(&outcome),
        spend: outcome.spend,
        budget: loaded.election.budget(),
        budget_utilization: outcome.spend as f64 / loaded.election.budget() as f64,
        endowment_used: outcome.endowment_used.as_ref().map(|r| r.to_string()),
        manifest,
    };

    match out {
        OutFormat::Json => emit(&to_json(&report)?, output),
        OutFormat::Csv => {
            let mut w = csv_writer();
            record(&mut w, ["round", "project", "cost", "key_kind", "key", "phase"])?;
            for row in &report.winners {
                record(
                    &mut w,
                    [
                        row.round.to_string(),
                        row.id.clone(),
                        row.cost.to_string(),
                        row.key_kind.to_string(),
                        row.key.clone(),
                        row.phase.to_string(),
                    ],
                )?;
            }
            emit_csv(finish_csv(w)?, output, &report.manifest, None)
        }
    }
}

// ----------------------------------------------------------------- compare

#[derive(Serialize)]
struct CompareDocument {
    schema_version: u32,
    manifest: RunManifest,
    elections: Vec<ElectionEntry>,
    summary: CompareSummary,
}

#[derive(Serialize)]
struct ElectionEntry {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<ComparisonReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Corpus-level means over every election that produced a report.
#[derive(Serialize)]
struct CompareSummary {
    elections: usize,
    failures: usize,
    pairs: Vec<PairSummary>,
}

#[derive(Serialize)]
struct PairSummary {
    rule_a: String,
    rule_b: String,
    mean_winner_count_ratio: Option<f64>,
    mean_satisfaction_delta: Option<f64>,
    mean_representation_delta_abs: Option<f64>,
    mean_representation_delta_rel: Option<f64>,
    mean_cost_share_delta: Option<f64>,
}

#[derive(Default)]
struct MeanAcc {
    sum: f64,
    n: usize,
}

impl MeanAcc {
    fn push(&mut self, value: f64) {
        self.sum += value;
        self.n += 1;
    }

    fn push_opt(&mut self, value: Option<f64>) {
        if let Some(v) = value {
            self.push(v);
        }
    }

    fn mean(&self) -> Option<f64> {
        if self.n == 0 {
            None
        } else {
            Some(self.sum / self.n as f64)
        }
    }
}

#[derive(Default)]
struct PairAcc {
    ratio: MeanAcc,
    satisfaction: MeanAcc,
    representation_abs: MeanAcc,
    representation_rel: MeanAcc,
    cost_share: MeanAcc,
}

fn cmd_compare(
    path: Option<PathBuf>,
    rules: &[RuleKind],
    out: OutFormat,
    output: Option<&Path>,
    rule_opts: &RuleOpts,
) -> Result<(), Fail> {
    let path = path
        .or_else(|| std::env::var_os(CORPUS_DIR_VAR).map(PathBuf::from))
        .ok_or_else(|| {
            Fail::usage(format!("no input path given and {CORPUS_DIR_VAR} is not set"))
        })?;
    let cfg = rule_opts.to_config()?;
    let mut manifest = RunManifest::new("compare", &cfg, rules);

    // Load one file or a whole corpus directory; per-file failures are
    // recorded and the batch keeps going.
    let (entries, failures) = if path.is_dir() {
        let load = load_directory(&path, ParseMode::Strict)?;
        (load.entries, load.failures)
    } else {
        (vec![load_file(&path, ParseMode::Strict)?], Vec::new())
    };
    for entry in &entries {
        manifest.add_input(&entry.path)?;
    }

    let mut elections = Vec::new();
    let mut accs: BTreeMap<(String, String), PairAcc> = BTreeMap::new();
    let mut failure_count = failures.len();
    for failure in failures {
        elections.push(ElectionEntry {
            name: failure.name,
            report: None,
            error: Some(failure.error.to_string()),
        });
    }

    for entry in &entries {
        match compare_rules(&entry.election, rules, &cfg) {
            Ok(report) => {
                for pair in &report.pairwise {
                    let acc = accs
                        .entry((pair.rule_a.clone(), pair.rule_b.clone()))
                        .or_default();
                    acc.ratio.push_opt(pair.winner_count_ratio);
                    acc.satisfaction.push(pair.satisfaction_delta);
                    acc.representation_abs.push(pair.representation_delta_abs);
                    acc.representation_rel.push_opt(pair.representation_delta_rel);
                    acc.cost_share.push_opt(pair.mean_cost_share_delta);
                }
                elections.push(ElectionEntry {
                    name: entry.name.clone(),
                    report: Some(report),
                    error: None,
                });
            }
            Err(e) => {
                failure_count += 1;
                elections.push(ElectionEntry {
                    name: entry.name.clone(),
                    report: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }

    let summary = CompareSummary {
        elections: elections.len(),
        failures: failure_count,
        pairs: accs
            .iter()
            .map(|((a, b), acc)| PairSummary {
                rule_a: a.clone(),
                rule_b: b.clone(),
                mean_winner_count_ratio: acc.ratio.mean(),
                mean_satisfaction_delta: acc.satisfaction.mean(),
                mean_representation_delta_abs: acc.representation_abs.mean(),
                mean_representation_delta_rel: acc.representation_rel.mean(),
                mean_cost_share_delta: acc.cost_share.mean(),
            })
            .collect(),
    };

    let doc = CompareDocument {
        schema_version: SCHEMA_VERSION,
        manifest,
        elections,
        summary,
    };

    match out {
        OutFormat::Json => emit(&to_json(&doc)?, output),
        OutFormat::Csv => {
            let body = compare_csv(&doc)?;
            emit_csv(body, output, &doc.manifest, None)
        }
    }
}

fn compare_csv(doc: &CompareDocument) -> Result<String, Fail> {
    let mut w = csv_writer();
    record(
        &mut w,
        [
            "election",
            "rule_a",
            "rule_b",
            "winners_a",
            "winners_b",
            "winner_count_ratio",
            "winner_overlap_jaccard",
            "satisfaction_delta",
            "representation_delta_abs",
            "representation_delta_rel",
            "mean_cost_share_delta",
        ],
    )?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for entry in &doc.elections {
        let Some(report) = &entry.report else {
            record(
                &mut w,
                [
                    entry.name.clone(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    entry.error.clone().unwrap_or_default(),
                    String::new(),
                    String::new(),
                    String::new(),
                ],
            )?;
            continue;
        };
        let count_of = |rule: &str| {
            report
                .rules
                .iter()
                .find(|r| r.rule == rule)
                .map(|r| r.winners.len().to_string())
                .unwrap_or_default()
        };
        for pair in &report.pairwise {
            record(
                &mut w,
                [
                    entry.name.clone(),
                    pair.rule_a.clone(),
                    pair.rule_b.clone(),
                    count_of(&pair.rule_a),
                    count_of(&pair.rule_b),
                    opt(pair.winner_count_ratio),
                    pair.winner_overlap_jaccard.to_string(),
                    pair.satisfaction_delta.to_string(),
                    pair.representation_delta_abs.to_string(),
                    opt(pair.representation_delta_rel),
                    opt(pair.mean_cost_share_delta),
                ],
            )?;
        }
    }
    // One corpus summary row per rule pair, holding means across elections.
    for pair in &doc.summary.pairs {
        record(
            &mut w,
            [
                "(corpus mean)".to_string(),
                pair.rule_a.clone(),
                pair.rule_b.clone(),
                String::new(),
                String::new(),
                opt(pair.mean_winner_count_ratio),
                String::new(),
                opt(pair.mean_satisfaction_delta),
                opt(pair.mean_representation_delta_abs),
                opt(pair.mean_representation_delta_rel),
                opt(pair.mean_cost_share_delta),
            ],
        )?;
    }
    finish_csv(w)
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    path: PathBuf,
    abstention: Vec<f64>,
    representation: Vec<f64>,
    predictor: PredictorKind,
    bias: f64,
    replay: Option<PathBuf>,
    seeds: u64,
    seed_base: u64,
    rules: Vec<RuleKind>,
    output: Option<PathBuf>,
    rule_opts: RuleOpts,
}

#[derive(Serialize)]
struct SimulateSidecar<'a> {
    schema_version: u32,
    manifest: &'a RunManifest,
    reference_winner_counts: &'a BTreeMap<String, usize>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Fail> {
    for &rate in args.abstention.iter().chain(&args.representation) {
        if !(0.0..=1.0).contains(&rate) || !rate.is_finite() {
            return Err(Fail::usage(format!("rate {rate} is outside [0, 1]")));
        }
    }
    if !(0.0..=1.0).contains(&args.bias) {
        return Err(Fail::usage(format!("--bias {} is outside [0, 1]", args.bias)));
    }
    if args.seeds == 0 {
        return Err(Fail::usage("--seeds must be at least 1"));
    }
    if args.replay.is_some() && args.predictor != PredictorKind::Replay {
        return Err(Fail::usage("--replay only makes sense with --predictor replay"));
    }

    let cfg = args.rule_opts.to_config()?;
    let mut manifest = RunManifest::new("simulate", &cfg, &args.rules);
    manifest.add_input(&args.path)?;
    let loaded = load_file(&args.path, ParseMode::Strict)?;

    let mut predictor = PredictorConfig::of_kind(args.predictor);
    predictor.bias = args.bias;
    if args.predictor == PredictorKind::Replay {
        let replay_path = args
            .replay
            .as_deref()
            .ok_or_else(|| Fail::usage("--predictor replay needs --replay <csv>"))?;
        manifest.add_input(replay_path)?;
        predictor.replay = Some(load_replay(replay_path, loaded.election.meta.vote_type)?);
    }
    manifest.predictor = Some(args.predictor.to_string());
    manifest.bias = Some(args.bias);
    manifest.abstention = args.abstention.clone();
    manifest.representation = args.representation.clone();
    manifest.seeds = (args.seed_base..args.seed_base + args.seeds).collect();

    let grid_cfg = GridConfig {
        abstention_levels: args.abstention,
        representation_levels: args.representation,
        predictor,
        seeds: manifest.seeds.clone(),
        rules: args.rules,
        rule_config: cfg,
    };
    let grid = run_grid(&loaded.election, &grid_cfg)?;

    let mut w = csv_writer();
    record(
        &mut w,
        [
            "rule",
            "abstention",
            "representation",
            "seed_count",
            "mean_jaccard",
            "sd_jaccard",
            "mean_preserved",
            "mean_recovered",
        ],
    )?;
    for cell in &grid.cells {
        record(
            &mut w,
            [
                cell.rule.clone(),
                cell.abstention.to_string(),
                cell.representation.to_string(),
                cell.seed_count.to_string(),
                cell.mean_jaccard.to_string(),
                cell.sd_jaccard.to_string(),
                cell.mean_preserved.to_string(),
                cell.mean_recovered.to_string(),
            ],
        )?;
    }
    let body = finish_csv(w)?;
    emit_csv(
        body,
        args.output.as_deref(),
        &manifest,
        Some(&grid.reference_winner_counts),
    )
}

// ------------------------------------------------------------------ output

fn to_json<T: Serialize>(value: &T) -> Result<String, Fail> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn record<I, S>(w: &mut csv::Writer<Vec<u8>>, fields: I) -> Result<(), Fail>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(fields).map_err(|e| Fail::io(e.to_string()))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, Fail> {
    let bytes = w.into_inner().map_err(|e| Fail::io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Fail::io(e.to_string()))
}

/// Prints to stdout, or writes the file atomically (temp file in the target
/// directory, then rename).
fn emit(text: &str, output: Option<&Path>) -> Result<(), Fail> {
    match output {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => write_atomic(path, text),
    }
}

/// CSV reports cannot embed their manifest, so file outputs get a
/// `<name>.manifest.json` sidecar and stdout output sends the manifest to
/// stderr.
fn emit_csv(
    body: String,
    output: Option<&Path>,
    manifest: &RunManifest,
    reference_winner_counts: Option<&BTreeMap<String, usize>>,
) -> Result<(), Fail> {
    let sidecar_doc = match reference_winner_counts {
        Some(counts) => to_json(&SimulateSidecar {
            schema_version: SCHEMA_VERSION,
            manifest,
            reference_winner_counts: counts,
        })?,
        None => to_json(&serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "manifest": manifest,
        }))?,
    };
    match output {
        None => {
            print!("{body}");
            eprint!("{sidecar_doc}");
            Ok(())
        }
        Some(path) => {
            write_atomic(path, &body)?;
            write_atomic(&sidecar_path(path), &sidecar_doc)
        }
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), Fail> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| Fail::io(format!("{}: {e}", path.display())))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| Fail::io(format!("{}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| Fail::io(format!("{}: {e}", path.display())))?;
    Ok(())
}
