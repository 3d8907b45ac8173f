//! Reader and writer for the Pabulib `.pb` election text format.
//!
//! The format is line oriented UTF-8 with three sections introduced by the
//! header lines `META`, `PROJECTS` and `VOTES`. The first line after each
//! header names the semicolon-separated columns; every following line is one
//! data row. `META` always uses the columns `key;value`. `PROJECTS` requires
//! `project_id` and `cost`; `name`, `category` (comma-separated labels) and
//! `district` are recognized, all other columns are preserved verbatim.
//! `VOTES` requires `voter_id` and `vote` (a comma-separated project-id
//! list); cumulative and scoring files additionally carry a `points` column
//! aligned with `vote`, and any other column is kept as a voter attribute.
//!
//! Money is integer minor units. A fractional cost or budget is an error in
//! strict mode and is rounded half-up with a warning in lenient mode. CRLF
//! input is accepted; output always uses LF.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::ballots::{Ballot, BallotContent, BallotRules};
use crate::model::{Amount, Election, ElectionMeta, Project, VoteType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// Every violation is an error.
    Strict,
    /// Violations become warnings; offending rows are dropped or repaired.
    Lenient,
}

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub mode: ParseMode,
    /// Sanity cap: a project costing more than `cost_cap_multiple` times the
    /// budget is rejected in strict mode.
    pub cost_cap_multiple: u64,
}

impl ParseOptions {
    pub fn new(mode: ParseMode) -> Self {
        ParseOptions {
            mode,
            cost_cap_multiple: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("input is empty")]
    EmptyInput,
    #[error("missing section `{0}`")]
    MissingSection(&'static str),
    #[error("missing required META key `{0}`")]
    MissingRequiredKey(&'static str),
    #[error("line {line}: malformed row: {detail}")]
    MalformedRow { line: usize, detail: String },
    #[error("line {line}: vote of `{voter}` references unknown project `{project}`")]
    UnknownProjectRef {
        line: usize,
        voter: String,
        project: String,
    },
    #[error("line {line}: duplicate voter id `{voter}`")]
    DuplicateVoterId { line: usize, voter: String },
    #[error("line {line}: duplicate project id `{project}`")]
    DuplicateProjectId { line: usize, project: String },
    #[error("declared {section} count {declared} does not match parsed count {parsed}")]
    CountMismatch {
        section: &'static str,
        declared: usize,
        parsed: usize,
    },
    #[error("invalid META: {0}")]
    InvalidMeta(String),
    #[error("line {line}: project `{project}` costs {cost}, above the sanity cap {cap}")]
    CostExceedsCap {
        line: usize,
        project: String,
        cost: Amount,
        cap: Amount,
    },
}

/// A non-fatal problem found while parsing leniently.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

/// Successful parse: the election plus any lenient-mode repairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed {
    pub election: Election,
    pub warnings: Vec<ParseWarning>,
}

struct Section<'a> {
    header_line: usize,
    columns: Vec<&'a str>,
    rows: Vec<(usize, Vec<&'a str>)>,
}

pub fn parse_election(text: &str, mode: ParseMode) -> Result<Parsed, ParseError> {
    parse_election_with(text, &ParseOptions::new(mode))
}

pub fn parse_election_with(text: &str, opts: &ParseOptions) -> Result<Parsed, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let strict = opts.mode == ParseMode::Strict;
    let mut warnings = Vec::new();

    let sections = split_sections(text)?;
    let meta_section = sections
        .get("META")
        .ok_or(ParseError::MissingSection("META"))?;
    let projects_section = sections
        .get("PROJECTS")
        .ok_or(ParseError::MissingSection("PROJECTS"))?;
    let votes_section = sections
        .get("VOTES")
        .ok_or(ParseError::MissingSection("VOTES"))?;

    let meta_raw = read_meta_rows(meta_section, strict, &mut warnings)?;
    let (meta, rules) = build_meta(&meta_raw, strict, &mut warnings)?;
    let projects = read_projects(projects_section, &meta, opts, &mut warnings)?;
    let ballots = read_votes(votes_section, &meta, &projects, strict, &mut warnings)?;

    let mut meta = meta;
    reconcile_count(
        "project",
        &mut meta.num_projects,
        projects.len(),
        strict,
        &mut warnings,
    )?;
    reconcile_count(
        "vote",
        &mut meta.num_votes,
        ballots.len(),
        strict,
        &mut warnings,
    )?;

    if projects.is_empty() {
        return Err(ParseError::InvalidMeta(
            "election has no projects".to_string(),
        ));
    }

    let election = Election {
        meta,
        rules,
        projects,
        ballots,
    };
    Ok(Parsed { election, warnings })
}

fn reconcile_count(
    section: &'static str,
    declared: &mut usize,
    parsed: usize,
    strict: bool,
    warnings: &mut Vec<ParseWarning>,
) -> Result<(), ParseError> {
    if *declared != parsed {
        if strict {
            return Err(ParseError::CountMismatch {
                section,
                declared: *declared,
                parsed,
            });
        }
        warnings.push(ParseWarning {
            line: 0,
            message: format!(
                "declared {section} count {declared} corrected to parsed count {parsed}"
            ),
        });
        *declared = parsed;
    }
    Ok(())
}

fn split_sections(text: &str) -> Result<BTreeMap<&str, Section<'_>>, ParseError> {
    let mut sections: BTreeMap<&str, Section> = BTreeMap::new();
    let mut current: Option<&str> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.strip_suffix('\r').unwrap_or(raw_line);
        if line.is_empty() {
            continue;
        }
        if line == "META" || line == "PROJECTS" || line == "VOTES" {
            if sections.contains_key(line) {
                return Err(ParseError::MalformedRow {
                    line: line_no,
                    detail: format!("section `{line}` appears twice"),
                });
            }
            sections.insert(
                line,
                Section {
                    header_line: line_no,
                    columns: Vec::new(),
                    rows: Vec::new(),
                },
            );
            current = Some(line);
            continue;
        }
        let Some(name) = current else {
            return Err(ParseError::MissingSection("META"));
        };
        let section = sections.get_mut(name).expect("current section exists");
        let cells: Vec<&str> = line.split(';').collect();
        if section.columns.is_empty() {
            section.columns = cells;
        } else {
            section.rows.push((line_no, cells));
        }
    }
    Ok(sections)
}

fn read_meta_rows<'a>(
    section: &Section<'a>,
    strict: bool,
    warnings: &mut Vec<ParseWarning>,
) -> Result<Vec<(usize, &'a str, &'a str)>, ParseError> {
    if section.columns != ["key", "value"] {
        return Err(ParseError::MalformedRow {
            line: section.header_line + 1,
            detail: format!(
                "META columns must be `key;value`, found `{}`",
                section.columns.join(";")
            ),
        });
    }
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, cells) in &section.rows {
        if cells.len() != 2 {
            if strict {
                return Err(ParseError::MalformedRow {
                    line: *line,
                    detail: format!("expected 2 columns, found {}", cells.len()),
                });
            }
            warnings.push(ParseWarning {
                line: *line,
                message: format!("dropped META row with {} columns", cells.len()),
            });
            continue;
        }
        let key = cells[0];
        if !seen.insert(key) {
            if strict {
                return Err(ParseError::MalformedRow {
                    line: *line,
                    detail: format!("duplicate META key `{key}`"),
                });
            }
            warnings.push(ParseWarning {
                line: *line,
                message: format!("duplicate META key `{key}`, first value kept"),
            });
            continue;
        }
        rows.push((*line, key, cells[1]));
    }
    Ok(rows)
}

fn build_meta(
    rows: &[(usize, &str, &str)],
    strict: bool,
    warnings: &mut Vec<ParseWarning>,
) -> Result<(ElectionMeta, BallotRules), ParseError> {
    let mut budget = None;
    let mut vote_type = None;
    let mut meta = ElectionMeta::new(0, VoteType::Approval);

    for (line, key, value) in rows {
        match *key {
            "budget" => budget = Some(parse_amount(value, *line, strict, warnings)?),
            "vote_type" => {
                vote_type = Some(VoteType::parse(value).ok_or_else(|| {
                    ParseError::MalformedRow {
                        line: *line,
                        detail: format!("unknown vote_type `{value}`"),
                    }
                })?)
            }
            "num_projects" => meta.num_projects = parse_count(value, *line)?,
            "num_votes" => meta.num_votes = parse_count(value, *line)?,
            "min_length" => meta.min_length = Some(parse_count(value, *line)?),
            "max_length" => meta.max_length = Some(parse_count(value, *line)?),
            "max_sum_points" => meta.max_sum_points = Some(parse_count(value, *line)? as u64),
            "description" => meta.description = Some(value.to_string()),
            "country" => meta.country = Some(value.to_string()),
            "unit" => meta.unit = Some(value.to_string()),
            "instance" => meta.instance = Some(value.to_string()),
            "date_begin" => meta.date_begin = Some(value.to_string()),
            "date_end" => meta.date_end = Some(value.to_string()),
            other => {
                meta.extra.insert(other.to_string(), value.to_string());
            }
        }
    }

    meta.budget = budget.ok_or(ParseError::MissingRequiredKey("budget"))?;
    meta.vote_type = vote_type.ok_or(ParseError::MissingRequiredKey("vote_type"))?;
    if meta.budget == 0 {
        return Err(ParseError::InvalidMeta("budget must be positive".into()));
    }
    if let (Some(min), Some(max)) = (meta.min_length, meta.max_length) {
        if min > max {
            if strict {
                return Err(ParseError::InvalidMeta(format!(
                    "min_length {min} exceeds max_length {max}"
                )));
            }
            warnings.push(ParseWarning {
                line: 0,
                message: format!("inverted length bounds {min}..{max} ignored"),
            });
            meta.min_length = None;
            meta.max_length = None;
        }
    }

    let rules = ballot_rules_from_meta(&meta);
    Ok((meta, rules))
}

/// Derives the ballot-validity rules an instance declares. The total-points
/// bound comes from `max_sum_points`; when the file also carries a matching
/// `min_sum_points`, the total must be spent exactly.
pub fn ballot_rules_from_meta(meta: &ElectionMeta) -> BallotRules {
    let exact = match (meta.max_sum_points, meta.extra.get("min_sum_points")) {
        (Some(max), Some(min)) => min.trim().parse::<u64>() == Ok(max),
        _ => false,
    };
    let score_range = if meta.vote_type == VoteType::Scoring {
        let lo = meta.extra.get("min_points").and_then(|v| v.trim().parse().ok());
        let hi = meta.extra.get("max_points").and_then(|v| v.trim().parse().ok());
        match (lo, hi) {
            (Some(lo), Some(hi)) if lo <= hi => Some((lo, hi)),
            _ => None,
        }
    } else {
        None
    };
    BallotRules {
        vote_type: meta.vote_type,
        min_distinct: meta.min_length,
        max_distinct: meta.max_length,
        total_points: meta.max_sum_points,
        require_exact_total: exact,
        score_range,
    }
}

fn read_projects(
    section: &Section<'_>,
    meta: &ElectionMeta,
    opts: &ParseOptions,
    warnings: &mut Vec<ParseWarning>,
) -> Result<Vec<Project>, ParseError> {
    let strict = opts.mode == ParseMode::Strict;
    let columns = &section.columns;
    let id_col = find_column(columns, "project_id", section.header_line)?;
    let cost_col = find_column(columns, "cost", section.header_line)?;
    let name_col = columns.iter().position(|c| *c == "name");
    let category_col = columns.iter().position(|c| *c == "category");
    let district_col = columns.iter().position(|c| *c == "district");
    let known = [Some(id_col), Some(cost_col), name_col, category_col, district_col];
    let cap = meta.budget.saturating_mul(opts.cost_cap_multiple);

    let mut projects = Vec::with_capacity(section.rows.len());
    let mut seen = BTreeSet::new();
    'rows: for (line, cells) in &section.rows {
        if cells.len() != columns.len() {
            if strict {
                return Err(ParseError::MalformedRow {
                    line: *line,
                    detail: format!(
                        "expected {} columns, found {}",
                        columns.len(),
                        cells.len()
                    ),
                });
            }
            warnings.push(ParseWarning {
                line: *line,
                message: "dropped project row with wrong column count".into(),
            });
            continue;
        }
        let id = cells[id_col].to_string();
        if id.is_empty() {
            row_problem(strict, *line, "project row has empty project_id", warnings)?;
            continue;
        }
        if !seen.insert(id.clone()) {
            if strict {
                return Err(ParseError::DuplicateProjectId { line: *line, project: id });
            }
            warnings.push(ParseWarning {
                line: *line,
                message: format!("duplicate project id `{id}`, first row kept"),
            });
            continue;
        }
        let cost = match parse_amount(cells[cost_col], *line, strict, warnings) {
            Ok(c) => c,
            Err(e) if strict => return Err(e),
            Err(_) => {
                warnings.push(ParseWarning {
                    line: *line,
                    message: format!("dropped project `{id}` with unparseable cost"),
                });
                seen.remove(&id);
                continue 'rows;
            }
        };
        if cost == 0 {
            row_problem(strict, *line, &format!("project `{id}` has zero cost"), warnings)?;
            seen.remove(&id);
            continue;
        }
        if cost > cap {
            if strict {
                return Err(ParseError::CostExceedsCap {
                    line: *line,
                    project: id,
                    cost,
                    cap,
                });
            }
            warnings.push(ParseWarning {
                line: *line,
                message: format!("project `{id}` costs {cost}, above the sanity cap {cap}"),
            });
        }

        let mut project = Project::new(id, cost);
        if let Some(col) = name_col {
            if !cells[col].is_empty() {
                project.name = Some(cells[col].to_string());
            }
        }
        if let Some(col) = category_col {
            if !cells[col].is_empty() {
                project.categories = cells[col].split(',').map(str::to_string).collect();
            }
        }
        if let Some(col) = district_col {
            if !cells[col].is_empty() {
                project.district = Some(cells[col].to_string());
            }
        }
        for (i, cell) in cells.iter().enumerate() {
            if !known.contains(&Some(i)) && !cell.is_empty() {
                project.extra.insert(columns[i].to_string(), cell.to_string());
            }
        }
        projects.push(project);
    }
    Ok(projects)
}

fn read_votes(
    section: &Section<'_>,
    meta: &ElectionMeta,
    projects: &[Project],
    strict: bool,
    warnings: &mut Vec<ParseWarning>,
) -> Result<Vec<Ballot>, ParseError> {
    let columns = &section.columns;
    let voter_col = find_column(columns, "voter_id", section.header_line)?;
    let vote_col = find_column(columns, "vote", section.header_line)?;
    let points_col = columns.iter().position(|c| *c == "points");

    let needs_points = matches!(meta.vote_type, VoteType::Cumulative | VoteType::Scoring);
    if needs_points && points_col.is_none() {
        return Err(ParseError::MissingRequiredKey("points"));
    }
    if !needs_points && points_col.is_some() {
        if strict {
            return Err(ParseError::MalformedRow {
                line: section.header_line + 1,
                detail: format!(
                    "`points` column is not allowed for vote_type {}",
                    meta.vote_type
                ),
            });
        }
        warnings.push(ParseWarning {
            line: section.header_line + 1,
            message: format!("`points` column ignored for vote_type {}", meta.vote_type),
        });
    }

    let project_ids: BTreeSet<&str> = projects.iter().map(|p| p.id.as_str()).collect();
    let mut ballots: Vec<Ballot> = Vec::with_capacity(section.rows.len());
    let mut seen_voters = BTreeSet::new();

    'rows: for (line, cells) in &section.rows {
        if cells.len() != columns.len() {
            if strict {
                return Err(ParseError::MalformedRow {
                    line: *line,
                    detail: format!(
                        "expected {} columns, found {}",
                        columns.len(),
                        cells.len()
                    ),
                });
            }
            warnings.push(ParseWarning {
                line: *line,
                message: "dropped vote row with wrong column count".into(),
            });
            continue;
        }
        let voter_id = cells[voter_col].to_string();
        if voter_id.is_empty() {
            row_problem(strict, *line, "vote row has empty voter_id", warnings)?;
            continue;
        }
        if !seen_voters.insert(voter_id.clone()) {
            if strict {
                return Err(ParseError::DuplicateVoterId { line: *line, voter: voter_id });
            }
            warnings.push(ParseWarning {
                line: *line,
                message: format!("duplicate voter id `{voter_id}`, first ballot kept"),
            });
            continue;
        }

        let vote_list: Vec<&str> = if cells[vote_col].is_empty() {
            Vec::new()
        } else {
            cells[vote_col].split(',').collect()
        };
        let mut distinct = BTreeSet::new();
        for id in &vote_list {
            if !project_ids.contains(id) {
                if strict {
                    return Err(ParseError::UnknownProjectRef {
                        line: *line,
                        voter: voter_id,
                        project: id.to_string(),
                    });
                }
                warnings.push(ParseWarning {
                    line: *line,
                    message: format!(
                        "dropped ballot of `{voter_id}` referencing unknown project `{id}`"
                    ),
                });
                seen_voters.remove(&voter_id);
                continue 'rows;
            }
            if !distinct.insert(*id) {
                row_problem(
                    strict,
                    *line,
                    &format!("ballot of `{voter_id}` lists project `{id}` twice"),
                    warnings,
                )?;
                seen_voters.remove(&voter_id);
                continue 'rows;
            }
        }

        let points: Option<Vec<u64>> = if needs_points {
            let col = points_col.expect("checked above");
            let raw = cells[col];
            let list: Vec<&str> = if raw.is_empty() {
                Vec::new()
            } else {
                raw.split(',').collect()
            };
            if list.len() != vote_list.len() {
                row_problem(
                    strict,
                    *line,
                    &format!(
                        "ballot of `{voter_id}` has {} vote entries but {} points",
                        vote_list.len(),
                        list.len()
                    ),
                    warnings,
                )?;
                seen_voters.remove(&voter_id);
                continue 'rows;
            }
            let mut parsed = Vec::with_capacity(list.len());
            for cell in list {
                match cell.trim().parse::<u64>() {
                    Ok(v) => parsed.push(v),
                    Err(_) => {
                        row_problem(
                            strict,
                            *line,
                            &format!("ballot of `{voter_id}` has unparseable points `{cell}`"),
                            warnings,
                        )?;
                        seen_voters.remove(&voter_id);
                        continue 'rows;
                    }
                }
            }
            Some(parsed)
        } else {
            None
        };

        let content = match meta.vote_type {
            VoteType::Approval => {
                BallotContent::Approval(vote_list.iter().map(|s| s.to_string()).collect())
            }
            VoteType::Ordinal => {
                BallotContent::Ranking(vote_list.iter().map(|s| s.to_string()).collect())
            }
            VoteType::Cumulative | VoteType::Scoring => {
                let pts = points.expect("points parsed for cumulative/scoring");
                if meta.vote_type == VoteType::Cumulative && pts.iter().any(|p| *p == 0) {
                    row_problem(
                        strict,
                        *line,
                        &format!("ballot of `{voter_id}` assigns zero points to a project"),
                        warnings,
                    )?;
                    seen_voters.remove(&voter_id);
                    continue 'rows;
                }
                let map: BTreeMap<String, u64> = vote_list
                    .iter()
                    .map(|s| s.to_string())
                    .zip(pts)
                    .collect();
                if meta.vote_type == VoteType::Cumulative {
                    BallotContent::Points(map)
                } else {
                    BallotContent::Scores(map)
                }
            }
        };

        let mut ballot = Ballot::new(voter_id, content);
        for (i, cell) in cells.iter().enumerate() {
            let is_known = i == voter_col || i == vote_col || Some(i) == points_col;
            if !is_known && !cell.is_empty() {
                ballot.attributes.insert(columns[i].to_string(), cell.to_string());
            }
        }
        ballots.push(ballot);
    }
    Ok(ballots)
}

fn row_problem(
    strict: bool,
    line: usize,
    detail: &str,
    warnings: &mut Vec<ParseWarning>,
) -> Result<(), ParseError> {
    if strict {
        return Err(ParseError::MalformedRow {
            line,
            detail: detail.to_string(),
        });
    }
    warnings.push(ParseWarning {
        line,
        message: format!("dropped row: {detail}"),
    });
    Ok(())
}

fn find_column(columns: &[&str], name: &'static str, header_line: usize) -> Result<usize, ParseError> {
    columns
        .iter()
        .position(|c| *c == name)
        .ok_or(ParseError::MalformedRow {
            line: header_line + 1,
            detail: format!("missing required column `{name}`"),
        })
}

fn parse_count(value: &str, line: usize) -> Result<usize, ParseError> {
    value
        .trim()
        .parse::<usize>()
        .map_err(|_| ParseError::MalformedRow {
            line,
            detail: format!("expected a non-negative integer, found `{value}`"),
        })
}

fn parse_amount(
    value: &str,
    line: usize,
    strict: bool,
    warnings: &mut Vec<ParseWarning>,
) -> Result<Amount, ParseError> {
    let v = value.trim();
    if let Ok(amount) = v.parse::<u64>() {
        return Ok(amount);
    }
    if let Some((int_part, frac_part)) = v.split_once('.') {
        let int_ok = int_part.parse::<u64>();
        let frac_digits = !frac_part.is_empty() && frac_part.bytes().all(|b| b.is_ascii_digit());
        if let (Ok(int), true) = (int_ok, frac_digits) {
            if frac_part.bytes().all(|b| b == b'0') {
                return Ok(int);
            }
            if strict {
                return Err(ParseError::MalformedRow {
                    line,
                    detail: format!("fractional amount `{v}` not allowed in strict mode"),
                });
            }
            let rounded = if frac_part.as_bytes()[0] >= b'5' { int + 1 } else { int };
            warnings.push(ParseWarning {
                line,
                message: format!("fractional amount `{v}` rounded half-up to {rounded}"),
            });
            return Ok(rounded);
        }
    }
    Err(ParseError::MalformedRow {
        line,
        detail: format!("expected a currency amount, found `{value}`"),
    })
}

/// Writes an election back to `.pb` text. The input must satisfy its
/// invariants (`Election::validate`); parsing the output in strict mode
/// yields an election equal to the input.
pub fn serialize_election(election: &Election) -> String {
    let mut out = String::new();
    let meta = &election.meta;

    out.push_str("META\nkey;value\n");
    let mut meta_kv = |k: &str, v: &str| {
        let _ = writeln!(out, "{k};{v}");
    };
    if let Some(v) = &meta.description {
        meta_kv("description", v);
    }
    if let Some(v) = &meta.country {
        meta_kv("country", v);
    }
    if let Some(v) = &meta.unit {
        meta_kv("unit", v);
    }
    if let Some(v) = &meta.instance {
        meta_kv("instance", v);
    }
    meta_kv("num_projects", &meta.num_projects.to_string());
    meta_kv("num_votes", &meta.num_votes.to_string());
    meta_kv("budget", &meta.budget.to_string());
    meta_kv("vote_type", meta.vote_type.as_str());
    if let Some(v) = meta.min_length {
        meta_kv("min_length", &v.to_string());
    }
    if let Some(v) = meta.max_length {
        meta_kv("max_length", &v.to_string());
    }
    if let Some(v) = meta.max_sum_points {
        meta_kv("max_sum_points", &v.to_string());
    }
    if let Some(v) = &meta.date_begin {
        meta_kv("date_begin", v);
    }
    if let Some(v) = &meta.date_end {
        meta_kv("date_end", v);
    }
    for (k, v) in &meta.extra {
        meta_kv(k, v);
    }

    // Optional project columns appear only when some project uses them;
    // unknown columns keep their first-seen order.
    let has_name = election.projects.iter().any(|p| p.name.is_some());
    let has_category = election.projects.iter().any(|p| !p.categories.is_empty());
    let has_district = election.projects.iter().any(|p| p.district.is_some());
    let mut extra_cols: Vec<&String> = Vec::new();
    let mut seen_cols = BTreeSet::new();
    for p in &election.projects {
        for k in p.extra.keys() {
            if seen_cols.insert(k.as_str()) {
                extra_cols.push(k);
            }
        }
    }

    out.push_str("PROJECTS\nproject_id;cost");
    if has_name {
        out.push_str(";name");
    }
    if has_category {
        out.push_str(";category");
    }
    if has_district {
        out.push_str(";district");
    }
    for col in &extra_cols {
        let _ = write!(out, ";{col}");
    }
    out.push('\n');
    for p in &election.projects {
        let _ = write!(out, "{};{}", p.id, p.cost);
        if has_name {
            let _ = write!(out, ";{}", p.name.as_deref().unwrap_or(""));
        }
        if has_category {
            let cats: Vec<&str> = p.categories.iter().map(String::as_str).collect();
            let _ = write!(out, ";{}", cats.join(","));
        }
        if has_district {
            let _ = write!(out, ";{}", p.district.as_deref().unwrap_or(""));
        }
        for col in &extra_cols {
            let _ = write!(out, ";{}", p.extra.get(*col).map(String::as_str).unwrap_or(""));
        }
        out.push('\n');
    }

    let needs_points = matches!(meta.vote_type, VoteType::Cumulative | VoteType::Scoring);
    let mut attr_cols: Vec<&String> = Vec::new();
    let mut seen_attrs = BTreeSet::new();
    for b in &election.ballots {
        for k in b.attributes.keys() {
            if seen_attrs.insert(k.as_str()) {
                attr_cols.push(k);
            }
        }
    }

    out.push_str("VOTES\nvoter_id");
    for col in &attr_cols {
        let _ = write!(out, ";{col}");
    }
    out.push_str(";vote");
    if needs_points {
        out.push_str(";points");
    }
    out.push('\n');
    for b in &election.ballots {
        let _ = write!(out, "{}", b.voter_id);
        for col in &attr_cols {
            let _ = write!(out, ";{}", b.attributes.get(*col).map(String::as_str).unwrap_or(""));
        }
        let (ids, points): (Vec<&str>, Option<Vec<u64>>) = match &b.content {
            BallotContent::Approval(set) => (set.iter().map(String::as_str).collect(), None),
            BallotContent::Ranking(list) => (list.iter().map(String::as_str).collect(), None),
            BallotContent::Points(map) | BallotContent::Scores(map) => (
                map.keys().map(String::as_str).collect(),
                Some(map.values().copied().collect()),
            ),
        };
        let _ = write!(out, ";{}", ids.join(","));
        if needs_points {
            let pts = points.unwrap_or_default();
            let pts: Vec<String> = pts.iter().map(u64::to_string).collect();
            let _ = write!(out, ";{}", pts.join(","));
        }
        out.push('\n');
    }
    out
}

/// One successfully loaded instance of a batch.
#[derive(Debug, Clone)]
pub struct LoadedElection {
    pub name: String,
    pub path: PathBuf,
    pub election: Election,
    pub warnings: Vec<ParseWarning>,
}

/// A file that failed to load, reported without aborting the batch.
#[derive(Debug)]
pub struct LoadFailure {
    pub name: String,
    pub path: PathBuf,
    pub error: LoadError,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("path not found: {0}")]
    PathNotFound(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Result of loading a directory of `.pb` files, ordered by file name.
#[derive(Debug)]
pub struct DirectoryLoad {
    pub entries: Vec<LoadedElection>,
    pub failures: Vec<LoadFailure>,
}

pub fn load_file(path: &Path, mode: ParseMode) -> Result<LoadedElection, LoadError> {
    if !path.exists() {
        return Err(LoadError::PathNotFound(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let parsed = parse_election(&text, mode)?;
    Ok(LoadedElection {
        name: stem_of(path),
        path: path.to_path_buf(),
        election: parsed.election,
        warnings: parsed.warnings,
    })
}

/// Loads every `*.pb` file in `path`, sorted by file name. Files are parsed
/// independently (and possibly in parallel); per-file failures are reported
/// without aborting the batch, and the output order does not depend on
/// scheduling.
pub fn load_directory(path: &Path, mode: ParseMode) -> Result<DirectoryLoad, LoadError> {
    if !path.is_dir() {
        return Err(LoadError::PathNotFound(path.to_path_buf()));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().map(|e| e == "pb").unwrap_or(false))
        .collect();
    files.sort_by_key(|p| p.file_name().map(|n| n.to_os_string()));

    let results: Vec<Result<LoadedElection, LoadFailure>> = files
        .par_iter()
        .map(|file| {
            load_file(file, mode).map_err(|error| LoadFailure {
                name: stem_of(file),
                path: file.clone(),
                error,
            })
        })
        .collect();

    let mut load = DirectoryLoad {
        entries: Vec::new(),
        failures: Vec::new(),
    };
    for result in results {
        match result {
            Ok(entry) => load.entries.push(entry),
            Err(failure) => load.failures.push(failure),
        }
    }
    Ok(load)
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
