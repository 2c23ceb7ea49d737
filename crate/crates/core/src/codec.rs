//! Serialization of gold violations into the target output format, and the
//! inverse: parsing model responses back into per-idiom line sets.
//!
//! Output shape, per idiom:
//!
//! ```text
//! **Idiom ANN202 Violations:**
//!
//! {"line": " 86     def _reload(self, event, opts):", "fix": null}
//! ```
//!
//! or the header followed by `NO VIOLATIONS FOUND`.
//!
//! The parser is a single tolerant pass that records every relaxation it had
//! to apply. Strict mode fails any response that needed one, so a response
//! that is clean under strict parses identically under relaxed.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::FINAL_SECTION_HEADER;
use crate::corpus::NumberedFile;
use crate::lint::{Fix, ViolationSet};

pub const NO_VIOLATIONS: &str = "NO VIOLATIONS FOUND";

/// Bumped whenever a relaxation is added or its behaviour changes.
pub const RELAXATION_CATALOG_VERSION: u32 = 1;

pub fn idiom_header(code: &str) -> String {
    format!("**Idiom {code} Violations:**")
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn fix_json(fixes: &[&Fix]) -> String {
    if fixes.is_empty() {
        return "null".to_string();
    }
    let items = fixes
        .iter()
        .map(|f| {
            format!(
                "{{\"before\": {}, \"after\": {}}}",
                json_string(&f.before),
                json_string(&f.after)
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    format!("[{items}]")
}

/// Maximal runs of consecutive line numbers.
pub fn contiguous_runs(lines: &BTreeSet<usize>) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for &l in lines {
        match runs.last_mut() {
            Some((_, end)) if *end + 1 == l => *end = l,
            _ => runs.push((l, l)),
        }
    }
    runs
}

/// One `{"line": ..., "fix": ...}` record per contiguous run of violating lines.
///
/// Fixes attach one-to-one when their count equals the record count; a single
/// record takes every fix; otherwise fixes are omitted (`null`).
///
/// Panics if a line is outside the file; callers validate bounds first.
pub fn violation_records(file: &NumberedFile, set: &ViolationSet) -> Vec<String> {
    let runs = contiguous_runs(&set.lines);
    let n = runs.len();
    runs.iter()
        .enumerate()
        .map(|(i, &(start, end))| {
            let text = (start..=end)
                .map(|l| {
                    file.rendered_line(l)
                        .unwrap_or_else(|| panic!("line {l} outside {}", file.source.path))
                })
                .collect::<Vec<_>>()
                .join("\n");
            let fixes: Vec<&Fix> = if n == 1 {
                set.fixes.iter().collect()
            } else if set.fixes.len() == n {
                vec![&set.fixes[i]]
            } else {
                Vec::new()
            };
            format!("{{\"line\": {}, \"fix\": {}}}", json_string(&text), fix_json(&fixes))
        })
        .collect()
}

/// The target text for one idiom's block.
pub fn serialize_block(file: &NumberedFile, set: &ViolationSet) -> String {
    let body = if set.is_empty() {
        NO_VIOLATIONS.to_string()
    } else {
        violation_records(file, set).join("\n")
    };
    format!("{}\n\n{}", idiom_header(&set.idiom_code), body)
}

/// Target text for several idioms, blocks separated by a blank line.
pub fn serialize_violations(file: &NumberedFile, sets: &[ViolationSet]) -> String {
    sets.iter()
        .map(|s| serialize_block(file, s))
        .collect::<Vec<_>>()
        .join("\n\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningDelimiter {
    pub open: String,
    pub close: String,
}

impl ReasoningDelimiter {
    pub fn new(open: &str, close: &str) -> Self {
        Self {
            open: open.into(),
            close: close.into(),
        }
    }

    pub fn think() -> Self {
        Self::new("<think>", "</think>")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StripSource {
    Delimiter,
    SectionHeader,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrippedResponse {
    pub final_text: String,
    pub source: StripSource,
    pub reasoning: Option<String>,
    /// A reasoning delimiter was opened and never closed.
    pub unterminated: bool,
}

/// Separates the final answer from a reasoning trace.
///
/// Takes the text after the last closing delimiter; failing that, the text after
/// the last final-section header; failing that, the input unchanged.
pub fn strip_reasoning(text: &str, delimiters: &[ReasoningDelimiter]) -> StrippedResponse {
    let last_close = delimiters
        .iter()
        .filter(|d| !d.close.is_empty())
        .filter_map(|d| text.rfind(&d.close).map(|pos| (pos, pos + d.close.len())))
        .max();
    if let Some((start, end)) = last_close {
        let final_text = &text[end..];
        let unterminated = delimiters
            .iter()
            .any(|d| !d.open.is_empty() && final_text.contains(&d.open));
        return StrippedResponse {
            final_text: final_text.to_string(),
            source: StripSource::Delimiter,
            reasoning: Some(text[..start].to_string()),
            unterminated,
        };
    }
    let unterminated = delimiters
        .iter()
        .any(|d| !d.open.is_empty() && text.contains(&d.open));
    if let Some(pos) = text.rfind(FINAL_SECTION_HEADER) {
        let end = pos + FINAL_SECTION_HEADER.len();
        return StrippedResponse {
            final_text: text[end..].to_string(),
            source: StripSource::SectionHeader,
            reasoning: Some(text[..pos].to_string()),
            unterminated,
        };
    }
    StrippedResponse {
        final_text: text.to_string(),
        source: StripSource::Unchanged,
        reasoning: None,
        unterminated,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LineExtraction {
    pub lines: BTreeSet<usize>,
    /// Fragments that did not start with a line number.
    pub unnumbered: usize,
}

impl LineExtraction {
    pub fn is_flagged(&self) -> bool {
        self.lines.is_empty()
    }
}

fn leading_number(fragment: &str) -> Option<usize> {
    let t = fragment.trim_start();
    let digits_end = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    if digits_end == 0 {
        return None;
    }
    let rest = &t[digits_end..];
    if !(rest.is_empty() || rest.starts_with([' ', '\t'])) {
        return None;
    }
    t[..digits_end].parse().ok()
}

/// Recovers line numbers from a record's `line` field.
///
/// Multi-line records are split on real newlines; a field without any real
/// newline is split on literal two-character `\n` escapes instead.
pub fn extract_line_numbers(field: &str) -> LineExtraction {
    let fragments: Vec<&str> = if field.contains('\n') {
        field.split('\n').collect()
    } else {
        field.split("\\n").collect()
    };
    let mut out = LineExtraction::default();
    for f in fragments {
        match leading_number(f) {
            Some(n) => {
                out.lines.insert(n);
            }
            None => out.unnumbered += 1,
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    /// Baseline format expected but no `### Final Idiom Violations Found` line.
    MissingSectionHeader,
    /// A section header with different markup or casing.
    LooseSectionHeader,
    /// Idiom header not in the exact `**Idiom X Violations:**` form.
    LooseIdiomHeader,
    /// Single idiom expected and its block has no header at all.
    HeaderlessSingleBlock,
    /// Markdown code fences around records.
    CodeFences,
    /// Text that is neither a record nor the no-violations phrase.
    StrayProse,
    /// The no-violations phrase with other casing or decoration.
    LenientNoViolationsPhrase,
    /// A record that is not valid JSON but has a recoverable `"line"` field.
    MalformedRecord,
    /// A `fix` that is neither null nor a list of before/after objects.
    MalformedFix,
    /// Both records and the no-violations phrase in one block; records win.
    MixedBlock,
    /// Header followed by nothing; read as no violations.
    EmptyBlock,
    /// The same idiom reported in more than one block; line sets are merged.
    DuplicateIdiomBlock,
    /// An expected idiom has no block; read as no violations.
    MissingIdiomBlock,
    /// A block for an idiom that was not asked about; ignored.
    UnexpectedIdiomBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxationLevel {
    #[default]
    Strict,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParseOptions {
    pub level: RelaxationLevel,
    /// The response was produced from the baseline prompt and should carry the final-section header.
    pub require_section_header: bool,
}

impl ParseOptions {
    pub fn strict() -> Self {
        Self::default()
    }

    pub fn relaxed() -> Self {
        Self {
            level: RelaxationLevel::Relaxed,
            require_section_header: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Clean,
    Relaxed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub violations: BTreeMap<String, ViolationSet>,
    pub status: ParseStatus,
    pub relaxations: Vec<Relaxation>,
    pub failure_reason: Option<String>,
    pub raw_final_text: String,
    /// Records whose `line` field held no recoverable number.
    pub unnumbered_records: usize,
}

impl ParsedResponse {
    /// Predicted lines for `code`; empty when the parse failed or the idiom is absent.
    pub fn lines(&self, code: &str) -> BTreeSet<usize> {
        self.violations
            .get(code)
            .map(|v| v.lines.clone())
            .unwrap_or_default()
    }

    pub fn failed(&self) -> bool {
        self.status == ParseStatus::Failed
    }

    fn failure(codes: &[String], text: &str, reason: String, relaxations: Vec<Relaxation>) -> Self {
        Self {
            violations: codes
                .iter()
                .map(|c| (c.clone(), ViolationSet::empty(c)))
                .collect(),
            status: ParseStatus::Failed,
            relaxations,
            failure_reason: Some(reason),
            raw_final_text: text.to_string(),
            unnumbered_records: 0,
        }
    }
}

static LOOSE_IDIOM_HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^[#*\s]*idiom\s+`?([A-Za-z0-9_.\-]+)`?\s+violations?\s*[:*\s]*$").unwrap()
});
static LOOSE_SECTION_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^[#*\s]*final\s+idiom\s+violations\s+found[:*\s]*$").unwrap());
static LINE_FIELD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#""line"\s*:\s*("(?:[^"\\]|\\.)*")"#).unwrap());
static LOOSE_PHRASE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i)^[\s`*"'>\-]*no\s+violations\s+found[\s`*"'.!]*$"#).unwrap()
});

fn strict_idiom_header(line: &str) -> Option<&str> {
    line.trim()
        .strip_prefix("**Idiom ")?
        .strip_suffix(" Violations:**")
        .filter(|c| !c.is_empty() && !c.contains(char::is_whitespace))
}

struct Block {
    code: String,
    lines: Vec<String>,
}

#[derive(Default)]
struct BlockResult {
    lines: BTreeSet<usize>,
    fixes: Vec<Fix>,
    recognized: bool,
    unnumbered_records: usize,
}

fn parse_fix(value: &Value, relax: &mut BTreeSet<Relaxation>) -> Vec<Fix> {
    match value {
        Value::Null => Vec::new(),
        Value::Array(items) => {
            let mut out = Vec::new();
            for item in items {
                match (
                    item.get("before").and_then(Value::as_str),
                    item.get("after").and_then(Value::as_str),
                ) {
                    (Some(b), Some(a)) => out.push(Fix {
                        before: b.to_string(),
                        after: a.to_string(),
                    }),
                    _ => {
                        relax.insert(Relaxation::MalformedFix);
                    }
                }
            }
            out
        }
        _ => {
            relax.insert(Relaxation::MalformedFix);
            Vec::new()
        }
    }
}

fn parse_block(lines: &[String], relax: &mut BTreeSet<Relaxation>) -> BlockResult {
    let mut res = BlockResult::default();
    let mut saw_phrase = false;
    let mut saw_record = false;
    for raw in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with("```") {
            relax.insert(Relaxation::CodeFences);
            continue;
        }
        if line == NO_VIOLATIONS {
            saw_phrase = true;
            continue;
        }
        if LOOSE_PHRASE.is_match(line) {
            relax.insert(Relaxation::LenientNoViolationsPhrase);
            saw_phrase = true;
            continue;
        }
        let field = if line.starts_with('{') {
            match serde_json::from_str::<Value>(line) {
                Ok(Value::Object(obj)) => match obj.get("line").and_then(Value::as_str) {
                    Some(field) => {
                        if let Some(fix) = obj.get("fix") {
                            res.fixes.extend(parse_fix(fix, relax));
                        }
                        Some(field.to_string())
                    }
                    None => None,
                },
                _ => None,
            }
        } else {
            None
        };
        let field = match field {
            Some(f) => Some(f),
            None => LINE_FIELD.captures(line).and_then(|c| {
                serde_json::from_str::<String>(&c[1]).ok().inspect(|_| {
                    relax.insert(Relaxation::MalformedRecord);
                })
            }),
        };
        match field {
            Some(f) => {
                saw_record = true;
                let ex = extract_line_numbers(&f);
                if ex.is_flagged() {
                    res.unnumbered_records += 1;
                }
                res.lines.extend(ex.lines);
            }
            None => {
                relax.insert(Relaxation::StrayProse);
            }
        }
    }
    if saw_record && saw_phrase {
        relax.insert(Relaxation::MixedBlock);
    }
    res.recognized = saw_record || saw_phrase;
    res
}

/// Parses a final answer (reasoning already stripped) into per-idiom line sets.
///
/// Never panics or errors: unparseable text yields empty sets with `status = Failed`.
pub fn parse_response(text: &str, expected: &[String], opts: ParseOptions) -> ParsedResponse {
    let mut relax: BTreeSet<Relaxation> = BTreeSet::new();

    // Cut at the last final-section header.
    let all_lines: Vec<&str> = text.lines().collect();
    let exact = all_lines
        .iter()
        .rposition(|l| l.trim() == FINAL_SECTION_HEADER);
    let start = match exact {
        Some(i) => i + 1,
        None => match all_lines
            .iter()
            .rposition(|l| LOOSE_SECTION_HEADER.is_match(l))
        {
            Some(i) => {
                relax.insert(Relaxation::LooseSectionHeader);
                i + 1
            }
            None => {
                if opts.require_section_header {
                    relax.insert(Relaxation::MissingSectionHeader);
                }
                0
            }
        },
    };
    let body = &all_lines[start..];

    // Split into idiom blocks.
    let mut preamble: Vec<String> = Vec::new();
    let mut blocks: Vec<Block> = Vec::new();
    for line in body {
        if let Some(code) = strict_idiom_header(line) {
            blocks.push(Block {
                code: code.to_string(),
                lines: Vec::new(),
            });
            continue;
        }
        if let Some(c) = LOOSE_IDIOM_HEADER.captures(line) {
            relax.insert(Relaxation::LooseIdiomHeader);
            blocks.push(Block {
                code: c[1].to_string(),
                lines: Vec::new(),
            });
            continue;
        }
        match blocks.last_mut() {
            Some(b) => b.lines.push(line.to_string()),
            None => preamble.push(line.to_string()),
        }
    }

    if blocks.is_empty() {
        if expected.len() != 1 {
            return ParsedResponse::failure(
                expected,
                text,
                "no idiom block found".into(),
                relax.into_iter().collect(),
            );
        }
        let mut block_relax = relax.clone();
        let res = parse_block(&preamble, &mut block_relax);
        if !res.recognized {
            return ParsedResponse::failure(
                expected,
                text,
                "no idiom block and no no-violations phrase".into(),
                relax.into_iter().collect(),
            );
        }
        relax = block_relax;
        relax.insert(Relaxation::HeaderlessSingleBlock);
        blocks.push(Block {
            code: expected[0].clone(),
            lines: preamble.split_off(0),
        });
    } else if preamble.iter().any(|l| !l.trim().is_empty()) {
        relax.insert(Relaxation::StrayProse);
    }

    let mut violations: BTreeMap<String, ViolationSet> = BTreeMap::new();
    let mut unnumbered = 0;
    for block in &blocks {
        if !expected.contains(&block.code) {
            relax.insert(Relaxation::UnexpectedIdiomBlock);
            continue;
        }
        let res = parse_block(&block.lines, &mut relax);
        if !res.recognized {
            relax.insert(Relaxation::EmptyBlock);
        }
        unnumbered += res.unnumbered_records;
        match violations.get_mut(&block.code) {
            Some(existing) => {
                relax.insert(Relaxation::DuplicateIdiomBlock);
                existing.lines.extend(res.lines);
                existing.fixes.extend(res.fixes);
            }
            None => {
                violations.insert(
                    block.code.clone(),
                    ViolationSet {
                        idiom_code: block.code.clone(),
                        lines: res.lines,
                        fixes: res.fixes,
                    },
                );
            }
        }
    }
    for code in expected {
        if !violations.contains_key(code) {
            relax.insert(Relaxation::MissingIdiomBlock);
            violations.insert(code.clone(), ViolationSet::empty(code));
        }
    }
    if expected.iter().all(|c| blocks.iter().all(|b| &b.code != c)) {
        return ParsedResponse::failure(
            expected,
            text,
            "none of the expected idioms has a block".into(),
            relax.into_iter().collect(),
        );
    }

    let relaxations: Vec<Relaxation> = relax.into_iter().collect();
    if relaxations.is_empty() {
        return ParsedResponse {
            violations,
            status: ParseStatus::Clean,
            relaxations,
            failure_reason: None,
            raw_final_text: text.to_string(),
            unnumbered_records: unnumbered,
        };
    }
    match opts.level {
        RelaxationLevel::Strict => {
            let labels = relaxations
                .iter()
                .map(|r| format!("{r:?}"))
                .collect::<Vec<_>>()
                .join(", ");
            ParsedResponse::failure(
                expected,
                text,
                format!("strict parse needs relaxations: {labels}"),
                relaxations,
            )
        }
        RelaxationLevel::Relaxed => ParsedResponse {
            violations,
            status: ParseStatus::Relaxed,
            relaxations,
            failure_reason: None,
            raw_final_text: text.to_string(),
            unnumbered_records: unnumbered,
        },
    }
}

/// A parsed response plus what reasoning stripping found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedResponse {
    pub parsed: ParsedResponse,
    pub reasoning: Option<String>,
    pub reasoning_unterminated: bool,
}

/// Strips any reasoning trace, then parses the remainder.
pub fn decode_response(
    raw: &str,
    expected: &[String],
    opts: ParseOptions,
    delimiters: &[ReasoningDelimiter],
) -> DecodedResponse {
    let stripped = strip_reasoning(raw, delimiters);
    // The section-header cut is repeated by the parser itself, which also checks the header's presence.
    let source = match stripped.source {
        StripSource::Delimiter => stripped.final_text.as_str(),
        StripSource::SectionHeader | StripSource::Unchanged => raw,
    };
    DecodedResponse {
        parsed: parse_response(source, expected, opts),
        reasoning: stripped.reasoning,
        reasoning_unterminated: stripped.unterminated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{render_numbered, SourceFile};
    use proptest::prelude::*;

    fn codes(c: &[&str]) -> Vec<String> {
        c.iter().map(|s| s.to_string()).collect()
    }

    const WORKED_OUTPUT: &str = "**Idiom ANN202 Violations:**\n\n{\"line\": \" 86     def _reload(self, event, opts):\", \"fix\": null}\n{\"line\": \" 92     def _fn_amp_move_computer_function(self, event, *args, **kwargs):\", \"fix\": null}";

    #[test]
    fn worked_output_parses_clean() {
        let p = parse_response(WORKED_OUTPUT, &codes(&["ANN202"]), ParseOptions::strict());
        assert_eq!(p.status, ParseStatus::Clean);
        assert_eq!(p.lines("ANN202"), BTreeSet::from([86, 92]));
    }

    #[test]
    fn no_violations_block() {
        let p = parse_response(
            "**Idiom F403 Violations:**\n\nNO VIOLATIONS FOUND",
            &codes(&["F403"]),
            ParseOptions::strict(),
        );
        assert_eq!(p.status, ParseStatus::Clean);
        assert!(p.lines("F403").is_empty());
    }

    #[test]
    fn prose_fails_in_both_modes() {
        for opts in [ParseOptions::strict(), ParseOptions::relaxed()] {
            let p = parse_response("I think the code looks fine overall.", &codes(&["F403"]), opts);
            assert_eq!(p.status, ParseStatus::Failed);
            assert!(p.failure_reason.is_some());
            assert!(p.lines("F403").is_empty());
        }
    }

    #[test]
    fn relaxations_are_recorded() {
        let text = "Here is my analysis.\n\n```json\n{\"line\": \" 3 import os\", \"fix\": null}\n```";
        let strict = parse_response(text, &codes(&["F401"]), ParseOptions::strict());
        assert_eq!(strict.status, ParseStatus::Failed);
        assert!(strict.lines("F401").is_empty());
        let relaxed = parse_response(text, &codes(&["F401"]), ParseOptions::relaxed());
        assert_eq!(relaxed.status, ParseStatus::Relaxed);
        assert_eq!(relaxed.lines("F401"), BTreeSet::from([3]));
        assert!(relaxed.relaxations.contains(&Relaxation::HeaderlessSingleBlock));
        assert!(relaxed.relaxations.contains(&Relaxation::CodeFences));
        assert!(relaxed.relaxations.contains(&Relaxation::StrayProse));
    }

    #[test]
    fn lenient_phrase_and_loose_header() {
        let text = "### Idiom E722 Violations\n\n`No violations found.`";
        let p = parse_response(text, &codes(&["E722"]), ParseOptions::relaxed());
        assert_eq!(p.status, ParseStatus::Relaxed);
        assert!(p.relaxations.contains(&Relaxation::LooseIdiomHeader));
        assert!(p.relaxations.contains(&Relaxation::LenientNoViolationsPhrase));
        assert!(p.lines("E722").is_empty());
    }

    #[test]
    fn baseline_section_header_handling() {
        let body = "**Idiom F403 Violations:**\n\nNO VIOLATIONS FOUND";
        let with_header = format!("Reasoning first.\n\n{FINAL_SECTION_HEADER}\n\n{body}");
        let opts = ParseOptions {
            level: RelaxationLevel::Strict,
            require_section_header: true,
        };
        assert_eq!(parse_response(&with_header, &codes(&["F403"]), opts).status, ParseStatus::Clean);
        assert_eq!(parse_response(body, &codes(&["F403"]), opts).status, ParseStatus::Failed);
        let relaxed = ParseOptions {
            level: RelaxationLevel::Relaxed,
            require_section_header: true,
        };
        let p = parse_response(body, &codes(&["F403"]), relaxed);
        assert_eq!(p.relaxations, vec![Relaxation::MissingSectionHeader]);
    }

    #[test]
    fn unexpected_and_missing_blocks() {
        let text = "**Idiom F403 Violations:**\n\nNO VIOLATIONS FOUND\n\n**Idiom E722 Violations:**\n\n{\"line\": \"  5 except:\", \"fix\": null}";
        let strict = parse_response(text, &codes(&["F403"]), ParseOptions::strict());
        assert_eq!(strict.status, ParseStatus::Failed);
        let relaxed = parse_response(text, &codes(&["F403", "B006"]), ParseOptions::relaxed());
        assert_eq!(relaxed.status, ParseStatus::Relaxed);
        assert!(relaxed.relaxations.contains(&Relaxation::UnexpectedIdiomBlock));
        assert!(relaxed.relaxations.contains(&Relaxation::MissingIdiomBlock));
        assert!(!relaxed.violations.contains_key("E722"));
    }

    #[test]
    fn malformed_record_recovered_when_relaxed() {
        let text = "**Idiom S102 Violations:**\n\n{\"line\": \" 7 exec(code)\", \"fix\": nul";
        let p = parse_response(text, &codes(&["S102"]), ParseOptions::relaxed());
        assert_eq!(p.lines("S102"), BTreeSet::from([7]));
        assert!(p.relaxations.contains(&Relaxation::MalformedRecord));
    }

    #[test]
    fn fixes_are_parsed_structurally() {
        let text = "**Idiom I001 Violations:**\n\n{\"line\": \"  1 import b\\n  2 import a\", \"fix\": [{\"before\": \"import b\\nimport a\", \"after\": \"import a\\nimport b\"}]}";
        let p = parse_response(text, &codes(&["I001"]), ParseOptions::strict());
        assert_eq!(p.status, ParseStatus::Clean);
        let v = &p.violations["I001"];
        assert_eq!(v.lines, BTreeSet::from([1, 2]));
        assert_eq!(v.fixes.len(), 1);
        assert_eq!(v.fixes[0].after, "import a\nimport b");
    }

    #[test]
    fn extract_examples() {
        assert_eq!(
            extract_line_numbers(" 86     def _reload(self, event, opts):").lines,
            BTreeSet::from([86])
        );
        assert_eq!(
            extract_line_numbers("  1 from django import forms\n  2 from django.forms.models import inlineformset_factory").lines,
            BTreeSet::from([1, 2])
        );
        // Double-escaped output: no real newline, literal backslash-n separators.
        assert_eq!(
            extract_line_numbers("  1 from django import forms\\n  2 from django.forms").lines,
            BTreeSet::from([1, 2])
        );
        let none = extract_line_numbers("def foo():");
        assert!(none.lines.is_empty());
        assert!(none.is_flagged());
        assert_eq!(none.unnumbered, 1);
    }

    #[test]
    fn strip_with_delimiter() {
        let s = strip_reasoning("<think>look at line 3</think> final answer", &[ReasoningDelimiter::think()]);
        assert_eq!(s.final_text, " final answer");
        assert_eq!(s.reasoning.as_deref(), Some("<think>look at line 3"));
        assert!(!s.unterminated);
    }

    #[test]
    fn strip_uses_last_section_header() {
        let text = format!(
            "I will answer under \"{FINAL_SECTION_HEADER}\" like this:\n{FINAL_SECTION_HEADER}\nnot yet\n{FINAL_SECTION_HEADER}\nthe answer"
        );
        let s = strip_reasoning(&text, &[]);
        assert_eq!(s.final_text, "\nthe answer");
        assert_eq!(s.source, StripSource::SectionHeader);
    }

    #[test]
    fn strip_plain_answer_unchanged() {
        let s = strip_reasoning("**Idiom X Violations:**\n\nNO VIOLATIONS FOUND", &[ReasoningDelimiter::think()]);
        assert_eq!(s.final_text, "**Idiom X Violations:**\n\nNO VIOLATIONS FOUND");
        assert_eq!(s.source, StripSource::Unchanged);
    }

    #[test]
    fn strip_flags_unterminated_trace() {
        let s = strip_reasoning("<think>still going and going", &[ReasoningDelimiter::think()]);
        assert!(s.unterminated);
        let d = decode_response(
            "<think>a</think>\n**Idiom X Violations:**\n\nNO VIOLATIONS FOUND",
            &codes(&["X"]),
            ParseOptions::strict(),
            &[ReasoningDelimiter::think()],
        );
        assert_eq!(d.parsed.status, ParseStatus::Clean);
        assert!(!d.reasoning_unterminated);
    }

    #[test]
    fn records_group_contiguous_runs() {
        let f = render_numbered(&SourceFile::new("a.py", "a\nb\nc\nd\ne\n"));
        let set = ViolationSet::new("X", [1, 2, 4]);
        let recs = violation_records(&f, &set);
        assert_eq!(
            recs,
            vec![
                "{\"line\": \"  1 a\\n  2 b\", \"fix\": null}".to_string(),
                "{\"line\": \"  4 d\", \"fix\": null}".to_string(),
            ]
        );
    }

    fn file_and_lines() -> impl Strategy<Value = (Vec<String>, BTreeSet<usize>)> {
        proptest::collection::vec("[ -~\t]{0,30}", 1..60).prop_flat_map(|lines| {
            let n = lines.len();
            (
                Just(lines),
                proptest::collection::btree_set(1..=n, 0..=n.min(12)),
            )
        })
    }

    proptest! {
        #[test]
        fn serialize_then_parse_recovers_lines((lines, gold) in file_and_lines()) {
            let f = render_numbered(&SourceFile::new("r.py", lines.join("\n") + "\n"));
            let set = ViolationSet::new("R001", gold.clone());
            let text = serialize_block(&f, &set);
            let p = parse_response(&text, &codes(&["R001"]), ParseOptions::strict());
            prop_assert_eq!(p.status, ParseStatus::Clean);
            prop_assert_eq!(p.lines("R001"), gold);
        }

        #[test]
        fn strict_clean_implies_relaxed_identical(text in "(\\*\\*Idiom A1 Violations:\\*\\*|NO VIOLATIONS FOUND|\\{\"line\": \" [0-9]{1,2} x\", \"fix\": null\\}|```|[a-z ]{0,10}|\n){0,12}") {
            let c = codes(&["A1"]);
            let strict = parse_response(&text, &c, ParseOptions::strict());
            let relaxed = parse_response(&text, &c, ParseOptions::relaxed());
            if strict.status == ParseStatus::Clean {
                prop_assert_eq!(relaxed.status, ParseStatus::Clean);
                prop_assert_eq!(&strict.violations, &relaxed.violations);
            }
            if strict.status == ParseStatus::Failed {
                prop_assert!(strict.violations.values().all(|v| v.is_empty()));
            }
        }
    }
}
