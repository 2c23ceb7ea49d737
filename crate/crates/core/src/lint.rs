//! External linter invocation and conversion of its diagnostics into gold line sets.

use std::collections::BTreeSet;
use std::io::Write;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::corpus::SourceFile;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub rule_code: String,
    pub row: usize,
    pub end_row: usize,
    pub message: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fix {
    pub before: String,
    pub after: String,
}

/// Violating lines of one idiom in one file. An empty set means "no violations".
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ViolationSet {
    pub idiom_code: String,
    pub lines: BTreeSet<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixes: Vec<Fix>,
}

impl ViolationSet {
    pub fn empty(idiom_code: impl Into<String>) -> Self {
        Self {
            idiom_code: idiom_code.into(),
            ..Self::default()
        }
    }

    pub fn new(idiom_code: impl Into<String>, lines: impl IntoIterator<Item = usize>) -> Self {
        Self {
            idiom_code: idiom_code.into(),
            lines: lines.into_iter().collect(),
            fixes: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputSchema {
    /// JSON array of `{code, location.row, end_location.{row,column}, message}` objects.
    #[default]
    RuffJson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanMode {
    /// Every row from the diagnostic's start to its end.
    #[default]
    FullSpan,
    StartRow,
}

/// A linter invocation template.
///
/// Placeholders in `args`: `{rules}` (comma-separated codes) and `{path}`
/// (corpus-relative path). File content is always written to the child's stdin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinterCommand {
    pub program: String,
    pub args: Vec<String>,
    #[serde(default = "default_version_args")]
    pub version_args: Vec<String>,
    #[serde(default)]
    pub schema: OutputSchema,
}

fn default_version_args() -> Vec<String> {
    vec!["--version".to_string()]
}

impl LinterCommand {
    pub fn ruff() -> Self {
        let args = [
            "check",
            "--isolated",
            "--no-cache",
            "--output-format",
            "json",
            "--select",
            "{rules}",
            "--stdin-filename",
            "{path}",
            "-",
        ];
        Self {
            program: "ruff".to_string(),
            args: args.iter().map(|s| s.to_string()).collect(),
            version_args: default_version_args(),
            schema: OutputSchema::RuffJson,
        }
    }

    fn expand(&self, rules: &str, path: &str) -> Vec<String> {
        self.args
            .iter()
            .map(|a| a.replace("{rules}", rules).replace("{path}", path))
            .collect()
    }

    fn spawn_error(&self, e: std::io::Error) -> Error {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Environment(format!("linter executable `{}` not found", self.program))
        } else {
            Error::Environment(format!("cannot start linter `{}`: {e}", self.program))
        }
    }
}

impl Default for LinterCommand {
    fn default() -> Self {
        Self::ruff()
    }
}

/// Asks the linter for its version string, e.g. "ruff 0.17.0".
pub fn linter_version(cmd: &LinterCommand) -> Result<String> {
    let out = Command::new(&cmd.program)
        .args(&cmd.version_args)
        .stdin(Stdio::null())
        .output()
        .map_err(|e| cmd.spawn_error(e))?;
    if !out.status.success() {
        return Err(Error::Environment(format!(
            "`{} {}` exited with {}",
            cmd.program,
            cmd.version_args.join(" "),
            out.status
        )));
    }
    Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
}

#[derive(Deserialize)]
struct RuffLocation {
    row: usize,
    column: usize,
}

#[derive(Deserialize)]
struct RuffDiagnostic {
    code: Option<String>,
    location: RuffLocation,
    end_location: Option<RuffLocation>,
    #[serde(default)]
    message: String,
}

/// Parses the ruff JSON schema, keeping only diagnostics whose code is in `codes`.
///
/// A diagnostic ending at column 1 of a later row stops at the end of the previous row.
/// Rows are clamped to `line_count`.
pub fn parse_ruff_json(
    raw: &str,
    file: &SourceFile,
    codes: &BTreeSet<&str>,
) -> Result<Vec<Diagnostic>> {
    let parsed: Vec<RuffDiagnostic> =
        serde_json::from_str(raw).map_err(|e| Error::OracleProtocol {
            message: format!("cannot parse linter output for {}: {e}", file.path),
            raw: raw.to_string(),
        })?;
    let max_row = file.line_count.max(1);
    let mut out = Vec::new();
    for d in parsed {
        let Some(code) = d.code else { continue };
        if !codes.contains(code.as_str()) {
            continue;
        }
        let row = d.location.row.clamp(1, max_row);
        let mut end_row = d.end_location.map_or(row, |end| {
            if end.row > d.location.row && end.column <= 1 {
                end.row - 1
            } else {
                end.row
            }
        });
        end_row = end_row.clamp(row, max_row);
        out.push(Diagnostic {
            rule_code: code,
            row,
            end_row,
            message: d.message,
            file: file.path.clone(),
        });
    }
    out.sort_by(|a, b| (a.row, a.end_row, &a.rule_code).cmp(&(b.row, b.end_row, &b.rule_code)));
    Ok(out)
}

/// Runs the linter on one file, restricted to `idiom_codes`.
pub fn run_linter(
    file: &SourceFile,
    idiom_codes: &[String],
    cmd: &LinterCommand,
) -> Result<Vec<Diagnostic>> {
    if idiom_codes.is_empty() {
        return Ok(Vec::new());
    }
    let rules = idiom_codes.join(",");
    let mut child = Command::new(&cmd.program)
        .args(cmd.expand(&rules, &file.path))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| cmd.spawn_error(e))?;
    if let Some(mut stdin) = child.stdin.take() {
        // A linter that reads the path instead of stdin may close the pipe early.
        let _ = stdin.write_all(file.content.as_bytes());
    }
    let out = child
        .wait_with_output()
        .map_err(|e| Error::Environment(format!("linter `{}` failed: {e}", cmd.program)))?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    if stdout.trim().is_empty() {
        return Err(Error::OracleProtocol {
            message: format!(
                "linter produced no output for {} (status {})",
                file.path, out.status
            ),
            raw: String::from_utf8_lossy(&out.stderr).into_owned(),
        });
    }
    let codes: BTreeSet<&str> = idiom_codes.iter().map(String::as_str).collect();
    match cmd.schema {
        OutputSchema::RuffJson => parse_ruff_json(&stdout, file, &codes),
    }
}

/// Lints many files with at most `workers` concurrent child processes. Output order follows `files`.
pub fn lint_files(
    files: &[SourceFile],
    idiom_codes: &[String],
    cmd: &LinterCommand,
    workers: usize,
) -> Vec<Result<Vec<Diagnostic>>> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<Vec<Diagnostic>>>>> =
        Mutex::new((0..files.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.max(1).min(files.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= files.len() {
                    break;
                }
                let r = run_linter(&files[i], idiom_codes, cmd);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every slot is filled"))
        .collect()
}

/// Gold line set for one idiom from one file's diagnostics.
pub fn diagnostics_to_gold(diags: &[Diagnostic], idiom_code: &str, mode: SpanMode) -> ViolationSet {
    let mut set = ViolationSet::empty(idiom_code);
    for d in diags.iter().filter(|d| d.rule_code == idiom_code) {
        match mode {
            SpanMode::FullSpan => set.lines.extend(d.row..=d.end_row),
            SpanMode::StartRow => {
                set.lines.insert(d.row);
            }
        }
    }
    set
}
