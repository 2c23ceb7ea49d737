//! Corpus discovery and the fixed-width line-numbered rendering used in prompts.

use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::io::sha256_hex;

/// Narrowest line-number column. Files with fewer than 1000 lines still get three characters.
pub const MIN_NUMBER_WIDTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    /// Corpus-relative path with `/` separators.
    pub path: String,
    pub content: String,
    pub line_count: usize,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, content: impl Into<String>) -> Self {
        let content = content.into();
        let line_count = split_lines(&content).len();
        Self {
            path: path.into(),
            content,
            line_count,
        }
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.content.as_bytes())
    }

    pub fn lines(&self) -> Vec<&str> {
        split_lines(&self.content)
    }
}

/// Splits on `\n`. A trailing newline terminates the last line rather than starting a new one.
fn split_lines(content: &str) -> Vec<&str> {
    if content.is_empty() {
        return Vec::new();
    }
    let body = content.strip_suffix('\n').unwrap_or(content);
    body.split('\n').collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumberedFile {
    pub source: SourceFile,
    pub width: usize,
    pub rendered: String,
}

impl NumberedFile {
    /// The rendered text of 1-based line `line`, number prefix included.
    pub fn rendered_line(&self, line: usize) -> Option<&str> {
        if line == 0 || line > self.source.line_count {
            return None;
        }
        split_lines(&self.rendered).get(line - 1).copied()
    }

    /// Removes the number column from every line, giving back the original content.
    pub fn denumber(&self) -> String {
        let prefix = self.width + 1;
        let mut out = split_lines(&self.rendered)
            .iter()
            .map(|l| l.get(prefix..).unwrap_or(""))
            .collect::<Vec<_>>()
            .join("\n");
        if self.source.content.ends_with('\n') {
            out.push('\n');
        }
        out
    }

    /// Rendering without the final newline, as embedded in prompts.
    pub fn body(&self) -> &str {
        self.rendered.strip_suffix('\n').unwrap_or(&self.rendered)
    }
}

pub fn number_width(line_count: usize) -> usize {
    line_count.to_string().len().max(MIN_NUMBER_WIDTH)
}

pub fn render_numbered(file: &SourceFile) -> NumberedFile {
    let width = number_width(file.line_count);
    let mut rendered = file
        .lines()
        .iter()
        .enumerate()
        .map(|(i, line)| format!("{:>width$} {}", i + 1, line))
        .collect::<Vec<_>>()
        .join("\n");
    if file.content.ends_with('\n') && !rendered.is_empty() {
        rendered.push('\n');
    }
    NumberedFile {
        source: file.clone(),
        width,
        rendered,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    #[default]
    Utf8,
    Latin1,
}

impl Encoding {
    fn decode(self, bytes: Vec<u8>) -> Option<String> {
        match self {
            Encoding::Utf8 => String::from_utf8(bytes).ok(),
            Encoding::Latin1 => Some(bytes.iter().map(|&b| b as char).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ExclusionReason {
    TooLong { line_count: usize, max_lines: usize },
    Undecodable { encoding: Encoding },
    /// The reference linter could not produce diagnostics for the file.
    LinterFailed { message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub path: String,
    #[serde(flatten)]
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanResult {
    pub files: Vec<SourceFile>,
    pub exclusions: Vec<Exclusion>,
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    /// Extensions to keep, with or without the leading dot. Empty keeps everything.
    pub extensions: Vec<String>,
    pub max_lines: usize,
    pub encoding: Encoding,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            extensions: vec![".py".to_string()],
            max_lines: 5000,
            encoding: Encoding::Utf8,
        }
    }
}

fn matches_extension(path: &Path, extensions: &[String]) -> bool {
    if extensions.is_empty() {
        return true;
    }
    let Some(ext) = path.extension().and_then(|e| e.to_str()) else {
        return false;
    };
    extensions
        .iter()
        .any(|want| want.trim_start_matches('.') == ext)
}

/// Walks `root` and loads every matching file, ordered by corpus-relative path.
pub fn scan_corpus(root: &Path, opts: &ScanOptions) -> Result<ScanResult> {
    if !root.is_dir() {
        return Err(Error::Config(format!(
            "corpus root {} does not exist or is not a directory",
            root.display()
        )));
    }
    let mut result = ScanResult::default();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            Error::Config(format!("cannot read corpus root {}: {e}", root.display()))
        })?;
        if !entry.file_type().is_file() || !matches_extension(entry.path(), &opts.extensions) {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .unwrap_or(entry.path())
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        let bytes = fs::read(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
        let Some(content) = opts.encoding.decode(bytes) else {
            warn!("skipping {rel}: not valid {:?}", opts.encoding);
            result.exclusions.push(Exclusion {
                path: rel,
                reason: ExclusionReason::Undecodable {
                    encoding: opts.encoding,
                },
            });
            continue;
        };
        let file = SourceFile::new(rel, content);
        if file.line_count > opts.max_lines {
            result.exclusions.push(Exclusion {
                path: file.path,
                reason: ExclusionReason::TooLong {
                    line_count: file.line_count,
                    max_lines: opts.max_lines,
                },
            });
            continue;
        }
        result.files.push(file);
    }
    result.files.sort_by(|a, b| a.path.cmp(&b.path));
    result.exclusions.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(result)
}

/// One line of the corpus manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub path: String,
    pub line_count: usize,
    pub digest: String,
}

pub fn corpus_records(files: &[SourceFile]) -> Vec<CorpusRecord> {
    files
        .iter()
        .map(|f| CorpusRecord {
            path: f.path.clone(),
            line_count: f.line_count,
            digest: f.digest(),
        })
        .collect()
}

/// Digest over the ordered (path, content digest) list; identifies a corpus snapshot.
pub fn corpus_digest(files: &[SourceFile]) -> String {
    let joined = files
        .iter()
        .map(|f| format!("{}\t{}\n", f.path, f.digest()))
        .collect::<String>();
    sha256_hex(joined)
}
