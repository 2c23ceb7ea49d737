//! Run manifests: which artifacts a stage wrote, their digests and record counts,
//! and the configuration and tool versions that produced them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::{count_records, file_digest, read_json, write_json_pretty};

pub const MANIFEST_SUFFIX: &str = ".manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// Relative to the directory holding the manifest.
    pub path: String,
    pub sha256: String,
    /// Line count for JSONL artifacts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<usize>,
}

impl ArtifactRecord {
    pub fn describe(dir: &Path, relative: &str) -> Result<Self> {
        let full = dir.join(relative);
        let records = if relative.ends_with(".jsonl") {
            Some(count_records(&full)?)
        } else {
            None
        };
        Ok(Self {
            path: relative.to_string(),
            sha256: file_digest(&full)?,
            records,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub tool: String,
    pub tool_version: String,
    pub config_digest: String,
    pub seed: u64,
    #[serde(default)]
    pub versions: BTreeMap<String, String>,
    /// Digests of the files this run read.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    pub artifacts: Vec<ArtifactRecord>,
    #[serde(default)]
    pub details: Value,
}

impl RunManifest {
    pub fn file_name(name: &str) -> String {
        format!("{name}{MANIFEST_SUFFIX}")
    }

    /// Records digests for `artifacts` (relative to `dir`) and writes the manifest next
    /// to them as `<name>.manifest.json`.
    pub fn write(mut self, dir: &Path, name: &str, artifacts: &[&str]) -> Result<PathBuf> {
        self.artifacts = artifacts
            .iter()
            .map(|a| ArtifactRecord::describe(dir, a))
            .collect::<Result<_>>()?;
        let path = dir.join(Self::file_name(name));
        write_json_pretty(&path, &self)?;
        Ok(path)
    }
}

/// Re-hashes and re-counts every artifact named by the manifest at `path`.
pub fn validate_manifest(path: &Path) -> Result<RunManifest> {
    let manifest: RunManifest = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    for a in &manifest.artifacts {
        let full = dir.join(&a.path);
        if !full.exists() {
            return Err(Error::DataIntegrity(format!(
                "{}: artifact {} is missing",
                path.display(),
                a.path
            )));
        }
        let actual = ArtifactRecord::describe(dir, &a.path)?;
        if actual.sha256 != a.sha256 {
            return Err(Error::DataIntegrity(format!(
                "{}: digest of {} changed",
                path.display(),
                a.path
            )));
        }
        if actual.records != a.records {
            return Err(Error::DataIntegrity(format!(
                "{}: {} has {:?} records, manifest says {:?}",
                path.display(),
                a.path,
                actual.records,
                a.records
            )));
        }
    }
    Ok(manifest)
}

/// Validates every manifest in `dir` and checks that each other file there is
/// claimed by exactly one of them.
pub fn validate_output_dir(dir: &Path) -> Result<Vec<RunManifest>> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    let mut owners: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut manifests = Vec::new();
    let mut files = Vec::new();
    for p in entries.iter().filter(|p| p.is_file()) {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if name.ends_with(MANIFEST_SUFFIX) {
            let m = validate_manifest(p)?;
            for a in &m.artifacts {
                owners.entry(a.path.clone()).or_default().push(m.stage.clone());
            }
            manifests.push(m);
        } else {
            files.push(name);
        }
    }
    for f in files {
        match owners.get(&f).map(Vec::len) {
            Some(1) => {}
            None => {
                return Err(Error::DataIntegrity(format!(
                    "{f} in {} is not listed in any manifest",
                    dir.display()
                )))
            }
            Some(_) => {
                return Err(Error::DataIntegrity(format!(
                    "{f} in {} is claimed by several manifests: {}",
                    dir.display(),
                    owners[&f].join(", ")
                )))
            }
        }
    }
    Ok(manifests)
}
