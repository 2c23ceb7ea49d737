//! Pipeline configuration: TOML file, defaults, overrides and itemized validation.

use std::path::{Path, PathBuf};

use idiomlint_core::codec::{ReasoningDelimiter, RelaxationLevel};
use idiomlint_core::corpus::{Encoding, ScanOptions};
use idiomlint_core::dataset::TransferConfig;
use idiomlint_core::io::sha256_hex;
use idiomlint_core::lint::{LinterCommand, SpanMode};
use idiomlint_core::sampler::{RetryPolicy, SamplingPlan};
use idiomlint_core::{Error, Result, Template};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub corpus: CorpusConfig,
    pub catalog: CatalogConfig,
    pub linter: LinterConfig,
    pub splits: Option<TransferConfig>,
    pub balance: BalanceConfig,
    pub dataset: DatasetConfig,
    pub sampling: SamplingPlan,
    pub endpoint: Option<EndpointConfig>,
    pub preference: PreferenceConfig,
    pub parsing: ParsingConfig,
    pub benchmark: Option<BenchmarkConfig>,
    pub stats: StatsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            out_dir: None,
            corpus: CorpusConfig::default(),
            catalog: CatalogConfig::default(),
            linter: LinterConfig::default(),
            splits: None,
            balance: BalanceConfig::default(),
            dataset: DatasetConfig::default(),
            sampling: SamplingPlan::default(),
            endpoint: None,
            preference: PreferenceConfig::default(),
            parsing: ParsingConfig::default(),
            benchmark: None,
            stats: StatsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub root: PathBuf,
    pub extensions: Vec<String>,
    pub max_lines: usize,
    pub encoding: Encoding,
    /// Share of corpus files held out for the transfer test splits.
    pub test_file_fraction: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        let scan = ScanOptions::default();
        Self {
            root: PathBuf::new(),
            extensions: scan.extensions,
            max_lines: scan.max_lines,
            encoding: scan.encoding,
            test_file_fraction: 0.1,
        }
    }
}

impl CorpusConfig {
    pub fn scan_options(&self) -> ScanOptions {
        ScanOptions {
            extensions: self.extensions.clone(),
            max_lines: self.max_lines,
            encoding: self.encoding,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogConfig {
    /// A JSONL file or a directory of JSONL files.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinterConfig {
    pub program: String,
    /// Arguments with `{rules}` and `{path}` placeholders; file content goes to stdin.
    pub args: Vec<String>,
    pub version_args: Vec<String>,
    pub span_mode: SpanMode,
    pub workers: usize,
}

impl Default for LinterConfig {
    fn default() -> Self {
        let ruff = LinterCommand::ruff();
        Self {
            program: ruff.program,
            args: ruff.args,
            version_args: ruff.version_args,
            span_mode: SpanMode::default(),
            workers: 4,
        }
    }
}

impl LinterConfig {
    pub fn command(&self) -> LinterCommand {
        LinterCommand {
            program: self.program.clone(),
            args: self.args.clone(),
            version_args: self.version_args.clone(),
            ..LinterCommand::ruff()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceConfig {
    pub no_violation_fraction: f64,
    /// Falls back to `no_violation_fraction`.
    pub test_no_violation_fraction: Option<f64>,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            no_violation_fraction: 0.70,
            test_no_violation_fraction: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub train_template: Template,
    pub test_templates: Vec<Template>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            train_template: Template::Instruction,
            test_templates: vec![Template::Instruction],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    pub url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub token_env: Option<String>,
    pub timeout_secs: u64,
    pub concurrency: usize,
    pub retry: RetryPolicy,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            url: String::new(),
            model: String::new(),
            token_env: None,
            timeout_secs: 300,
            concurrency: 4,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreferenceConfig {
    pub eta: f64,
    pub gamma: f64,
    pub beta: f64,
    /// Percentage of no-violation instances kept in the preference data.
    pub no_violation_fraction: f64,
    /// Target no-violation share of RS-SFT instances.
    pub rs_sft_no_violation_ratio: f64,
}

impl Default for PreferenceConfig {
    fn default() -> Self {
        Self {
            eta: 0.2,
            gamma: 1.0,
            beta: 0.1,
            no_violation_fraction: 5.0,
            rs_sft_no_violation_ratio: 0.71,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParsingConfig {
    pub reward_level: RelaxationLevel,
    pub eval_level: RelaxationLevel,
    pub reasoning_delimiters: Vec<ReasoningDelimiter>,
}

impl Default for ParsingConfig {
    fn default() -> Self {
        Self {
            reward_level: RelaxationLevel::Strict,
            eval_level: RelaxationLevel::Relaxed,
            reasoning_delimiters: vec![ReasoningDelimiter::think()],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub path: PathBuf,
    /// Specs for the benchmark idioms, added to the main catalog.
    pub catalog: Option<PathBuf>,
    pub template: Template,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub alpha: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self { alpha: 0.05 }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub no_violation_fraction: Option<f64>,
}

impl PipelineConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = &o.out_dir {
            self.out_dir = Some(d.clone());
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(e) = o.eta {
            self.preference.eta = e;
        }
        if let Some(g) = o.gamma {
            self.preference.gamma = g;
        }
        if let Some(f) = o.no_violation_fraction {
            self.preference.no_violation_fraction = f;
        }
    }

    /// Every problem found, one entry each.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let pref = &self.preference;
        if pref.eta.is_nan() || pref.eta <= 0.0 {
            p.push(format!("preference.eta must be > 0, got {}", pref.eta));
        }
        if !(pref.gamma > 0.0 && pref.gamma <= 1.0) {
            p.push(format!("preference.gamma must lie in (0, 1], got {}", pref.gamma));
        }
        if pref.beta.is_nan() || pref.beta <= 0.0 {
            p.push(format!("preference.beta must be > 0, got {}", pref.beta));
        }
        if !(0.0..=100.0).contains(&pref.no_violation_fraction) {
            p.push(format!(
                "preference.no_violation_fraction must lie in [0, 100], got {}",
                pref.no_violation_fraction
            ));
        }
        if !(pref.rs_sft_no_violation_ratio > 0.0 && pref.rs_sft_no_violation_ratio < 1.0) {
            p.push(format!(
                "preference.rs_sft_no_violation_ratio must lie in (0, 1), got {}",
                pref.rs_sft_no_violation_ratio
            ));
        }
        let fractions = [
            ("balance.no_violation_fraction", Some(self.balance.no_violation_fraction)),
            ("balance.test_no_violation_fraction", self.balance.test_no_violation_fraction),
            ("corpus.test_file_fraction", Some(self.corpus.test_file_fraction)),
        ];
        for (name, v) in fractions {
            if let Some(v) = v.filter(|v| !(0.0..=1.0).contains(v)) {
                p.push(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.stats.alpha > 0.0 && self.stats.alpha < 1.0) {
            p.push(format!("stats.alpha must lie in (0, 1), got {}", self.stats.alpha));
        }
        p.extend(self.sampling.validate());
        if self.linter.workers == 0 {
            p.push("linter.workers must be at least 1".into());
        }
        if self.dataset.test_templates.is_empty() {
            p.push("dataset.test_templates must not be empty".into());
        }
        if self.corpus.root.as_os_str().is_empty() {
            p.push("corpus.root is required".into());
        } else if !self.corpus.root.is_dir() {
            p.push(format!("corpus.root {} is not a directory", self.corpus.root.display()));
        }
        if self.catalog.path.as_os_str().is_empty() {
            p.push("catalog.path is required".into());
        } else if !self.catalog.path.exists() {
            p.push(format!("catalog.path {} does not exist", self.catalog.path.display()));
        }
        if let Some(b) = &self.benchmark {
            if !b.path.is_file() {
                p.push(format!("benchmark.path {} does not exist", b.path.display()));
            }
            if let Some(c) = b.catalog.as_ref().filter(|c| !c.exists()) {
                p.push(format!("benchmark.catalog {} does not exist", c.display()));
            }
        }
        if let Some(e) = &self.endpoint {
            if e.url.is_empty() {
                p.push("endpoint.url is required when [endpoint] is present".into());
            }
            if e.model.is_empty() {
                p.push("endpoint.model is required when [endpoint] is present".into());
            }
            if e.concurrency == 0 {
                p.push("endpoint.concurrency must be at least 1".into());
            }
            if e.retry.max_attempts == 0 {
                p.push("endpoint.retry.max_attempts must be at least 1".into());
            }
        }
        p
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus.root);
        fix(&mut self.catalog.path);
        if let Some(d) = &mut self.out_dir {
            fix(d);
        }
        if let Some(b) = &mut self.benchmark {
            fix(&mut b.path);
            if let Some(c) = &mut b.catalog {
                fix(c);
            }
        }
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out_dir
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory: pass --out or set out_dir".into()))
    }

    /// Digest of the effective configuration.
    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn test_no_violation_fraction(&self) -> f64 {
        self.balance
            .test_no_violation_fraction
            .unwrap_or(self.balance.no_violation_fraction)
    }
}

/// Loads, resolves relative paths against the file's directory, applies overrides and validates.
pub fn validate_config(path: &Path, overrides: &Overrides) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg: PipelineConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    cfg.apply(overrides);
    let problems = cfg.problems();
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(format!(
            "invalid config {}:\n  - {}",
            path.display(),
            problems.join("\n  - ")
        )))
    }
}
