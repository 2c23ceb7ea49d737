//! Task instances, violation/no-violation balancing, transfer splits and the
//! hard-idiom benchmark loader.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{render_prompt, Catalog, Category, IdiomSpec, PromptInstance, Template};
use crate::codec::serialize_block;
use crate::corpus::{render_numbered, NumberedFile, SourceFile};
use crate::error::{Error, Result};
use crate::io::{read_jsonl, sha256_hex};
use crate::lint::{Fix, ViolationSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    InDomain,
    NearTransfer,
    FarTransfer,
    HardPep,
}

impl Split {
    pub const ALL: [Split; 5] = [
        Split::Train,
        Split::InDomain,
        Split::NearTransfer,
        Split::FarTransfer,
        Split::HardPep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::InDomain => "in_domain",
            Split::NearTransfer => "near_transfer",
            Split::FarTransfer => "far_transfer",
            Split::HardPep => "hard_pep",
        }
    }

    /// Whether an idiom of `category` may appear in this split.
    pub fn admits(self, category: Category) -> bool {
        match self {
            Split::Train => matches!(category, Category::Training | Category::InDomain),
            Split::InDomain => category == Category::InDomain,
            Split::NearTransfer => category == Category::NearTransfer,
            Split::FarTransfer => category == Category::FarTransfer,
            Split::HardPep => category == Category::HardPep,
        }
    }
}

/// Stable instance identifier derived from file identity, idiom and template.
pub fn instance_id(path: &str, digest: &str, idiom_code: &str, template: Template) -> String {
    let key = format!("{path}\0{digest}\0{idiom_code}\0{}", template.as_str());
    sha256_hex(key)[..16].to_string()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskInstance {
    pub id: String,
    pub prompt: PromptInstance,
    pub gold: ViolationSet,
    pub target_text: String,
    pub split: Split,
}

impl TaskInstance {
    pub fn is_negative(&self) -> bool {
        self.gold.is_empty()
    }

    pub fn to_record(&self) -> DatasetRecord {
        DatasetRecord {
            id: self.id.clone(),
            prompt: self.prompt.text.clone(),
            target_text: self.target_text.clone(),
            gold_lines: self.gold.lines.iter().copied().collect(),
            idiom_code: self.gold.idiom_code.clone(),
            split: self.split,
            template: self.prompt.template,
            file_path: self.prompt.file_ref.path.clone(),
            file_digest: self.prompt.file_ref.digest.clone(),
        }
    }
}

/// One line of an emitted dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub prompt: String,
    pub target_text: String,
    pub gold_lines: Vec<usize>,
    pub idiom_code: String,
    pub split: Split,
    pub template: Template,
    pub file_path: String,
    pub file_digest: String,
}

impl DatasetRecord {
    pub fn gold_set(&self) -> BTreeSet<usize> {
        self.gold_lines.iter().copied().collect()
    }

    pub fn is_negative(&self) -> bool {
        self.gold_lines.is_empty()
    }
}

fn check_bounds(file: &NumberedFile, gold: &ViolationSet) -> Result<()> {
    if let Some(&bad) = gold
        .lines
        .iter()
        .find(|&&l| l == 0 || l > file.source.line_count)
    {
        return Err(Error::DataIntegrity(format!(
            "gold line {bad} for {} is outside {} ({} lines)",
            gold.idiom_code, file.source.path, file.source.line_count
        )));
    }
    Ok(())
}

pub fn build_sft_instance(
    file: &NumberedFile,
    spec: &IdiomSpec,
    gold: &ViolationSet,
    template: Template,
    split: Split,
) -> Result<TaskInstance> {
    if gold.idiom_code != spec.code {
        return Err(Error::DataIntegrity(format!(
            "gold set is for {} but the spec is {}",
            gold.idiom_code, spec.code
        )));
    }
    check_bounds(file, gold)?;
    let prompt = render_prompt(&[spec], file, template);
    Ok(TaskInstance {
        id: instance_id(
            &file.source.path,
            &prompt.file_ref.digest,
            &spec.code,
            template,
        ),
        target_text: serialize_block(file, gold),
        prompt,
        gold: gold.clone(),
        split,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub violation_count: usize,
    pub no_violation_available: usize,
    pub no_violation_kept: usize,
    pub target_no_violation_fraction: f64,
    pub achieved_no_violation_fraction: f64,
}

/// Number of negatives that brings `positives` to the target negative fraction.
pub fn target_negative_count(positives: usize, target_fraction: f64) -> Option<usize> {
    if target_fraction >= 1.0 {
        return None;
    }
    Some((positives as f64 * target_fraction / (1.0 - target_fraction)).round() as usize)
}

/// Keeps every positive item and a seeded random subset of negatives sized toward
/// `target_fraction`. Output is sorted by `key`.
///
/// The shuffle is fixed by the seed, so a larger target keeps a superset of negatives.
pub fn balance_by<T>(
    items: Vec<T>,
    is_negative: impl Fn(&T) -> bool,
    key: impl Fn(&T) -> String,
    target_fraction: f64,
    seed: u64,
) -> (Vec<T>, BalanceReport) {
    assert!(
        (0.0..=1.0).contains(&target_fraction),
        "target fraction must lie in [0, 1]"
    );
    let (mut negatives, mut kept): (Vec<T>, Vec<T>) = items.into_iter().partition(|t| is_negative(t));
    let positives = kept.len();
    let available = negatives.len();
    negatives.sort_by_key(|t| key(t));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    negatives.shuffle(&mut rng);
    let want = target_negative_count(positives, target_fraction)
        .unwrap_or(available)
        .min(available);
    negatives.truncate(want);
    kept.extend(negatives);
    kept.sort_by_key(|t| key(t));
    let achieved = if kept.is_empty() {
        0.0
    } else {
        want as f64 / kept.len() as f64
    };
    (
        kept,
        BalanceReport {
            violation_count: positives,
            no_violation_available: available,
            no_violation_kept: want,
            target_no_violation_fraction: target_fraction,
            achieved_no_violation_fraction: achieved,
        },
    )
}

pub fn balance_dataset(
    instances: Vec<TaskInstance>,
    target_nv_fraction: f64,
    seed: u64,
) -> (Vec<TaskInstance>, BalanceReport) {
    balance_by(
        instances,
        TaskInstance::is_negative,
        |t| t.id.clone(),
        target_nv_fraction,
        seed,
    )
}

/// Idiom lists for the training set and the three transfer conditions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub training: Vec<String>,
    pub in_domain: Vec<String>,
    pub near_transfer: Vec<String>,
    pub far_transfer: Vec<String>,
}

impl TransferConfig {
    /// Lists implied by the catalog's category labels. In-domain idioms are also training idioms.
    pub fn from_catalog(catalog: &Catalog) -> Self {
        let mut training = catalog.codes_in(Category::Training);
        training.extend(catalog.codes_in(Category::InDomain));
        Self {
            training,
            in_domain: catalog.codes_in(Category::InDomain),
            near_transfer: catalog.codes_in(Category::NearTransfer),
            far_transfer: catalog.codes_in(Category::FarTransfer),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub training: Vec<String>,
    /// Each test idiom mapped to exactly one transfer split.
    pub test: BTreeMap<String, Split>,
}

impl SplitAssignment {
    pub fn test_codes(&self, split: Split) -> Vec<String> {
        self.test
            .iter()
            .filter(|(_, s)| **s == split)
            .map(|(c, _)| c.clone())
            .collect()
    }
}

pub fn split_by_transfer(catalog: &Catalog, cfg: &TransferConfig) -> Result<SplitAssignment> {
    let mut problems = Vec::new();
    let all = cfg
        .training
        .iter()
        .chain(&cfg.in_domain)
        .chain(&cfg.near_transfer)
        .chain(&cfg.far_transfer);
    let unknown: BTreeSet<&String> = all.filter(|c| catalog.get(c).is_none()).collect();
    if !unknown.is_empty() {
        problems.push(format!("idioms missing from the catalog: {}", join(unknown)));
    }
    let training: BTreeSet<&String> = cfg.training.iter().collect();
    let not_trained: BTreeSet<&String> = cfg
        .in_domain
        .iter()
        .filter(|c| !training.contains(c))
        .collect();
    if !not_trained.is_empty() {
        problems.push(format!(
            "in-domain idioms must also be training idioms: {}",
            join(not_trained)
        ));
    }
    for (name, list) in [("near", &cfg.near_transfer), ("far", &cfg.far_transfer)] {
        let overlap: BTreeSet<&String> = list.iter().filter(|c| training.contains(c)).collect();
        if !overlap.is_empty() {
            problems.push(format!(
                "{name}-transfer idioms overlap the training idioms: {}",
                join(overlap)
            ));
        }
    }
    let mut test = BTreeMap::new();
    let mut dupes = BTreeSet::new();
    for (split, list) in [
        (Split::InDomain, &cfg.in_domain),
        (Split::NearTransfer, &cfg.near_transfer),
        (Split::FarTransfer, &cfg.far_transfer),
    ] {
        for code in list {
            if test.insert(code.clone(), split).is_some() {
                dupes.insert(code);
            }
        }
    }
    if !dupes.is_empty() {
        problems.push(format!(
            "idioms listed in more than one transfer split: {}",
            join(dupes)
        ));
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }
    Ok(SplitAssignment {
        training: cfg.training.clone(),
        test,
    })
}

fn join<'a>(items: impl IntoIterator<Item = &'a String>) -> String {
    items
        .into_iter()
        .map(String::as_str)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Per-split statistics stored in the dataset manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub instances: usize,
    pub no_violation: usize,
    pub no_violation_fraction: f64,
    pub idioms: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub splits: BTreeMap<Split, SplitStats>,
    pub total_instances: usize,
    pub no_violation_fraction: f64,
    pub linter: Option<String>,
    pub corpus_digest: String,
    pub balance: BTreeMap<Split, BalanceReport>,
}

impl DatasetManifest {
    pub fn summarize(records: &[DatasetRecord]) -> Self {
        let mut splits: BTreeMap<Split, SplitStats> = BTreeMap::new();
        let mut idioms: BTreeMap<Split, BTreeSet<String>> = BTreeMap::new();
        for r in records {
            let s = splits.entry(r.split).or_default();
            s.instances += 1;
            if r.is_negative() {
                s.no_violation += 1;
            }
            idioms.entry(r.split).or_default().insert(r.idiom_code.clone());
        }
        for (split, s) in splits.iter_mut() {
            s.no_violation_fraction = s.no_violation as f64 / s.instances as f64;
            s.idioms = idioms.remove(split).unwrap_or_default().into_iter().collect();
        }
        let nv = records.iter().filter(|r| r.is_negative()).count();
        Self {
            splits,
            total_instances: records.len(),
            no_violation_fraction: if records.is_empty() {
                0.0
            } else {
                nv as f64 / records.len() as f64
            },
            ..Self::default()
        }
    }

    /// Checks the recorded counts against the actual dataset records.
    pub fn check_counts(&self, records: &[DatasetRecord]) -> Result<()> {
        let actual = Self::summarize(records);
        if actual.total_instances != self.total_instances {
            return Err(Error::DataIntegrity(format!(
                "manifest says {} instances, dataset has {}",
                self.total_instances, actual.total_instances
            )));
        }
        for split in Split::ALL {
            let want = self.splits.get(&split).map_or((0, 0), |s| (s.instances, s.no_violation));
            let got = actual.splits.get(&split).map_or((0, 0), |s| (s.instances, s.no_violation));
            if want != got {
                return Err(Error::DataIntegrity(format!(
                    "split {} count mismatch: manifest {want:?}, dataset {got:?}",
                    split.as_str()
                )));
            }
        }
        Ok(())
    }
}

/// Round-trip check used on every emitted instance: parse(target) must equal gold.
pub fn verify_target(record: &DatasetRecord) -> Result<()> {
    use crate::codec::{parse_response, ParseOptions, ParseStatus};
    let codes = vec![record.idiom_code.clone()];
    let parsed = parse_response(&record.target_text, &codes, ParseOptions::strict());
    if parsed.status != ParseStatus::Clean || parsed.lines(&record.idiom_code) != record.gold_set() {
        return Err(Error::DataIntegrity(format!(
            "target text of instance {} does not parse back to its gold lines",
            record.id
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub pep_id: String,
    pub file: SourceFile,
    pub gold_lines: BTreeSet<usize>,
    pub after_snippet: Option<String>,
    pub is_positive: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchmarkInput {
    pep_id: String,
    path: String,
    content: String,
    #[serde(default)]
    gold_lines: Vec<usize>,
    #[serde(default)]
    after_snippet: Option<String>,
    #[serde(default)]
    is_positive: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub cases: usize,
    pub positive: usize,
    pub negative: usize,
    pub positive_fraction: f64,
}

/// Loads benchmark cases from JSONL records `{pep_id, path, content, gold_lines, after_snippet?}`.
pub fn load_benchmark(path: &Path) -> Result<(Vec<BenchmarkCase>, BenchmarkSummary)> {
    let inputs: Vec<BenchmarkInput> = read_jsonl(path).map_err(|e| match e {
        Error::Json { locator, source } => Error::validation(locator, source.to_string()),
        other => other,
    })?;
    let mut cases = Vec::with_capacity(inputs.len());
    for (i, input) in inputs.into_iter().enumerate() {
        let locator = format!("{}:{}", path.display(), i + 1);
        let file = SourceFile::new(input.path, input.content);
        let gold: BTreeSet<usize> = input.gold_lines.into_iter().collect();
        if let Some(&bad) = gold.iter().find(|&&l| l == 0 || l > file.line_count) {
            return Err(Error::validation(
                locator,
                format!(
                    "gold line {bad} outside {} ({} lines)",
                    file.path, file.line_count
                ),
            ));
        }
        let is_positive = !gold.is_empty();
        if input.is_positive.is_some_and(|p| p != is_positive) {
            return Err(Error::validation(
                locator,
                "is_positive disagrees with gold_lines",
            ));
        }
        cases.push(BenchmarkCase {
            pep_id: input.pep_id,
            file,
            gold_lines: gold,
            after_snippet: input.after_snippet,
            is_positive,
        });
    }
    let positive = cases.iter().filter(|c| c.is_positive).count();
    let summary = BenchmarkSummary {
        cases: cases.len(),
        positive,
        negative: cases.len() - positive,
        positive_fraction: if cases.is_empty() {
            0.0
        } else {
            positive as f64 / cases.len() as f64
        },
    };
    Ok((cases, summary))
}

/// Turns a benchmark case into a task instance for the PEP idiom named by `pep_id`.
pub fn benchmark_instance(case: &BenchmarkCase, catalog: &Catalog, template: Template) -> Result<TaskInstance> {
    let spec = catalog.get(&case.pep_id).ok_or_else(|| {
        Error::Config(format!("no idiom spec for benchmark idiom {}", case.pep_id))
    })?;
    let numbered = render_numbered(&case.file);
    let mut gold = ViolationSet::new(&spec.code, case.gold_lines.iter().copied());
    if let Some(after) = &case.after_snippet {
        let lines = case.file.lines();
        let before = case
            .gold_lines
            .iter()
            .map(|&l| lines[l - 1])
            .collect::<Vec<_>>()
            .join("\n");
        gold.fixes.push(Fix {
            before,
            after: after.clone(),
        });
    }
    build_sft_instance(&numbered, spec, &gold, template, Split::HardPep)
}
