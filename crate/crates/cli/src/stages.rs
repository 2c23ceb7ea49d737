//! Pipeline stages. Each reads its inputs, writes its artifacts into the output
//! directory and finishes by writing a manifest that claims them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use idiomlint_core::catalog::load_specs;
use idiomlint_core::codec::{decode_response, ParseOptions, RelaxationLevel};
use idiomlint_core::corpus::{
    corpus_digest, corpus_records, render_numbered, scan_corpus, Exclusion, ExclusionReason,
};
use idiomlint_core::dataset::{
    balance_dataset, benchmark_instance, build_sft_instance, load_benchmark, split_by_transfer,
    verify_target, BalanceReport, DatasetManifest, DatasetRecord, Split, TaskInstance,
    TransferConfig,
};
use idiomlint_core::eval::{
    build_report, instance_scores, significance_table, EvalInstance, InstanceScore, MetricsReport,
    SignificanceRow,
};
use idiomlint_core::io::{derive_seed, file_digest, read_jsonl, write_json_pretty, write_jsonl};
use idiomlint_core::lint::{diagnostics_to_gold, lint_files, linter_version};
use idiomlint_core::manifest::RunManifest;
use idiomlint_core::preference::{
    build_pairs, filter_rs_sft, rs_sft_ratio_pass, rs_sft_record, score_entry,
    subsample_no_violation, SampledResponse,
};
use idiomlint_core::sampler::{
    sample_all, BaselineProfile, HttpEndpoint, Journal, JournalEntry, SampleJob, SampleStatus,
};
use idiomlint_core::{Catalog, Error, ParseStatus, Result, SourceFile, Template};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::PipelineConfig;

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const EXCLUSIONS_FILE: &str = "exclusions.jsonl";
pub const JOURNAL_FILE: &str = "samples.jsonl";
pub const REWARDED_FILE: &str = "rewarded.jsonl";
pub const DPO_FILE: &str = "dpo_pairs.jsonl";
pub const RS_SFT_FILE: &str = "rs_sft.jsonl";
pub const BENCH_DATASET_FILE: &str = "bench_dataset.jsonl";

fn manifest(cfg: &PipelineConfig, stage: &str, details: serde_json::Value) -> RunManifest {
    RunManifest {
        stage: stage.to_string(),
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_digest: cfg.digest(),
        seed: cfg.seed,
        versions: BTreeMap::new(),
        inputs: BTreeMap::new(),
        artifacts: Vec::new(),
        details,
    }
}

fn out_dir(cfg: &PipelineConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir()?.to_path_buf();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn record_input(m: &mut RunManifest, path: &Path) -> Result<()> {
    m.inputs
        .insert(path.display().to_string(), file_digest(path)?);
    Ok(())
}

/// `explicit` if given, otherwise `name` inside the output directory.
fn input_path(explicit: Option<&Path>, out: &Path, name: &str) -> PathBuf {
    explicit.map_or_else(|| out.join(name), Path::to_path_buf)
}

fn load_catalog(cfg: &PipelineConfig) -> Result<Catalog> {
    let mut catalog = load_specs(&cfg.catalog.path)?;
    if let Some(extra) = cfg.benchmark.as_ref().and_then(|b| b.catalog.as_ref()) {
        catalog.extend(load_specs(extra)?)?;
    }
    Ok(catalog)
}

fn is_test_file(path: &str, fraction: f64, seed: u64) -> bool {
    (derive_seed(seed, path) as f64 / u64::MAX as f64) < fraction
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenDataOutcome {
    pub manifest: DatasetManifest,
    pub exclusions: usize,
    pub train_files: usize,
    pub test_files: usize,
}

struct Build<'a> {
    cfg: &'a PipelineConfig,
    catalog: &'a Catalog,
    exclusions: Vec<Exclusion>,
}

impl Build<'_> {
    /// Lints `files` for `codes` and builds one instance per (file, idiom, template).
    fn instances(
        &mut self,
        files: &[SourceFile],
        codes: &[String],
        templates: &[Template],
        split_of: impl Fn(&str) -> Split,
    ) -> Result<Vec<TaskInstance>> {
        let cmd = self.cfg.linter.command();
        let results = lint_files(files, codes, &cmd, self.cfg.linter.workers);
        let mut out = Vec::new();
        for (file, result) in files.iter().zip(results) {
            let diags = match result {
                Ok(d) => d,
                Err(e @ Error::Environment(_)) => return Err(e),
                Err(e) => {
                    log::warn!("excluding {}: {e}", file.path);
                    self.exclusions.push(Exclusion {
                        path: file.path.clone(),
                        reason: ExclusionReason::LinterFailed {
                            message: e.to_string(),
                        },
                    });
                    continue;
                }
            };
            let numbered = render_numbered(file);
            for code in codes {
                let spec = self.catalog.get(code).expect("split codes are catalog codes");
                let gold = diagnostics_to_gold(&diags, code, self.cfg.linter.span_mode);
                for &template in templates {
                    out.push(build_sft_instance(&numbered, spec, &gold, template, split_of(code))?);
                }
            }
        }
        Ok(out)
    }
}

/// Corpus to SFT dataset: scan, partition files, lint, build, balance, verify, write.
pub fn gen_data(cfg: &PipelineConfig) -> Result<GenDataOutcome> {
    let out = out_dir(cfg)?;
    let scan = scan_corpus(&cfg.corpus.root, &cfg.corpus.scan_options())?;
    let catalog = load_catalog(cfg)?;
    let transfer = cfg
        .splits
        .clone()
        .unwrap_or_else(|| TransferConfig::from_catalog(&catalog));
    let assignment = split_by_transfer(&catalog, &transfer)?;
    let linter = linter_version(&cfg.linter.command())?;

    let partition_seed = derive_seed(cfg.seed, "partition");
    let (test_files, train_files): (Vec<SourceFile>, Vec<SourceFile>) = scan
        .files
        .iter()
        .cloned()
        .partition(|f| is_test_file(&f.path, cfg.corpus.test_file_fraction, partition_seed));
    let mut build = Build {
        cfg,
        catalog: &catalog,
        exclusions: scan.exclusions.clone(),
    };
    let train = build.instances(&train_files, &assignment.training, &[cfg.dataset.train_template], |_| {
        Split::Train
    })?;
    let test_codes: Vec<String> = assignment.test.keys().cloned().collect();
    let test = build.instances(&test_files, &test_codes, &cfg.dataset.test_templates, |c| {
        assignment.test[c]
    })?;

    let mut balance: BTreeMap<Split, BalanceReport> = BTreeMap::new();
    let (mut kept, report) = balance_dataset(
        train,
        cfg.balance.no_violation_fraction,
        derive_seed(cfg.seed, "balance-train"),
    );
    balance.insert(Split::Train, report);
    let mut by_split: BTreeMap<Split, Vec<TaskInstance>> = BTreeMap::new();
    for t in test {
        by_split.entry(t.split).or_default().push(t);
    }
    for (split, group) in by_split {
        let (k, r) = balance_dataset(
            group,
            cfg.test_no_violation_fraction(),
            derive_seed(cfg.seed, &format!("balance-{}", split.as_str())),
        );
        balance.insert(split, r);
        kept.extend(k);
    }

    let mut records: Vec<DatasetRecord> = kept.iter().map(TaskInstance::to_record).collect();
    records.sort_by(|a, b| (a.split, &a.id).cmp(&(b.split, &b.id)));
    records.iter().try_for_each(verify_target)?;

    let mut exclusions = build.exclusions;
    exclusions.sort_by(|a, b| a.path.cmp(&b.path));
    let excluded: BTreeSet<&str> = exclusions.iter().map(|e| e.path.as_str()).collect();
    let used: Vec<SourceFile> = scan
        .files
        .iter()
        .filter(|f| !excluded.contains(f.path.as_str()))
        .cloned()
        .collect();

    let mut dm = DatasetManifest::summarize(&records);
    dm.linter = Some(linter.clone());
    dm.corpus_digest = corpus_digest(&used);
    dm.balance = balance;

    write_jsonl(&out.join(DATASET_FILE), &records)?;
    write_jsonl(&out.join(CORPUS_FILE), &corpus_records(&used))?;
    write_jsonl(&out.join(EXCLUSIONS_FILE), &exclusions)?;
    let mut m = manifest(cfg, "gen-data", serde_json::to_value(&dm).expect("serializable"));
    m.versions.insert("linter".into(), linter);
    m.inputs.insert(
        format!("corpus:{}", cfg.corpus.root.display()),
        dm.corpus_digest.clone(),
    );
    m.write(&out, "gen-data", &[DATASET_FILE, CORPUS_FILE, EXCLUSIONS_FILE])?;
    Ok(GenDataOutcome {
        manifest: dm,
        exclusions: exclusions.len(),
        train_files: train_files.len(),
        test_files: test_files.len(),
    })
}

fn load_dataset(path: &Path) -> Result<BTreeMap<String, DatasetRecord>> {
    let records: Vec<DatasetRecord> = read_jsonl(path)?;
    let mut map = BTreeMap::new();
    for r in records {
        if map.insert(r.id.clone(), r).is_some() {
            return Err(Error::DataIntegrity(format!(
                "{} holds a duplicate instance id",
                path.display()
            )));
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, Default)]
pub struct SampleArgs {
    pub dataset: Option<PathBuf>,
    pub journal: Option<String>,
    pub splits: Vec<Split>,
    pub profile: Option<BaselineProfile>,
}

fn stem(file: &str) -> &str {
    file.strip_suffix(".jsonl").unwrap_or(file)
}

/// Dataset to response journal. Resumes an existing journal without duplicating entries.
pub fn sample(cfg: &PipelineConfig, args: &SampleArgs) -> Result<idiomlint_core::sampler::SampleRunReport> {
    let out = out_dir(cfg)?;
    let endpoint_cfg = cfg
        .endpoint
        .as_ref()
        .ok_or_else(|| Error::Config("sampling needs an [endpoint] section".into()))?;
    let endpoint = HttpEndpoint::new(
        &endpoint_cfg.url,
        &endpoint_cfg.model,
        endpoint_cfg.token_env.as_deref(),
        Duration::from_secs(endpoint_cfg.timeout_secs),
    )?;
    let dataset_path = input_path(args.dataset.as_deref(), &out, DATASET_FILE);
    let dataset = load_dataset(&dataset_path)?;
    let jobs: Vec<SampleJob> = dataset
        .values()
        .filter(|r| args.splits.is_empty() || args.splits.contains(&r.split))
        .map(|r| SampleJob {
            instance_id: r.id.clone(),
            prompt: r.prompt.clone(),
        })
        .collect();
    let params = match args.profile {
        Some(p) => vec![p.params()],
        None => cfg.sampling.all_params(),
    };
    let journal_name = args.journal.clone().unwrap_or_else(|| JOURNAL_FILE.to_string());
    let journal = Journal::open(&out.join(&journal_name))?;
    let report = sample_all(
        &jobs,
        &params,
        &endpoint,
        &journal,
        endpoint_cfg.concurrency,
        &endpoint_cfg.retry,
    )?;
    let mut m = manifest(
        cfg,
        "sample",
        json!({
            "model": endpoint_cfg.model,
            "endpoint": endpoint.url().as_str(),
            "profile": args.profile,
            "run": report,
        }),
    );
    record_input(&mut m, &dataset_path)?;
    m.write(&out, stem(&journal_name), &[journal_name.as_str()])?;
    Ok(report)
}

fn parse_options(level: RelaxationLevel, template: Template) -> ParseOptions {
    ParseOptions {
        level,
        require_section_header: template == Template::Baseline,
    }
}

fn score_journal(
    cfg: &PipelineConfig,
    dataset: &BTreeMap<String, DatasetRecord>,
    entries: &[JournalEntry],
) -> Result<Vec<SampledResponse>> {
    entries
        .iter()
        .map(|e| {
            let r = dataset.get(&e.instance_id).ok_or_else(|| {
                Error::DataIntegrity(format!(
                    "journal entry for unknown instance {}",
                    e.instance_id
                ))
            })?;
            Ok(score_entry(
                e,
                &r.gold_set(),
                &r.idiom_code,
                parse_options(cfg.parsing.reward_level, r.template),
                &cfg.parsing.reasoning_delimiters,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct RewardArgs {
    pub dataset: Option<PathBuf>,
    pub journal: Option<PathBuf>,
}

/// Journal to rewarded responses.
pub fn reward(cfg: &PipelineConfig, args: &RewardArgs) -> Result<usize> {
    let out = out_dir(cfg)?;
    let dataset_path = input_path(args.dataset.as_deref(), &out, DATASET_FILE);
    let journal_path = input_path(args.journal.as_deref(), &out, JOURNAL_FILE);
    let dataset = load_dataset(&dataset_path)?;
    let entries: Vec<JournalEntry> = read_jsonl(&journal_path)?;
    let scored = score_journal(cfg, &dataset, &entries)?;
    let n = write_jsonl(&out.join(REWARDED_FILE), &scored)?;
    let failures = scored.iter().filter(|s| s.parsed.failed()).count();
    let mut m = manifest(
        cfg,
        "reward",
        json!({"responses": n, "parse_failures": failures, "level": cfg.parsing.reward_level}),
    );
    record_input(&mut m, &dataset_path)?;
    record_input(&mut m, &journal_path)?;
    m.write(&out, "reward", &[REWARDED_FILE])?;
    Ok(n)
}

#[derive(Debug, Clone, Default)]
pub struct ResponseSource {
    pub dataset: Option<PathBuf>,
    /// A raw journal, scored on the fly.
    pub journal: Option<PathBuf>,
    /// Output of the reward stage; the default when no journal is given.
    pub rewarded: Option<PathBuf>,
}

struct Responses {
    dataset: BTreeMap<String, DatasetRecord>,
    by_instance: BTreeMap<String, Vec<SampledResponse>>,
    inputs: Vec<PathBuf>,
}

fn load_responses(cfg: &PipelineConfig, out: &Path, src: &ResponseSource) -> Result<Responses> {
    let dataset_path = input_path(src.dataset.as_deref(), out, DATASET_FILE);
    let dataset = load_dataset(&dataset_path)?;
    let (scored, input) = match &src.journal {
        Some(j) => {
            let entries: Vec<JournalEntry> = read_jsonl(j)?;
            (score_journal(cfg, &dataset, &entries)?, j.clone())
        }
        None => {
            let path = input_path(src.rewarded.as_deref(), out, REWARDED_FILE);
            let scored: Vec<SampledResponse> = read_jsonl(&path)?;
            for s in &scored {
                let r = dataset.get(&s.instance_id).ok_or_else(|| {
                    Error::DataIntegrity(format!("response for unknown instance {}", s.instance_id))
                })?;
                if !s.check_reward(&r.gold_set(), &r.idiom_code) {
                    return Err(Error::DataIntegrity(format!(
                        "stored reward of {} sample {} does not match its parse",
                        s.instance_id, s.sample_index
                    )));
                }
            }
            (scored, path)
        }
    };
    let mut by_instance: BTreeMap<String, Vec<SampledResponse>> = BTreeMap::new();
    for s in scored {
        by_instance.entry(s.instance_id.clone()).or_default().push(s);
    }
    for group in by_instance.values_mut() {
        group.sort_by_key(|s| s.sample_index);
        group.dedup_by_key(|s| s.sample_index);
    }
    Ok(Responses {
        dataset,
        by_instance,
        inputs: vec![dataset_path, input],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpoOutcome {
    pub pairs: usize,
    pub instances_with_pairs: usize,
    pub no_violation_kept: usize,
}

/// Rewarded responses to RS-DPO preference pairs.
pub fn build_dpo(cfg: &PipelineConfig, src: &ResponseSource) -> Result<DpoOutcome> {
    let out = out_dir(cfg)?;
    let r = load_responses(cfg, &out, src)?;
    let eta = cfg.preference.eta;
    let mut pairs = BTreeMap::new();
    let mut gold = BTreeMap::new();
    for (id, group) in &r.by_instance {
        let rec = &r.dataset[id];
        pairs.insert(id.clone(), build_pairs(&rec.prompt, group, eta));
        gold.insert(id.clone(), rec.gold_set());
    }
    let before: usize = pairs.values().map(Vec::len).sum();
    let (kept, report) = subsample_no_violation(
        &pairs,
        &gold,
        cfg.preference.no_violation_fraction,
        derive_seed(cfg.seed, "dpo-no-violation"),
    )?;
    write_jsonl(&out.join(DPO_FILE), &kept)?;
    let mut m = manifest(
        cfg,
        "build-dpo",
        json!({"eta": eta, "pairs_before_subsampling": before, "subsample": report}),
    );
    for p in &r.inputs {
        record_input(&mut m, p)?;
    }
    m.write(&out, "build-dpo", &[DPO_FILE])?;
    Ok(DpoOutcome {
        pairs: kept.len(),
        instances_with_pairs: kept.iter().map(|p| &p.instance_id).collect::<BTreeSet<_>>().len(),
        no_violation_kept: report.no_violation_kept,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsSftOutcome {
    pub records: usize,
    pub instances: usize,
    pub skipped: usize,
    pub balance: BalanceReport,
}

/// Rewarded responses to the RS-SFT dataset.
pub fn build_rssft(cfg: &PipelineConfig, src: &ResponseSource) -> Result<RsSftOutcome> {
    let out = out_dir(cfg)?;
    let r = load_responses(cfg, &out, src)?;
    let gold: BTreeMap<String, BTreeSet<usize>> = r
        .by_instance
        .keys()
        .map(|id| (id.clone(), r.dataset[id].gold_set()))
        .collect();
    let selection = filter_rs_sft(&r.by_instance, cfg.preference.gamma, &gold)?;
    let skipped = selection.skipped.len();
    let (selection, balance) = rs_sft_ratio_pass(
        selection,
        &gold,
        cfg.preference.rs_sft_no_violation_ratio,
        derive_seed(cfg.seed, "rs-sft-ratio"),
    );
    let records: Vec<_> = selection
        .retained
        .iter()
        .flat_map(|(id, rs)| rs.iter().map(|s| rs_sft_record(&r.dataset[id], s)))
        .collect();
    write_jsonl(&out.join(RS_SFT_FILE), &records)?;
    let mut m = manifest(
        cfg,
        "build-rssft",
        json!({"gamma": cfg.preference.gamma, "skipped_instances": skipped, "balance": balance}),
    );
    for p in &r.inputs {
        record_input(&mut m, p)?;
    }
    m.write(&out, "build-rssft", &[RS_SFT_FILE])?;
    Ok(RsSftOutcome {
        records: records.len(),
        instances: selection.retained.len(),
        skipped,
        balance,
    })
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub dataset: Option<PathBuf>,
    pub predictions: PathBuf,
    pub sample_index: usize,
    pub name: String,
    pub splits: Vec<Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub report: MetricsReport,
    pub missing_predictions: usize,
}

fn evaluate(
    cfg: &PipelineConfig,
    dataset: &BTreeMap<String, DatasetRecord>,
    predictions: &[JournalEntry],
    sample_index: usize,
    splits: &[Split],
) -> Result<(Vec<EvalInstance>, usize)> {
    let by_id: BTreeMap<&str, &JournalEntry> = predictions
        .iter()
        .filter(|e| e.sample_index == sample_index)
        .map(|e| (e.instance_id.as_str(), e))
        .collect();
    let mut instances = Vec::new();
    let mut missing = 0;
    for r in dataset
        .values()
        .filter(|r| splits.is_empty() || splits.contains(&r.split))
    {
        let Some(entry) = by_id.get(r.id.as_str()) else {
            missing += 1;
            continue;
        };
        let codes = [r.idiom_code.clone()];
        let (pred, status) = if entry.status == SampleStatus::Failed {
            (BTreeSet::new(), ParseStatus::Failed)
        } else {
            let d = decode_response(
                &entry.text,
                &codes,
                parse_options(cfg.parsing.eval_level, r.template),
                &cfg.parsing.reasoning_delimiters,
            );
            (d.parsed.lines(&r.idiom_code), d.parsed.status)
        };
        instances.push(EvalInstance {
            instance_id: r.id.clone(),
            idiom_code: r.idiom_code.clone(),
            split: r.split,
            gold: r.gold_set(),
            pred,
            parse_status: status,
        });
    }
    if instances.is_empty() {
        return Err(Error::DataIntegrity(
            "no dataset instance has a prediction to evaluate".into(),
        ));
    }
    Ok((instances, missing))
}

#[allow(clippy::too_many_arguments)]
fn write_eval(
    cfg: &PipelineConfig,
    out: &Path,
    name: &str,
    stage: &str,
    instances: &[EvalInstance],
    missing: usize,
    inputs: &[&Path],
    extra_artifacts: &[&str],
) -> Result<EvalOutcome> {
    let report = build_report(instances);
    report.validate()?;
    let metrics_json = format!("{name}_metrics.json");
    let metrics_txt = format!("{name}_metrics.txt");
    let scores = format!("{name}_scores.jsonl");
    write_json_pretty(&out.join(&metrics_json), &report)?;
    std::fs::write(out.join(&metrics_txt), report.to_table()).map_err(|e| Error::io(out.join(&metrics_txt), e))?;
    write_jsonl(&out.join(&scores), &instance_scores(instances))?;
    let mut m = manifest(cfg, stage, json!({"missing_predictions": missing, "instances": instances.len()}));
    for p in inputs {
        record_input(&mut m, p)?;
    }
    let mut artifacts = vec![metrics_json.as_str(), metrics_txt.as_str(), scores.as_str()];
    artifacts.extend_from_slice(extra_artifacts);
    m.write(out, name, &artifacts)?;
    Ok(EvalOutcome {
        report,
        missing_predictions: missing,
    })
}

/// Predictions journal against the dataset's gold lines.
pub fn eval(cfg: &PipelineConfig, args: &EvalArgs) -> Result<EvalOutcome> {
    let out = out_dir(cfg)?;
    let dataset_path = input_path(args.dataset.as_deref(), &out, DATASET_FILE);
    let dataset = load_dataset(&dataset_path)?;
    let predictions: Vec<JournalEntry> = read_jsonl(&args.predictions)?;
    let (instances, missing) = evaluate(cfg, &dataset, &predictions, args.sample_index, &args.splits)?;
    write_eval(
        cfg,
        &out,
        &args.name,
        "eval",
        &instances,
        missing,
        &[&dataset_path, &args.predictions],
        &[],
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOutcome {
    pub summary: idiomlint_core::dataset::BenchmarkSummary,
    pub report: Option<MetricsReport>,
}

/// Hard-idiom benchmark: emits its prompts and, given predictions, evaluates them.
pub fn bench(cfg: &PipelineConfig, predictions: Option<&Path>, sample_index: usize) -> Result<BenchOutcome> {
    let out = out_dir(cfg)?;
    let bcfg = cfg
        .benchmark
        .as_ref()
        .ok_or_else(|| Error::Config("bench needs a [benchmark] section".into()))?;
    let catalog = load_catalog(cfg)?;
    let (cases, summary) = load_benchmark(&bcfg.path)?;
    let mut records: Vec<DatasetRecord> = cases
        .iter()
        .map(|c| benchmark_instance(c, &catalog, bcfg.template).map(|t| t.to_record()))
        .collect::<Result<_>>()?;
    records.sort_by(|a, b| a.id.cmp(&b.id));
    write_jsonl(&out.join(BENCH_DATASET_FILE), &records)?;
    let Some(pred_path) = predictions else {
        let mut m = manifest(cfg, "bench", json!({"summary": summary}));
        record_input(&mut m, &bcfg.path)?;
        m.write(&out, "bench", &[BENCH_DATASET_FILE])?;
        return Ok(BenchOutcome { summary, report: None });
    };
    let dataset: BTreeMap<String, DatasetRecord> = records.into_iter().map(|r| (r.id.clone(), r)).collect();
    let entries: Vec<JournalEntry> = read_jsonl(pred_path)?;
    let (instances, missing) = evaluate(cfg, &dataset, &entries, sample_index, &[])?;
    let outcome = write_eval(
        cfg,
        &out,
        "bench",
        "bench",
        &instances,
        missing,
        &[&bcfg.path, pred_path],
        &[BENCH_DATASET_FILE],
    )?;
    Ok(BenchOutcome {
        summary,
        report: Some(outcome.report),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsMetric {
    /// Per-instance localization F1.
    F1,
    /// 1 when the presence of violations was judged correctly, else 0.
    Detection,
}

#[derive(Debug, Clone)]
pub struct StatsArgs {
    pub baseline: PathBuf,
    pub candidates: Vec<PathBuf>,
    pub metric: StatsMetric,
    pub name: String,
}

/// Paired Wilcoxon tests of each candidate's per-instance scores against the baseline's.
pub fn stats(cfg: &PipelineConfig, args: &StatsArgs) -> Result<Vec<SignificanceRow>> {
    let out = out_dir(cfg)?;
    let load = |p: &Path| -> Result<BTreeMap<String, f64>> {
        let scores: Vec<InstanceScore> = read_jsonl(p)?;
        Ok(scores
            .into_iter()
            .map(|s| {
                let v = match args.metric {
                    StatsMetric::F1 => s.f1,
                    StatsMetric::Detection => f64::from(u8::from(s.detection_correct)),
                };
                (s.instance_id, v)
            })
            .collect())
    };
    let base = load(&args.baseline)?;
    let mut comparisons = Vec::new();
    for c in &args.candidates {
        let cand = load(c)?;
        let shared: Vec<&String> = base.keys().filter(|k| cand.contains_key(*k)).collect();
        if shared.is_empty() {
            return Err(Error::DataIntegrity(format!(
                "{} shares no instances with {}",
                c.display(),
                args.baseline.display()
            )));
        }
        comparisons.push((
            format!("{} vs {}", c.display(), args.baseline.display()),
            shared.iter().map(|k| cand[*k]).collect(),
            shared.iter().map(|k| base[*k]).collect(),
        ));
    }
    let rows = significance_table(&comparisons, cfg.stats.alpha)?;
    let json_name = format!("{}.json", args.name);
    let txt_name = format!("{}.txt", args.name);
    write_json_pretty(&out.join(&json_name), &rows)?;
    let mut table = format!(
        "{:<60} {:>5} {:>10} {:>10} {:>10} {:>5}\n",
        "comparison", "n", "W", "p", "alpha", "sig"
    );
    for r in &rows {
        table.push_str(&format!(
            "{:<60} {:>5} {:>10.1} {:>10.4} {:>10.4} {:>5}\n",
            r.comparison,
            r.n,
            r.statistic,
            r.p_value,
            r.adjusted_alpha,
            if r.significant { "yes" } else { "no" }
        ));
    }
    std::fs::write(out.join(&txt_name), table).map_err(|e| Error::io(out.join(&txt_name), e))?;
    let mut m = manifest(cfg, "stats", json!({"metric": args.metric, "alpha": cfg.stats.alpha}));
    record_input(&mut m, &args.baseline)?;
    for c in &args.candidates {
        record_input(&mut m, c)?;
    }
    m.write(&out, &args.name, &[json_name.as_str(), txt_name.as_str()])?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_file_partition_tracks_the_fraction() {
        let paths: Vec<String> = (0..2000).map(|i| format!("pkg/m{i}.py")).collect();
        let held = paths.iter().filter(|p| is_test_file(p, 0.1, 42)).count();
        assert!((150..250).contains(&held), "{held}");
        assert!(paths.iter().all(|p| !is_test_file(p, 0.0, 42)));
        assert!(paths.iter().all(|p| is_test_file(p, 1.0, 42) || derive_seed(42, p) == u64::MAX));
        let again = paths.iter().filter(|p| is_test_file(p, 0.1, 42)).count();
        assert_eq!(held, again);
    }

    #[test]
    fn manifest_names() {
        assert_eq!(stem("samples.jsonl"), "samples");
        assert_eq!(stem("journal"), "journal");
    }

    #[test]
    fn baseline_records_require_the_header() {
        assert!(parse_options(RelaxationLevel::Strict, Template::Baseline).require_section_header);
        assert!(!parse_options(RelaxationLevel::Relaxed, Template::Instruction).require_section_header);
    }
}
