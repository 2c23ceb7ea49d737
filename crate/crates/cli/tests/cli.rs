use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use idiomlint_cli::run;
use idiomlint_core::eval::{InstanceScore, LocalizationMode, SignificanceRow};
use idiomlint_core::io::{read_json, read_jsonl, write_jsonl};
use idiomlint_core::manifest::validate_output_dir;
use idiomlint_core::preference::{RsSftRecord, SampledResponse};
use idiomlint_core::sampler::{JournalEntry, SampleStatus};
use idiomlint_core::{DatasetRecord, MetricsReport, Split};

fn mini() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini")
}

fn idiomlint(args: &[&str]) -> i32 {
    run(std::iter::once("idiomlint").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Config with absolute paths into the mini fixture plus `extra` TOML.
fn config(dir: &Path, extra: &str) -> PathBuf {
    let m = mini();
    let path = dir.join("config.toml");
    std::fs::write(
        &path,
        format!(
            "seed = 42\n{extra}\n[corpus]\nroot = {:?}\ntest_file_fraction = 0.3\n[catalog]\npath = {:?}\n\
             [benchmark]\npath = {:?}\ncatalog = {:?}\ntemplate = \"baseline\"\n",
            s(&m.join("corpus")),
            s(&m.join("catalog.jsonl")),
            s(&m.join("bench.jsonl")),
            s(&m.join("hard_pep.jsonl")),
        ),
    )
    .unwrap();
    path
}

fn answers(records: &[DatasetRecord]) -> Vec<JournalEntry> {
    let mut out = Vec::new();
    for r in records {
        let header = format!("**Idiom {} Violations:**\n\n", r.idiom_code);
        let texts = [
            r.target_text.clone(),
            format!("{header}NO VIOLATIONS FOUND"),
            format!("{header}{{\"line\": \"  1 \\\"\\\"\\\"Module.\\\"\\\"\\\"\", \"fix\": null}}"),
        ];
        for (i, text) in texts.into_iter().enumerate() {
            out.push(JournalEntry {
                instance_id: r.id.clone(),
                sample_index: i + 1,
                temperature: None,
                seed: None,
                token_length: 10 + i,
                text,
                status: SampleStatus::Ok,
                error: None,
            });
        }
    }
    out
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(idiomlint(&["--help"]), 0);
    assert_eq!(idiomlint(&["no-such-command"]), 2);
    assert_eq!(idiomlint(&["--config", s(&dir.path().join("missing.toml")), "gen-data"]), 2);
    let cfg = config(dir.path(), "");
    let out = dir.path().join("out");
    assert_eq!(idiomlint(&["-c", s(&cfg), "--out", s(&out), "build-dpo", "--eta", "0"]), 2);
    assert_eq!(idiomlint(&["-c", s(&cfg), "--out", s(&out), "build-rssft", "--gamma", "1.5"]), 2);
    // No dataset yet: a runtime failure, not a configuration one.
    assert_eq!(
        idiomlint(&["-c", s(&cfg), "--out", s(&out), "eval", "--predictions", s(&dir.path().join("p.jsonl"))]),
        1
    );
    // Sampling without an endpoint section is a configuration problem.
    assert_eq!(idiomlint(&["-c", s(&cfg), "--out", s(&out), "sample"]), 2);
    assert_eq!(idiomlint(&["-c", s(&cfg), "check-config"]), 0);
}

#[test]
fn full_offline_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let out = dir.path().join("out");
    let base = ["-c", s(&cfg), "--out", s(&out)];
    let cmd = |rest: &[&str]| idiomlint(&[&base[..], rest].concat());

    assert_eq!(cmd(&["gen-data"]), 0);
    let dataset: Vec<DatasetRecord> = read_jsonl(&out.join("dataset.jsonl")).unwrap();
    let journal = dir.path().join("journal.jsonl");
    write_jsonl(&journal, &answers(&dataset)).unwrap();

    assert_eq!(cmd(&["reward", "--journal", s(&journal)]), 0);
    let rewarded: Vec<SampledResponse> = read_jsonl(&out.join("rewarded.jsonl")).unwrap();
    assert_eq!(rewarded.len(), dataset.len() * 3);
    assert!(rewarded.iter().filter(|r| r.sample_index == 1).all(|r| r.reward.f1 == 1.0));

    assert_eq!(cmd(&["build-dpo", "--fraction", "100"]), 0);
    assert_eq!(cmd(&["build-rssft"]), 0);
    let rs: Vec<RsSftRecord> = read_jsonl(&out.join("rs_sft.jsonl")).unwrap();
    assert!(!rs.is_empty());
    assert!(rs.iter().all(|r| r.sample_index == 1 || r.instance.gold_lines.is_empty()));

    assert_eq!(cmd(&["eval", "--predictions", s(&journal), "--name", "gold"]), 0);
    assert_eq!(cmd(&["eval", "--predictions", s(&journal), "--sample-index", "2", "--name", "empty"]), 0);
    let gold: MetricsReport = read_json(&out.join("gold_metrics.json")).unwrap();
    // Idioms without gold positives score 0/0 and are flagged, so only defined ratios must be perfect.
    for d in &gold.detection.per_idiom {
        assert!(d.precision_undefined || d.precision == 1.0, "{d:?}");
        assert!(d.recall_undefined || d.recall == 1.0, "{d:?}");
    }
    assert_eq!(gold.localization[&LocalizationMode::IncludeNegatives].f1, 1.0);
    assert!(gold.splits.contains_key(&Split::Train));
    let scores: Vec<InstanceScore> = read_jsonl(&out.join("empty_scores.jsonl")).unwrap();
    assert_eq!(scores.len(), dataset.len());

    assert_eq!(
        cmd(&[
            "stats",
            "--baseline",
            s(&out.join("empty_scores.jsonl")),
            "--candidate",
            s(&out.join("gold_scores.jsonl")),
            "--metric",
            "detection",
        ]),
        0
    );
    let rows: Vec<SignificanceRow> = read_json(&out.join("significance.json")).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].significant && rows[0].adjusted_alpha == 0.05);

    assert_eq!(cmd(&["bench"]), 0);
    let bench: Vec<DatasetRecord> = read_jsonl(&out.join("bench_dataset.jsonl")).unwrap();
    let bench_journal = dir.path().join("bench_journal.jsonl");
    write_jsonl(&bench_journal, &answers(&bench)).unwrap();
    assert_eq!(cmd(&["bench", "--predictions", s(&bench_journal)]), 0);
    let report: MetricsReport = read_json(&out.join("bench_metrics.json")).unwrap();
    // Baseline answers without their section header are accepted by the relaxed eval parser, and counted.
    assert_eq!((report.instances, report.parse_failures, report.relaxed_parses), (4, 0, 4));
    assert_eq!(report.detection.f1, 1.0);

    let manifests = validate_output_dir(&out).unwrap();
    let stages: Vec<&str> = manifests.iter().map(|m| m.stage.as_str()).collect();
    for stage in ["gen-data", "reward", "build-dpo", "build-rssft", "eval", "stats", "bench"] {
        assert!(stages.contains(&stage), "no manifest for {stage}");
    }
}

#[test]
fn gen_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(idiomlint(&["-c", s(&cfg), "--out", s(&a), "gen-data"]), 0);
    assert_eq!(idiomlint(&["-c", s(&cfg), "--out", s(&b), "gen-data"]), 0);
    for f in ["dataset.jsonl", "corpus.jsonl"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    assert_eq!(idiomlint(&["-c", s(&cfg), "--out", s(&c), "--seed", "7", "gen-data"]), 0);
    assert_ne!(std::fs::read(a.join("dataset.jsonl")).unwrap(), std::fs::read(c.join("dataset.jsonl")).unwrap());
}

/// Answers every chat-completions request with a fixed completion.
fn serve_completions() -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let mut reader = BufReader::new(stream);
            let mut length = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; length];
            let _ = reader.read_exact(&mut body);
            let reply = r#"{"choices":[{"message":{"role":"assistant","content":"NO VIOLATIONS FOUND"}}],"usage":{"completion_tokens":3}}"#;
            let response = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
            let _ = reader.get_mut().write_all(response.as_bytes());
        }
    });
    format!("http://{addr}/v1")
}

#[test]
fn sample_against_a_local_endpoint_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let url = serve_completions();
    let cfg = config(
        dir.path(),
        &format!("[sampling]\nk = 2\n[endpoint]\nurl = \"{url}\"\nmodel = \"stub\"\nconcurrency = 2\n"),
    );
    let out = dir.path().join("out");
    let base = ["-c", s(&cfg), "--out", s(&out)];
    assert_eq!(idiomlint(&[&base[..], &["gen-data"]].concat()), 0);
    let dataset: Vec<DatasetRecord> = read_jsonl(&out.join("dataset.jsonl")).unwrap();
    let far = dataset.iter().filter(|r| r.split == Split::FarTransfer).count();
    assert!(far > 0);

    let sample = [&base[..], &["sample", "--split", "far-transfer"]].concat();
    assert_eq!(idiomlint(&sample), 0);
    let entries: Vec<JournalEntry> = read_jsonl(&out.join("samples.jsonl")).unwrap();
    assert_eq!(entries.len(), far * 2);
    assert!(entries.iter().all(|e| e.status == SampleStatus::Ok && e.token_length == 3));
    let seeds: Vec<Option<u64>> = entries.iter().filter(|e| e.sample_index == 2).map(|e| e.seed).collect();
    assert!(seeds.iter().all(|s| *s == Some(44)));

    // A second run finds every entry already journaled.
    assert_eq!(idiomlint(&sample), 0);
    let again: Vec<JournalEntry> = read_jsonl(&out.join("samples.jsonl")).unwrap();
    assert_eq!(again.len(), entries.len());

    let baseline = [&base[..], &["sample", "--split", "far-transfer", "--profile", "open-default", "--journal", "baseline.jsonl"]].concat();
    assert_eq!(idiomlint(&baseline), 0);
    let b: Vec<JournalEntry> = read_jsonl(&out.join("baseline.jsonl")).unwrap();
    assert_eq!(b.len(), far);
    assert!(b.iter().all(|e| e.seed == Some(42) && e.temperature == Some(0.7)));
    validate_output_dir(&out).unwrap();
}
