//! Sampling k completions per prompt from a chat-completions endpoint, with a
//! cyclic temperature schedule, per-sample seeds, retries and a resumable journal.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use url::Url;

use crate::error::{Error, Result};
use crate::io::{read_jsonl_if_exists, JsonlAppender};

pub const DEFAULT_TEMPERATURES: [f64; 5] = [0.0, 0.3, 0.5, 0.7, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingPlan {
    pub k: usize,
    pub temperatures: Vec<f64>,
    pub top_p: f64,
    pub max_new_tokens: usize,
    pub base_seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            k: 5,
            temperatures: DEFAULT_TEMPERATURES.to_vec(),
            top_p: 0.95,
            max_new_tokens: 2048,
            base_seed: 42,
        }
    }
}

impl SamplingPlan {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.k == 0 {
            problems.push("sampling.k must be at least 1".to_string());
        }
        if self.temperatures.is_empty() {
            problems.push("sampling.temperatures must not be empty".to_string());
        }
        if self.temperatures.iter().any(|t| !(0.0..=2.0).contains(t)) {
            problems.push("sampling.temperatures must lie in [0, 2]".to_string());
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            problems.push(format!("sampling.top_p must lie in (0, 1], got {}", self.top_p));
        }
        if self.max_new_tokens == 0 {
            problems.push("sampling.max_new_tokens must be positive".to_string());
        }
        problems
    }

    /// Parameters for 1-based sample `index`.
    pub fn params(&self, index: usize) -> SampleParams {
        assert!(index >= 1, "sample indices start at 1");
        SampleParams {
            sample_index: index,
            temperature: Some(self.temperatures[(index - 1) % self.temperatures.len()]),
            top_p: Some(self.top_p),
            seed: Some(self.base_seed + index as u64),
            max_tokens: Some(self.max_new_tokens),
        }
    }

    pub fn all_params(&self) -> Vec<SampleParams> {
        (1..=self.k).map(|i| self.params(i)).collect()
    }
}

/// Per-request overrides. `None` leaves the provider default in place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleParams {
    pub sample_index: usize,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub seed: Option<u64>,
    pub max_tokens: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineProfile {
    /// Open-weight models: temperature 0.7, top-p 0.95, seed 42, up to 8192 new tokens.
    OpenDefault,
    /// Hosted models: provider defaults for every sampling parameter.
    ClosedDefault,
}

impl BaselineProfile {
    pub fn params(self) -> SampleParams {
        match self {
            BaselineProfile::OpenDefault => SampleParams {
                sample_index: 1,
                temperature: Some(0.7),
                top_p: Some(0.95),
                seed: Some(42),
                max_tokens: Some(8192),
            },
            BaselineProfile::ClosedDefault => SampleParams {
                sample_index: 1,
                temperature: None,
                top_p: None,
                seed: None,
                max_tokens: None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub token_length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EndpointError {
    /// Worth retrying: timeouts, rate limits, server errors.
    Transient(String),
    /// The endpoint could not be reached at all.
    Unreachable(String),
    Auth(String),
    /// The request was rejected and retrying will not help.
    Rejected(String),
}

impl std::fmt::Display for EndpointError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EndpointError::Transient(m) => write!(f, "transient failure: {m}"),
            EndpointError::Unreachable(m) => write!(f, "endpoint unreachable: {m}"),
            EndpointError::Auth(m) => write!(f, "authentication failed: {m}"),
            EndpointError::Rejected(m) => write!(f, "request rejected: {m}"),
        }
    }
}

pub trait CompletionEndpoint: Sync {
    fn complete(&self, prompt: &str, params: &SampleParams) -> std::result::Result<Completion, EndpointError>;
}

/// A chat-completions endpoint reached over HTTP.
#[derive(Debug)]
pub struct HttpEndpoint {
    url: Url,
    model: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpEndpoint {
    /// `base_url` may name the API root (`http://host/v1`) or the full completions route.
    /// The bearer token, if any, is read from the environment variable `token_env`.
    pub fn new(base_url: &str, model: &str, token_env: Option<&str>, timeout: Duration) -> Result<Self> {
        let mut url = Url::parse(base_url)
            .map_err(|e| Error::Config(format!("endpoint locator {base_url:?} is not a valid URL: {e}")))?;
        if !matches!(url.scheme(), "http" | "https") || url.host().is_none() {
            return Err(Error::Config(format!(
                "endpoint locator {base_url:?} must be an http(s) URL with a host"
            )));
        }
        if !url.path().ends_with("/chat/completions") {
            let path = format!("{}/chat/completions", url.path().trim_end_matches('/'));
            url.set_path(&path);
        }
        let token = match token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::Config(format!("endpoint token variable {var} is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Environment(format!("cannot build HTTP client: {e}")))?;
        Ok(Self {
            url,
            model: model.to_string(),
            token,
            client,
        })
    }

    pub fn url(&self) -> &Url {
        &self.url
    }

    pub fn request_body(&self, prompt: &str, params: &SampleParams) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let obj = body.as_object_mut().expect("object literal");
        if let Some(t) = params.temperature {
            obj.insert("temperature".into(), json!(t));
        }
        if let Some(p) = params.top_p {
            obj.insert("top_p".into(), json!(p));
        }
        if let Some(s) = params.seed {
            obj.insert("seed".into(), json!(s));
        }
        if let Some(m) = params.max_tokens {
            obj.insert("max_tokens".into(), json!(m));
        }
        body
    }
}

/// Extracts the first choice's message and the completion token count.
pub fn parse_chat_response(body: &Value) -> std::result::Result<Completion, EndpointError> {
    let text = body
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| EndpointError::Rejected("response has no choices[0].message.content".into()))?;
    let token_length = body
        .pointer("/usage/completion_tokens")
        .and_then(Value::as_u64)
        .map_or_else(|| text.split_whitespace().count(), |n| n as usize);
    Ok(Completion {
        text: text.to_string(),
        token_length,
    })
}

impl CompletionEndpoint for HttpEndpoint {
    fn complete(&self, prompt: &str, params: &SampleParams) -> std::result::Result<Completion, EndpointError> {
        let mut req = self.client.post(self.url.clone()).json(&self.request_body(prompt, params));
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| {
            if e.is_connect() {
                EndpointError::Unreachable(e.to_string())
            } else {
                EndpointError::Transient(e.to_string())
            }
        })?;
        let status = resp.status();
        let body = resp.text().map_err(|e| EndpointError::Transient(e.to_string()))?;
        match status.as_u16() {
            200..=299 => {
                let value: Value = serde_json::from_str(&body)
                    .map_err(|e| EndpointError::Rejected(format!("response is not JSON: {e}")))?;
                parse_chat_response(&value)
            }
            401 | 403 => Err(EndpointError::Auth(format!("HTTP {status}"))),
            408 | 429 | 500..=599 => Err(EndpointError::Transient(format!("HTTP {status}: {body}"))),
            _ => Err(EndpointError::Rejected(format!("HTTP {status}: {body}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 4,
            initial_backoff_ms: 500,
            max_backoff_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self
            .initial_backoff_ms
            .saturating_mul(1u64 << attempt.min(20))
            .min(self.max_backoff_ms);
        Duration::from_millis(ms)
    }

    pub fn call(
        &self,
        endpoint: &dyn CompletionEndpoint,
        prompt: &str,
        params: &SampleParams,
    ) -> std::result::Result<Completion, EndpointError> {
        let mut attempt = 0;
        loop {
            match endpoint.complete(prompt, params) {
                Err(EndpointError::Transient(m) | EndpointError::Unreachable(m))
                    if attempt + 1 < self.max_attempts =>
                {
                    log::debug!("attempt {} failed ({m}), retrying", attempt + 1);
                    std::thread::sleep(self.backoff(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Ok,
    Failed,
}

/// One journal line: a completion or a recorded failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub instance_id: String,
    pub sample_index: usize,
    pub temperature: Option<f64>,
    pub seed: Option<u64>,
    pub text: String,
    pub token_length: usize,
    pub status: SampleStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl JournalEntry {
    fn from_outcome(
        instance_id: &str,
        params: &SampleParams,
        outcome: &std::result::Result<Completion, EndpointError>,
    ) -> Self {
        let (text, token_length, status, error) = match outcome {
            Ok(c) => (c.text.clone(), c.token_length, SampleStatus::Ok, None),
            Err(e) => (String::new(), 0, SampleStatus::Failed, Some(e.to_string())),
        };
        Self {
            instance_id: instance_id.to_string(),
            sample_index: params.sample_index,
            temperature: params.temperature,
            seed: params.seed,
            text,
            token_length,
            status,
            error,
        }
    }

    pub fn key(&self) -> (String, usize) {
        (self.instance_id.clone(), self.sample_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleJob {
    pub instance_id: String,
    pub prompt: String,
}

/// Draws `plan.k` samples for one prompt. Every index yields exactly one entry,
/// either a completion or a failure. Authentication failures abort.
pub fn sample_k(
    job: &SampleJob,
    plan: &SamplingPlan,
    endpoint: &dyn CompletionEndpoint,
    retry: &RetryPolicy,
) -> Result<Vec<JournalEntry>> {
    plan.all_params()
        .iter()
        .map(|p| {
            let outcome = retry.call(endpoint, &job.prompt, p);
            if let Err(EndpointError::Auth(m)) = &outcome {
                return Err(Error::Config(format!("endpoint rejected credentials: {m}")));
            }
            Ok(JournalEntry::from_outcome(&job.instance_id, p, &outcome))
        })
        .collect()
}

pub fn baseline_single(
    job: &SampleJob,
    endpoint: &dyn CompletionEndpoint,
    profile: BaselineProfile,
    retry: &RetryPolicy,
) -> Result<JournalEntry> {
    let params = profile.params();
    let outcome = retry.call(endpoint, &job.prompt, &params);
    match &outcome {
        Err(EndpointError::Auth(m)) => Err(Error::Config(format!("endpoint rejected credentials: {m}"))),
        Err(EndpointError::Unreachable(m)) => Err(Error::Gateway {
            instance: job.instance_id.clone(),
            message: m.clone(),
        }),
        _ => Ok(JournalEntry::from_outcome(&job.instance_id, &params, &outcome)),
    }
}

/// Append-only journal of samples keyed by (instance id, sample index).
pub struct Journal {
    path: PathBuf,
    done: BTreeSet<(String, usize)>,
    writer: Mutex<JsonlAppender>,
}

impl Journal {
    pub fn open(path: &Path) -> Result<Self> {
        let existing: Vec<JournalEntry> = read_jsonl_if_exists(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            done: existing.iter().map(JournalEntry::key).collect(),
            writer: Mutex::new(JsonlAppender::open(path)?),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, instance_id: &str, sample_index: usize) -> bool {
        self.done.contains(&(instance_id.to_string(), sample_index))
    }

    pub fn append(&self, entry: &JournalEntry) -> Result<()> {
        self.writer
            .lock()
            .expect("journal writer poisoned")
            .append(entry)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRunReport {
    pub requested: usize,
    pub already_present: usize,
    pub completed: usize,
    pub failed: usize,
}

/// Issues one request per (job, params) combination, skipping entries already in
/// the journal. Up to `concurrency` requests are in flight at once.
pub fn sample_all(
    jobs: &[SampleJob],
    params: &[SampleParams],
    endpoint: &dyn CompletionEndpoint,
    journal: &Journal,
    concurrency: usize,
    retry: &RetryPolicy,
) -> Result<SampleRunReport> {
    let work: Vec<(&SampleJob, &SampleParams)> = jobs
        .iter()
        .flat_map(|j| params.iter().map(move |p| (j, p)))
        .filter(|(j, p)| !journal.contains(&j.instance_id, p.sample_index))
        .collect();
    let mut report = SampleRunReport {
        requested: jobs.len() * params.len(),
        already_present: jobs.len() * params.len() - work.len(),
        ..Default::default()
    };
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let completed = AtomicUsize::new(0);
    let failed = AtomicUsize::new(0);
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let fail = |e: Error| {
        stop.store(true, Ordering::SeqCst);
        first_error.lock().expect("error slot poisoned").get_or_insert(e);
    };
    std::thread::scope(|scope| {
        for _ in 0..concurrency.max(1).min(work.len().max(1)) {
            scope.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((job, p)) = work.get(i) else { break };
                let outcome = retry.call(endpoint, &job.prompt, p);
                if let Err(EndpointError::Auth(m)) = &outcome {
                    fail(Error::Config(format!("endpoint rejected credentials: {m}")));
                    break;
                }
                let entry = JournalEntry::from_outcome(&job.instance_id, p, &outcome);
                if let Err(e) = journal.append(&entry) {
                    fail(e);
                    break;
                }
                match outcome {
                    Ok(_) => completed.fetch_add(1, Ordering::SeqCst),
                    Err(EndpointError::Unreachable(m)) => {
                        failed.fetch_add(1, Ordering::SeqCst);
                        fail(Error::Gateway {
                            instance: job.instance_id.clone(),
                            message: format!("endpoint unreachable after {} attempts: {m}", retry.max_attempts),
                        });
                        break;
                    }
                    Err(e) => {
                        log::warn!("sample {} of {} failed: {e}", p.sample_index, job.instance_id);
                        failed.fetch_add(1, Ordering::SeqCst)
                    }
                };
            });
        }
    });
    if let Some(e) = first_error.into_inner().expect("error slot poisoned") {
        return Err(e);
    }
    report.completed = completed.into_inner();
    report.failed = failed.into_inner();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    #[test]
    fn default_schedule() {
        let plan = SamplingPlan::default();
        let got: Vec<(f64, u64)> = plan
            .all_params()
            .iter()
            .map(|p| (p.temperature.unwrap(), p.seed.unwrap()))
            .collect();
        assert_eq!(got, vec![(0.0, 43), (0.3, 44), (0.5, 45), (0.7, 46), (1.0, 47)]);
    }

    #[test]
    fn schedule_wraps() {
        let plan = SamplingPlan { k: 7, ..Default::default() };
        let temps: Vec<f64> = plan.all_params().iter().map(|p| p.temperature.unwrap()).collect();
        assert_eq!(temps, vec![0.0, 0.3, 0.5, 0.7, 1.0, 0.0, 0.3]);
        let one = SamplingPlan { k: 1, ..Default::default() }.all_params();
        assert_eq!((one[0].temperature, one[0].seed), (Some(0.0), Some(43)));
    }

    proptest! {
        #[test]
        fn schedule_is_a_pure_function(k in 1usize..=50, base in 0u64..1000) {
            let plan = SamplingPlan { k, base_seed: base, ..Default::default() };
            let a = plan.all_params();
            prop_assert_eq!(&a, &plan.all_params());
            for (i, p) in a.iter().enumerate() {
                prop_assert_eq!(p.seed, Some(base + i as u64 + 1));
                prop_assert_eq!(p.temperature, Some(DEFAULT_TEMPERATURES[i % 5]));
            }
        }
    }

    #[test]
    fn profiles() {
        let open = BaselineProfile::OpenDefault.params();
        assert_eq!((open.temperature, open.top_p, open.seed), (Some(0.7), Some(0.95), Some(42)));
        let ep = HttpEndpoint::new("http://localhost:9/v1", "m", None, Duration::from_secs(1)).unwrap();
        let body = ep.request_body("hi", &BaselineProfile::ClosedDefault.params());
        let keys: Vec<&String> = body.as_object().unwrap().keys().collect();
        assert_eq!(keys, vec!["messages", "model"]);
        let body = ep.request_body("hi", &open);
        assert_eq!(body["temperature"], json!(0.7));
        assert_eq!(body["seed"], json!(42));
    }

    #[test]
    fn malformed_locator_is_config_error() {
        for bad in ["not a url", "ftp://x/y", "http://"] {
            let err = HttpEndpoint::new(bad, "m", None, Duration::from_secs(1)).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{bad}: {err}");
        }
        let ep = HttpEndpoint::new("http://h:1/v1/", "m", None, Duration::from_secs(1)).unwrap();
        assert_eq!(ep.url().as_str(), "http://h:1/v1/chat/completions");
    }

    /// Fails the first `failures[index]` attempts for each sample index with `error`.
    struct Flaky {
        failures: HashMap<usize, usize>,
        error: EndpointError,
        calls: Mutex<HashMap<(String, usize), usize>>,
    }

    impl CompletionEndpoint for Flaky {
        fn complete(&self, prompt: &str, params: &SampleParams) -> std::result::Result<Completion, EndpointError> {
            let mut calls = self.calls.lock().unwrap();
            let n = calls.entry((prompt.to_string(), params.sample_index)).or_insert(0);
            *n += 1;
            if *n <= self.failures.get(&params.sample_index).copied().unwrap_or(0) {
                return Err(self.error.clone());
            }
            Ok(Completion {
                text: format!("answer {}", params.sample_index),
                token_length: 2,
            })
        }
    }

    fn no_wait() -> RetryPolicy {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff_ms: 0,
            max_backoff_ms: 0,
        }
    }

    fn job(id: &str) -> SampleJob {
        SampleJob {
            instance_id: id.into(),
            prompt: format!("prompt {id}"),
        }
    }

    #[test]
    fn retries_then_records_failures() {
        let ep = Flaky {
            failures: HashMap::from([(2, 1), (4, 10)]),
            error: EndpointError::Transient("503".into()),
            calls: Mutex::new(HashMap::new()),
        };
        let plan = SamplingPlan::default();
        let entries = sample_k(&job("a"), &plan, &ep, &no_wait()).unwrap();
        assert_eq!(entries.len(), plan.k);
        let failed: Vec<usize> = entries
            .iter()
            .filter(|e| e.status == SampleStatus::Failed)
            .map(|e| e.sample_index)
            .collect();
        assert_eq!(failed, vec![4]);
        assert_eq!(ep.calls.lock().unwrap()[&("prompt a".to_string(), 4)], 3);
    }

    #[test]
    fn auth_failure_is_config_error() {
        let ep = Flaky {
            failures: HashMap::from([(1, 1)]),
            error: EndpointError::Auth("401".into()),
            calls: Mutex::new(HashMap::new()),
        };
        let err = sample_k(&job("a"), &SamplingPlan::default(), &ep, &no_wait()).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn journal_resumes_without_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("journal.jsonl");
        let ep = Flaky {
            failures: HashMap::from([(3, 10)]),
            error: EndpointError::Rejected("400".into()),
            calls: Mutex::new(HashMap::new()),
        };
        let plan = SamplingPlan::default();
        let jobs = vec![job("a"), job("b"), job("c")];
        let first = sample_all(&jobs[..2], &plan.all_params(), &ep, &Journal::open(&path).unwrap(), 3, &no_wait()).unwrap();
        assert_eq!((first.completed, first.failed), (8, 2));
        let second = sample_all(&jobs, &plan.all_params(), &ep, &Journal::open(&path).unwrap(), 3, &no_wait()).unwrap();
        assert_eq!(second.already_present, 10);
        assert_eq!(second.completed + second.failed, 5);
        let entries: Vec<JournalEntry> = crate::io::read_jsonl(&path).unwrap();
        assert_eq!(entries.len(), 15);
        let keys: BTreeSet<_> = entries.iter().map(JournalEntry::key).collect();
        assert_eq!(keys.len(), 15);
    }

    #[test]
    fn unreachable_endpoint_names_instance() {
        let dir = tempfile::tempdir().unwrap();
        let ep = Flaky {
            failures: HashMap::from([(1, 10)]),
            error: EndpointError::Unreachable("refused".into()),
            calls: Mutex::new(HashMap::new()),
        };
        let plan = SamplingPlan { k: 1, ..Default::default() };
        let journal = Journal::open(&dir.path().join("j.jsonl")).unwrap();
        let err = sample_all(&[job("zz")], &plan.all_params(), &ep, &journal, 1, &no_wait()).unwrap_err();
        assert!(matches!(err, Error::Gateway { ref instance, .. } if instance == "zz"));
    }

    /// Serves one canned HTTP response and hands back the request body.
    fn serve_once(status: &str, body: &str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let response = format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            reader.get_mut().write_all(response.as_bytes()).unwrap();
            String::from_utf8(buf).unwrap()
        });
        (format!("http://{addr}/v1"), handle)
    }

    #[test]
    fn http_round_trip() {
        let (url, server) = serve_once(
            "200 OK",
            r#"{"choices":[{"message":{"role":"assistant","content":"NO VIOLATIONS FOUND"}}],"usage":{"completion_tokens":4}}"#,
        );
        let ep = HttpEndpoint::new(&url, "tiny", None, Duration::from_secs(5)).unwrap();
        let plan = SamplingPlan::default();
        let got = ep.complete("hello", &plan.params(2)).unwrap();
        assert_eq!(got, Completion { text: "NO VIOLATIONS FOUND".into(), token_length: 4 });
        let sent: Value = serde_json::from_str(&server.join().unwrap()).unwrap();
        assert_eq!(sent["model"], "tiny");
        assert_eq!(sent["messages"][0]["content"], "hello");
        assert_eq!(sent["seed"], 44);
        assert_eq!(sent["temperature"], 0.3);
        assert_eq!(sent["top_p"], 0.95);
    }

    #[test]
    fn http_auth_failure() {
        let (url, server) = serve_once("401 Unauthorized", "{}");
        let ep = HttpEndpoint::new(&url, "tiny", None, Duration::from_secs(5)).unwrap();
        let err = baseline_single(&job("a"), &ep, BaselineProfile::OpenDefault, &no_wait()).unwrap_err();
        server.join().unwrap();
        assert!(err.is_config());
    }
}
