//! Rejection-sampled preference pairs, the no-violation subsampling knob, the
//! RS-SFT filter and the DPO objective.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{decode_response, ParseOptions, ParsedResponse, ReasoningDelimiter};
use crate::dataset::{balance_by, BalanceReport, DatasetRecord};
use crate::error::{Error, Result};
use crate::reward::{instance_reward, RewardTriple};
use crate::sampler::{JournalEntry, SampleStatus};

/// A completion together with its parse and reward against the instance's gold lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledResponse {
    pub instance_id: String,
    pub sample_index: usize,
    pub temperature: Option<f64>,
    pub seed: Option<u64>,
    pub token_length: usize,
    pub text: String,
    pub status: SampleStatus,
    pub parsed: ParsedResponse,
    pub reasoning: Option<String>,
    pub reasoning_unterminated: bool,
    pub reward: RewardTriple,
}

impl SampledResponse {
    /// A response that was generated, parsed and terminated its reasoning.
    pub fn is_valid(&self) -> bool {
        self.status == SampleStatus::Ok && !self.parsed.failed() && !self.reasoning_unterminated
    }

    /// The scalar used for pair gaps and the RS-SFT threshold. Invalid responses score 0.
    pub fn score(&self) -> f64 {
        if self.is_valid() {
            self.reward.f1
        } else {
            0.0
        }
    }

    pub fn check_reward(&self, gold: &BTreeSet<usize>, idiom_code: &str) -> bool {
        instance_reward(gold, &self.parsed.lines(idiom_code)) == self.reward
    }
}

/// Parses a journal entry and scores it against `gold`.
pub fn score_entry(
    entry: &JournalEntry,
    gold: &BTreeSet<usize>,
    idiom_code: &str,
    opts: ParseOptions,
    delimiters: &[ReasoningDelimiter],
) -> SampledResponse {
    let decoded = decode_response(&entry.text, &[idiom_code.to_string()], opts, delimiters);
    let reward = instance_reward(gold, &decoded.parsed.lines(idiom_code));
    SampledResponse {
        instance_id: entry.instance_id.clone(),
        sample_index: entry.sample_index,
        temperature: entry.temperature,
        seed: entry.seed,
        token_length: entry.token_length,
        text: entry.text.clone(),
        status: entry.status,
        parsed: decoded.parsed,
        reasoning: decoded.reasoning,
        reasoning_unterminated: decoded.reasoning_unterminated,
        reward,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub instance_id: String,
    pub prompt: String,
    #[serde(rename = "chosen")]
    pub win_text: String,
    #[serde(rename = "rejected")]
    pub lose_text: String,
    pub win_reward: f64,
    pub lose_reward: f64,
    pub win_index: usize,
    pub lose_index: usize,
}

/// Index pairs `(win, lose)` over all unordered pairs whose score gap is strictly above `eta`.
pub fn pair_indices(scores: &[f64], eta: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..scores.len() {
        for j in i + 1..scores.len() {
            if (scores[i] - scores[j]).abs() > eta {
                out.push(if scores[i] > scores[j] { (i, j) } else { (j, i) });
            }
        }
    }
    out
}

/// # Panics
/// If the responses do not share one instance id or `eta` is not positive.
pub fn build_pairs(prompt: &str, responses: &[SampledResponse], eta: f64) -> Vec<PreferencePair> {
    assert!(eta > 0.0, "eta must be positive");
    assert!(
        responses.windows(2).all(|w| w[0].instance_id == w[1].instance_id),
        "responses must belong to one instance"
    );
    let scores: Vec<f64> = responses.iter().map(SampledResponse::score).collect();
    pair_indices(&scores, eta)
        .into_iter()
        .map(|(w, l)| PreferencePair {
            instance_id: responses[w].instance_id.clone(),
            prompt: prompt.to_string(),
            win_text: responses[w].text.clone(),
            lose_text: responses[l].text.clone(),
            win_reward: scores[w],
            lose_reward: scores[l],
            win_index: responses[w].sample_index,
            lose_index: responses[l].sample_index,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleReport {
    pub fraction_percent: f64,
    pub no_violation_instances: usize,
    pub no_violation_kept: usize,
    pub violation_instances: usize,
    pub pairs: usize,
}

/// Keeps every violation instance's pairs and a seeded `fraction_percent` share of the
/// no-violation instances (those with empty gold). Output is ordered by instance id.
pub fn subsample_no_violation(
    pairs: &BTreeMap<String, Vec<PreferencePair>>,
    gold: &BTreeMap<String, BTreeSet<usize>>,
    fraction_percent: f64,
    seed: u64,
) -> Result<(Vec<PreferencePair>, SubsampleReport)> {
    if !(0.0..=100.0).contains(&fraction_percent) {
        return Err(Error::Config(format!(
            "no-violation fraction must lie in [0, 100], got {fraction_percent}"
        )));
    }
    let mut negatives = Vec::new();
    let mut positives = 0;
    for id in pairs.iter().filter(|(_, g)| !g.is_empty()).map(|(id, _)| id) {
        let g = gold.get(id).ok_or_else(|| {
            Error::DataIntegrity(format!("no gold lines recorded for instance {id}"))
        })?;
        if g.is_empty() {
            negatives.push(id.as_str());
        } else {
            positives += 1;
        }
    }
    let total_nv = negatives.len();
    let want = (total_nv as f64 * fraction_percent / 100.0).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    negatives.shuffle(&mut rng);
    let kept_nv: BTreeSet<&str> = negatives.into_iter().take(want).collect();
    let out: Vec<PreferencePair> = pairs
        .iter()
        .filter(|(id, g)| {
            !g.is_empty() && (kept_nv.contains(id.as_str()) || !gold[id.as_str()].is_empty())
        })
        .flat_map(|(_, g)| g.iter().cloned())
        .collect();
    let report = SubsampleReport {
        fraction_percent,
        no_violation_instances: total_nv,
        no_violation_kept: kept_nv.len(),
        violation_instances: positives,
        pairs: out.len(),
    };
    Ok((out, report))
}

pub const RS_SFT_VIOLATION_CAP: usize = 2;
pub const RS_SFT_NO_VIOLATION_CAP: usize = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RsSftSelection {
    pub retained: BTreeMap<String, Vec<SampledResponse>>,
    pub skipped: Vec<String>,
}

impl RsSftSelection {
    pub fn response_count(&self) -> usize {
        self.retained.values().map(Vec::len).sum()
    }
}

/// Keeps fully rewarded responses: the two shortest per violation instance, the single
/// shortest per no-violation instance. Ties on length go to the lower sample index.
pub fn filter_rs_sft(
    responses: &BTreeMap<String, Vec<SampledResponse>>,
    gamma: f64,
    gold: &BTreeMap<String, BTreeSet<usize>>,
) -> Result<RsSftSelection> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Config(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let mut sel = RsSftSelection::default();
    for (id, group) in responses {
        let g = gold.get(id).ok_or_else(|| {
            Error::DataIntegrity(format!("no gold lines recorded for instance {id}"))
        })?;
        let cap = if g.is_empty() {
            RS_SFT_NO_VIOLATION_CAP
        } else {
            RS_SFT_VIOLATION_CAP
        };
        let mut valid: Vec<&SampledResponse> = group
            .iter()
            .filter(|r| r.is_valid() && r.reward.f1 >= gamma)
            .collect();
        if valid.is_empty() {
            sel.skipped.push(id.clone());
            continue;
        }
        valid.sort_by_key(|r| (r.token_length, r.sample_index));
        valid.truncate(cap);
        sel.retained
            .insert(id.clone(), valid.into_iter().cloned().collect());
    }
    Ok(sel)
}

/// Subsamples whichever side is in surplus so that no-violation instances make up
/// `target_fraction` of the retained instances.
pub fn rs_sft_ratio_pass(
    selection: RsSftSelection,
    gold: &BTreeMap<String, BTreeSet<usize>>,
    target_fraction: f64,
    seed: u64,
) -> (RsSftSelection, BalanceReport) {
    let is_nv = |id: &String| gold.get(id).is_none_or(BTreeSet::is_empty);
    let nv = selection.retained.keys().filter(|id| is_nv(id)).count();
    let v = selection.retained.len() - nv;
    let items: Vec<(String, Vec<SampledResponse>)> = selection.retained.into_iter().collect();
    let enough_nv = target_fraction >= 1.0
        || (v as f64 * target_fraction / (1.0 - target_fraction)).round() as usize <= nv;
    let (kept, report) = if enough_nv {
        balance_by(items, |(id, _)| is_nv(id), |(id, _)| id.clone(), target_fraction, seed)
    } else {
        // Too few no-violation instances: shrink the violation side instead.
        let (kept, r) = balance_by(
            items,
            |(id, _)| !is_nv(id),
            |(id, _)| id.clone(),
            1.0 - target_fraction,
            seed,
        );
        let report = BalanceReport {
            violation_count: r.no_violation_kept,
            no_violation_available: nv,
            no_violation_kept: nv,
            target_no_violation_fraction: target_fraction,
            achieved_no_violation_fraction: 1.0 - r.achieved_no_violation_fraction,
        };
        (kept, report)
    };
    (
        RsSftSelection {
            retained: kept.into_iter().collect(),
            skipped: selection.skipped,
        },
        report,
    )
}

/// An RS-SFT training record: the source instance with the retained response as target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsSftRecord {
    #[serde(flatten)]
    pub instance: DatasetRecord,
    pub sample_index: usize,
    pub reasoning_text: Option<String>,
    pub final_text: String,
}

pub fn rs_sft_record(instance: &DatasetRecord, response: &SampledResponse) -> RsSftRecord {
    let mut record = instance.clone();
    record.target_text = response.text.clone();
    RsSftRecord {
        instance: record,
        sample_index: response.sample_index,
        reasoning_text: response.reasoning.clone(),
        final_text: response.parsed.raw_final_text.clone(),
    }
}

/// −log σ(β[(π_w − ref_w) − (π_l − ref_l)]), evaluated as a stable softplus.
pub fn dpo_loss(
    logp_win_policy: f64,
    logp_win_ref: f64,
    logp_lose_policy: f64,
    logp_lose_ref: f64,
    beta: f64,
) -> f64 {
    assert!(beta > 0.0, "beta must be positive");
    let x = beta * ((logp_win_policy - logp_win_ref) - (logp_lose_policy - logp_lose_ref));
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}
