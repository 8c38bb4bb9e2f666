//! Acceptance rates and forward profiles from recorded generations.
//!
//! Input is JSON lines, one record per line:
//!
//! ```text
//! {"target_tokens": [5, 9, 9], "drafter_tokens": [5, 9, 2]}
//! {"model_id": "m", "dataset_id": "d", "prompt_id": "p0", "per_token_ms": [50.0, 10.0, 10.0]}
//! ```

use std::io::{BufRead, BufReader, Read};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::acceptance::acceptance_rate_from_mean;
use crate::error::{Error, Result};
use crate::types::{ForwardProfile, TokenSeq};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequencePair {
    pub target_tokens: TokenSeq,
    pub drafter_tokens: TokenSeq,
}

impl SequencePair {
    pub fn new(target_tokens: impl Into<TokenSeq>, drafter_tokens: impl Into<TokenSeq>) -> Result<Self> {
        let pair = SequencePair {
            target_tokens: target_tokens.into(),
            drafter_tokens: drafter_tokens.into(),
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_tokens.is_empty() || self.drafter_tokens.is_empty() {
            return Err(Error::Domain("sequence pair needs nonempty target and drafter tokens".into()));
        }
        Ok(())
    }
}

/// Per-token latencies of one generation; the first entry is the first-token latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRecord {
    pub model_id: String,
    pub dataset_id: String,
    pub prompt_id: String,
    pub per_token_ms: Vec<f64>,
}

impl LatencyRecord {
    pub fn validate(&self) -> Result<()> {
        if self.per_token_ms.is_empty() {
            return Err(Error::Domain(format!("record {:?} has no latencies", self.prompt_id)));
        }
        if let Some(bad) = self.per_token_ms.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::Domain(format!(
                "record {:?} has non-positive latency {bad}",
                self.prompt_id
            )));
        }
        Ok(())
    }
}

/// Number of leading positions where both sequences hold the same token.
pub fn longest_match_prefix(pair: &SequencePair) -> usize {
    pair.target_tokens
        .as_slice()
        .iter()
        .zip(pair.drafter_tokens.as_slice())
        .take_while(|(a, b)| a == b)
        .count()
}

/// Mean longest matching prefix `n` over the pairs, mapped to `1 - 1/(1 + n)`.
pub fn estimate_acceptance_rate(pairs: &[SequencePair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no sequence pairs to estimate from".into()));
    }
    let total: usize = pairs.iter().map(longest_match_prefix).sum();
    acceptance_rate_from_mean(total as f64 / pairs.len() as f64)
}

/// TTFT is the mean first-token latency; TPOT pools every later token across records.
pub fn estimate_forward_profile(records: &[LatencyRecord]) -> Result<ForwardProfile> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no latency records to estimate from".into()));
    }
    let (mut first_sum, mut rest_sum, mut rest_count) = (0.0, 0.0, 0usize);
    for r in records {
        r.validate()?;
        first_sum += r.per_token_ms[0];
        rest_sum += r.per_token_ms[1..].iter().sum::<f64>();
        rest_count += r.per_token_ms.len() - 1;
    }
    if rest_count == 0 {
        return Err(Error::Domain(
            "every record holds a single token, so TPOT cannot be estimated".into(),
        ));
    }
    ForwardProfile::new(first_sum / records.len() as f64, rest_sum / rest_count as f64)
}

fn read_jsonl<T, R, V>(input: R, source_name: &str, validate: V) -> Result<Vec<T>>
where
    T: DeserializeOwned,
    R: Read,
    V: Fn(&T) -> Result<()>,
{
    let mut out = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line.map_err(|e| Error::io(source_name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            source_name: source_name.to_string(),
            line: i + 1,
            message,
        };
        // Each line parses alone, so serde's own position is always line 1.
        let item: T = serde_json::from_str(&line).map_err(|e| {
            let msg = e.to_string();
            let msg = msg.split(" at line ").next().unwrap_or(&msg).to_string();
            parse_err(format!("{msg} (column {})", e.column()))
        })?;
        validate(&item).map_err(|e| parse_err(e.to_string()))?;
        out.push(item);
    }
    Ok(out)
}

pub fn read_sequence_pairs<R: Read>(input: R, source_name: &str) -> Result<Vec<SequencePair>> {
    read_jsonl(input, source_name, SequencePair::validate)
}

pub fn read_latency_records<R: Read>(input: R, source_name: &str) -> Result<Vec<LatencyRecord>> {
    read_jsonl(input, source_name, LatencyRecord::validate)
}
