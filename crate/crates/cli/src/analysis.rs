use std::collections::BTreeMap;
use std::fs::File;
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use dsi_core::analytic::{max_useful_sp, min_lookahead, required_processors, required_sp};
use dsi_core::estimation::{
    estimate_acceptance_rate, estimate_forward_profile, longest_match_prefix, read_latency_records,
    read_sequence_pairs, LatencyRecord,
};

use crate::simulate::parse_profile;
use crate::CmdResult;

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Target TPOT in ms (`ttft/tpot` accepted; only TPOT matters).
    #[arg(long)]
    target: String,
    /// Drafter TPOT in ms.
    #[arg(long)]
    drafter: String,
    /// Available target servers; prints the smallest lookahead that keeps them from queueing.
    #[arg(long, required_unless_present = "lookahead")]
    sp: Option<usize>,
    /// A lookahead; prints the SP degree it needs.
    #[arg(long)]
    lookahead: Option<usize>,
}

pub fn plan(a: PlanArgs) -> CmdResult {
    let t = parse_profile(&a.target)?.tpot_ms;
    let d = parse_profile(&a.drafter)?.tpot_ms;
    if a.sp == Some(0) || a.lookahead == Some(0) {
        Err(anyhow::anyhow!("sp and lookahead must be >= 1"))?;
    }
    let lookahead = match (a.sp, a.lookahead) {
        (_, Some(k)) => k,
        (Some(sp), None) => min_lookahead(t, d, sp),
        (None, None) => unreachable!("clap requires one of them"),
    };
    if a.sp.is_some() && a.lookahead.is_none() {
        println!("min_lookahead={lookahead}");
    } else {
        println!("lookahead={lookahead}");
    }
    println!("required_sp={}", required_sp(t, d, lookahead));
    println!("required_processors={}", required_processors(t, d, lookahead));
    println!("max_useful_sp={}", max_useful_sp(t, d));
    Ok(())
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// JSONL of {"target_tokens": [...], "drafter_tokens": [...]}.
    #[arg(long, conflicts_with = "latencies", required_unless_present = "latencies")]
    pairs: Option<PathBuf>,
    /// JSONL of {"model_id", "dataset_id", "prompt_id", "per_token_ms": [...]}.
    #[arg(long)]
    latencies: Option<PathBuf>,
}

fn open(path: &PathBuf) -> anyhow::Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

pub fn estimate(a: EstimateArgs) -> CmdResult {
    if let Some(path) = &a.pairs {
        let pairs = read_sequence_pairs(open(path)?, &path.display().to_string())?;
        let rate = estimate_acceptance_rate(&pairs)?;
        let mean = pairs.iter().map(longest_match_prefix).sum::<usize>() as f64 / pairs.len() as f64;
        println!("pairs={}", pairs.len());
        println!("mean_matched={mean:.6}");
        println!("acceptance_rate={rate:.6}");
        return Ok(());
    }
    let path = a.latencies.as_ref().expect("clap requires one input");
    let records = read_latency_records(open(path)?, &path.display().to_string())?;
    if records.is_empty() {
        Err(anyhow::anyhow!("{}: no records", path.display()))?;
    }
    let mut groups: BTreeMap<(String, String), Vec<LatencyRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.model_id.clone(), r.dataset_id.clone())).or_default().push(r);
    }
    for ((model, dataset), recs) in &groups {
        let p = estimate_forward_profile(recs).with_context(|| format!("model {model} on {dataset}"))?;
        println!(
            "model_id={model} dataset_id={dataset} records={} ttft_ms={:.6} tpot_ms={:.6} ttft_tpot_ratio={:.4}",
            recs.len(),
            p.ttft_ms,
            p.tpot_ms,
            p.ttft_tpot_ratio()
        );
    }
    Ok(())
}
