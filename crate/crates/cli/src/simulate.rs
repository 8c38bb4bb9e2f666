use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use clap::{Args, ValueEnum};
use dsi_core::acceptance::rate_for_capped_mean;
use dsi_core::analytic::{lookahead_feasible, min_lookahead, si_latency_for_mean_accepted};
use dsi_core::config::KvConfig;
use dsi_core::offline::{mean_std, run_repeats, simulate_seeded};
use dsi_core::online::{run_dsi_online, run_nonsi_online, run_si_online, OnlineConfig, SyntheticLM};
use dsi_core::rng::{derive_seed, repeat_seeds};
use dsi_core::trace::write_jsonl_file;
use dsi_core::{AcceptanceModel, Algorithm, ForwardProfile, Scenario, SimConfig, SimOptions, TraceEvent};
use serde::Serialize;

use crate::manifest::RunManifest;
use crate::CmdResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Mode {
    Offline,
    Online,
}

/// Flags override values from `--config`. Config keys: alg, mode, target,
/// drafter, acceptance, mean_accepted, lookahead, sp, n, seed, repeats,
/// strict_sp, drafter_threads.
#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// nonsi, si or dsi.
    #[arg(long)]
    alg: Option<Algorithm>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target latency in ms, `ttft/tpot` or one number for both.
    #[arg(long)]
    target: Option<String>,
    /// Drafter latency in ms, `ttft/tpot` or one number for both.
    #[arg(long)]
    drafter: Option<String>,
    /// Per-token acceptance rate in [0, 1].
    #[arg(long, conflicts_with = "mean_accepted")]
    acceptance: Option<f64>,
    /// Mean drafts accepted per SI iteration; sets the rate and, for offline
    /// SI, also prints the closed-form latency as `expected_ms`.
    #[arg(long)]
    mean_accepted: Option<f64>,
    #[arg(long)]
    lookahead: Option<usize>,
    #[arg(long)]
    sp: Option<usize>,
    /// Tokens to generate.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Reject a DSI lookahead that leaves verifications waiting for a server.
    #[arg(long)]
    strict_sp: bool,
    /// Worker threads per drafter (online DSI).
    #[arg(long)]
    drafter_threads: Option<usize>,
    /// Write the first repeat's event trace as JSONL.
    #[arg(long)]
    trace: Option<PathBuf>,
}

/// Parse `ttft/tpot` or a single latency used for both.
pub fn parse_profile(s: &str) -> anyhow::Result<ForwardProfile> {
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .with_context(|| format!("bad latency {v:?} in {s:?}"))
    };
    let profile = match s.split_once('/') {
        Some((ttft, tpot)) => ForwardProfile::new(num(ttft)?, num(tpot)?),
        None => ForwardProfile::uniform(num(s)?),
    };
    Ok(profile?)
}

#[derive(Debug, Serialize)]
struct Resolved {
    alg: Algorithm,
    mode: Mode,
    target: ForwardProfile,
    drafter: Option<ForwardProfile>,
    acceptance: Option<f64>,
    mean_accepted: Option<f64>,
    lookahead: usize,
    sp: usize,
    n: usize,
    seed: u64,
    repeats: usize,
    strict_sp: bool,
    drafter_threads: usize,
}

const KEYS: &[&str] = &[
    "alg",
    "mode",
    "target",
    "drafter",
    "acceptance",
    "mean_accepted",
    "lookahead",
    "sp",
    "n",
    "seed",
    "repeats",
    "strict_sp",
    "drafter_threads",
];

fn resolve(a: &SimulateArgs) -> anyhow::Result<Resolved> {
    let cfg = match &a.config {
        Some(p) => KvConfig::from_file(p)?,
        None => KvConfig::parse("", "flags")?,
    };
    cfg.reject_unknown(KEYS, &[])?;
    let alg = match a.alg {
        Some(x) => x,
        None => cfg
            .get_str("alg")
            .ok_or_else(|| anyhow!("--alg is required (nonsi, si or dsi)"))?
            .parse()
            .map_err(|e: String| anyhow!(e))?,
    };
    let mode = match (a.mode, cfg.get_str("mode")) {
        (Some(m), _) => m,
        (None, Some(s)) => Mode::from_str(s, true).map_err(|e| anyhow!("mode: {e}"))?,
        (None, None) => Mode::Offline,
    };
    let profile = |flag: &Option<String>, key: &str| -> anyhow::Result<Option<ForwardProfile>> {
        match flag.as_deref().or(cfg.get_str(key)) {
            Some(s) => parse_profile(s).map(Some),
            None => Ok(None),
        }
    };
    let target = profile(&a.target, "target")?.ok_or_else(|| anyhow!("--target is required"))?;
    let drafter = profile(&a.drafter, "drafter")?;
    let pick = |flag: Option<usize>, key: &str, default: usize| -> anyhow::Result<usize> {
        Ok(flag.or(cfg.get(key)?).unwrap_or(default))
    };
    let mut acceptance = a.acceptance.or(cfg.get("acceptance")?);
    let mean_accepted = a.mean_accepted.or(cfg.get("mean_accepted")?);
    if acceptance.is_some() && mean_accepted.is_some() {
        bail!("give either an acceptance rate or a mean accepted count, not both");
    }
    let lookahead = pick(a.lookahead, "lookahead", 1)?;
    if let Some(m) = mean_accepted {
        acceptance = Some(rate_for_capped_mean(m, lookahead)?);
    }
    let r = Resolved {
        alg,
        mode,
        target,
        drafter,
        acceptance,
        mean_accepted,
        lookahead,
        sp: pick(a.sp, "sp", 1)?,
        n: pick(a.n, "n", 100)?,
        seed: a.seed.or(cfg.get("seed")?).unwrap_or(0),
        repeats: pick(a.repeats, "repeats", 5)?,
        strict_sp: a.strict_sp || cfg.get("strict_sp")?.unwrap_or(false),
        drafter_threads: pick(a.drafter_threads, "drafter_threads", 2)?,
    };
    SimConfig::new(r.n, r.lookahead, r.sp, r.seed, r.repeats)?;
    if r.alg != Algorithm::NonSi && (r.drafter.is_none() || r.acceptance.is_none()) {
        bail!("{} needs --drafter and --acceptance (or --mean-accepted)", r.alg.name());
    }
    if r.strict_sp && r.alg == Algorithm::Dsi {
        let d = r.drafter.unwrap().tpot_ms;
        if !lookahead_feasible(r.target.tpot_ms, d, r.lookahead, r.sp) {
            bail!(
                "lookahead {} violates ceil(target/(lookahead*drafter)) <= SP={} (minimum feasible lookahead is {})",
                r.lookahead,
                r.sp,
                min_lookahead(r.target.tpot_ms, d, r.sp)
            );
        }
    }
    Ok(r)
}

fn line<T: std::fmt::Debug>(key: &str, v: T) {
    println!("{key}={v:?}");
}

fn offline(r: &Resolved) -> anyhow::Result<Vec<TraceEvent>> {
    let scenario = Scenario {
        target: r.target,
        drafter: r.drafter.unwrap_or(r.target),
        acceptance: AcceptanceModel::new(r.acceptance.unwrap_or(0.0))?,
    };
    let config = SimConfig::new(r.n, r.lookahead, r.sp, r.seed, r.repeats)?;
    let seeds = repeat_seeds(r.seed, r.repeats);
    let summary = run_repeats(r.alg, &scenario, &config, &seeds);
    line("mean_ms", summary.mean_ms);
    line("std_ms", summary.std_ms);
    line("target_forwards", summary.mean_of(|s| s.target_forwards));
    line("drafter_forwards", summary.mean_of(|s| s.drafter_forwards));
    line("hidden_target_forwards", summary.mean_of(|s| s.hidden_target_forwards));
    if let (Algorithm::Si, Some(m)) = (r.alg, r.mean_accepted) {
        let e = si_latency_for_mean_accepted(&r.target, &scenario.drafter, r.lookahead, m, r.n);
        line("expected_ms", e.total_ms);
    }
    let first = simulate_seeded(r.alg, &scenario, &config, seeds[0], SimOptions::default());
    line("tokens_emitted", first.tokens_emitted);
    Ok(first.trace)
}

fn online(r: &Resolved) -> anyhow::Result<Vec<TraceEvent>> {
    let mut walls = Vec::with_capacity(r.repeats);
    let mut trace = Vec::new();
    let mut tokens_emitted = 0;
    let (mut target_forwards, mut drafter_forwards, mut cancelled) = (0usize, 0usize, 0usize);
    for (i, s) in repeat_seeds(r.seed, r.repeats).into_iter().enumerate() {
        let target = SyntheticLM::target(2, r.target, derive_seed(s, 0));
        let mut cfg = OnlineConfig::new(r.n, r.lookahead, r.sp)?;
        cfg.strict_pool = r.strict_sp;
        cfg.drafter_threads = r.drafter_threads;
        let drafter = match r.drafter {
            Some(d) => Some(SyntheticLM::drafter(1, d, r.acceptance.unwrap(), derive_seed(s, 1), &target)?),
            None => None,
        };
        let (wall, n_out) = match r.alg {
            Algorithm::NonSi => {
                let o = run_nonsi_online(&target, r.n, &cfg.prompt)?;
                target_forwards += o.target_forwards;
                (o.wall_ms, o.tokens.len())
            }
            Algorithm::Si => {
                let o = run_si_online(&target, drafter.as_ref().unwrap(), &cfg)?;
                target_forwards += o.target_forwards;
                drafter_forwards += o.target_forwards * r.lookahead;
                (o.wall_ms, o.tokens.len())
            }
            Algorithm::Dsi => {
                let o = run_dsi_online(&[drafter.unwrap(), target], &cfg)?;
                target_forwards += o.stats.target_forwards;
                drafter_forwards += o.stats.drafter_forwards;
                cancelled += o.stats.cancelled_threads;
                if i == 0 {
                    trace = o.trace;
                }
                (o.wall_ms, o.tokens.len())
            }
        };
        walls.push(wall);
        tokens_emitted = n_out;
    }
    let (mean, std) = mean_std(&walls);
    let per = |x: usize| x as f64 / r.repeats as f64;
    line("mean_ms", mean);
    line("std_ms", std);
    line("target_forwards", per(target_forwards));
    line("drafter_forwards", per(drafter_forwards));
    if r.alg == Algorithm::Dsi {
        line("cancelled_threads", per(cancelled));
    }
    line("tokens_emitted", tokens_emitted);
    Ok(trace)
}

pub fn run(a: SimulateArgs) -> CmdResult {
    let r = resolve(&a)?;
    println!("command=simulate");
    println!("algorithm={}", r.alg.name());
    println!("mode={}", if r.mode == Mode::Offline { "offline" } else { "online" });
    line("seed", r.seed);
    line("repeats", r.repeats);
    line("n_tokens", r.n);
    line("lookahead", r.lookahead);
    line("sp_degree", r.sp);
    if let Some(p) = r.acceptance {
        line("acceptance", p);
    }
    let trace = match r.mode {
        Mode::Offline => offline(&r)?,
        Mode::Online => online(&r)?,
    };
    if let Some(path) = &a.trace {
        write_jsonl_file(&trace, path)?;
        let manifest_path = PathBuf::from(format!("{}.manifest.json", path.display()));
        RunManifest::new("simulate", &r, r.seed, vec![path.clone()])?.write(&manifest_path)?;
        println!("trace={}", path.display());
    }
    Ok(())
}
