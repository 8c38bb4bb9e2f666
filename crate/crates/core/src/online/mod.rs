//! Online execution over synthetic language models.
//!
//! Every forward blocks a worker thread for the model's configured latency
//! (TTFT on the model's first forward, TPOT after), measured against the
//! monotonic clock. Waits park on a condition variable and wake early on
//! cancellation; there is no busy-waiting.
//!
//! DSI runs with one orchestrating thread that owns the thread tree, a pool
//! of `sp_degree` target workers, and `drafter_threads` workers per drafter
//! model. Workers only compute forwards and post reports back over a
//! channel, so all tree mutations (spawn, verify, cancel, relabel) happen on
//! the orchestrator and are serialized.

mod cancel;
mod dsi;
mod lm;
mod pool;
mod tree;

use std::time::Instant;

use serde::Serialize;

pub use cancel::CancelToken;
pub use dsi::run_dsi_online;
pub use lm::{Behavior, SyntheticLM, VOCAB_SIZE};
pub use tree::{NodeId, NodeState, ThreadLabel, ThreadNode, ThreadTree};

use crate::error::{Error, Result};
use crate::trace::TraceEvent;
use crate::types::{TokenId, TokenSeq};
use pool::{forward_duration, verify};

/// Deliberate bugs, for checking that the lossless check can fail.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FaultInjection {
    /// Keep drafter siblings whose first token disagrees with the verifier.
    pub skip_mismatch_cancel: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OnlineConfig {
    pub n_tokens: usize,
    pub lookahead: usize,
    pub sp_degree: usize,
    /// Worker threads per drafter model.
    pub drafter_threads: usize,
    /// Fail with [`Error::PoolExhausted`] instead of queueing a target forward.
    pub strict_pool: bool,
    pub fault: FaultInjection,
    pub prompt: Vec<TokenId>,
}

impl OnlineConfig {
    pub fn new(n_tokens: usize, lookahead: usize, sp_degree: usize) -> Result<Self> {
        let cfg = OnlineConfig {
            n_tokens,
            lookahead,
            sp_degree,
            drafter_threads: 2,
            strict_pool: false,
            fault: FaultInjection::default(),
            prompt: vec![1, 2, 3],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_tokens", self.n_tokens),
            ("lookahead", self.lookahead),
            ("sp_degree", self.sp_degree),
            ("drafter_threads", self.drafter_threads),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        if self.prompt.is_empty() {
            return Err(Error::InvalidConfig("prompt must hold at least one token".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OnlineOutcome {
    pub tokens: TokenSeq,
    pub wall_ms: f64,
    /// Target forwards performed (one per SI iteration).
    pub target_forwards: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct OnlineStats {
    pub target_forwards: usize,
    pub drafter_forwards: usize,
    pub threads_spawned: usize,
    pub cancelled_threads: usize,
    pub relabels: usize,
    /// Final value of the verifier counter; equals `N` at lookahead 1.
    pub verifier_generations: usize,
    pub peak_target_in_flight: usize,
    /// Target forwards submitted while every target worker was busy.
    pub queued_target_jobs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DsiOutcome {
    pub tokens: TokenSeq,
    pub wall_ms: f64,
    pub trace: Vec<TraceEvent>,
    pub stats: OnlineStats,
}

fn block_for_forward(model: &SyntheticLM, first: bool) {
    std::thread::sleep(forward_duration(model.profile.forward_ms(first)));
}

/// Plain autoregressive generation: `n_tokens` blocking target forwards.
pub fn run_nonsi_online(target: &SyntheticLM, n_tokens: usize, prompt: &[TokenId]) -> Result<OnlineOutcome> {
    if !target.is_target() || n_tokens == 0 || prompt.is_empty() {
        return Err(Error::InvalidConfig(
            "non-SI needs a target model, n_tokens >= 1 and a nonempty prompt".into(),
        ));
    }
    let start = Instant::now();
    let mut seq = prompt.to_vec();
    for i in 0..n_tokens {
        block_for_forward(target, i == 0);
        seq.push(target.next_token(&seq));
    }
    Ok(OnlineOutcome {
        tokens: TokenSeq(seq[prompt.len()..].to_vec()),
        wall_ms: start.elapsed().as_secs_f64() * 1000.0,
        target_forwards: n_tokens,
    })
}

/// Sequential SI: draft `lookahead` tokens, verify them in one blocking
/// target forward, keep the agreeing prefix plus the target's next token.
pub fn run_si_online(target: &SyntheticLM, drafter: &SyntheticLM, cfg: &OnlineConfig) -> Result<OnlineOutcome> {
    cfg.validate()?;
    if !target.is_target() || drafter.is_target() {
        return Err(Error::InvalidConfig("SI needs one drafter and one target".into()));
    }
    let start = Instant::now();
    let p0 = cfg.prompt.len();
    let end = p0 + cfg.n_tokens;
    let mut seq = cfg.prompt.clone();
    let (mut first_d, mut iterations) = (true, 0usize);
    while seq.len() < end {
        let mut block = seq.clone();
        for _ in 0..cfg.lookahead {
            block_for_forward(drafter, first_d);
            first_d = false;
            block.push(drafter.next_token(&block));
        }
        block_for_forward(target, iterations == 0);
        iterations += 1;
        seq = verify(target, &block, seq.len());
        seq.truncate(end);
    }
    Ok(OnlineOutcome {
        tokens: TokenSeq(seq[p0..].to_vec()),
        wall_ms: start.elapsed().as_secs_f64() * 1000.0,
        target_forwards: iterations,
    })
}
