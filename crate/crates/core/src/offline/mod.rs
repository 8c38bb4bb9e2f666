//! Offline simulation of non-SI, SI and DSI.
//!
//! Only forward latencies are summed; scheduling, transfer and threading
//! costs are ignored. Time is kept in integer [`Ticks`], advanced only by
//! addition, so two runs that perform the same forwards in any order land
//! on exactly the same total.

mod dsi;

use serde::Serialize;

pub use dsi::simulate_dsi_with;

use crate::acceptance::AcceptanceTape;
use crate::rng::{repeat_seeds, SimRng};
use crate::trace::{sort_events, EventKind, TraceEvent};
use crate::types::{AcceptanceModel, ForwardProfile, SimConfig, Ticks};

/// Outcome of one simulated generation.
#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub total_latency_ms: f64,
    #[serde(skip)]
    pub total: Ticks,
    pub tokens_emitted: usize,
    pub target_forwards: usize,
    pub drafter_forwards: usize,
    /// Verifications whose drafts were all accepted, so their latency never
    /// reached the critical path.
    pub hidden_target_forwards: usize,
    pub peak_sp_in_use: usize,
    /// Verification tasks that found every target server busy.
    pub queued_dispatches: usize,
    /// `(position, accepted)` for every draft the algorithm checked, in check order.
    pub checks: Vec<(usize, bool)>,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub record_trace: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { record_trace: true }
    }
}

impl SimOptions {
    pub fn quiet() -> Self {
        SimOptions { record_trace: false }
    }
}

/// Which algorithm to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Algorithm {
    NonSi,
    Si,
    Dsi,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::NonSi => "nonsi",
            Algorithm::Si => "si",
            Algorithm::Dsi => "dsi",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nonsi" | "non-si" => Ok(Algorithm::NonSi),
            "si" => Ok(Algorithm::Si),
            "dsi" => Ok(Algorithm::Dsi),
            other => Err(format!("unknown algorithm {other:?} (expected nonsi, si or dsi)")),
        }
    }
}

/// Target and drafter profiles plus the drafter's acceptance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scenario {
    pub target: ForwardProfile,
    pub drafter: ForwardProfile,
    pub acceptance: AcceptanceModel,
}

struct Recorder {
    on: bool,
    events: Vec<TraceEvent>,
}

impl Recorder {
    fn new(on: bool) -> Self {
        Recorder { on, events: Vec::new() }
    }

    fn push(&mut self, at: Ticks, kind: EventKind, position: usize, server: Option<usize>) {
        if self.on {
            let mut e = TraceEvent::new(at.as_ms(), kind, position);
            e.server_id = server;
            self.events.push(e);
        }
    }

    fn finish(mut self) -> Vec<TraceEvent> {
        sort_events(&mut self.events);
        self.events
    }
}

/// Non-SI: `N` sequential target forwards. `rng` is accepted for interface
/// uniformity and left untouched.
pub fn simulate_nonsi(target: &ForwardProfile, n_tokens: usize, _rng: &mut SimRng) -> SimResult {
    simulate_nonsi_with(target, n_tokens, SimOptions::default())
}

pub fn simulate_nonsi_with(target: &ForwardProfile, n_tokens: usize, opts: SimOptions) -> SimResult {
    assert!(n_tokens >= 1);
    let mut rec = Recorder::new(opts.record_trace);
    let mut now = Ticks::ZERO;
    for pos in 1..=n_tokens {
        now += target.forward_ticks(pos == 1);
        rec.push(now, EventKind::TokenEmitted, pos, Some(0));
    }
    SimResult {
        total_latency_ms: now.as_ms(),
        total: now,
        tokens_emitted: n_tokens,
        target_forwards: n_tokens,
        drafter_forwards: 0,
        hidden_target_forwards: 0,
        peak_sp_in_use: 1,
        queued_dispatches: 0,
        checks: Vec::new(),
        trace: rec.finish(),
    }
}

/// SI: draft `lookahead` tokens, verify them with one target forward, keep
/// the accepted prefix plus one target token, repeat until `N` tokens exist.
pub fn simulate_si(
    target: &ForwardProfile,
    drafter: &ForwardProfile,
    config: &SimConfig,
    model: &AcceptanceModel,
    rng: &mut SimRng,
) -> SimResult {
    simulate_si_with(target, drafter, config, model, rng, SimOptions::default())
}

pub fn simulate_si_with(
    target: &ForwardProfile,
    drafter: &ForwardProfile,
    config: &SimConfig,
    model: &AcceptanceModel,
    rng: &mut SimRng,
    opts: SimOptions,
) -> SimResult {
    let n = config.n_tokens;
    let k = config.lookahead;
    assert!(n >= 1 && k >= 1);
    let mut tape = AcceptanceTape::new(model, rng.clone());
    let mut rec = Recorder::new(opts.record_trace);
    let mut checks = Vec::new();
    let mut now = Ticks::ZERO;
    let (mut emitted, mut target_fw, mut drafter_fw) = (0usize, 0usize, 0usize);

    while emitted < n {
        for i in 1..=k {
            now += drafter.forward_ticks(drafter_fw == 0);
            drafter_fw += 1;
            rec.push(now, EventKind::DraftDone, emitted + i, None);
        }
        rec.push(now, EventKind::VerifyDispatch, emitted + 1, Some(0));
        now += target.forward_ticks(target_fw == 0);
        target_fw += 1;
        rec.push(now, EventKind::VerifyDone, emitted + 1, Some(0));

        let accepted = tape.run_from(emitted + 1, k);
        for pos in emitted + 1..=emitted + accepted {
            checks.push((pos, true));
            rec.push(now, EventKind::Accept, pos, None);
        }
        if accepted < k {
            checks.push((emitted + accepted + 1, false));
            rec.push(now, EventKind::Reject, emitted + accepted + 1, None);
        }
        let produced = (accepted + 1).min(n - emitted);
        for pos in emitted + 1..=emitted + produced {
            rec.push(now, EventKind::TokenEmitted, pos, None);
        }
        emitted += produced;
        rec.push(now, EventKind::ServerFreed, emitted, Some(0));
    }
    *rng = tape.into_rng();

    SimResult {
        total_latency_ms: now.as_ms(),
        total: now,
        tokens_emitted: emitted,
        target_forwards: target_fw,
        drafter_forwards: drafter_fw,
        hidden_target_forwards: 0,
        peak_sp_in_use: 1,
        queued_dispatches: 0,
        checks,
        trace: rec.finish(),
    }
}

/// DSI: a single drafter stream with verification tasks fanned out to a pool
/// of `sp_degree` target servers. See [`simulate_dsi_with`] for the model.
pub fn simulate_dsi(
    target: &ForwardProfile,
    drafter: &ForwardProfile,
    config: &SimConfig,
    model: &AcceptanceModel,
    rng: &mut SimRng,
) -> SimResult {
    simulate_dsi_with(target, drafter, config, model, rng, SimOptions::default())
}

/// Run one algorithm on a fresh stream seeded with `seed`.
pub fn simulate_seeded(alg: Algorithm, scenario: &Scenario, config: &SimConfig, seed: u64, opts: SimOptions) -> SimResult {
    let mut rng = SimRng::from_seed(seed);
    match alg {
        Algorithm::NonSi => simulate_nonsi_with(&scenario.target, config.n_tokens, opts),
        Algorithm::Si => simulate_si_with(&scenario.target, &scenario.drafter, config, &scenario.acceptance, &mut rng, opts),
        Algorithm::Dsi => {
            simulate_dsi_with(&scenario.target, &scenario.drafter, config, &scenario.acceptance, &mut rng, opts)
        }
    }
}

/// Mean and spread of one algorithm over a set of seeds.
#[derive(Debug, Clone, Serialize)]
pub struct RepeatSummary {
    pub mean_ms: f64,
    /// Sample standard deviation (zero for a single run).
    pub std_ms: f64,
    pub per_seed: Vec<SeedOutcome>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub latency_ms: f64,
    pub target_forwards: usize,
    pub drafter_forwards: usize,
    pub hidden_target_forwards: usize,
}

impl RepeatSummary {
    pub fn from_results(seeds: &[u64], results: &[SimResult]) -> Self {
        let per_seed: Vec<SeedOutcome> = seeds
            .iter()
            .zip(results)
            .map(|(&seed, r)| SeedOutcome {
                seed,
                latency_ms: r.total_latency_ms,
                target_forwards: r.target_forwards,
                drafter_forwards: r.drafter_forwards,
                hidden_target_forwards: r.hidden_target_forwards,
            })
            .collect();
        let lat: Vec<f64> = per_seed.iter().map(|s| s.latency_ms).collect();
        let (mean_ms, std_ms) = mean_std(&lat);
        RepeatSummary { mean_ms, std_ms, per_seed }
    }

    pub fn mean_of<F: Fn(&SeedOutcome) -> usize>(&self, f: F) -> f64 {
        self.per_seed.iter().map(|s| f(s) as f64).sum::<f64>() / self.per_seed.len() as f64
    }
}

/// Run `alg` once per seed, in seed order.
pub fn run_repeats(alg: Algorithm, scenario: &Scenario, config: &SimConfig, seeds: &[u64]) -> RepeatSummary {
    assert!(!seeds.is_empty(), "run_repeats needs at least one seed");
    let results: Vec<SimResult> = seeds
        .iter()
        .map(|&s| simulate_seeded(alg, scenario, config, s, SimOptions::quiet()))
        .collect();
    RepeatSummary::from_results(seeds, &results)
}

/// The seed set a config implies: `repeats` children of `config.seed`.
pub fn config_seeds(config: &SimConfig) -> Vec<u64> {
    repeat_seeds(config.seed, config.repeats)
}

/// Arithmetic mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests;
