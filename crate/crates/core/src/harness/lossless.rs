use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::online::{run_dsi_online, run_nonsi_online, FaultInjection, OnlineConfig, SyntheticLM};
use crate::rng::{derive_seed, SimRng};
use crate::types::{ForwardProfile, TokenSeq};

/// One randomized online configuration.
#[derive(Debug, Clone, Serialize)]
pub struct LosslessCase {
    pub run: usize,
    pub seed: u64,
    pub models: Vec<SyntheticLM>,
    pub config: OnlineConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct Mismatch {
    pub case: LosslessCase,
    pub expected: TokenSeq,
    pub got: TokenSeq,
}

#[derive(Debug, Clone, Serialize)]
pub struct LosslessReport {
    pub runs: usize,
    pub mismatches: usize,
    /// The lowest-numbered failing run.
    pub first: Option<Mismatch>,
}

/// Draw run `run`: 2 or 3 models, sub-millisecond forwards, N up to 64.
pub fn random_case(master_seed: u64, run: usize, fault: FaultInjection) -> Result<LosslessCase> {
    let seed = derive_seed(master_seed, run as u64);
    let mut rng = SimRng::from_seed(seed);
    let m = rng.range_usize(2, 3);
    let target_tpot = rng.range_f64(0.05, 0.3);
    let profile = |rng: &mut SimRng, tpot: f64| ForwardProfile::new(tpot * rng.range_f64(1.0, 2.0), tpot);
    let target = SyntheticLM::target(m, profile(&mut rng, target_tpot)?, rng.next_u64());
    let mut models = Vec::with_capacity(m);
    for j in 1..m {
        let tpot = target_tpot * rng.range_f64(0.05, 1.0);
        let p = profile(&mut rng, tpot)?;
        let agree = rng.uniform();
        models.push(SyntheticLM::drafter(j, p, agree, rng.next_u64(), &target)?);
    }
    models.push(target);
    let prompt_len = rng.range_usize(1, 4);
    let config = OnlineConfig {
        prompt: (0..prompt_len).map(|_| rng.range_usize(0, 32_767) as u32).collect(),
        drafter_threads: rng.range_usize(1, 2),
        fault,
        ..OnlineConfig::new(rng.range_usize(1, 64), rng.range_usize(1, 6), rng.range_usize(1, 8))?
    };
    Ok(LosslessCase {
        run,
        seed,
        models,
        config,
    })
}

fn check(case: LosslessCase) -> Result<Option<Mismatch>> {
    let target = case.models.last().unwrap();
    let expected = run_nonsi_online(target, case.config.n_tokens, &case.config.prompt)?.tokens;
    let got = run_dsi_online(&case.models, &case.config)?.tokens;
    Ok((got != expected).then_some(Mismatch { case, expected, got }))
}

/// Compare `runs` randomized online DSI runs with non-SI, `threads` at a time.
pub fn verify_lossless(runs: usize, seed: u64, fault: FaultInjection, threads: usize) -> Result<LosslessReport> {
    if runs == 0 {
        return Err(Error::InvalidConfig("runs must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?;
    let outcomes: Vec<Option<Mismatch>> = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|run| check(random_case(seed, run, fault)?))
            .collect::<Result<_>>()
    })?;
    let mismatches = outcomes.iter().filter(|o| o.is_some()).count();
    Ok(LosslessReport {
        runs,
        mismatches,
        first: outcomes.into_iter().flatten().next(),
    })
}
