use clap::Args;
use dsi_core::harness::verify_lossless;
use dsi_core::online::FaultInjection;

use crate::{default_threads, CmdResult, Failure};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Test-only: keep disagreeing drafter threads alive, which must break losslessness.
    #[arg(long, hide = true)]
    inject_skip_cancel: bool,
    /// Concurrent runs; defaults to DSI_THREADS or max(cores, 8), since runs mostly sleep.
    #[arg(long)]
    threads: Option<usize>,
}

pub fn run(a: VerifyArgs) -> CmdResult {
    if a.runs == 0 {
        Err(anyhow::anyhow!("--runs must be >= 1"))?;
    }
    let threads = match a.threads {
        Some(t) => t,
        None if std::env::var_os(crate::THREADS_ENV).is_some() => default_threads()?,
        None => default_threads()?.max(8),
    };
    let fault = FaultInjection {
        skip_mismatch_cancel: a.inject_skip_cancel,
    };
    println!("command=verify-lossless");
    println!("seed={}", a.seed);
    println!("runs={}", a.runs);
    let report = verify_lossless(a.runs, a.seed, fault, threads)?;
    println!("mismatches={}", report.mismatches);
    match report.first {
        None => Ok(()),
        Some(m) => {
            let c = &m.case;
            println!(
                "counterexample: run={} seed={} models={} n_tokens={} lookahead={} sp={} drafter_threads={}",
                c.run,
                c.seed,
                c.models.len(),
                c.config.n_tokens,
                c.config.lookahead,
                c.config.sp_degree,
                c.config.drafter_threads
            );
            println!("config={}", serde_json::to_string(c).unwrap_or_default());
            println!("expected={:?}", m.expected.0);
            println!("got={:?}", m.got.0);
            Err(Failure::Violation(format!("{} of {} runs diverged from non-SI", report.mismatches, a.runs)))
        }
    }
}
