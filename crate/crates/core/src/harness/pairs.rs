use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::lookahead_feasible;
use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::offline::{run_repeats, Algorithm, Scenario};
use crate::rng::{derive_seed, repeat_seeds};
use crate::types::{AcceptanceModel, ForwardProfile, SimConfig};

const TABLE2: &str = include_str!("../../fixtures/table2.kv");

/// One target/drafter pair measured with a fixed lookahead set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRunSpec {
    pub name: String,
    pub target: ForwardProfile,
    pub drafter: ForwardProfile,
    pub acceptance: f64,
    pub n_tokens: usize,
    pub lookahead_grid: Vec<usize>,
    pub sp_cap: usize,
    pub repeats: usize,
    pub seed: u64,
    /// Published speedup to compare against, when there is one.
    pub published_speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReportRow {
    pub pair: String,
    pub nonsi_ms: f64,
    pub si_ms: f64,
    pub dsi_ms: f64,
    pub si_lookahead: usize,
    pub dsi_lookahead: usize,
    /// Best SI mean over best DSI mean.
    pub speedup: f64,
    pub published_speedup: Option<f64>,
    pub relative_error: Option<f64>,
}

const PAIR_FIELDS: &[&str] = &[
    "name",
    "target_tpot",
    "drafter_tpot",
    "target_ttft_ratio",
    "drafter_ttft_ratio",
    "acceptance",
    "published_speedup",
];

/// Parse `pair.<id>.<field>` groups plus shared `n_tokens`, `lookahead`,
/// `sp_cap`, `repeats` and `seed` keys. Missing TTFT ratios default to 1.
pub fn pair_specs_from_config(cfg: &KvConfig) -> Result<Vec<PairRunSpec>> {
    cfg.reject_unknown(&["n_tokens", "lookahead", "sp_cap", "repeats", "seed"], &["pair."])?;
    let n_tokens = cfg.get("n_tokens")?.unwrap_or(50);
    let lookahead_grid = cfg.get_usize_list("lookahead")?.unwrap_or_else(|| vec![1, 5, 10]);
    let sp_cap = cfg.get("sp_cap")?.unwrap_or(7);
    let repeats = cfg.get("repeats")?.unwrap_or(1000);
    let seed: u64 = cfg.get("seed")?.unwrap_or(0);
    let ids = cfg.groups("pair");
    if ids.is_empty() {
        return Err(Error::InvalidConfig(format!("{}: no pair.<id>.* entries", cfg.source())));
    }
    let mut specs = Vec::with_capacity(ids.len());
    for id in ids {
        let key = |f: &str| format!("pair.{id}.{f}");
        for k in cfg.keys().filter(|k| k.starts_with(&format!("pair.{id}."))) {
            let field = &k[id.len() + 6..];
            if !PAIR_FIELDS.contains(&field) {
                return Err(Error::InvalidConfig(format!("{}: unknown pair field {k:?}", cfg.source())));
            }
        }
        let target_tpot: f64 = cfg.require(&key("target_tpot"))?;
        let drafter_tpot: f64 = cfg.require(&key("drafter_tpot"))?;
        let target_ratio: f64 = cfg.get(&key("target_ttft_ratio"))?.unwrap_or(1.0);
        let drafter_ratio: f64 = cfg.get(&key("drafter_ttft_ratio"))?.unwrap_or(1.0);
        let acceptance: f64 = cfg.require(&key("acceptance"))?;
        AcceptanceModel::new(acceptance)?;
        specs.push(PairRunSpec {
            name: cfg.get_str(&key("name")).unwrap_or(&id).to_string(),
            target: ForwardProfile::new(target_tpot * target_ratio, target_tpot)?,
            drafter: ForwardProfile::new(drafter_tpot * drafter_ratio, drafter_tpot)?,
            acceptance,
            n_tokens,
            lookahead_grid: lookahead_grid.clone(),
            sp_cap,
            repeats,
            seed,
            published_speedup: cfg.get(&key("published_speedup"))?,
        });
    }
    Ok(specs)
}

/// The ten published pairs, with TTFT ratios per dataset.
pub fn table2_fixture() -> Vec<PairRunSpec> {
    let cfg = KvConfig::parse(TABLE2, "table2.kv").expect("bundled fixture parses");
    pair_specs_from_config(&cfg).expect("bundled fixture is valid")
}

pub fn table2_fixture_text() -> &'static str {
    TABLE2
}

fn run_pair(spec: &PairRunSpec, index: usize) -> Result<PairReportRow> {
    let scenario = Scenario {
        target: spec.target,
        drafter: spec.drafter,
        acceptance: AcceptanceModel::new(spec.acceptance)?,
    };
    let seeds = repeat_seeds(derive_seed(spec.seed, index as u64), spec.repeats);
    let mut si: Option<(f64, usize)> = None;
    let mut dsi: Option<(f64, usize)> = None;
    for &k in &spec.lookahead_grid {
        let cfg = SimConfig::new(spec.n_tokens, k, spec.sp_cap, spec.seed, spec.repeats)?;
        let s = run_repeats(Algorithm::Si, &scenario, &cfg, &seeds).mean_ms;
        if si.is_none_or(|b| s < b.0) {
            si = Some((s, k));
        }
        if lookahead_feasible(spec.target.tpot_ms, spec.drafter.tpot_ms, k, spec.sp_cap) {
            let d = run_repeats(Algorithm::Dsi, &scenario, &cfg, &seeds).mean_ms;
            if dsi.is_none_or(|b| d < b.0) {
                dsi = Some((d, k));
            }
        }
    }
    let (si_ms, si_lookahead) = si.ok_or_else(|| Error::InvalidConfig("empty lookahead grid".into()))?;
    let (dsi_ms, dsi_lookahead) = dsi.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "{}: no lookahead in {:?} satisfies the SP bound {}",
            spec.name, spec.lookahead_grid, spec.sp_cap
        ))
    })?;
    let nonsi_cfg = SimConfig::new(spec.n_tokens, 1, spec.sp_cap, spec.seed, 1)?;
    let nonsi_ms = run_repeats(Algorithm::NonSi, &scenario, &nonsi_cfg, &seeds[..1]).mean_ms;
    let speedup = si_ms / dsi_ms;
    Ok(PairReportRow {
        pair: spec.name.clone(),
        nonsi_ms,
        si_ms,
        dsi_ms,
        si_lookahead,
        dsi_lookahead,
        speedup,
        published_speedup: spec.published_speedup,
        relative_error: spec.published_speedup.map(|p| (speedup - p) / p),
    })
}

/// DSI-vs-SI speedup per pair: the best SI mean over the whole lookahead
/// grid against the best DSI mean over the SP-feasible part, on shared seeds.
/// Latencies include the TTFT of each model's first forward.
pub fn run_pair_report(specs: &[PairRunSpec]) -> Result<Vec<PairReportRow>> {
    specs
        .par_iter()
        .enumerate()
        .map(|(i, s)| run_pair(s, i))
        .collect()
}
