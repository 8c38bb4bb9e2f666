use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::{lookahead_feasible, min_lookahead};
use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::offline::{run_repeats, Algorithm, Scenario};
use crate::rng::{derive_seed, repeat_seeds};
use crate::types::{AcceptanceModel, ForwardProfile, SimConfig};

/// A grid of (drafter latency, acceptance rate) cells. Latencies are
/// relative to a target forward of 1 ms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub drafter_latency_grid: Vec<f64>,
    pub acceptance_grid: Vec<f64>,
    pub lookahead_grid: Vec<usize>,
    pub sp_cap: usize,
    pub n_tokens: usize,
    pub repeats: usize,
    pub seed: u64,
}

fn steps(start: f64, end: f64, step: f64) -> Vec<f64> {
    let count = ((end - start) / step + 1e-9).floor() as usize;
    (0..=count)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect()
}

pub const SWEEP_KEYS: &[&str] = &[
    "preset",
    "drafter_latency",
    "acceptance",
    "lookahead",
    "sp_cap",
    "n_tokens",
    "repeats",
    "seed",
];

impl SweepSpec {
    /// 0.05 steps on both axes and a sparse lookahead set.
    pub fn fig3_coarse() -> Self {
        SweepSpec {
            drafter_latency_grid: steps(0.05, 1.0, 0.05),
            acceptance_grid: steps(0.0, 1.0, 0.05),
            lookahead_grid: vec![1, 2, 3, 4, 5, 6, 8, 10, 12, 16, 20, 24, 32],
            sp_cap: 7,
            n_tokens: 100,
            repeats: 5,
            seed: 0,
        }
    }

    /// The full resolution grid: 0.01 steps and every lookahead up to 200.
    pub fn fig3_full() -> Self {
        SweepSpec {
            drafter_latency_grid: steps(0.01, 1.0, 0.01),
            acceptance_grid: steps(0.0, 1.0, 0.01),
            lookahead_grid: (1..=200).collect(),
            ..Self::fig3_coarse()
        }
    }

    /// Coarse axes with the lookahead pinned to 5 for both SI and DSI.
    pub fn lookahead5() -> Self {
        SweepSpec {
            lookahead_grid: vec![5],
            ..Self::fig3_coarse()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "fig3-coarse" => Ok(Self::fig3_coarse()),
            "fig3-full" => Ok(Self::fig3_full()),
            "lookahead5" => Ok(Self::lookahead5()),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep preset {other:?} (expected fig3-coarse, fig3-full or lookahead5)"
            ))),
        }
    }

    /// Read a spec from a config file; an optional `preset` key supplies defaults.
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        cfg.reject_unknown(SWEEP_KEYS, &[])?;
        let mut spec = match cfg.get_str("preset") {
            Some(p) => Self::preset(p)?,
            None => Self::fig3_coarse(),
        };
        if let Some(v) = cfg.get_f64_list("drafter_latency")? {
            spec.drafter_latency_grid = v;
        }
        if let Some(v) = cfg.get_f64_list("acceptance")? {
            spec.acceptance_grid = v;
        }
        if let Some(v) = cfg.get_usize_list("lookahead")? {
            spec.lookahead_grid = v;
        }
        spec.sp_cap = cfg.get("sp_cap")?.unwrap_or(spec.sp_cap);
        spec.n_tokens = cfg.get("n_tokens")?.unwrap_or(spec.n_tokens);
        spec.repeats = cfg.get("repeats")?.unwrap_or(spec.repeats);
        spec.seed = cfg.get("seed")?.unwrap_or(spec.seed);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        fn increasing<T: PartialOrd>(name: &str, xs: &[T]) -> Result<()> {
            if xs.is_empty() {
                return Err(Error::InvalidConfig(format!("{name} grid is empty")));
            }
            if xs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(format!("{name} grid must be strictly increasing")));
            }
            Ok(())
        }
        increasing("drafter_latency", &self.drafter_latency_grid)?;
        increasing("acceptance", &self.acceptance_grid)?;
        increasing("lookahead", &self.lookahead_grid)?;
        if self.drafter_latency_grid.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
            return Err(Error::InvalidConfig("drafter latencies must lie in (0, 1]".into()));
        }
        if self.acceptance_grid.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidConfig("acceptance rates must lie in [0, 1]".into()));
        }
        if self.lookahead_grid[0] == 0 {
            return Err(Error::InvalidConfig("lookahead values must be >= 1".into()));
        }
        for (name, v) in [("sp_cap", self.sp_cap), ("n_tokens", self.n_tokens), ("repeats", self.repeats)] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.drafter_latency_grid.len() * self.acceptance_grid.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellStats {
    pub nonsi_ms: f64,
    pub si_ms: f64,
    pub dsi_ms: f64,
    pub si_std_ms: f64,
    pub dsi_std_ms: f64,
    pub si_lookahead: usize,
    pub dsi_lookahead: usize,
    pub r_nonsi_si: f64,
    pub r_si_dsi: f64,
    pub r_nonsi_dsi: f64,
    pub r_min_dsi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub drafter_latency: f64,
    pub acceptance_rate: f64,
    pub result: std::result::Result<CellStats, String>,
}

/// The four speedup panels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RatioField {
    NonsiOverSi,
    SiOverDsi,
    NonsiOverDsi,
    MinOverDsi,
}

impl RatioField {
    pub const ALL: [RatioField; 4] = [
        RatioField::NonsiOverSi,
        RatioField::SiOverDsi,
        RatioField::NonsiOverDsi,
        RatioField::MinOverDsi,
    ];

    pub fn column(self) -> &'static str {
        match self {
            RatioField::NonsiOverSi => "r_nonsi_si",
            RatioField::SiOverDsi => "r_si_dsi",
            RatioField::NonsiOverDsi => "r_nonsi_dsi",
            RatioField::MinOverDsi => "r_min_dsi",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            RatioField::NonsiOverSi => "non-SI/SI",
            RatioField::SiOverDsi => "SI/DSI",
            RatioField::NonsiOverDsi => "non-SI/DSI",
            RatioField::MinOverDsi => "min(SI, non-SI)/DSI",
        }
    }

    /// Panel letter, a to d.
    pub fn panel(self) -> char {
        match self {
            RatioField::NonsiOverSi => 'a',
            RatioField::SiOverDsi => 'b',
            RatioField::NonsiOverDsi => 'c',
            RatioField::MinOverDsi => 'd',
        }
    }

    pub fn file_name(self) -> String {
        format!("fig3{}_{}.svg", self.panel(), self.column())
    }

    pub fn get(self, c: &CellStats) -> f64 {
        match self {
            RatioField::NonsiOverSi => c.r_nonsi_si,
            RatioField::SiOverDsi => c.r_si_dsi,
            RatioField::NonsiOverDsi => c.r_nonsi_dsi,
            RatioField::MinOverDsi => c.r_min_dsi,
        }
    }
}

impl std::str::FromStr for RatioField {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        RatioField::ALL
            .into_iter()
            .find(|f| f.column() == s || f.panel().to_string() == s)
            .ok_or_else(|| format!("unknown ratio field {s:?}"))
    }
}

/// Sweep results in row-major order: drafter latency outer, acceptance inner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupGrid {
    pub drafter_axis: Vec<f64>,
    pub acceptance_axis: Vec<f64>,
    pub cells: Vec<GridCell>,
}

impl SpeedupGrid {
    pub fn cell(&self, drafter_idx: usize, acceptance_idx: usize) -> &GridCell {
        &self.cells[drafter_idx * self.acceptance_axis.len() + acceptance_idx]
    }

    pub fn ok_cells(&self) -> impl Iterator<Item = (&GridCell, &CellStats)> {
        self.cells.iter().filter_map(|c| c.result.as_ref().ok().map(|s| (c, s)))
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.result.is_err()).count()
    }

    /// The cell with the largest value of `field`.
    pub fn max_of(&self, field: RatioField) -> Option<(&GridCell, f64)> {
        self.ok_cells()
            .map(|(c, s)| (c, field.get(s)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn min_of(&self, field: RatioField) -> Option<(&GridCell, f64)> {
        self.ok_cells()
            .map(|(c, s)| (c, field.get(s)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Cells where `field` is below 1, as (drafter index, acceptance index).
    pub fn slowdown_cells(&self, field: RatioField) -> Vec<(usize, usize)> {
        let na = self.acceptance_axis.len();
        (0..self.cells.len())
            .filter(|&i| matches!(&self.cells[i].result, Ok(s) if field.get(s) < 1.0))
            .map(|i| (i / na, i % na))
            .collect()
    }
}

/// Whether `cells` form one 4-connected region.
pub fn is_connected(cells: &[(usize, usize)]) -> bool {
    let set: std::collections::HashSet<(usize, usize)> = cells.iter().copied().collect();
    let Some(&start) = cells.first() else {
        return true;
    };
    let mut seen = std::collections::HashSet::from([start]);
    let mut stack = vec![start];
    while let Some((i, j)) = stack.pop() {
        let mut near = vec![(i + 1, j), (i, j + 1)];
        if i > 0 {
            near.push((i - 1, j));
        }
        if j > 0 {
            near.push((i, j - 1));
        }
        for n in near {
            if set.contains(&n) && seen.insert(n) {
                stack.push(n);
            }
        }
    }
    seen.len() == set.len()
}

fn cell_stats(spec: &SweepSpec, drafter: f64, rate: f64, seeds: &[u64]) -> std::result::Result<CellStats, String> {
    let scenario = Scenario {
        target: ForwardProfile::uniform(1.0).map_err(|e| e.to_string())?,
        drafter: ForwardProfile::uniform(drafter).map_err(|e| e.to_string())?,
        acceptance: AcceptanceModel::new(rate).map_err(|e| e.to_string())?,
    };
    let config = |k: usize| SimConfig::new(spec.n_tokens, k, spec.sp_cap, 0, seeds.len()).map_err(|e| e.to_string());
    let nonsi = run_repeats(Algorithm::NonSi, &scenario, &config(1)?, &seeds[..1]).mean_ms;

    // Ties keep the smaller lookahead.
    let mut si: Option<(f64, f64, usize)> = None;
    let mut dsi: Option<(f64, f64, usize)> = None;
    for &k in &spec.lookahead_grid {
        let cfg = config(k)?;
        let s = run_repeats(Algorithm::Si, &scenario, &cfg, seeds);
        if si.is_none_or(|b| s.mean_ms < b.0) {
            si = Some((s.mean_ms, s.std_ms, k));
        }
        if lookahead_feasible(1.0, drafter, k, spec.sp_cap) {
            let d = run_repeats(Algorithm::Dsi, &scenario, &cfg, seeds);
            if dsi.is_none_or(|b| d.mean_ms < b.0) {
                dsi = Some((d.mean_ms, d.std_ms, k));
            }
        }
    }
    let (si_ms, si_std_ms, si_lookahead) = si.expect("lookahead grid is nonempty");
    let Some((dsi_ms, dsi_std_ms, dsi_lookahead)) = dsi else {
        return Err(format!(
            "no lookahead in the grid satisfies the SP bound {} (smallest feasible lookahead is {})",
            spec.sp_cap,
            min_lookahead(1.0, drafter, spec.sp_cap)
        ));
    };
    Ok(CellStats {
        nonsi_ms: nonsi,
        si_ms,
        dsi_ms,
        si_std_ms,
        dsi_std_ms,
        si_lookahead,
        dsi_lookahead,
        r_nonsi_si: nonsi / si_ms,
        r_si_dsi: si_ms / dsi_ms,
        r_nonsi_dsi: nonsi / dsi_ms,
        r_min_dsi: si_ms.min(nonsi) / dsi_ms,
    })
}

/// Seeds shared by every cell, algorithm and lookahead of a sweep. Each
/// draft position accepts when its uniform draw falls below the rate, so
/// neighbouring cells see nested acceptance patterns and the surfaces move
/// monotonically with the rate instead of with sampling noise.
pub fn sweep_seeds(spec: &SweepSpec) -> Vec<u64> {
    repeat_seeds(derive_seed(spec.seed, 0), spec.repeats)
}

/// Sweep every cell in parallel. The result does not depend on the thread count.
pub fn sweep(spec: &SweepSpec) -> Result<SpeedupGrid> {
    spec.validate()?;
    let na = spec.acceptance_grid.len();
    let seeds = sweep_seeds(spec);
    let cells = (0..spec.cell_count())
        .into_par_iter()
        .map(|i| {
            let drafter = spec.drafter_latency_grid[i / na];
            let rate = spec.acceptance_grid[i % na];
            GridCell {
                drafter_latency: drafter,
                acceptance_rate: rate,
                result: cell_stats(spec, drafter, rate, &seeds),
            }
        })
        .collect();
    Ok(SpeedupGrid {
        drafter_axis: spec.drafter_latency_grid.clone(),
        acceptance_axis: spec.acceptance_grid.clone(),
        cells,
    })
}
