use std::path::PathBuf;

use clap::Args;
use dsi_core::config::KvConfig;
use dsi_core::harness::{
    emit_grid_csv, emit_pairs_csv, is_connected, pair_specs_from_config, render_heatmap_svg, run_pair_report, sweep as run_sweep,
    table2_fixture, RatioField, SweepSpec,
};

use crate::manifest::RunManifest;
use crate::{out_path, with_threads, CmdResult, Failure};

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// fig3-coarse, fig3-full or lookahead5.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Key-value sweep spec (keys: preset, drafter_latency, acceptance,
    /// lookahead, sp_cap, n_tokens, repeats, seed).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Also render the four heatmaps (always on for fig3 presets).
    #[arg(long)]
    svg: bool,
    /// Worker threads; defaults to DSI_THREADS or the core count.
    #[arg(long)]
    threads: Option<usize>,
}

pub fn sweep(a: SweepArgs) -> CmdResult {
    let mut spec = match (&a.preset, &a.config) {
        (Some(p), _) => SweepSpec::preset(p)?,
        (None, Some(c)) => SweepSpec::from_config(&KvConfig::from_file(c)?)?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(r) = a.repeats {
        spec.repeats = r;
    }
    spec.validate()?;
    let grid = with_threads(a.threads, || run_sweep(&spec))??;

    std::fs::create_dir_all(&a.out).map_err(|e| dsi_core::Error::io(&a.out, e))?;
    let csv = out_path(&a.out, "sweep.csv");
    emit_grid_csv(&grid, &csv)?;
    let mut outputs = vec![csv];
    let svgs = a.svg || a.preset.as_deref().is_some_and(|p| p.starts_with("fig3"));
    if svgs {
        for field in RatioField::ALL {
            let p = out_path(&a.out, &field.file_name());
            render_heatmap_svg(&grid, field, &p)?;
            outputs.push(p);
        }
    }
    let manifest = RunManifest::new("sweep", &spec, spec.seed, outputs.clone())?;
    manifest.write(&out_path(&a.out, "manifest.json"))?;

    println!("command=sweep");
    println!("seed={}", spec.seed);
    println!("cells={}", grid.cells.len());
    println!("failed_cells={}", grid.failed_cells());
    for field in RatioField::ALL {
        if let (Some((hi_cell, hi)), Some((lo_cell, lo))) = (grid.max_of(field), grid.min_of(field)) {
            println!(
                "{}: max={hi:.4} at (drafter {:.2}, acceptance {:.2}) min={lo:.4} at (drafter {:.2}, acceptance {:.2})",
                field.column(),
                hi_cell.drafter_latency,
                hi_cell.acceptance_rate,
                lo_cell.drafter_latency,
                lo_cell.acceptance_rate
            );
        }
    }
    let slow = grid.slowdown_cells(RatioField::NonsiOverSi);
    println!(
        "si_slowdown_cells={} connected={}",
        slow.len(),
        is_connected(&slow)
    );
    for p in &outputs {
        println!("wrote {}", p.display());
    }
    if grid.failed_cells() == grid.cells.len() {
        return Err(Failure::AllFailed(format!("all {} cells failed", grid.cells.len())));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct PairsArgs {
    /// Only `table2` is built in.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Key-value pair spec: shared n_tokens, lookahead, sp_cap, repeats, seed,
    /// plus pair.<id>.{name,target_tpot,drafter_tpot,target_ttft_ratio,drafter_ttft_ratio,acceptance,published_speedup}.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
}

pub fn pairs(a: PairsArgs) -> CmdResult {
    let mut specs = match (&a.preset, &a.config) {
        (Some(p), _) if p == "table2" => table2_fixture(),
        (Some(p), _) => Err(anyhow::anyhow!("unknown pairs preset {p:?} (expected table2)"))?,
        (None, Some(c)) => pair_specs_from_config(&KvConfig::from_file(c)?)?,
        (None, None) => unreachable!("clap requires one of them"),
    };
    for s in &mut specs {
        if let Some(seed) = a.seed {
            s.seed = seed;
        }
        if let Some(r) = a.repeats {
            s.repeats = r;
        }
        if s.repeats == 0 {
            Err(anyhow::anyhow!("repeats must be >= 1"))?;
        }
    }
    let rows = with_threads(a.threads, || run_pair_report(&specs))??;
    std::fs::create_dir_all(&a.out).map_err(|e| dsi_core::Error::io(&a.out, e))?;
    let csv = out_path(&a.out, "pairs.csv");
    emit_pairs_csv(&rows, &csv)?;
    let seed = specs.first().map_or(0, |s| s.seed);
    RunManifest::new("pairs", &specs, seed, vec![csv.clone()])?.write(&out_path(&a.out, "manifest.json"))?;

    println!("command=pairs");
    println!("seed={seed}");
    println!("{:<32} {:>9} {:>9} {:>4} {:>4} {:>8} {:>9}", "pair", "si_ms", "dsi_ms", "k_si", "k_dsi", "speedup", "published");
    for r in &rows {
        println!(
            "{:<32} {:>9.2} {:>9.2} {:>4} {:>4} {:>7.3}x {:>9}",
            r.pair,
            r.si_ms,
            r.dsi_ms,
            r.si_lookahead,
            r.dsi_lookahead,
            r.speedup,
            r.published_speedup.map_or("-".to_string(), |p| format!("{p:.2}x"))
        );
    }
    println!("wrote {}", csv.display());
    Ok(())
}
