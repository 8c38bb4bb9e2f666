//! Experiment orchestration: speedup grids over drafter latency and
//! acceptance rate, target/drafter pair reports, randomized lossless checks,
//! and CSV / SVG output.
//!
//! Seeds come from the master seed alone (plus the pair index in pair
//! reports) and SI and DSI share them, so results are the same for any
//! rayon thread count.

mod lossless;
mod output;
mod pairs;
mod sweep;

pub use lossless::{random_case, verify_lossless, LosslessCase, LosslessReport, Mismatch};
pub use output::{
    emit_grid_csv, emit_pairs_csv, grid_csv, heatmap_svg, pairs_csv, render_heatmap_svg, GRID_CSV_HEADER,
    GRID_CSV_VERSION, PAIRS_CSV_VERSION,
};
pub use pairs::{pair_specs_from_config, run_pair_report, table2_fixture, table2_fixture_text, PairReportRow, PairRunSpec};
pub use sweep::{sweep_seeds, is_connected, sweep, CellStats, GridCell, RatioField, SpeedupGrid, SweepSpec, SWEEP_KEYS};
