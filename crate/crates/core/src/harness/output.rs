use std::fmt::Write as _;
use std::path::Path;

use super::pairs::PairReportRow;
use super::sweep::{RatioField, SpeedupGrid};
use crate::error::{Error, Result};

pub const GRID_CSV_VERSION: &str = "# dsi-sweep-csv v1";
pub const PAIRS_CSV_VERSION: &str = "# dsi-pairs-csv v1";
pub const GRID_CSV_HEADER: &str = "drafter_latency,acceptance_rate,nonsi_ms,si_ms,dsi_ms,si_lookahead,dsi_lookahead,r_nonsi_si,r_si_dsi,r_nonsi_dsi,r_min_dsi";

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Rows in axis order; failed cells become `# error` comment lines in place.
pub fn grid_csv(grid: &SpeedupGrid) -> String {
    let mut out = format!("{GRID_CSV_VERSION}\n{GRID_CSV_HEADER}\n");
    for cell in &grid.cells {
        match &cell.result {
            Ok(s) => {
                let _ = writeln!(
                    out,
                    "{:.4},{:.4},{:.6},{:.6},{:.6},{},{},{:.6},{:.6},{:.6},{:.6}",
                    cell.drafter_latency,
                    cell.acceptance_rate,
                    s.nonsi_ms,
                    s.si_ms,
                    s.dsi_ms,
                    s.si_lookahead,
                    s.dsi_lookahead,
                    s.r_nonsi_si,
                    s.r_si_dsi,
                    s.r_nonsi_dsi,
                    s.r_min_dsi
                );
            }
            Err(msg) => {
                let _ = writeln!(
                    out,
                    "# error drafter_latency={:.4} acceptance_rate={:.4}: {msg}",
                    cell.drafter_latency, cell.acceptance_rate
                );
            }
        }
    }
    out
}

pub fn emit_grid_csv(grid: &SpeedupGrid, path: &Path) -> Result<()> {
    write_file(path, &grid_csv(grid))
}

pub fn pairs_csv(rows: &[PairReportRow]) -> String {
    let mut out = format!(
        "{PAIRS_CSV_VERSION}\npair,nonsi_ms,si_ms,dsi_ms,si_lookahead,dsi_lookahead,speedup,published_speedup,relative_error\n"
    );
    let opt = |v: Option<f64>, prec: usize| v.map_or(String::new(), |x| format!("{x:.prec$}"));
    for r in rows {
        let _ = writeln!(
            out,
            "\"{}\",{:.6},{:.6},{:.6},{},{},{:.4},{},{}",
            r.pair.replace('"', "\"\""),
            r.nonsi_ms,
            r.si_ms,
            r.dsi_ms,
            r.si_lookahead,
            r.dsi_lookahead,
            r.speedup,
            opt(r.published_speedup, 2),
            opt(r.relative_error, 4)
        );
    }
    out
}

pub fn emit_pairs_csv(rows: &[PairReportRow], path: &Path) -> Result<()> {
    write_file(path, &pairs_csv(rows))
}

const SLOW: (f64, f64, f64) = (214.0, 51.0, 108.0);
const FAST: (f64, f64, f64) = (33.0, 113.0, 181.0);
const MISSING: &str = "#bdbdbd";

/// Diverging scale on `log(ratio)`: white at 1, pink below, blue above,
/// saturating at `span` (a log-ratio magnitude).
fn color(ratio: f64, span: f64) -> String {
    let t = if span > 0.0 { (ratio.ln() / span).clamp(-1.0, 1.0) } else { 0.0 };
    let (r, g, b) = if t < 0.0 { SLOW } else { FAST };
    let a = t.abs();
    let mix = |c: f64| (255.0 + (c - 255.0) * a).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(r), mix(g), mix(b))
}

/// A standalone SVG heatmap of one ratio: drafter latency on x, acceptance
/// rate on y (increasing upward), with a color legend.
pub fn heatmap_svg(grid: &SpeedupGrid, field: RatioField) -> String {
    const CELL: f64 = 18.0;
    const LEFT: f64 = 60.0;
    const TOP: f64 = 40.0;
    let nx = grid.drafter_axis.len();
    let ny = grid.acceptance_axis.len();
    let plot_w = nx as f64 * CELL;
    let plot_h = ny as f64 * CELL;
    let legend_x = LEFT + plot_w + 30.0;
    let width = legend_x + 90.0;
    let height = TOP + plot_h + 60.0;

    let span = grid
        .ok_cells()
        .map(|(_, s)| field.get(s).ln().abs())
        .fold(0.0, f64::max);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
    );
    svg.push_str("<!-- dsi-heatmap-svg v1 -->\n");
    let _ = writeln!(
        svg,
        r#"<text class="title" x="{}" y="20" text-anchor="middle" font-size="13">({}) {}</text>"#,
        LEFT + plot_w / 2.0,
        field.panel(),
        field.title()
    );
    for (i, cell) in grid.cells.iter().enumerate() {
        let (xi, yi) = (i / ny, i % ny);
        let x = LEFT + xi as f64 * CELL;
        let y = TOP + (ny - 1 - yi) as f64 * CELL;
        let (fill, tip) = match &cell.result {
            Ok(s) => (color(field.get(s), span), format!("{:.3}", field.get(s))),
            Err(e) => (MISSING.to_string(), format!("error: {e}")),
        };
        let _ = writeln!(
            svg,
            r#"<rect class="cell" x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{fill}"><title>drafter {:.2}, acceptance {:.2}: {}</title></rect>"#,
            cell.drafter_latency,
            cell.acceptance_rate,
            tip.replace('&', "&amp;").replace('<', "&lt;")
        );
    }

    let label_every = nx.div_ceil(10).max(1);
    for (i, d) in grid.drafter_axis.iter().enumerate().step_by(label_every) {
        let _ = writeln!(
            svg,
            r#"<text class="tick" x="{}" y="{}" text-anchor="middle">{d:.2}</text>"#,
            LEFT + (i as f64 + 0.5) * CELL,
            TOP + plot_h + 14.0
        );
    }
    let label_every = ny.div_ceil(10).max(1);
    for (j, p) in grid.acceptance_axis.iter().enumerate().step_by(label_every) {
        let _ = writeln!(
            svg,
            r#"<text class="tick" x="{}" y="{}" text-anchor="end">{p:.2}</text>"#,
            LEFT - 6.0,
            TOP + (ny - 1 - j) as f64 * CELL + CELL / 2.0 + 3.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="axis" x="{}" y="{}" text-anchor="middle">drafter latency (fraction of target)</text>"#,
        LEFT + plot_w / 2.0,
        TOP + plot_h + 34.0
    );
    let _ = writeln!(
        svg,
        r#"<text class="axis" transform="translate(16 {}) rotate(-90)" text-anchor="middle">acceptance rate</text>"#,
        TOP + plot_h / 2.0
    );

    const STOPS: usize = 11;
    let step_h = plot_h.min(220.0) / STOPS as f64;
    for s in 0..STOPS {
        // Top of the legend is the largest ratio.
        let t = 1.0 - 2.0 * s as f64 / (STOPS - 1) as f64;
        let ratio = (t * span).exp();
        let y = TOP + s as f64 * step_h;
        let _ = writeln!(
            svg,
            r#"<rect class="legend" x="{legend_x}" y="{y}" width="16" height="{step_h}" fill="{}"/>"#,
            color(ratio, span)
        );
        if s % 5 == 0 {
            let _ = writeln!(
                svg,
                r#"<text class="legend-label" x="{}" y="{}">{ratio:.2}x</text>"#,
                legend_x + 22.0,
                y + step_h / 2.0 + 3.0
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn render_heatmap_svg(grid: &SpeedupGrid, field: RatioField, path: &Path) -> Result<()> {
    write_file(path, &heatmap_svg(grid, field))
}
