use std::path::Path;

use dsi_core::config::KvConfig;
use dsi_core::harness::{grid_csv, sweep, SweepSpec};

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn golden_grid() -> String {
    let cfg = KvConfig::from_file(&fixture("golden_5x5.kv")).unwrap();
    let spec = SweepSpec::from_config(&cfg).unwrap();
    grid_csv(&sweep(&spec).unwrap())
}

#[test]
fn golden_sweep_matches_frozen_csv() {
    let expected = std::fs::read_to_string(fixture("golden_5x5.csv")).unwrap();
    let got = golden_grid();
    if got != expected {
        for (i, (g, e)) in got.lines().zip(expected.lines()).enumerate() {
            assert_eq!(g, e, "first differing line {}", i + 1);
        }
        panic!("line counts differ: got {}, expected {}", got.lines().count(), expected.lines().count());
    }
}

fn row(csv: &str, d: &str, p: &str) -> Vec<f64> {
    let prefix = format!("{d},{p},");
    let line = csv.lines().find(|l| l.starts_with(&prefix)).unwrap();
    line.split(',').skip(2).map(|f| f.parse().unwrap()).collect()
}

#[test]
fn golden_cells_agree_with_closed_forms() {
    let csv = golden_grid();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with("drafter")).count(), 25);
    // Columns after the two axes: nonsi, si, dsi, then ratios and lookaheads.
    let zero = row(&csv, "0.2000", "0.0000");
    assert_eq!(zero[0], 50.0);
    // Nothing accepted: the best SI drafts one token per target forward.
    assert!((zero[1] - 60.0).abs() < 1e-9);
    assert!((zero[2] - 50.0).abs() < 1e-9);
    let perfect = row(&csv, "0.2000", "1.0000");
    // Lookahead 8 covers 50 tokens in 6 iterations of 8 drafts and one check.
    assert!((perfect[1] - 6.0 * 2.6).abs() < 1e-9);
    let slow = row(&csv, "1.0000", "1.0000");
    assert_eq!(&slow[..3], &[50.0, 50.0, 50.0]);
}
