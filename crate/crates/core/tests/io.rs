use std::io::Write;

use dsi_core::estimation::{estimate_acceptance_rate, estimate_forward_profile, read_latency_records, read_sequence_pairs};
use dsi_core::offline::simulate_dsi;
use dsi_core::trace::{read_jsonl, write_jsonl_file};
use dsi_core::{AcceptanceModel, Error, ForwardProfile, SimConfig, SimRng};

#[test]
fn trace_file_round_trip() {
    let target = ForwardProfile::new(2.0, 1.0).unwrap();
    let drafter = ForwardProfile::uniform(0.25).unwrap();
    let cfg = SimConfig::new(30, 2, 4, 0, 1).unwrap();
    let model = AcceptanceModel::new(0.7).unwrap();
    let run = simulate_dsi(&target, &drafter, &cfg, &model, &mut SimRng::from_seed(8));
    assert!(!run.trace.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.jsonl");
    write_jsonl_file(&run.trace, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), run.trace.len());
    assert!(text.lines().next().unwrap().contains("\"time_ms\""));
    let back = read_jsonl(std::fs::File::open(&path).unwrap(), "trace.jsonl").unwrap();
    assert_eq!(back, run.trace);
}

#[test]
fn estimation_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let pairs_path = dir.path().join("pairs.jsonl");
    let mut f = std::fs::File::create(&pairs_path).unwrap();
    writeln!(f, r#"{{"target_tokens": [1, 2, 3, 4], "drafter_tokens": [1, 2, 9, 4]}}"#).unwrap();
    writeln!(f).unwrap();
    writeln!(f, r#"{{"target_tokens": [7], "drafter_tokens": [8]}}"#).unwrap();
    drop(f);
    let pairs = read_sequence_pairs(std::fs::File::open(&pairs_path).unwrap(), "pairs").unwrap();
    assert_eq!(pairs.len(), 2);
    // Mean matched prefix 1 maps to 1 - 1/2.
    assert!((estimate_acceptance_rate(&pairs).unwrap() - 0.5).abs() < 1e-12);

    let lat = "{\"model_id\":\"m\",\"dataset_id\":\"d\",\"prompt_id\":\"a\",\"per_token_ms\":[50,10,10]}\n\
               {\"model_id\":\"m\",\"dataset_id\":\"d\",\"prompt_id\":\"b\",\"per_token_ms\":[30,20]}\n";
    let recs = read_latency_records(lat.as_bytes(), "lat").unwrap();
    let p = estimate_forward_profile(&recs).unwrap();
    assert!((p.ttft_ms - 40.0).abs() < 1e-12);
    assert!((p.tpot_ms - 40.0 / 3.0).abs() < 1e-12);
}

#[test]
fn malformed_lines_report_their_number() {
    let text = "{\"target_tokens\": [1], \"drafter_tokens\": [1]}\n{not json\n";
    match read_sequence_pairs(text.as_bytes(), "bad.jsonl") {
        Err(Error::Parse { line, source_name, .. }) => {
            assert_eq!(line, 2);
            assert_eq!(source_name, "bad.jsonl");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(estimate_acceptance_rate(&[]).is_err());
}
