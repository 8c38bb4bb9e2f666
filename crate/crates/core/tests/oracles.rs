use approx::assert_relative_eq;
use dsi_core::analytic::{min_lookahead, nonsi_latency, required_sp, si_expected_latency};
use dsi_core::offline::{run_repeats, simulate_dsi, simulate_nonsi, simulate_si, Scenario};
use dsi_core::rng::repeat_seeds;
use dsi_core::{AcceptanceModel, Algorithm, ForwardProfile, SimConfig, SimRng};

fn scenario(target: (f64, f64), drafter: (f64, f64), p: f64) -> Scenario {
    Scenario {
        target: ForwardProfile::new(target.0, target.1).unwrap(),
        drafter: ForwardProfile::new(drafter.0, drafter.1).unwrap(),
        acceptance: AcceptanceModel::new(p).unwrap(),
    }
}

#[test]
fn nonsi_matches_closed_form_on_random_configs() {
    let mut rng = SimRng::from_seed(11);
    for _ in 0..1000 {
        let tpot = rng.range_f64(0.01, 500.0);
        let ttft = tpot * rng.range_f64(1.0, 10.0);
        let n = rng.range_usize(1, 2000);
        let target = ForwardProfile::new(ttft, tpot).unwrap();
        let sim = simulate_nonsi(&target, n, &mut rng.clone());
        let want = nonsi_latency(&target, n).total_ms;
        assert_relative_eq!(sim.total_latency_ms, want, max_relative = 1e-6);
        assert_eq!(sim.target_forwards, n);
    }
}

#[test]
fn si_edge_rates_are_deterministic() {
    let s = scenario((3.0, 1.0), (0.5, 0.1), 1.0);
    let cfg = SimConfig::new(100, 4, 1, 0, 1).unwrap();
    let all = simulate_si(&s.target, &s.drafter, &cfg, &s.acceptance, &mut SimRng::from_seed(1));
    // 20 iterations of 4 drafts and one check, plus both prefills.
    assert_relative_eq!(all.total_latency_ms, 20.0 * 1.4 + 2.0 + 0.4, max_relative = 1e-9);
    let none = scenario((3.0, 1.0), (0.5, 0.1), 0.0);
    let zero = simulate_si(&none.target, &none.drafter, &cfg, &none.acceptance, &mut SimRng::from_seed(1));
    assert_eq!(zero.target_forwards, 100);
    assert_eq!(zero.drafter_forwards, 400);
}

#[test]
fn si_mean_tracks_expected_latency() {
    let s = scenario((1.0, 1.0), (0.2, 0.2), 0.6);
    let cfg = SimConfig::new(200, 3, 1, 5, 400).unwrap();
    let mc = run_repeats(Algorithm::Si, &s, &cfg, &repeat_seeds(5, 400));
    let want = si_expected_latency(&s.target, &s.drafter, 3, &s.acceptance, 200).total_ms;
    assert_relative_eq!(mc.mean_ms, want, max_relative = 0.03);
}

#[test]
fn dsi_never_loses_in_its_regime() {
    let mut rng = SimRng::from_seed(99);
    for _ in 0..300 {
        let t = rng.range_f64(1.0, 20.0);
        let d = t * rng.range_f64(0.02, 1.0);
        let p = rng.uniform();
        let k = min_lookahead(t, d, 7);
        if (k as f64) * d > t {
            continue;
        }
        let s = scenario((t, t), (d, d), p);
        let cfg = SimConfig::new(rng.range_usize(1, 80), k, 7, 0, 1).unwrap();
        assert!(required_sp(t, d, k) <= 7);
        let seed = rng.next_u64();
        let dsi = simulate_dsi(&s.target, &s.drafter, &cfg, &s.acceptance, &mut SimRng::from_seed(seed));
        let si = simulate_si(&s.target, &s.drafter, &cfg, &s.acceptance, &mut SimRng::from_seed(seed));
        let nonsi = simulate_nonsi(&s.target, cfg.n_tokens, &mut SimRng::from_seed(seed));
        let tol = 1e-6;
        assert!(dsi.total_latency_ms <= si.total_latency_ms + tol, "t={t} d={d} p={p} k={k}");
        assert!(dsi.total_latency_ms <= nonsi.total_latency_ms + tol, "t={t} d={d} p={p} k={k}");
        assert_eq!(dsi.tokens_emitted, cfg.n_tokens);
    }
}
