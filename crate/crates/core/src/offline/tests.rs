use super::*;
use crate::analytic::{dsi_latency_upper_bound, lookahead_feasible, max_useful_sp, min_lookahead, nonsi_latency};
use proptest::prelude::*;

fn uni(ms: f64) -> ForwardProfile {
    ForwardProfile::uniform(ms).unwrap()
}

fn rate(p: f64) -> AcceptanceModel {
    AcceptanceModel::new(p).unwrap()
}

fn cfg(n: usize, k: usize, sp: usize) -> SimConfig {
    SimConfig::new(n, k, sp, 0, 1).unwrap()
}

fn si(t: &ForwardProfile, d: &ForwardProfile, c: &SimConfig, p: f64, seed: u64) -> SimResult {
    simulate_si(t, d, c, &rate(p), &mut SimRng::from_seed(seed))
}

fn dsi(t: &ForwardProfile, d: &ForwardProfile, c: &SimConfig, p: f64, seed: u64) -> SimResult {
    simulate_dsi(t, d, c, &rate(p), &mut SimRng::from_seed(seed))
}

/// Straight transcription of the SI cost loop, with acceptance outcomes
/// pre-drawn per position from the same stream.
fn si_oracle(t: &ForwardProfile, d: &ForwardProfile, n: usize, k: usize, p: f64, seed: u64) -> f64 {
    let mut rng = SimRng::from_seed(seed);
    let outcomes: Vec<bool> = (0..n + k + 1).map(|_| rng.bernoulli(p)).collect();
    let (mut toks, mut cost, mut first) = (0usize, 0.0f64, true);
    while toks < n {
        let accepted = (0..k).take_while(|i| outcomes[toks + i]).count();
        toks += accepted + 1;
        cost += if first {
            d.ttft_ms + (k - 1) as f64 * d.tpot_ms + t.ttft_ms
        } else {
            k as f64 * d.tpot_ms + t.tpot_ms
        };
        first = false;
    }
    cost
}

#[test]
fn nonsi_matches_closed_form() {
    let mut r = SimRng::from_seed(11);
    for _ in 0..1000 {
        let tpot = r.range_f64(0.1, 100.0);
        let t = ForwardProfile::new(tpot * r.range_f64(1.0, 6.0), tpot).unwrap();
        let n = r.range_usize(1, 300);
        let got = simulate_nonsi(&t, n, &mut r.clone());
        assert!((got.total_latency_ms - nonsi_latency(&t, n).total_ms).abs() <= 1e-6);
        assert_eq!(got.tokens_emitted, n);
        assert_eq!(got.trace.iter().filter(|e| e.kind == EventKind::TokenEmitted).count(), n);
    }
    let one = simulate_nonsi(&uni(7.0), 1, &mut SimRng::from_seed(0));
    assert_eq!(one.total_latency_ms, 7.0);
    assert_eq!(one.trace.len(), 1);
    assert_eq!(simulate_nonsi(&uni(30.0), 100, &mut SimRng::from_seed(0)).total_latency_ms, 3000.0);
}

#[test]
fn si_hand_traced_examples() {
    // Six tokens per iteration at full acceptance: 17 iterations of 5*6 + 30.
    let r = si(&uni(30.0), &uni(6.0), &cfg(100, 5, 1), 1.0, 3);
    assert_eq!(r.total_latency_ms, 1020.0);
    assert_eq!(r.target_forwards, 17);
    assert_eq!(r.drafter_forwards, 85);
    assert_eq!(r.tokens_emitted, 100);

    let r = si(&uni(10.0), &uni(1.0), &cfg(3, 1, 1), 0.0, 3);
    assert_eq!(r.total_latency_ms, 33.0);
}

#[test]
fn si_matches_pseudocode_oracle() {
    let mut r = SimRng::from_seed(5);
    for seed in 0..500 {
        let tp = r.range_f64(1.0, 60.0);
        let t = ForwardProfile::new(tp * r.range_f64(1.0, 3.0), tp).unwrap();
        let dp = tp * r.range_f64(0.01, 1.0);
        let d = ForwardProfile::new(dp * r.range_f64(1.0, 3.0), dp).unwrap();
        let n = r.range_usize(1, 150);
        let k = r.range_usize(1, 12);
        let p = r.uniform();
        let got = si(&t, &d, &cfg(n, k, 1), p, seed).total_latency_ms;
        let want = si_oracle(&t, &d, n, k, p, seed);
        assert!((got - want).abs() <= 1e-6 * want, "seed {seed}: {got} vs {want}");
    }
}

#[test]
fn dsi_full_acceptance_lookahead_one() {
    // Drafts 1..N-1 back to back; the verification of draft N-1 yields token N.
    for n in [1usize, 2, 10, 50] {
        let r = dsi(&uni(10.0), &uni(2.0), &cfg(n, 1, 5), 1.0, 1);
        let want = 2.0 * (n - 1) as f64 + 10.0;
        assert_eq!(r.total_latency_ms, want);
        assert_eq!(r.total_latency_ms, dsi_latency_upper_bound(2.0, 10.0, 1.0, n));
        assert_eq!(r.hidden_target_forwards, n - 1);
    }
}

#[test]
fn dsi_without_acceptance_equals_nonsi() {
    for k in 1..=6 {
        for n in [1usize, 7, 40] {
            let r = dsi(&uni(10.0), &uni(1.5), &cfg(n, k, 7), 0.0, 2);
            assert_eq!(r.total, Ticks::from_ms(10.0) * n as u64, "k={k} n={n}");
            assert_eq!(r.hidden_target_forwards, 0);
        }
    }
    let t = ForwardProfile::new(25.0, 10.0).unwrap();
    let r = dsi(&t, &uni(1.0), &cfg(9, 1, 10), 0.0, 0);
    assert_eq!(r.total_latency_ms, nonsi_latency(&t, 9).total_ms);
}

#[test]
fn dsi_mean_respects_closed_form_bound() {
    let (t1, t2, p, n) = (2.5, 37.7, 0.63, 50);
    let c = cfg(n, 1, max_useful_sp(t2, t1));
    let lat: Vec<f64> = (0..10_000).map(|s| dsi(&uni(t2), &uni(t1), &c, p, s).total_latency_ms).collect();
    let (mean, std) = mean_std(&lat);
    let bound = dsi_latency_upper_bound(t1, t2, p, n);
    assert!(mean <= bound + 3.0 * std / (lat.len() as f64).sqrt(), "{mean} vs {bound}");
    // With uniform profiles and lookahead 1 the bound is the exact expectation.
    assert!((mean - bound).abs() <= 4.0 * std / (lat.len() as f64).sqrt());
}

#[test]
fn dsi_trace_is_well_formed() {
    let r = dsi(&uni(9.0), &uni(1.0), &cfg(60, 3, 3), 0.7, 8);
    let emitted: Vec<usize> = r
        .trace
        .iter()
        .filter(|e| e.kind == EventKind::TokenEmitted)
        .map(|e| e.position)
        .collect();
    assert_eq!(emitted, (1..=60).collect::<Vec<_>>());
    assert_eq!(r.trace.last().unwrap().time_ms, r.total_latency_ms);
    let rejections = r.checks.iter().filter(|c| !c.1).count();
    assert_eq!(r.trace.iter().filter(|e| e.kind == EventKind::Reject).count(), rejections);
    assert!(r.trace.windows(2).all(|w| w[0].time_ms <= w[1].time_ms));
}

#[test]
fn coupled_runs_see_identical_outcomes() {
    let (t, d) = (uni(10.0), uni(1.0));
    for seed in 0..200 {
        let c = cfg(80, 4, 3);
        let a = si(&t, &d, &c, 0.6, seed);
        let b = dsi(&t, &d, &c, 0.6, seed);
        let mut tape = AcceptanceTape::from_seed(&rate(0.6), seed);
        for &(pos, ok) in a.checks.iter().chain(&b.checks) {
            assert_eq!(tape.accepts(pos), ok, "seed {seed} position {pos}");
        }
    }
}

#[test]
fn slow_drafter_with_long_lookahead_can_trail_nonsi() {
    // Outside the regime lookahead * drafter <= target, a rejection right
    // after an accepted first token costs a whole block of drafting.
    let (t, d) = (uni(10.0), uni(4.0));
    let c = cfg(30, 4, 7);
    let nonsi = nonsi_latency(&t, 30).total_ms;
    let worst = (0..2000).map(|s| dsi(&t, &d, &c, 0.5, s).total_latency_ms).fold(0.0, f64::max);
    assert!(worst > nonsi);
}

#[test]
fn repeats_aggregate() {
    let sc = Scenario {
        target: uni(10.0),
        drafter: uni(1.0),
        acceptance: rate(0.8),
    };
    let c = SimConfig::new(40, 2, 5, 9, 5).unwrap();
    let seeds = config_seeds(&c);
    let one = run_repeats(Algorithm::Dsi, &sc, &c, &seeds[..1]);
    assert_eq!(one.mean_ms, one.per_seed[0].latency_ms);
    assert_eq!(one.std_ms, 0.0);
    let five = run_repeats(Algorithm::Dsi, &sc, &c, &seeds);
    let lo = five.per_seed.iter().map(|s| s.latency_ms).fold(f64::INFINITY, f64::min);
    let hi = five.per_seed.iter().map(|s| s.latency_ms).fold(0.0, f64::max);
    assert!(lo <= five.mean_ms && five.mean_ms <= hi);
    let again = run_repeats(Algorithm::Dsi, &sc, &c, &seeds);
    assert_eq!(five.mean_ms, again.mean_ms);
}

#[test]
fn simulators_advance_the_rng_deterministically() {
    let (t, d, c) = (uni(10.0), uni(1.0), cfg(30, 2, 5));
    let mut a = SimRng::from_seed(4);
    let mut b = SimRng::from_seed(4);
    simulate_dsi(&t, &d, &c, &rate(0.5), &mut a);
    simulate_dsi(&t, &d, &c, &rate(0.5), &mut b);
    assert_eq!(a.next_u64(), b.next_u64());
}

fn regime() -> impl Strategy<Value = (ForwardProfile, ForwardProfile, SimConfig, f64, u64)> {
    (
        1.0f64..50.0,
        0.01f64..1.0,
        1.0f64..5.0,
        0.0f64..1.0,
        0.0f64..=1.0,
        1usize..150,
        1usize..8,
        any::<u64>(),
    )
        .prop_map(|(t2, frac, t_ratio, d_share, p, n, sp, seed)| {
            let t1 = t2 * frac;
            let target = ForwardProfile::new(t2 * t_ratio, t2).unwrap();
            // Drafter prefill overhead never exceeds the target's.
            let drafter = ForwardProfile::new(t1 + d_share * (target.ttft_ms - t2), t1).unwrap();
            let k_max = ((t2 / t1).floor() as usize).clamp(1, 32);
            let k = min_lookahead(t2, t1, sp).min(k_max);
            let sp = sp.max(crate::analytic::required_sp(t2, t1, k));
            (target, drafter, SimConfig::new(n, k, sp, seed, 1).unwrap(), p, seed)
        })
}

proptest! {
    #[test]
    fn dsi_never_slower_than_nonsi((t, d, c, p, seed) in regime()) {
        let r = dsi(&t, &d, &c, p, seed);
        let base = simulate_nonsi(&t, c.n_tokens, &mut SimRng::from_seed(seed));
        prop_assert!(r.total <= base.total, "{} > {}", r.total_latency_ms, base.total_latency_ms);
    }

    #[test]
    fn dsi_never_slower_than_si_at_same_lookahead((t, d, c, p, seed) in regime()) {
        prop_assume!(lookahead_feasible(t.tpot_ms, d.tpot_ms, c.lookahead, c.sp_degree));
        let a = dsi(&t, &d, &c, p, seed);
        let b = si(&t, &d, &c, p, seed);
        prop_assert!(a.total <= b.total, "{} > {}", a.total_latency_ms, b.total_latency_ms);
    }

    #[test]
    fn dsi_accounting_invariants(
        t2 in 1.0f64..40.0, frac in 0.01f64..1.0, p in 0.0f64..=1.0,
        n in 1usize..120, k in 1usize..10, sp in 1usize..9, seed in any::<u64>()
    ) {
        let (t, d) = (uni(t2), uni(t2 * frac));
        let r = dsi(&t, &d, &cfg(n, k, sp), p, seed);
        prop_assert_eq!(r.tokens_emitted, n);
        prop_assert!(r.hidden_target_forwards <= r.target_forwards);
        prop_assert!(r.peak_sp_in_use <= sp);
        let accepted = r.checks.iter().filter(|c| c.1).count();
        prop_assert!(accepted < n);
        if lookahead_feasible(t2, t2 * frac, k, sp) {
            prop_assert_eq!(r.queued_dispatches, 0);
        }
    }

    #[test]
    fn si_accounting_invariants(p in 0.0f64..=1.0, n in 1usize..120, k in 1usize..10, seed in any::<u64>()) {
        let r = si(&uni(10.0), &uni(1.0), &cfg(n, k, 1), p, seed);
        prop_assert_eq!(r.tokens_emitted, n);
        prop_assert_eq!(r.drafter_forwards, k * r.target_forwards);
    }
}
