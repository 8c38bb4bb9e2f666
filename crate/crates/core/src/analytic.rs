//! Closed-form latency formulas and the lookahead / SP planner.

use serde::Serialize;

use crate::types::{AcceptanceModel, ForwardProfile};

/// Expected latency and forward counts of one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyEstimate {
    pub total_ms: f64,
    pub target_forwards: f64,
    pub drafter_forwards: f64,
}

/// Plain autoregressive generation: one target forward per token, TTFT on the first.
pub fn nonsi_latency(target: &ForwardProfile, n_tokens: usize) -> LatencyEstimate {
    assert!(n_tokens >= 1, "n_tokens must be >= 1");
    LatencyEstimate {
        total_ms: target.ttft_ms + (n_tokens - 1) as f64 * target.tpot_ms,
        target_forwards: n_tokens as f64,
        drafter_forwards: 0.0,
    }
}

/// Expected SI latency when each iteration accepts `rate`-distributed drafts,
/// capped at `lookahead`.
pub fn si_expected_latency(
    target: &ForwardProfile,
    drafter: &ForwardProfile,
    lookahead: usize,
    rate: &AcceptanceModel,
    n_tokens: usize,
) -> LatencyEstimate {
    let mean = rate.expected_capped_run(lookahead);
    si_latency_for_mean_accepted(target, drafter, lookahead, mean, n_tokens)
}

/// SI latency given the mean number of accepted drafts per iteration directly.
///
/// Iterations are `ceil(N / (mean + 1))`, each costing `lookahead` drafter
/// forwards and one target forward. The first forward of each model is
/// charged at its TTFT instead of its TPOT.
pub fn si_latency_for_mean_accepted(
    target: &ForwardProfile,
    drafter: &ForwardProfile,
    lookahead: usize,
    mean_accepted: f64,
    n_tokens: usize,
) -> LatencyEstimate {
    assert!(n_tokens >= 1 && lookahead >= 1);
    let iterations = (n_tokens as f64 / (mean_accepted + 1.0)).ceil();
    let drafter_forwards = iterations * lookahead as f64;
    let per_iteration = lookahead as f64 * drafter.tpot_ms + target.tpot_ms;
    let prefill = (drafter.ttft_ms - drafter.tpot_ms) + (target.ttft_ms - target.tpot_ms);
    LatencyEstimate {
        total_ms: iterations * per_iteration + prefill,
        target_forwards: iterations,
        drafter_forwards,
    }
}

/// Upper bound on expected DSI latency with one drafter and lookahead 1:
/// `t1*p*(N-1) + t2*((1-p)*(N-1) + 1)`.
pub fn dsi_latency_upper_bound(drafter_tpot: f64, target_tpot: f64, rate: f64, n_tokens: usize) -> f64 {
    let tail = (n_tokens - 1) as f64;
    drafter_tpot * rate * tail + target_tpot * ((1.0 - rate) * tail + 1.0)
}

/// Number of target servers a lookahead keeps busy: `ceil(target / (lookahead * drafter))`.
pub fn required_sp(target_tpot: f64, drafter_tpot: f64, lookahead: usize) -> usize {
    let ratio = target_tpot / (lookahead as f64 * drafter_tpot);
    ceil_ratio(ratio)
}

/// Whether verification tasks never wait for a server at this SP degree.
pub fn lookahead_feasible(target_tpot: f64, drafter_tpot: f64, lookahead: usize, sp_degree: usize) -> bool {
    lookahead >= 1 && required_sp(target_tpot, drafter_tpot, lookahead) <= sp_degree
}

/// Smallest lookahead satisfying `ceil(target / (k * drafter)) <= sp_degree`.
pub fn min_lookahead(target_tpot: f64, drafter_tpot: f64, sp_degree: usize) -> usize {
    assert!(sp_degree >= 1);
    let mut k = ceil_ratio(target_tpot / (sp_degree as f64 * drafter_tpot)).max(1);
    // The closed form can land one off when the ratio is a float hair above an integer.
    while k > 1 && lookahead_feasible(target_tpot, drafter_tpot, k - 1, sp_degree) {
        k -= 1;
    }
    while !lookahead_feasible(target_tpot, drafter_tpot, k, sp_degree) {
        k += 1;
    }
    k
}

/// SP degree beyond which extra target servers sit idle: `ceil(target / drafter)`.
pub fn max_useful_sp(target_tpot: f64, drafter_tpot: f64) -> usize {
    ceil_ratio(target_tpot / drafter_tpot).max(1)
}

/// One drafter server plus the SP degree the lookahead requires.
pub fn required_processors(target_tpot: f64, drafter_tpot: f64, lookahead: usize) -> usize {
    1 + required_sp(target_tpot, drafter_tpot, lookahead)
}

/// `ceil` that forgives representation error: 20.000000000000004 counts as 20.
fn ceil_ratio(ratio: f64) -> usize {
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uni(ms: f64) -> ForwardProfile {
        ForwardProfile::uniform(ms).unwrap()
    }

    #[test]
    fn nonsi_examples() {
        assert_eq!(nonsi_latency(&uni(30.0), 100).total_ms, 3000.0);
        assert_eq!(nonsi_latency(&ForwardProfile::new(50.0, 30.0).unwrap(), 1).total_ms, 50.0);
        assert_relative_eq!(
            nonsi_latency(&ForwardProfile::new(100.0, 20.6).unwrap(), 50).total_ms,
            1109.4,
            max_relative = 1e-12
        );
    }

    #[test]
    fn si_worked_example() {
        let est = si_latency_for_mean_accepted(&uni(30.0), &uni(6.0), 5, 1.5, 100);
        assert_eq!(est.target_forwards, 40.0);
        assert_eq!(est.drafter_forwards, 200.0);
        assert_eq!(est.total_ms, 2400.0);
    }

    #[test]
    fn si_no_acceptance_is_one_token_per_iteration() {
        let p0 = AcceptanceModel::new(0.0).unwrap();
        let est = si_expected_latency(&uni(10.0), &uni(1.0), 1, &p0, 10);
        assert_eq!(est.total_ms, 110.0);
        // SI's worst case exceeds non-SI by exactly one drafter forward per token.
        assert_eq!(est.total_ms - nonsi_latency(&uni(10.0), 10).total_ms, 10.0 * 1.0);
    }

    #[test]
    fn bound_examples() {
        assert_eq!(dsi_latency_upper_bound(2.0, 10.0, 0.0, 7), 70.0);
        assert_eq!(dsi_latency_upper_bound(2.0, 10.0, 1.0, 7), 2.0 * 6.0 + 10.0);
        // 2.5*0.63*49 + 37.7*(0.37*49 + 1) = 77.175 + 721.201
        assert_relative_eq!(dsi_latency_upper_bound(2.5, 37.7, 0.63, 50), 798.376, max_relative = 1e-12);
    }

    #[test]
    fn bound_is_decreasing_in_rate_and_linear_in_n() {
        let mut prev = f64::INFINITY;
        for i in 0..=20 {
            let b = dsi_latency_upper_bound(3.0, 11.0, i as f64 / 20.0, 40);
            assert!(b <= prev);
            prev = b;
        }
        let f = |n| dsi_latency_upper_bound(3.0, 11.0, 0.4, n);
        assert_relative_eq!(f(30) - f(20), f(20) - f(10), max_relative = 1e-12);
    }

    #[test]
    fn planner_examples() {
        assert_eq!(min_lookahead(1.0, 0.05, 4), 5);
        assert_eq!(min_lookahead(20.6, 6.8, 7), 1);
        assert_eq!(min_lookahead(1.0, 0.05, 3), 7);
        assert_eq!(max_useful_sp(1.0, 0.05), 20);
        assert_eq!(max_useful_sp(7.0, 7.0), 1);
        assert_eq!(max_useful_sp(20.6, 6.8), 4);
        assert_eq!(required_processors(1.0, 0.05, 5), 5);
        assert_eq!(required_processors(4.0, 4.0, 1), 2);
        assert_eq!(required_processors(30.0, 3.0, 2), 6);
    }

    #[test]
    fn min_lookahead_is_tight() {
        for t in [1.0, 3.3, 20.6, 52.4] {
            for d in [0.01, 0.05, 0.33, 1.0, 2.5] {
                for sp in 1..=9 {
                    let k = min_lookahead(t, d, sp);
                    assert!(lookahead_feasible(t, d, k, sp));
                    assert!(k == 1 || !lookahead_feasible(t, d, k - 1, sp));
                }
            }
        }
    }
}
