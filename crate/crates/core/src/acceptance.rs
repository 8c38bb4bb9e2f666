//! The geometric acceptance model.
//!
//! Draft tokens are accepted i.i.d. with probability `p`. The number of
//! consecutive acceptances before the first rejection is then geometric,
//! which gives both the sampler and the inverse map from a measured mean
//! back to `p`.

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::types::AcceptanceModel;

/// Count of consecutive successes in Bernoulli(`p`) trials, stopping at the
/// first failure or after `cap` successes. Consumes one uniform per trial,
/// so exactly `min(r + 1, cap)` draws are taken.
pub fn sample_accepted_run(model: &AcceptanceModel, cap: usize, rng: &mut SimRng) -> usize {
    let p = model.rate();
    let mut run = 0;
    while run < cap && rng.bernoulli(p) {
        run += 1;
    }
    run
}

/// `1 - 1/(1 + mean)`: the geometric parameter whose mean run length is `mean_accepted`.
pub fn acceptance_rate_from_mean(mean_accepted: f64) -> Result<f64> {
    if !(mean_accepted >= 0.0) || mean_accepted.is_infinite() {
        return Err(Error::Domain(format!(
            "mean accepted drafts must be finite and >= 0, got {mean_accepted}"
        )));
    }
    Ok(1.0 - 1.0 / (1.0 + mean_accepted))
}

/// Acceptance rate `p` in `[0, 1]` such that `sum_{j=1..cap} p^j == mean`.
///
/// Inverts [`AcceptanceModel::expected_capped_run`] by bisection; used to turn
/// "on average `a` drafts are accepted per iteration" into a rate.
pub fn rate_for_capped_mean(mean_accepted: f64, cap: usize) -> Result<f64> {
    if cap == 0 || !(0.0..=cap as f64).contains(&mean_accepted) {
        return Err(Error::Domain(format!(
            "capped mean must lie in [0, {cap}] with cap >= 1, got {mean_accepted}"
        )));
    }
    if mean_accepted == cap as f64 {
        return Ok(1.0);
    }
    let f = |p: f64| AcceptanceModel::new(p).map(|m| m.expected_capped_run(cap)).unwrap_or(f64::NAN);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < mean_accepted {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Per-position accept/reject outcomes of one run.
///
/// Outcome `i` is the i-th Bernoulli draw of the run's stream, so position
/// `i` (1-based) decides identically for every algorithm that checks it.
/// This is how SI and DSI runs with the same seed are coupled.
#[derive(Debug, Clone)]
pub struct AcceptanceTape {
    rate: f64,
    rng: SimRng,
    outcomes: Vec<bool>,
}

impl AcceptanceTape {
    pub fn new(model: &AcceptanceModel, rng: SimRng) -> Self {
        AcceptanceTape {
            rate: model.rate(),
            rng,
            outcomes: Vec::new(),
        }
    }

    pub fn from_seed(model: &AcceptanceModel, seed: u64) -> Self {
        Self::new(model, SimRng::from_seed(seed))
    }

    /// Whether the draft at 1-based `position` is accepted.
    pub fn accepts(&mut self, position: usize) -> bool {
        assert!(position >= 1, "positions are 1-based");
        while self.outcomes.len() < position {
            let o = self.rng.bernoulli(self.rate);
            self.outcomes.push(o);
        }
        self.outcomes[position - 1]
    }

    /// Consecutive accepted drafts starting at `start`, at most `cap`.
    pub fn run_from(&mut self, start: usize, cap: usize) -> usize {
        (0..cap).take_while(|&i| self.accepts(start + i)).count()
    }

    /// Outcomes materialized so far, in position order.
    pub fn observed(&self) -> &[bool] {
        &self.outcomes
    }

    /// The underlying stream, advanced past every materialized outcome.
    pub fn into_rng(self) -> SimRng {
        self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model(p: f64) -> AcceptanceModel {
        AcceptanceModel::new(p).unwrap()
    }

    #[test]
    fn degenerate_rates() {
        let mut rng = SimRng::from_seed(1);
        for _ in 0..100 {
            assert_eq!(sample_accepted_run(&model(0.0), 5, &mut rng), 0);
            assert_eq!(sample_accepted_run(&model(1.0), 5, &mut rng), 5);
        }
        assert_eq!(sample_accepted_run(&model(0.7), 0, &mut rng), 0);
    }

    #[test]
    fn rate_from_mean_values() {
        assert_eq!(acceptance_rate_from_mean(0.0).unwrap(), 0.0);
        assert_eq!(acceptance_rate_from_mean(1.0).unwrap(), 0.5);
        assert!(acceptance_rate_from_mean(-0.1).is_err());
        assert!(acceptance_rate_from_mean(f64::NAN).is_err());
    }

    #[test]
    fn inverse_of_geometric_mean() {
        for i in 0..100 {
            let p = i as f64 / 100.0;
            let mean = p / (1.0 - p);
            assert_abs_diff_eq!(acceptance_rate_from_mean(mean).unwrap(), p, epsilon = 1e-12);
        }
    }

    #[test]
    fn capped_mean_inversion() {
        let p = rate_for_capped_mean(1.5, 5).unwrap();
        assert_abs_diff_eq!(model(p).expected_capped_run(5), 1.5, epsilon = 1e-12);
        assert_eq!(rate_for_capped_mean(5.0, 5).unwrap(), 1.0);
        assert!(rate_for_capped_mean(5.5, 5).is_err());
    }

    #[test]
    fn tape_is_position_indexed() {
        let m = model(0.5);
        let mut a = AcceptanceTape::from_seed(&m, 9);
        let mut b = AcceptanceTape::from_seed(&m, 9);
        // Different query orders, same outcomes.
        let fwd: Vec<bool> = (1..=20).map(|i| a.accepts(i)).collect();
        let _ = b.accepts(20);
        let bwd: Vec<bool> = (1..=20).rev().map(|i| b.accepts(i)).collect();
        assert_eq!(fwd, bwd.into_iter().rev().collect::<Vec<_>>());
    }

    #[test]
    fn tape_matches_sequential_sampler_on_same_stream() {
        let m = model(0.6);
        let mut tape = AcceptanceTape::from_seed(&m, 3);
        let mut rng = SimRng::from_seed(3);
        // Each rejection ends a run; the next run starts at the following position.
        let mut pos = 1;
        for _ in 0..200 {
            let r = sample_accepted_run(&m, usize::MAX, &mut rng);
            assert_eq!(tape.run_from(pos, usize::MAX), r);
            pos += r + 1;
        }
    }
}
