//! Domain types shared by every simulator.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Picoseconds per millisecond.
const TICKS_PER_MS: f64 = 1e9;

/// Simulated time in integer picoseconds.
///
/// Latencies are quantized to one picosecond when a [`ForwardProfile`] is
/// converted, and every simulator only ever adds ticks. Sums are therefore
/// exact and independent of accumulation order, which is what lets the
/// dominance checks compare latencies with `<=` instead of a tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Ticks(pub u64);

impl Ticks {
    pub const ZERO: Ticks = Ticks(0);

    pub fn from_ms(ms: f64) -> Ticks {
        Ticks((ms * TICKS_PER_MS).round() as u64)
    }

    pub fn as_ms(self) -> f64 {
        self.0 as f64 / TICKS_PER_MS
    }
}

impl std::ops::Add for Ticks {
    type Output = Ticks;
    fn add(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for Ticks {
    fn add_assign(&mut self, rhs: Ticks) {
        self.0 += rhs.0;
    }
}

impl std::ops::Mul<u64> for Ticks {
    type Output = Ticks;
    fn mul(self, rhs: u64) -> Ticks {
        Ticks(self.0 * rhs)
    }
}

/// Forward-pass latencies of one model: time to first token and time per
/// subsequent output token, both in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardProfile {
    pub ttft_ms: f64,
    pub tpot_ms: f64,
}

impl ForwardProfile {
    pub fn new(ttft_ms: f64, tpot_ms: f64) -> Result<Self> {
        for (name, v) in [("ttft_ms", ttft_ms), ("tpot_ms", tpot_ms)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(ForwardProfile { ttft_ms, tpot_ms })
    }

    /// A profile whose first forward costs the same as every other.
    pub fn uniform(latency_ms: f64) -> Result<Self> {
        Self::new(latency_ms, latency_ms)
    }

    /// Latency of a forward, where `first` marks the model's first forward of a run.
    pub fn forward_ms(&self, first: bool) -> f64 {
        if first {
            self.ttft_ms
        } else {
            self.tpot_ms
        }
    }

    pub(crate) fn forward_ticks(&self, first: bool) -> Ticks {
        Ticks::from_ms(self.forward_ms(first))
    }

    pub fn ttft_tpot_ratio(&self) -> f64 {
        self.ttft_ms / self.tpot_ms
    }
}

impl fmt::Display for ForwardProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.ttft_ms, self.tpot_ms)
    }
}

/// Probability that a single draft token is accepted, modeled i.i.d. per token.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceModel {
    rate: f64,
}

impl AcceptanceModel {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Domain(format!("acceptance rate must lie in [0, 1], got {rate}")));
        }
        Ok(AcceptanceModel { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Expected accepted drafts in one capped run: `sum_{j=1..cap} p^j`.
    pub fn expected_capped_run(&self, cap: usize) -> f64 {
        let p = self.rate;
        if p == 1.0 {
            return cap as f64;
        }
        p * (1.0 - p.powi(cap as i32)) / (1.0 - p)
    }
}

/// Parameters of one simulated generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_tokens: usize,
    pub lookahead: usize,
    pub sp_degree: usize,
    pub seed: u64,
    pub repeats: usize,
}

impl SimConfig {
    pub fn new(n_tokens: usize, lookahead: usize, sp_degree: usize, seed: u64, repeats: usize) -> Result<Self> {
        let cfg = SimConfig {
            n_tokens,
            lookahead,
            sp_degree,
            seed,
            repeats,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_tokens", self.n_tokens),
            ("lookahead", self.lookahead),
            ("sp_degree", self.sp_degree),
            ("repeats", self.repeats),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

/// Opaque token id. Two tokens are the same token iff their ids are equal.
pub type TokenId = u32;

/// The generated sequence (the prompt is abstracted to a seed and not stored).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(pub Vec<TokenId>);

impl TokenSeq {
    pub fn new() -> Self {
        TokenSeq(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[TokenId] {
        &self.0
    }
}

impl From<Vec<TokenId>> for TokenSeq {
    fn from(v: Vec<TokenId>) -> Self {
        TokenSeq(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_rejects_nonpositive() {
        assert!(ForwardProfile::new(0.0, 1.0).is_err());
        assert!(ForwardProfile::new(1.0, -2.0).is_err());
        assert!(ForwardProfile::new(f64::NAN, 1.0).is_err());
        assert!(ForwardProfile::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn acceptance_bounds() {
        assert!(AcceptanceModel::new(-0.01).is_err());
        assert!(AcceptanceModel::new(1.01).is_err());
        assert_eq!(AcceptanceModel::new(1.0).unwrap().expected_capped_run(5), 5.0);
        assert_eq!(AcceptanceModel::new(0.0).unwrap().expected_capped_run(5), 0.0);
    }

    #[test]
    fn config_rejects_zero_fields() {
        assert!(SimConfig::new(0, 1, 1, 0, 1).is_err());
        assert!(SimConfig::new(1, 0, 1, 0, 1).is_err());
        assert!(SimConfig::new(1, 1, 0, 0, 1).is_err());
        assert!(SimConfig::new(1, 1, 1, 0, 0).is_err());
    }

    #[test]
    fn ticks_round_trip_common_latencies() {
        for ms in [30.0, 6.0, 20.6, 0.05, 37.7, 2.5] {
            assert_eq!(Ticks::from_ms(ms).as_ms(), ms);
        }
    }
}
