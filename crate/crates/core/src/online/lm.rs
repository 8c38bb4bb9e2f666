use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::mix64;
use crate::types::{ForwardProfile, TokenId};

/// Token ids stay below this bound; draft disagreements flip the lowest bit.
pub const VOCAB_SIZE: u32 = 32_768;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Behavior {
    /// Next token is a seeded hash of the whole prefix.
    Target { seed: u64 },
    /// Emits the target's token when a per-position hash of `seed` falls below
    /// `agree_rate`, and `target_token ^ 1` otherwise.
    Drafter {
        seed: u64,
        agree_rate: f64,
        target_seed: u64,
    },
}

/// A stand-in language model whose forwards cost a configured latency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticLM {
    /// 1-based index among the models; the last one is the target.
    pub model_index: usize,
    pub profile: ForwardProfile,
    pub behavior: Behavior,
}

fn target_token(seed: u64, prefix: &[TokenId]) -> TokenId {
    let h = prefix.iter().fold(mix64(seed), |h, &t| mix64(h ^ u64::from(t)));
    (h % u64::from(VOCAB_SIZE)) as TokenId
}

fn unit_hash(seed: u64, position: usize) -> f64 {
    (mix64(seed ^ mix64(position as u64)) >> 11) as f64 / (1u64 << 53) as f64
}

impl SyntheticLM {
    pub fn target(model_index: usize, profile: ForwardProfile, seed: u64) -> Self {
        SyntheticLM {
            model_index,
            profile,
            behavior: Behavior::Target { seed },
        }
    }

    /// A drafter approximating `target`.
    pub fn drafter(
        model_index: usize,
        profile: ForwardProfile,
        agree_rate: f64,
        seed: u64,
        target: &SyntheticLM,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&agree_rate) {
            return Err(Error::Domain(format!("agree rate must lie in [0, 1], got {agree_rate}")));
        }
        let Behavior::Target { seed: target_seed } = target.behavior else {
            return Err(Error::InvalidConfig("a drafter must approximate a target model".into()));
        };
        Ok(SyntheticLM {
            model_index,
            profile,
            behavior: Behavior::Drafter {
                seed,
                agree_rate,
                target_seed,
            },
        })
    }

    pub fn is_target(&self) -> bool {
        matches!(self.behavior, Behavior::Target { .. })
    }

    /// The token this model generates after `prefix` (prompt included).
    pub fn next_token(&self, prefix: &[TokenId]) -> TokenId {
        match self.behavior {
            Behavior::Target { seed } => target_token(seed, prefix),
            Behavior::Drafter {
                seed,
                agree_rate,
                target_seed,
            } => {
                let t = target_token(target_seed, prefix);
                if unit_hash(seed, prefix.len()) < agree_rate {
                    t
                } else {
                    t ^ 1
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prof() -> ForwardProfile {
        ForwardProfile::uniform(1.0).unwrap()
    }

    #[test]
    fn target_is_a_function_of_the_prefix() {
        let t = SyntheticLM::target(2, prof(), 7);
        assert_eq!(t.next_token(&[1, 2, 3]), t.next_token(&[1, 2, 3]));
        assert_ne!(t.next_token(&[1, 2, 3]), t.next_token(&[1, 2, 4]));
        assert!(t.next_token(&[9]) < VOCAB_SIZE);
    }

    #[test]
    fn drafter_extremes() {
        let t = SyntheticLM::target(2, prof(), 7);
        let yes = SyntheticLM::drafter(1, prof(), 1.0, 3, &t).unwrap();
        let no = SyntheticLM::drafter(1, prof(), 0.0, 3, &t).unwrap();
        for len in 1..50u32 {
            let prefix: Vec<TokenId> = (0..len).collect();
            assert_eq!(yes.next_token(&prefix), t.next_token(&prefix));
            assert_ne!(no.next_token(&prefix), t.next_token(&prefix));
        }
        assert!(SyntheticLM::drafter(1, prof(), 0.5, 3, &yes).is_err());
    }

    #[test]
    fn agreement_frequency_tracks_rate() {
        let t = SyntheticLM::target(2, prof(), 1);
        let d = SyntheticLM::drafter(1, prof(), 0.7, 5, &t).unwrap();
        let mut prefix = vec![0u32];
        let mut agree = 0;
        for _ in 0..5_000 {
            let want = t.next_token(&prefix);
            agree += usize::from(d.next_token(&prefix) == want);
            prefix.push(want);
        }
        let freq = agree as f64 / 5_000.0;
        assert!((freq - 0.7).abs() < 0.03, "{freq}");
    }
}
