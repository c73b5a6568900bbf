//! Stochastic model for lane change success.
//!
//! The probability that a lane change attempted along a stretch of length
//! `ℓ` eventually succeeds is `f(ℓ) = 1 − exp(−α·ℓ)`: the CDF of an
//! exponential distribution with rate `α`. This is the unique form with
//! `f(0) = 0`, `f(∞) = 1` that is invariant to partitioning a lane into
//! cells of arbitrary lengths:
//!
//! ```text
//! f(ℓ₁ + ℓ₂) = f(ℓ₁) + (1 − f(ℓ₁))·f(ℓ₂)
//! ```
//!
//! `α` reads as the average number of successful lane changes per meter if
//! one were to constantly try to change lanes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from the lane change model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("lane change rate must be a positive finite number, got {0}")]
    NonpositiveRate(f64),
    #[error("length must be a nonnegative finite number, got {0}")]
    NegativeLength(f64),
}

/// Lane change success rate `α` (successes per meter), strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct LaneChangeRate(f64);

impl LaneChangeRate {
    pub fn new(alpha: f64) -> Result<Self, ModelError> {
        if alpha.is_finite() && alpha > 0.0 {
            Ok(Self(alpha))
        } else {
            Err(ModelError::NonpositiveRate(alpha))
        }
    }

    pub fn per_meter(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for LaneChangeRate {
    type Error = ModelError;

    fn try_from(alpha: f64) -> Result<Self, ModelError> {
        Self::new(alpha)
    }
}

impl From<LaneChangeRate> for f64 {
    fn from(rate: LaneChangeRate) -> f64 {
        rate.0
    }
}

/// Probability that a lane change across a cell of the given length (meters)
/// succeeds. Zero-length input is accepted and yields 0 even though graph
/// cells always have positive length, so the model is testable standalone.
pub fn success_prob(rate: LaneChangeRate, length: f64) -> Result<f64, ModelError> {
    if !length.is_finite() || length < 0.0 {
        return Err(ModelError::NegativeLength(length));
    }
    Ok(prob(rate.per_meter(), length))
}

/// `1 − exp(−α·ℓ)` via `exp_m1`, which keeps short cells accurate and
/// preserves the strict bound `f(ℓ) < α·ℓ` for `ℓ > 0` in floating point.
#[inline]
pub(crate) fn prob(alpha: f64, length: f64) -> f64 {
    -(-alpha * length).exp_m1()
}

/// `exp(−α·ℓ)`: the failure branch weight and the expected forced lane
/// change surcharge factor.
#[inline]
pub(crate) fn fail_prob(alpha: f64, length: f64) -> f64 {
    (-alpha * length).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rate(alpha: f64) -> LaneChangeRate {
        LaneChangeRate::new(alpha).unwrap()
    }

    #[test]
    fn zero_length_never_succeeds() {
        assert_eq!(success_prob(rate(0.01), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_at_alpha_times_length_one() {
        // f(100) with α = 0.01 is 1 − e⁻¹.
        let p = success_prob(rate(0.01), 100.0).unwrap();
        assert!((p - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((p - 0.6321206).abs() < 1e-7);
    }

    #[test]
    fn composition_of_half_lengths_matches() {
        let half = success_prob(rate(0.01), 50.0).unwrap();
        let whole = success_prob(rate(0.01), 100.0).unwrap();
        assert!((half + (1.0 - half) * half - whole).abs() <= 1e-12);
    }

    #[test]
    fn long_lengths_approach_one() {
        let p = success_prob(rate(0.01), 1e9 / 0.01).unwrap();
        assert!(p > 1.0 - 1e-9);
        assert!(p < 1.0 + 1e-15);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(LaneChangeRate::new(0.0).is_err());
        assert!(LaneChangeRate::new(-0.3).is_err());
        assert!(LaneChangeRate::new(f64::NAN).is_err());
        assert_eq!(
            success_prob(rate(0.01), -1.0),
            Err(ModelError::NegativeLength(-1.0))
        );
        assert!(success_prob(rate(0.01), f64::INFINITY).is_err());
    }

    #[test]
    fn serde_rejects_nonpositive_rate() {
        assert!(serde_json::from_str::<LaneChangeRate>("0.01").is_ok());
        assert!(serde_json::from_str::<LaneChangeRate>("-1.0").is_err());
        assert!(serde_json::from_str::<LaneChangeRate>("0.0").is_err());
    }

    proptest! {
        /// Partition invariance: splitting a stretch into two cells does not
        /// change the overall success probability.
        #[test]
        fn partition_invariant(
            alpha in 1e-4..1.0f64,
            l1 in 0.0..1e4f64,
            l2 in 0.0..1e4f64,
        ) {
            let f = |l| success_prob(rate(alpha), l).unwrap();
            let composed = f(l1) + (1.0 - f(l1)) * f(l2);
            prop_assert!((f(l1 + l2) - composed).abs() <= 1e-12);
        }

        /// The bound used by the monotonicity proof: f(ℓ) < α·ℓ for ℓ > 0.
        #[test]
        fn below_linear_bound(alpha in 1e-4..1.0f64, l in 1e-9..1e4f64) {
            prop_assert!(success_prob(rate(alpha), l).unwrap() < alpha * l);
        }

        #[test]
        fn within_unit_interval(alpha in 1e-4..1.0f64, l in 0.0..1e7f64) {
            let p = success_prob(rate(alpha), l).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
