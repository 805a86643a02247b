//! Fixed-point settlement of rewards and reports.
//!
//! Reports are rounded to multiples of `2^-40` before they reach the player, so every
//! amount that changes hands is an integer number of ticks. Revenue, utilities and
//! realized rewards are accumulated as integers; `reward = report + kept` then holds
//! exactly for any horizon.

/// Ticks per unit of reward.
pub const TICKS_PER_UNIT: i64 = 1 << 40;

/// An amount of reward in ticks of `2^-40`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Hash)]
pub struct Ticks(pub i128);

impl Ticks {
    pub const ZERO: Ticks = Ticks(0);

    /// Nearest tick to `value`.
    pub fn from_value(value: f64) -> Self {
        Ticks((value * TICKS_PER_UNIT as f64).round() as i128)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / TICKS_PER_UNIT as f64
    }
}

impl std::ops::Add for Ticks {
    type Output = Ticks;
    fn add(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Ticks {
    type Output = Ticks;
    fn sub(self, rhs: Ticks) -> Ticks {
        Ticks(self.0 - rhs.0)
    }
}

impl std::ops::AddAssign for Ticks {
    fn add_assign(&mut self, rhs: Ticks) {
        self.0 += rhs.0;
    }
}

impl std::iter::Sum for Ticks {
    fn sum<I: Iterator<Item = Ticks>>(iter: I) -> Ticks {
        iter.fold(Ticks::ZERO, |a, b| a + b)
    }
}

/// Rounds a report onto the tick grid, returning the exact `f64` the player sees.
pub fn settle(value: f64) -> f64 {
    Ticks::from_value(value).to_f64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_are_exact() {
        assert_eq!(settle(0.0), 0.0);
        assert_eq!(settle(1.0), 1.0);
        assert_eq!(Ticks::from_value(1.0).0, TICKS_PER_UNIT as i128);
    }

    proptest! {
        #[test]
        fn settled_values_round_trip(v in 0.0f64..=1.0) {
            let s = settle(v);
            prop_assert!((s - v).abs() <= 0.5 / TICKS_PER_UNIT as f64);
            prop_assert_eq!(Ticks::from_value(s).to_f64(), s);
            prop_assert_eq!(settle(s), s);
        }
    }
}
