//! Precision, recall and F1 over pooled (micro-averaged) counts.

use std::ops::{Add, AddAssign};

use num_traits::Float;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Counts { tp, fp, fn_ }
    }

    pub fn scores<T: Float>(&self) -> Scores<T> {
        Scores::from_counts(*self)
    }
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, rhs: Counts) -> Counts {
        Counts::new(self.tp + rhs.tp, self.fp + rhs.fp, self.fn_ + rhs.fn_)
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, rhs: Counts) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), Add::add)
    }
}

/// Ratios in `[0, 1]`. A ratio whose denominator is zero is reported as 0
/// and flagged in `zero_division`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub zero_division: bool,
}

fn ratio<T: Float>(num: u64, den: u64) -> (T, bool) {
    if den == 0 {
        (T::zero(), true)
    } else {
        (
            T::from(num).expect("count fits float") / T::from(den).expect("count fits float"),
            false,
        )
    }
}

/// Harmonic mean of precision and recall; `None` when both are zero.
pub fn f1_score<T: Float>(precision: T, recall: T) -> Option<T> {
    let sum = precision + recall;
    if sum == T::zero() {
        None
    } else {
        let two = T::one() + T::one();
        Some(two * precision * recall / sum)
    }
}

impl<T: Float> Scores<T> {
    pub fn from_counts(c: Counts) -> Self {
        let (precision, p_zero) = ratio::<T>(c.tp, c.tp + c.fp);
        let (recall, r_zero) = ratio::<T>(c.tp, c.tp + c.fn_);
        let (f1, f_zero) = match f1_score(precision, recall) {
            Some(f) => (f, false),
            None => (T::zero(), true),
        };
        Scores {
            precision,
            recall,
            f1,
            zero_division: p_zero || r_zero || f_zero,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let s: Scores<f64> = Counts::new(2, 1, 1).scores();
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!(!s.zero_division);

        let s32: Scores<f32> = Counts::new(2, 1, 1).scores();
        assert!((s32.f1 - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn zero_denominators_flagged() {
        let s: Scores<f64> = Counts::default().scores();
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
        assert!(s.zero_division);
        let only_fp: Scores<f64> = Counts::new(0, 3, 0).scores();
        assert_eq!(only_fp.precision, 0.0);
        assert!(only_fp.zero_division);
    }

    #[test]
    fn f1_from_published_ratios() {
        let f = f1_score(0.872_f64, 0.891).unwrap();
        assert!((f * 100.0 - 88.2).abs() <= 0.15, "{f}");
        let f = f1_score(0.938_f64, 0.833).unwrap();
        assert!((f * 100.0 - 88.2).abs() <= 0.15, "{f}");
    }

    #[test]
    fn counts_sum() {
        let total: Counts = [Counts::new(1, 0, 2), Counts::new(3, 1, 0)].into_iter().sum();
        assert_eq!(total, Counts::new(4, 1, 2));
    }
}
