//! Intervals of the extended real line.
//!
//! An [`Interval`] with `lo < hi` is open: membership excludes both endpoints.
//! An interval with `lo == hi` is the degenerate singleton `{lo}`; the solver
//! uses these to seed negative point masses of a representing measure.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() {
            return Err(Error::InvalidParameter("interval endpoint is NaN".into()));
        }
        if lo > hi || (lo == hi && !lo.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "interval endpoints out of order: ({lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// The singleton `{p}`.
    pub fn point(p: f64) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::InvalidParameter(format!("singleton at {p}")));
        }
        Ok(Self { lo: p, hi: p })
    }

    pub fn real_line() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Open-interval membership; for a singleton, equality with the point.
    pub fn contains(&self, x: f64) -> bool {
        if self.is_point() {
            x == self.lo
        } else {
            self.lo < x && x < self.hi
        }
    }

    /// Membership in the closure `[lo, hi]`.
    pub fn contains_closed(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// True when the two intervals overlap or are separated by at most `gap_tol`.
    pub fn touches(&self, other: &Interval, gap_tol: f64) -> bool {
        let gap = self.lo.max(other.lo) - self.hi.min(other.hi);
        gap <= gap_tol
    }

    /// Intersection, or `None` when it is empty (or a single shared endpoint).
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Interval { lo, hi })
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// `n` equally spaced points covering the closure (requires a bounded interval).
    pub fn linspace(&self, n: usize) -> Vec<f64> {
        debug_assert!(self.is_bounded());
        match n {
            0 => Vec::new(),
            1 => vec![self.midpoint()],
            _ => {
                let step = self.width() / (n - 1) as f64;
                (0..n)
                    .map(|i| if i == n - 1 { self.hi } else { self.lo + step * i as f64 })
                    .collect()
            }
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_point() {
            write!(f, "{{{}}}", self.lo)
        } else {
            write!(f, "({}, {})", self.lo, self.hi)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_semantics() {
        let i = Interval::new(0.0, 1.0).unwrap();
        assert!(!i.contains(0.0));
        assert!(!i.contains(1.0));
        assert!(i.contains(0.5));
        assert!(i.contains_closed(1.0));
    }

    #[test]
    fn singleton() {
        let p = Interval::point(2.0).unwrap();
        assert!(p.is_point());
        assert!(p.contains(2.0));
        assert!(!p.contains(2.0 + 1e-12));
        assert!(Interval::point(f64::INFINITY).is_err());
    }

    #[test]
    fn rejects_reversed() {
        assert!(Interval::new(1.0, 0.0).is_err());
        assert!(Interval::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn touching_respects_gap_tolerance() {
        let a = Interval::new(0.0, 1.0).unwrap();
        let b = Interval::new(1.0 + 1e-9, 2.0).unwrap();
        let c = Interval::new(1.1, 2.0).unwrap();
        assert!(a.touches(&b, 1e-7));
        assert!(!a.touches(&c, 1e-7));
        assert!(a.intersect(&c).is_none());
    }

    #[test]
    fn linspace_hits_both_ends() {
        let g = Interval::new(-1.0, 1.0).unwrap().linspace(5);
        assert_eq!(g, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }
}
