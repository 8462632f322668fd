//! Bracketed bisection on sign predicates.

use crate::error::{Error, Result};

/// Locates the transition of a monotone predicate between `inside` (where it
/// holds) and `outside` (where it fails), to within `tol`.
///
/// Returns the last point known to satisfy the predicate.
pub fn bisect_transition<P>(mut pred: P, inside: f64, outside: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    P: FnMut(f64) -> Result<bool>,
{
    let (mut a, mut b) = (inside, outside);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            return Ok(a);
        }
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            return Ok(a);
        }
        if pred(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        lo: a.min(b),
        hi: a.max(b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two_from_either_side() {
        let x = bisect_transition(|x| Ok(x * x < 2.0), 0.0, 2.0, 1e-12, 200).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-12);
        let y = bisect_transition(|x| Ok(x * x > 2.0), 2.0, 0.0, 1e-12, 200).unwrap();
        assert!((y - 2f64.sqrt()).abs() < 1e-12);
        assert!(y * y > 2.0);
    }

    #[test]
    fn iteration_cap() {
        let err = bisect_transition(|x| Ok(x < 0.3), 0.0, 1.0, 1e-15, 5).unwrap_err();
        assert!(matches!(err, Error::Convergence { iterations: 5, .. }));
    }

    #[test]
    fn predicate_errors_propagate() {
        let err = bisect_transition(|_| Err(Error::Resolution("x".into())), 0.0, 1.0, 1e-9, 50);
        assert!(err.is_err());
    }
}
