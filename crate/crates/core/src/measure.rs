//! Signed measures with a Lebesgue density and finitely many atoms.
//!
//! Integration splits at every atom and declared breakpoint so the density is
//! smooth on each quadrature panel. Unbounded ranges are truncated once the
//! integrand has decayed below `tail_epsilon`.

use std::fmt;

use crate::diffusion::{real_fn, RealFn};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::quadrature::{integrate_adaptive, Estimate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Truncation threshold for the integrand bound on unbounded ranges.
    pub tail_epsilon: f64,
    /// Furthest distance from the finite anchor a tail search may go.
    pub tail_limit: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_subdivisions: 1 << 14,
            tail_epsilon: 1e-13,
            tail_limit: 1e3,
        }
    }
}

impl QuadratureOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.rel_tol, self.abs_tol, self.tail_epsilon, self.tail_limit];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "quadrature tolerances must be positive and finite: {self:?}"
            )));
        }
        if self.max_subdivisions < 16 {
            return Err(Error::InvalidParameter(format!(
                "max_subdivisions must be at least 16, got {}",
                self.max_subdivisions
            )));
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct MeasureSpec {
    density: Option<RealFn>,
    atoms: Vec<Atom>,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeasureSpec")
            .field("has_density", &self.density.is_some())
            .field("atoms", &self.atoms)
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl MeasureSpec {
    /// `breakpoints` lists the points where the density may fail to be smooth
    /// (or to be defined at all).
    pub fn new(density: RealFn, atoms: Vec<Atom>, breakpoints: Vec<f64>) -> Result<Self> {
        Self::build(Some(density), atoms, breakpoints)
    }

    /// A purely atomic measure.
    pub fn atomic(atoms: Vec<Atom>) -> Result<Self> {
        Self::build(None, atoms, Vec::new())
    }

    pub fn zero() -> Self {
        Self {
            density: None,
            atoms: Vec::new(),
            breakpoints: Vec::new(),
        }
    }

    fn build(density: Option<RealFn>, atoms: Vec<Atom>, mut breakpoints: Vec<f64>) -> Result<Self> {
        for pair in atoms.windows(2) {
            if !(pair[0].location < pair[1].location) {
                return Err(Error::InvalidParameter(
                    "atom locations must be strictly increasing".into(),
                ));
            }
        }
        if let Some(a) = atoms.iter().find(|a| !a.location.is_finite() || !a.mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite atom {a:?}")));
        }
        breakpoints.retain(|p| p.is_finite());
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Ok(Self {
            density,
            atoms,
            breakpoints,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn has_density(&self) -> bool {
        self.density.is_some()
    }

    pub fn density(&self, x: f64) -> f64 {
        self.density.as_ref().map_or(0.0, |d| d(x))
    }

    pub fn density_fn(&self) -> Option<RealFn> {
        self.density.clone()
    }

    pub fn without_atoms(&self) -> Self {
        Self {
            density: self.density.clone(),
            atoms: Vec::new(),
            breakpoints: self.breakpoints.clone(),
        }
    }

    /// Same density and breakpoints, different atoms.
    pub fn with_atoms(&self, atoms: Vec<Atom>) -> Result<Self> {
        Self::build(self.density.clone(), atoms, self.breakpoints.clone())
    }

    /// `∫_over f dμ` with open-interval semantics: atoms on the boundary of
    /// `over` are excluded and a singleton `over` integrates to zero.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, over: Interval, opts: &QuadratureOptions) -> Result<f64> {
        Ok(self.integrate_detailed(&f, over, &[], opts)?.value)
    }

    /// Like [`integrate`](Self::integrate) but over the closure of `over`:
    /// atoms sitting exactly on an endpoint are included.
    pub fn integrate_closed<F: Fn(f64) -> f64>(
        &self,
        f: F,
        over: Interval,
        opts: &QuadratureOptions,
    ) -> Result<Estimate> {
        let mut est = self.integrate_detailed(&f, over, &[], opts)?;
        for atom in &self.atoms {
            let on_edge = atom.location == over.lo() || atom.location == over.hi();
            if on_edge {
                let v = f(atom.location) * atom.mass;
                est.value += v;
                est.abs_value += v.abs();
            }
        }
        Ok(est)
    }

    /// Open-interval integral with error information. `extra_breaks` are
    /// additional kinks of `f` (e.g. the diagonal of the Green kernel).
    pub fn integrate_detailed<F: Fn(f64) -> f64>(
        &self,
        f: &F,
        over: Interval,
        extra_breaks: &[f64],
        opts: &QuadratureOptions,
    ) -> Result<Estimate> {
        if over.is_point() {
            return Ok(Estimate::ZERO);
        }
        let mut est = Estimate::ZERO;
        for atom in self.atoms.iter().filter(|a| over.contains(a.location)) {
            let v = f(atom.location) * atom.mass;
            if !v.is_finite() {
                return Err(Error::NonFinite { x: atom.location });
            }
            est.value += v;
            est.abs_value += v.abs();
        }
        let Some(density) = &self.density else {
            return Ok(est);
        };
        let integrand = |x: f64| f(x) * density(x);

        let mut breaks: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(extra_breaks.iter())
            .copied()
            .filter(|p| p.is_finite() && over.contains(*p))
            .collect();
        breaks.sort_by(f64::total_cmp);

        // tail searches start beyond the outermost breakpoints
        let first = breaks.first().copied();
        let last = breaks.last().copied();
        let (lo, hi) = match (over.lo().is_finite(), over.hi().is_finite()) {
            (true, true) => (over.lo(), over.hi()),
            (false, true) => {
                let anchor = first.unwrap_or(over.hi()).min(over.hi());
                (self.tail(&integrand, anchor, -1.0, opts)?, over.hi())
            }
            (true, false) => {
                let anchor = last.unwrap_or(over.lo()).max(over.lo());
                (over.lo(), self.tail(&integrand, anchor, 1.0, opts)?)
            }
            (false, false) => {
                let left_anchor = first.unwrap_or(0.0);
                let right_anchor = last.unwrap_or(0.0);
                (
                    self.tail(&integrand, left_anchor, -1.0, opts)?,
                    self.tail(&integrand, right_anchor, 1.0, opts)?,
                )
            }
        };
        let quad = integrate_adaptive(
            integrand,
            lo,
            hi,
            &breaks,
            opts.rel_tol,
            opts.abs_tol,
            opts.max_subdivisions,
        )?;
        est.value += quad.value;
        est.error += quad.error;
        est.abs_value += quad.abs_value;
        Ok(est)
    }

    /// First point `anchor + dir·2^k` past which the integrand bound stays
    /// below `tail_epsilon` for two consecutive probes.
    fn tail<G: Fn(f64) -> f64>(&self, integrand: &G, anchor: f64, dir: f64, opts: &QuadratureOptions) -> Result<f64> {
        let bound = |x: f64| {
            let v = integrand(x).abs();
            let d = self.density(x).abs();
            // |f|·(1 + |density|); zero where the density vanishes
            if d > 0.0 {
                v / d * (1.0 + d)
            } else {
                v
            }
        };
        let mut step = 1.0;
        let mut previous_small = false;
        while step <= 2.0 * opts.tail_limit {
            let x = anchor + dir * step;
            let b = bound(x);
            if b.is_nan() {
                return Err(Error::NonFinite { x });
            }
            let small = b < opts.tail_epsilon;
            if small && previous_small {
                return Ok(x);
            }
            previous_small = small;
            step *= 2.0;
        }
        Err(Error::Accuracy {
            estimate: f64::NAN,
            error: f64::INFINITY,
            reason: format!(
                "integrand does not decay within {} of {anchor} (direction {dir})",
                opts.tail_limit
            ),
        })
    }
}

/// Free-function form of [`MeasureSpec::integrate`].
pub fn integrate<F: Fn(f64) -> f64>(mu: &MeasureSpec, f: F, over: Interval, opts: &QuadratureOptions) -> Result<f64> {
    mu.integrate(f, over, opts)
}

/// The hybrid measure equal to `sigma` on `d` and to its positive part
/// elsewhere: density vanishes on the negative set outside `d`, and negative
/// atoms outside the closure of `d` are dropped.
pub fn restrict_sigma(sigma: &MeasureSpec, d: Interval, negative_set: &[Interval]) -> MeasureSpec {
    let negatives: Vec<Interval> = negative_set.iter().copied().filter(|n| !n.is_point()).collect();
    let density = sigma.density.clone().map(|dens| {
        real_fn(move |x| {
            if d.contains_closed(x) {
                dens(x)
            } else if negatives.iter().any(|n| n.contains(x)) {
                0.0
            } else {
                dens(x)
            }
        })
    });
    let atoms = sigma
        .atoms
        .iter()
        .copied()
        .filter(|a| d.contains_closed(a.location) || a.mass >= 0.0)
        .collect();
    let mut breakpoints = sigma.breakpoints.clone();
    breakpoints.extend([d.lo(), d.hi()]);
    for n in negative_set {
        breakpoints.extend([n.lo(), n.hi()]);
    }
    breakpoints.retain(|p| p.is_finite());
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();
    MeasureSpec {
        density,
        atoms,
        breakpoints,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> QuadratureOptions {
        QuadratureOptions::default()
    }

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    /// σ for g = −(x−2)(x−1)x(x+1)(x+2) under standard BM with α = 2.
    fn quintic_sigma() -> MeasureSpec {
        MeasureSpec::new(
            real_fn(|x| 2.0 * (-2.0 * x.powi(5) + 20.0 * x.powi(3) - 23.0 * x)),
            vec![],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn empty_interval_integrates_to_zero() {
        let mu = MeasureSpec::new(real_fn(|_| 1.0), vec![Atom { location: 1.0, mass: 5.0 }], vec![]).unwrap();
        let v = mu.integrate(|x| x, Interval::point(1.0).unwrap(), &opts()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn single_atom_against_psi() {
        let mu = MeasureSpec::atomic(vec![Atom { location: 1.0, mass: -2.0 }]).unwrap();
        let r2 = 2f64.sqrt();
        let v = mu.integrate(|x| (r2 * x).exp(), Interval::real_line(), &opts()).unwrap();
        assert!((v + 2.0 * r2.exp()).abs() < 1e-12);
        assert!((v + 8.2266).abs() < 1e-3);
    }

    #[test]
    fn atom_on_boundary_is_excluded_unless_closed() {
        let mu = MeasureSpec::atomic(vec![Atom { location: 1.0, mass: 3.0 }]).unwrap();
        assert_eq!(mu.integrate(|_| 1.0, iv(0.0, 1.0), &opts()).unwrap(), 0.0);
        assert_eq!(mu.integrate_closed(|_| 1.0, iv(0.0, 1.0), &opts()).unwrap().value, 3.0);
        assert_eq!(mu.integrate_closed(|_| 1.0, Interval::point(1.0).unwrap(), &opts()).unwrap().value, 3.0);
    }

    #[test]
    fn quintic_phi_integral_over_n2_is_negative() {
        let sigma = quintic_sigma();
        let v = sigma.integrate(|x| (-2.0 * x).exp(), iv(0.0, 1.1515), &opts()).unwrap();
        assert!(v < 0.0);
    }

    #[test]
    fn tail_truncation_against_closed_form() {
        // ∫_1^∞ e^{-2x} 2x dx = e^{-2}(1 + 1/2)
        let mu = MeasureSpec::new(real_fn(|x| 2.0 * x), vec![], vec![]).unwrap();
        let v = mu.integrate(|x| (-2.0 * x).exp(), iv(1.0, f64::INFINITY), &opts()).unwrap();
        let exact = (-2f64).exp() * 1.5;
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
        // ∫_{-∞}^0 e^{√2 x} 2x dx = −1
        let r2 = 2f64.sqrt();
        let v = mu.integrate(|x| (r2 * x).exp(), iv(f64::NEG_INFINITY, 0.0), &opts()).unwrap();
        assert!((v + 1.0).abs() < 1e-11, "{v}");
    }

    #[test]
    fn divergent_tail_is_reported() {
        let mu = MeasureSpec::new(real_fn(|x| x), vec![], vec![]).unwrap();
        let err = mu
            .integrate(|x| (0.5 * x).exp(), iv(0.0, f64::INFINITY), &opts())
            .unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. } | Error::NonFinite { .. }), "{err:?}");
    }

    #[test]
    fn restriction_to_whole_line_is_identity() {
        let sigma = quintic_sigma();
        let negs = vec![iv(-2.9451, -1.1515), iv(0.0, 1.1515), iv(2.9451, f64::INFINITY)];
        let full = restrict_sigma(&sigma, Interval::real_line(), &negs);
        for x in [-3.0, -2.0, -0.5, 0.5, 2.0, 5.0] {
            assert_eq!(full.density(x), sigma.density(x));
        }
    }

    #[test]
    fn restriction_keeps_positive_part_outside() {
        let sigma = quintic_sigma();
        let negs = vec![iv(-2.9451, -1.1515), iv(0.0, 1.1515), iv(2.9451, f64::INFINITY)];
        let d = iv(0.0, 1.1515);
        let restricted = restrict_sigma(&sigma, d, &negs);
        assert_eq!(restricted.density(2.0), sigma.density(2.0));
        assert!(sigma.density(2.0) > 0.0);
        assert_eq!(restricted.density(-2.0), 0.0);
        assert_eq!(restricted.density(0.5), sigma.density(0.5));
        // singleton D keeps nothing negative from density
        let plus = restrict_sigma(&sigma, Interval::point(20.0).unwrap(), &negs);
        assert_eq!(plus.density(0.5), 0.0);
        assert_eq!(plus.density(4.0), 0.0);
        assert_eq!(plus.density(-0.5), sigma.density(-0.5));
    }

    #[test]
    fn restriction_drops_negative_atoms_outside() {
        let nu = MeasureSpec::new(
            real_fn(|x| 2.0 * x),
            vec![Atom { location: 1.0, mass: 2.0 }, Atom { location: 2.0, mass: -2.0 }],
            vec![1.0, 2.0],
        )
        .unwrap();
        let negs = vec![iv(f64::NEG_INFINITY, 0.0), Interval::point(2.0).unwrap()];
        let on_left = restrict_sigma(&nu, negs[0], &negs);
        assert_eq!(on_left.atoms(), &[Atom { location: 1.0, mass: 2.0 }]);
        let on_point = restrict_sigma(&nu, negs[1], &negs);
        assert_eq!(on_point.atoms().len(), 2);
        assert_eq!(on_point.density(-1.0), 0.0);
    }
}
