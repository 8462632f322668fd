//! Regular one-dimensional diffusions described by their α-harmonic
//! fundamental solutions, scale density and speed density.
//!
//! A [`DiffusionModel`] is immutable once built. The Green kernel is
//!
//! ```text
//! G(x, y) = ψ(min(x, y)) φ(max(x, y)) / w
//! ```
//!
//! with `w = (ψ'/s')φ − ψ(φ'/s')` the Wronskian, which does not depend on `x`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::interval::Interval;

/// Shared real function handle.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Wraps a closure as a [`RealFn`].
pub fn real_fn<F>(f: F) -> RealFn
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

/// Relative step used for every central difference taken on model functions.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

fn fd_step(x: f64, rel: f64) -> f64 {
    rel * (1.0 + x.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `dX = drift dt + volatility dB`.
    Brownian { drift: f64, volatility: f64 },
    Custom,
}

#[derive(Clone)]
pub struct DiffusionModel {
    domain: Interval,
    alpha: f64,
    phi: RealFn,
    psi: RealFn,
    scale_density: RealFn,
    speed_density: RealFn,
    wronskian: f64,
    family: Family,
}

impl fmt::Debug for DiffusionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionModel")
            .field("domain", &self.domain)
            .field("alpha", &self.alpha)
            .field("wronskian", &self.wronskian)
            .field("family", &self.family)
            .finish_non_exhaustive()
    }
}

/// Brownian motion with constant drift and volatility on the real line.
///
/// The fundamental solutions are `exp(γ± x)` with `γ±` the roots of
/// `(volatility²/2)γ² + drift·γ − alpha = 0`.
pub fn make_brownian(alpha: f64, drift: f64, volatility: f64) -> Result<DiffusionModel> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if !(volatility > 0.0) || !volatility.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "volatility must be positive, got {volatility}"
        )));
    }
    if !drift.is_finite() {
        return Err(Error::InvalidParameter(format!("drift must be finite, got {drift}")));
    }
    let v2 = volatility * volatility;
    let disc = (drift * drift + 2.0 * alpha * v2).sqrt();
    let gamma_plus = (-drift + disc) / v2;
    let gamma_minus = (-drift - disc) / v2;
    // s'(x) = exp(-2 drift x / v²), m'(x) = 2 / (v² s'(x))
    let scale_rate = -2.0 * drift / v2;
    Ok(DiffusionModel {
        domain: Interval::real_line(),
        alpha,
        phi: real_fn(move |x| (gamma_minus * x).exp()),
        psi: real_fn(move |x| (gamma_plus * x).exp()),
        scale_density: real_fn(move |x| (scale_rate * x).exp()),
        speed_density: real_fn(move |x| 2.0 / (v2 * (scale_rate * x).exp())),
        wronskian: gamma_plus - gamma_minus,
        family: Family::Brownian { drift, volatility },
    })
}

/// Handles describing an arbitrary regular diffusion.
#[derive(Clone)]
pub struct CustomDiffusion {
    pub domain: Interval,
    pub alpha: f64,
    pub phi: RealFn,
    pub psi: RealFn,
    pub scale_density: RealFn,
    pub speed_density: RealFn,
    /// Where the Wronskian is evaluated; defaults to the midpoint of the
    /// domain intersected with `[-10, 10]`.
    pub reference_point: Option<f64>,
}

impl CustomDiffusion {
    pub fn build(self) -> Result<DiffusionModel> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.domain.is_point() {
            return Err(Error::InvalidParameter("state space must be a proper interval".into()));
        }
        let x0 = match self.reference_point {
            Some(x) => x,
            None => {
                let window = Interval::new(-10.0, 10.0).expect("static window");
                self.domain
                    .intersect(&window)
                    .map(|w| w.midpoint())
                    .ok_or_else(|| {
                        Error::InvalidParameter(
                            "domain does not meet [-10, 10]; set a reference point".into(),
                        )
                    })?
            }
        };
        if !self.domain.contains(x0) {
            return Err(Error::Domain {
                x: x0,
                lo: self.domain.lo(),
                hi: self.domain.hi(),
            });
        }
        let mut model = DiffusionModel {
            domain: self.domain,
            alpha: self.alpha,
            phi: self.phi,
            psi: self.psi,
            scale_density: self.scale_density,
            speed_density: self.speed_density,
            wronskian: f64::NAN,
            family: Family::Custom,
        };
        let w = model.wronskian_fd(x0, DEFAULT_FD_STEP);
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Wronskian at reference point {x0} is {w}; expected a positive value"
            )));
        }
        model.wronskian = w;
        Ok(model)
    }
}

/// Outcome of [`DiffusionModel::check_invariants`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDiagnostics {
    pub wronskian_min: f64,
    pub wronskian_max: f64,
    /// `(max − min) / stored wronskian` over the grid.
    pub wronskian_spread: f64,
}

impl DiffusionModel {
    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn wronskian(&self) -> f64 {
        self.wronskian
    }

    #[inline]
    pub fn phi(&self, x: f64) -> f64 {
        (self.phi)(x)
    }

    #[inline]
    pub fn psi(&self, x: f64) -> f64 {
        (self.psi)(x)
    }

    #[inline]
    pub fn scale_density(&self, x: f64) -> f64 {
        (self.scale_density)(x)
    }

    #[inline]
    pub fn speed_density(&self, x: f64) -> f64 {
        (self.speed_density)(x)
    }

    pub fn phi_fn(&self) -> RealFn {
        self.phi.clone()
    }

    pub fn psi_fn(&self) -> RealFn {
        self.psi.clone()
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        if self.domain.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                x,
                lo: self.domain.lo(),
                hi: self.domain.hi(),
            })
        }
    }

    /// Green kernel without the domain check.
    #[inline]
    pub fn green_unchecked(&self, x: f64, y: f64) -> f64 {
        if x <= y {
            self.psi(x) * self.phi(y) / self.wronskian
        } else {
            self.psi(y) * self.phi(x) / self.wronskian
        }
    }

    pub fn green(&self, x: f64, y: f64) -> Result<f64> {
        self.check_domain(x)?;
        self.check_domain(y)?;
        Ok(self.green_unchecked(x, y))
    }

    /// `E_x[exp(-α H_z)]` for the hitting time `H_z` of level `z`.
    pub fn laplace_hitting(&self, x: f64, z: f64) -> Result<f64> {
        self.check_domain(x)?;
        self.check_domain(z)?;
        Ok(if x == z {
            1.0
        } else if x < z {
            self.psi(x) / self.psi(z)
        } else {
            self.phi(x) / self.phi(z)
        })
    }

    /// Central-difference estimate of `(ψ'/s')φ − ψ(φ'/s')` at `x`.
    pub fn wronskian_fd(&self, x: f64, rel_step: f64) -> f64 {
        let h = self.interior_step(x, rel_step);
        let dpsi = (self.psi(x + h) - self.psi(x - h)) / (2.0 * h);
        let dphi = (self.phi(x + h) - self.phi(x - h)) / (2.0 * h);
        (dpsi * self.phi(x) - self.psi(x) * dphi) / self.scale_density(x)
    }

    /// Difference step at `x` kept well inside the state space.
    fn interior_step(&self, x: f64, rel: f64) -> f64 {
        let dist = (x - self.domain.lo()).min(self.domain.hi() - x);
        fd_step(x, rel).min(1e-4 * dist)
    }

    /// Coefficients `(b, a)` of the generator written as `L f = b f' + a f''`.
    ///
    /// For a diffusion given by scale and speed densities,
    /// `a = 1/(m' s')` and `b = −s''/(m' s'^2)`; `s''` is a central difference
    /// unless the family has closed-form coefficients.
    pub fn generator_coefficients(&self, x: f64) -> (f64, f64) {
        match self.family {
            Family::Brownian { drift, volatility } => (drift, 0.5 * volatility * volatility),
            Family::Custom => {
                let sd = self.scale_density(x);
                let md = self.speed_density(x);
                let h = self.interior_step(x, DEFAULT_FD_STEP);
                let sdd = (self.scale_density(x + h) - self.scale_density(x - h)) / (2.0 * h);
                (-sdd / (md * sd * sd), 1.0 / (md * sd))
            }
        }
    }

    /// Feller second difference `(d/dm)(d/ds) f` at `x` with step `h`.
    pub fn feller_generator<F: Fn(f64) -> f64>(&self, f: F, x: f64, h: f64) -> f64 {
        let fx = f(x);
        let right = (f(x + h) - fx) / (h * self.scale_density(x + 0.5 * h));
        let left = (fx - f(x - h)) / (h * self.scale_density(x - 0.5 * h));
        (right - left) / (h * self.speed_density(x))
    }

    /// Checks positivity, monotonicity and Wronskian constancy on `grid`.
    pub fn check_invariants(&self, grid: &[f64]) -> Result<ModelDiagnostics> {
        let mut prev: Option<(f64, f64, f64)> = None;
        let mut wmin = f64::INFINITY;
        let mut wmax = f64::NEG_INFINITY;
        for &x in grid {
            self.check_domain(x)?;
            let (p, q) = (self.phi(x), self.psi(x));
            if !(p > 0.0 && q > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "phi/psi must be positive; phi({x}) = {p}, psi({x}) = {q}"
                )));
            }
            if let Some((x0, p0, q0)) = prev {
                if x > x0 && !(p0 > p && q0 < q) {
                    return Err(Error::InvalidParameter(format!(
                        "phi must decrease and psi increase between {x0} and {x}"
                    )));
                }
            }
            prev = Some((x, p, q));
            let w = self.wronskian_fd(x, DEFAULT_FD_STEP);
            wmin = wmin.min(w);
            wmax = wmax.max(w);
        }
        let spread = (wmax - wmin) / self.wronskian;
        Ok(ModelDiagnostics {
            wronskian_min: wmin,
            wronskian_max: wmax,
            wronskian_spread: spread,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: f64 = std::f64::consts::E;

    #[test]
    fn brownian_standard_functions() {
        let m = make_brownian(1.0, 0.0, 1.0).unwrap();
        let r2 = 2f64.sqrt();
        for x in [-1.3, 0.0, 0.7, 2.0] {
            assert!((m.psi(x) - (r2 * x).exp()).abs() <= 1e-14 * m.psi(x));
            assert!((m.phi(x) - (-r2 * x).exp()).abs() <= 1e-14 * m.phi(x));
            assert_eq!(m.speed_density(x), 2.0);
            assert_eq!(m.scale_density(x), 1.0);
        }
    }

    #[test]
    fn brownian_wronskian_alpha_two() {
        let m = make_brownian(2.0, 0.0, 1.0).unwrap();
        assert!((m.wronskian() - 4.0).abs() < 1e-14);
        assert_eq!(m.psi(0.0), 1.0);
        assert_eq!(m.phi(0.0), 1.0);
        for x in [-1.0, 0.0, 1.0] {
            assert!((m.wronskian_fd(x, DEFAULT_FD_STEP) - 4.0).abs() < 1e-7);
        }
    }

    #[test]
    fn drifted_wronskian_is_constant() {
        let m = make_brownian(0.7, 0.4, 1.3).unwrap();
        let grid = Interval::new(-3.0, 3.0).unwrap().linspace(25);
        let d = m.check_invariants(&grid).unwrap();
        assert!(d.wronskian_spread < 1e-6, "{d:?}");
        assert!((d.wronskian_min / m.wronskian() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(make_brownian(0.0, 0.0, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_brownian(1.0, 0.0, -1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_brownian(f64::NAN, 0.0, 1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn green_values() {
        let m = make_brownian(2.0, 0.0, 1.0).unwrap();
        assert!((m.green(0.0, 0.0).unwrap() - 0.25).abs() < 1e-15);
        let expected = E.powi(-2) / 4.0;
        assert!((m.green(0.0, 1.0).unwrap() - expected).abs() < 1e-15);
        assert_eq!(m.green(1.0, 0.0).unwrap(), m.green(0.0, 1.0).unwrap());
    }

    #[test]
    fn laplace_transform_of_hitting_time() {
        let m = make_brownian(2.0, 0.0, 1.0).unwrap();
        assert_eq!(m.laplace_hitting(0.3, 0.3).unwrap(), 1.0);
        let e2 = E.powi(-2);
        assert!((m.laplace_hitting(0.0, 1.0).unwrap() - e2).abs() < 1e-15);
        assert!((m.laplace_hitting(1.0, 0.0).unwrap() - e2).abs() < 1e-15);
    }

    #[test]
    fn custom_domain_errors() {
        let custom = CustomDiffusion {
            domain: Interval::new(0.0, f64::INFINITY).unwrap(),
            alpha: 1.0,
            phi: real_fn(|x| x.powf(-1.0)),
            psi: real_fn(|x| x * x),
            scale_density: real_fn(|_| 1.0),
            speed_density: real_fn(|_| 1.0),
            reference_point: Some(1.0),
        }
        .build()
        .unwrap();
        assert!(matches!(custom.green(-1.0, 1.0), Err(Error::Domain { .. })));
        assert!(matches!(custom.laplace_hitting(1.0, 0.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn feller_operator_matches_closed_form_for_brownian() {
        let m = make_brownian(1.5, 0.3, 0.8).unwrap();
        // L f = drift f' + vol²/2 f'' for f = sin
        let x: f64 = 0.4;
        let exact = 0.3 * x.cos() - 0.32 * x.sin();
        let approx = m.feller_generator(f64::sin, x, 1e-4);
        assert!((approx - exact).abs() < 1e-6, "{approx} vs {exact}");
        let (b, a) = m.generator_coefficients(x);
        assert_eq!(b, 0.3);
        assert!((a - 0.32).abs() < 1e-15);
    }
}
