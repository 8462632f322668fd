//! Reward functions together with the measure that represents them through
//! the Green kernel.
//!
//! A smooth reward carries `(α − L)g` directly; the representing measure is
//! then `(α − L)g(y) m(dy)`. A reward with kinks carries an explicit signed
//! measure `ν` with atoms at the kinks.

use std::fmt;

use crate::diffusion::{real_fn, DiffusionModel, RealFn};
use crate::error::{Error, Result};
use crate::measure::{Atom, MeasureSpec};

#[derive(Clone)]
pub enum RewardKind {
    /// `alg(x) = (α − L)g(x)`.
    Smooth { alg: RealFn },
    Represented { nu: MeasureSpec },
}

#[derive(Clone)]
pub struct RewardSpec {
    g: RealFn,
    kind: RewardKind,
    exceptional_points: Vec<f64>,
}

impl fmt::Debug for RewardSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            RewardKind::Smooth { .. } => "smooth",
            RewardKind::Represented { .. } => "represented",
        };
        f.debug_struct("RewardSpec")
            .field("kind", &kind)
            .field("exceptional_points", &self.exceptional_points)
            .finish_non_exhaustive()
    }
}

/// Dense polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coefficients: Vec<f64>,
}

impl Polynomial {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("polynomial coefficients must be finite".into()));
        }
        Ok(Self { coefficients })
    }

    /// `c · Π (x − rᵢ)`.
    pub fn from_roots(scale: f64, roots: &[f64]) -> Result<Self> {
        let mut c = vec![scale];
        for &r in roots {
            let mut next = vec![0.0; c.len() + 1];
            for (i, &ci) in c.iter().enumerate() {
                next[i + 1] += ci;
                next[i] -= r * ci;
            }
            c = next;
        }
        Self::new(c)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| c * i as f64)
            .collect();
        Polynomial { coefficients }
    }
}

impl RewardSpec {
    pub fn smooth(g: RealFn, alg: RealFn, exceptional_points: Vec<f64>) -> Self {
        Self {
            g,
            kind: RewardKind::Smooth { alg },
            exceptional_points,
        }
    }

    pub fn represented(g: RealFn, nu: MeasureSpec, exceptional_points: Vec<f64>) -> Self {
        Self {
            g,
            kind: RewardKind::Represented { nu },
            exceptional_points,
        }
    }

    /// Polynomial reward; `(α − L)g` follows from the generator coefficients.
    pub fn polynomial(model: &DiffusionModel, coefficients: &[f64]) -> Result<Self> {
        let p = Polynomial::new(coefficients.to_vec())?;
        let d1 = p.derivative();
        let d2 = d1.derivative();
        let alpha = model.alpha();
        let m = model.clone();
        let p_alg = p.clone();
        let alg = real_fn(move |x| {
            let (b, a) = m.generator_coefficients(x);
            alpha * p_alg.eval(x) - b * d1.eval(x) - a * d2.eval(x)
        });
        Ok(Self::smooth(real_fn(move |x| p.eval(x)), alg, Vec::new()))
    }

    /// Continuous piecewise-linear reward through `knots`, extended with the
    /// given end slopes (defaulting to the adjacent segment slopes).
    ///
    /// The representing measure is `(αg − b g') m(dy)` on the linear pieces
    /// plus an atom of mass `−Δ(g'/s')` at every knot.
    pub fn piecewise_linear(
        model: &DiffusionModel,
        knots: &[(f64, f64)],
        left_slope: Option<f64>,
        right_slope: Option<f64>,
    ) -> Result<Self> {
        let pl = PiecewiseLinear::new(knots, left_slope, right_slope)?;
        let alpha = model.alpha();
        let m = model.clone();
        let pl_density = pl.clone();
        let density = real_fn(move |x| {
            let (b, _) = m.generator_coefficients(x);
            (alpha * pl_density.eval(x) - b * pl_density.slope(x)) * m.speed_density(x)
        });
        let atoms = pl
            .knots
            .iter()
            .enumerate()
            .map(|(i, &(x, _))| {
                let jump = pl.slopes[i + 1] - pl.slopes[i];
                Atom {
                    location: x,
                    mass: -jump / model.scale_density(x),
                }
            })
            .filter(|a| a.mass != 0.0)
            .collect();
        let kinks: Vec<f64> = pl.knots.iter().map(|k| k.0).collect();
        let nu = MeasureSpec::new(density, atoms, kinks.clone())?;
        Ok(Self::represented(real_fn(move |x| pl.eval(x)), nu, kinks))
    }

    pub fn g(&self, x: f64) -> f64 {
        (self.g)(x)
    }

    pub fn g_fn(&self) -> RealFn {
        self.g.clone()
    }

    pub fn kind(&self) -> &RewardKind {
        &self.kind
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self.kind, RewardKind::Smooth { .. })
    }

    pub fn exceptional_points(&self) -> &[f64] {
        &self.exceptional_points
    }

    /// The representing measure: `(α − L)g · m'` for smooth rewards, `ν` otherwise.
    pub fn sigma(&self, model: &DiffusionModel) -> MeasureSpec {
        match &self.kind {
            RewardKind::Smooth { alg } => {
                let alg = alg.clone();
                let m = model.clone();
                MeasureSpec::new(
                    real_fn(move |x| alg(x) * m.speed_density(x)),
                    Vec::new(),
                    self.exceptional_points.clone(),
                )
                .expect("no atoms to validate")
            }
            RewardKind::Represented { nu } => nu.clone(),
        }
    }

    /// Grid-sampled jump test: a jump that does not shrink with the probe
    /// width marks a discontinuity.
    pub fn check_continuity(&self, grid: &[f64]) -> Result<()> {
        for &x in grid {
            let h = 1e-6 * (1.0 + x.abs());
            let wide = (self.g(x + h) - self.g(x - h)).abs();
            let narrow = (self.g(x + 0.01 * h) - self.g(x - 0.01 * h)).abs();
            // change a Lipschitz function could make over the wide probe
            let slope = (self.g(x + 100.0 * h) - self.g(x - 100.0 * h)).abs() / (200.0 * h);
            let floor = 1e-9 * (1.0 + self.g(x).abs()) + 20.0 * h * (1.0 + slope);
            if !wide.is_finite() || (wide > floor && narrow > 0.5 * wide) {
                return Err(Error::Hypothesis(format!("reward appears discontinuous near x = {x}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
    /// `slopes[i]` applies left of knot `i`; the last entry right of the last knot.
    slopes: Vec<f64>,
}

impl PiecewiseLinear {
    fn new(knots: &[(f64, f64)], left: Option<f64>, right: Option<f64>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidParameter("piecewise-linear reward needs at least one knot".into()));
        }
        if knots.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidParameter("knots must be finite".into()));
        }
        if knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::InvalidParameter("knot abscissae must be strictly increasing".into()));
        }
        let inner: Vec<f64> = knots
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        let left = left.or_else(|| inner.first().copied()).ok_or_else(|| {
            Error::InvalidParameter("a single knot needs explicit end slopes".into())
        })?;
        let right = right.or_else(|| inner.last().copied()).ok_or_else(|| {
            Error::InvalidParameter("a single knot needs explicit end slopes".into())
        })?;
        if !left.is_finite() || !right.is_finite() {
            return Err(Error::InvalidParameter("end slopes must be finite".into()));
        }
        let mut slopes = Vec::with_capacity(knots.len() + 1);
        slopes.push(left);
        slopes.extend(inner);
        slopes.push(right);
        Ok(Self {
            knots: knots.to_vec(),
            slopes,
        })
    }

    fn segment(&self, x: f64) -> usize {
        self.knots.partition_point(|k| k.0 <= x)
    }

    fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let (kx, ky) = if i == 0 { self.knots[0] } else { self.knots[i - 1] };
        ky + self.slopes[i] * (x - kx)
    }

    fn slope(&self, x: f64) -> f64 {
        self.slopes[self.segment(x)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::make_brownian;

    fn quintic() -> Polynomial {
        Polynomial::from_roots(-1.0, &[2.0, 1.0, 0.0, -1.0, -2.0]).unwrap()
    }

    #[test]
    fn quintic_coefficients() {
        // −(x⁵ − 5x³ + 4x)
        assert_eq!(quintic().coefficients(), &[0.0, -4.0, 0.0, 5.0, 0.0, -1.0]);
    }

    #[test]
    fn smooth_polynomial_generator_term() {
        let model = make_brownian(2.0, 0.0, 1.0).unwrap();
        let r = RewardSpec::polynomial(&model, quintic().coefficients()).unwrap();
        let RewardKind::Smooth { alg } = r.kind() else { panic!() };
        for x in [-3.0f64, -0.4, 0.0, 1.0, 2.5] {
            let expected = -2.0 * x.powi(5) + 20.0 * x.powi(3) - 23.0 * x;
            assert!((alg(x) - expected).abs() < 1e-10 * (1.0 + expected.abs()));
        }
        let sigma = r.sigma(&model);
        assert!((sigma.density(1.0) - 2.0 * (-2.0 + 20.0 - 23.0)).abs() < 1e-12);
    }

    #[test]
    fn kinked_reward_measure() {
        let model = make_brownian(1.0, 0.0, 1.0).unwrap();
        let r = RewardSpec::piecewise_linear(&model, &[(1.0, 1.0), (2.0, 0.0)], Some(1.0), Some(1.0)).unwrap();
        assert_eq!(r.g(-3.0), -3.0);
        assert_eq!(r.g(0.5), 0.5);
        assert_eq!(r.g(1.5), 0.5);
        assert_eq!(r.g(4.0), 2.0);
        let RewardKind::Represented { nu } = r.kind() else { panic!() };
        assert_eq!(
            nu.atoms(),
            &[Atom { location: 1.0, mass: 2.0 }, Atom { location: 2.0, mass: -2.0 }]
        );
        // 2αg with α = 1
        assert_eq!(nu.density(-0.5), -1.0);
        assert_eq!(nu.density(1.5), 1.0);
        assert_eq!(r.exceptional_points(), &[1.0, 2.0]);
    }

    #[test]
    fn piecewise_linear_validation() {
        let model = make_brownian(1.0, 0.0, 1.0).unwrap();
        assert!(RewardSpec::piecewise_linear(&model, &[], None, None).is_err());
        assert!(RewardSpec::piecewise_linear(&model, &[(1.0, 0.0)], None, None).is_err());
        assert!(RewardSpec::piecewise_linear(&model, &[(1.0, 0.0), (1.0, 2.0)], None, None).is_err());
    }

    #[test]
    fn continuity_check_flags_jumps() {
        let step = RewardSpec::smooth(real_fn(|x| if x < 0.3 { 0.0 } else { 1.0 }), real_fn(|_| 0.0), vec![]);
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01 - 0.2).collect();
        assert!(matches!(step.check_continuity(&grid), Err(Error::Hypothesis(_))));
        let kink = RewardSpec::smooth(real_fn(|x: f64| x.abs()), real_fn(|_| 0.0), vec![0.0]);
        kink.check_continuity(&grid).unwrap();
    }
}
