//! Construction of the continuation region.
//!
//! The region is grown from the negative set `{x : (α − L)g(x) < 0}`: every
//! negative component `N` is enlarged to an interval `C` on which the `φ`- and
//! `ψ`-integrals of the hybrid measure `σ_N` vanish, and overlapping
//! enlargements are merged and re-enlarged until the intervals are disjoint.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionModel;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::measure::{restrict_sigma, MeasureSpec, QuadratureOptions};
use crate::quadrature::Estimate;
use crate::reward::{RewardKind, RewardSpec};
use crate::roots::bisect_transition;
use crate::value::{self, Solution, SolveStats};

const BISECTION_MAX_ITER: usize = 200;
/// Closest relative approach to a finite state-space boundary.
const BOUNDARY_APPROACH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bounded window for grid scans; also the anchor for tail brackets.
    pub work_window: Interval,
    pub scan_points: usize,
    pub root_tol: f64,
    pub enlarge_tol: f64,
    pub max_enlarge_iters: usize,
    /// Intervals closer than this are treated as intersecting.
    pub gap_tol: f64,
    pub quadrature: QuadratureOptions,
    /// Number of test points for the Green-kernel condition on each interval.
    pub condition_grid: usize,
    /// Relative tolerance of every condition residual against the absolute mass
    /// of its integrand.
    pub condition_rel_tol: f64,
    /// Check the inversion formula before solving a smooth reward.
    pub check_inversion: bool,
    pub inversion_rel_tol: f64,
    pub inversion_points: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            work_window: Interval::new(-10.0, 10.0).expect("static window"),
            scan_points: 4001,
            root_tol: 1e-9,
            enlarge_tol: 1e-10,
            max_enlarge_iters: 500,
            gap_tol: 1e-7,
            quadrature: QuadratureOptions::default(),
            condition_grid: 101,
            condition_rel_tol: 1e-6,
            check_inversion: true,
            inversion_rel_tol: 1e-4,
            inversion_points: 21,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        self.quadrature.validate()?;
        let tolerances = [
            self.root_tol,
            self.enlarge_tol,
            self.gap_tol,
            self.condition_rel_tol,
            self.inversion_rel_tol,
        ];
        if tolerances.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidParameter("solver tolerances must be positive".into()));
        }
        if self.scan_points < 100 {
            return Err(Error::InvalidParameter(format!(
                "scan_points must be at least 100, got {}",
                self.scan_points
            )));
        }
        if !self.work_window.is_bounded() || self.work_window.is_point() {
            return Err(Error::InvalidParameter("work window must be a bounded interval".into()));
        }
        if self.max_enlarge_iters == 0 || self.condition_grid == 0 || self.inversion_points == 0 {
            return Err(Error::InvalidParameter("iteration and grid counts must be positive".into()));
        }
        Ok(())
    }

    /// Work window intersected with the state space.
    pub fn window_in(&self, domain: Interval) -> Result<Interval> {
        domain
            .intersect(&self.work_window)
            .ok_or_else(|| Error::InvalidParameter("work window does not meet the state space".into()))
    }
}

/// A negative interval together with its enlargement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairNC {
    pub n: Interval,
    pub c: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub i_phi: f64,
    pub i_psi: f64,
    /// `∫_C φ dσ_N`; `None` when `C` reaches the left boundary.
    pub ii_residual: Option<f64>,
    /// `∫_C ψ dσ_N`; `None` when `C` reaches the right boundary.
    pub iii_residual: Option<f64>,
    /// Largest `∫_C G(x, y) σ_N(dy)` over the test grid.
    pub iv_max: f64,
    /// `φ·σ_N` mass of an atom sitting on the left end of `C`, zero if none.
    /// When the enlargement stops on a positive atom the integral jumps
    /// there, and the condition holds as `ii_residual ≤ 0 ≤ ii_residual + ii_atom`.
    pub ii_atom: f64,
    /// `ψ·σ_N` mass of an atom on the right end of `C`.
    pub iii_atom: f64,
    /// `∫_C φ d|σ_N|`, the scale for `ii_residual`.
    pub ii_scale: f64,
    pub iii_scale: f64,
    /// Kernel mass at the point attaining `iv_max`.
    pub iv_scale: f64,
    pub satisfied: bool,
}

/// Distance of the open integral `r` from satisfying `r ≤ 0 ≤ r + atom`.
fn bracket_residual(r: f64, atom: f64) -> f64 {
    if atom > 0.0 {
        r.max(0.0).max(-(r + atom))
    } else {
        r.abs()
    }
}

impl ConditionReport {
    /// Larger of the two boundary residuals relative to their scales.
    pub fn max_relative_residual(&self) -> f64 {
        let rel = |r: Option<f64>, atom: f64, s: f64| {
            r.map_or(0.0, |r| bracket_residual(r, atom) / s.max(f64::MIN_POSITIVE))
        };
        rel(self.ii_residual, self.ii_atom, self.ii_scale).max(rel(self.iii_residual, self.iii_atom, self.iii_scale))
    }
}

/// Result of enlarging one negative interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Enlargement {
    pub c: Interval,
    /// Alternating left/right passes performed.
    pub iterations: usize,
    /// `∫_N ψ dσ / ∫_N φ dσ`, when both integrals are finite and non-zero.
    pub phi_rescale: Option<f64>,
    pub report: ConditionReport,
}

/// Scan grid over `window`, nudged off the excluded points.
fn scan_grid(window: Interval, points: usize, domain: Interval, exclude: &[f64]) -> Vec<f64> {
    let nudge = |x: f64| 1e-9 * (1.0 + x.abs());
    window
        .linspace(points)
        .into_iter()
        .map(|mut x| {
            if x <= domain.lo() {
                x += nudge(x) + 1e-9 * window.width();
            }
            if x >= domain.hi() {
                x -= nudge(x) + 1e-9 * window.width();
            }
            if exclude.contains(&x) {
                x += nudge(x);
            }
            x
        })
        .collect()
}

/// Maximal open intervals of `{f < 0}` inside the window, refined by bisection
/// and extended to the domain boundary when the sign persists at a window edge.
fn negative_runs<F>(f: &F, domain: Interval, window: Interval, points: usize, exclude: &[f64], tol: f64) -> Result<Vec<Interval>>
where
    F: Fn(f64) -> f64,
{
    let grid = scan_grid(window, points, domain, exclude);
    let mut negative = Vec::with_capacity(grid.len());
    for &x in &grid {
        let v = f(x);
        if v.is_nan() {
            return Err(Error::NonFinite { x });
        }
        negative.push(v < 0.0);
    }
    let refine = |inside: f64, outside: f64| -> Result<f64> {
        bisect_transition(|z| Ok(f(z) < 0.0), inside, outside, tol, BISECTION_MAX_ITER)
    };
    let mut runs = Vec::new();
    let mut i = 0;
    while i < grid.len() {
        if !negative[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < grid.len() && negative[i + 1] {
            i += 1;
        }
        let end = i;
        let lo = if start == 0 {
            domain.lo()
        } else {
            refine(grid[start], grid[start - 1])?
        };
        let hi = if end == grid.len() - 1 {
            domain.hi()
        } else {
            refine(grid[end], grid[end + 1])?
        };
        runs.push(Interval::new(lo, hi)?);
        i += 1;
    }
    Ok(runs)
}

fn scan_with_resolution_check<F>(f: &F, domain: Interval, opts: &SolverOptions, exclude: &[f64]) -> Result<Vec<Interval>>
where
    F: Fn(f64) -> f64,
{
    let window = opts.window_in(domain)?;
    let runs = negative_runs(f, domain, window, opts.scan_points, exclude, opts.root_tol)?;
    // a finer scan must see the same number of components
    let fine_points = 3 * (opts.scan_points - 1) + 1;
    let fine = negative_runs(f, domain, window, fine_points, exclude, opts.root_tol)?;
    if fine.len() != runs.len() {
        return Err(Error::Resolution(format!(
            "{} negative components at {} scan points but {} at {}",
            runs.len(),
            opts.scan_points,
            fine.len(),
            fine_points
        )));
    }
    Ok(runs)
}

/// Components of `{x : (α − L)g(x) < 0}` for a smooth reward.
///
/// An empty result means the reward is α-excessive: stopping immediately is
/// optimal everywhere.
pub fn negative_set(model: &DiffusionModel, reward: &RewardSpec, opts: &SolverOptions) -> Result<Vec<Interval>> {
    let RewardKind::Smooth { alg } = reward.kind() else {
        return Err(Error::InvalidParameter(
            "negative_set needs a smooth reward; use negative_support for a representing measure".into(),
        ));
    };
    scan_with_resolution_check(&|x| alg(x), model.domain(), opts, reward.exceptional_points())
}

/// Where a representing measure is negative: intervals of negative density
/// plus singletons for negative atoms not already covered.
pub fn negative_support(nu: &MeasureSpec, domain: Interval, opts: &SolverOptions) -> Result<Vec<Interval>> {
    let mut out = if nu.has_density() {
        scan_with_resolution_check(&|x| nu.density(x), domain, opts, nu.breakpoints())?
    } else {
        Vec::new()
    };
    let points: Vec<Interval> = nu
        .atoms()
        .iter()
        .filter(|a| a.mass < 0.0 && domain.contains(a.location))
        .filter(|a| !out.iter().any(|n| n.contains_closed(a.location)))
        .map(|a| Interval::point(a.location))
        .collect::<Result<_>>()?;
    out.extend(points);
    out.sort_by(|a, b| a.lo().total_cmp(&b.lo()));
    Ok(out)
}

/// Integral over `(lo, hi)` plus the atoms of `σ_N` sitting on an endpoint
/// that belongs to the closure of `n`.
fn span_integral<F: Fn(f64) -> f64>(
    sigma_n: &MeasureSpec,
    f: &F,
    lo: f64,
    hi: f64,
    n: Interval,
    opts: &QuadratureOptions,
) -> Result<f64> {
    let mut total = if lo < hi {
        sigma_n.integrate_detailed(f, Interval::new(lo, hi)?, &[], opts)?.value
    } else {
        0.0
    };
    for atom in sigma_n.atoms() {
        let p = atom.location;
        if (p == lo || p == hi) && n.contains_closed(p) {
            total += f(p) * atom.mass;
        }
    }
    Ok(total)
}

struct Enlarger<'a> {
    model: &'a DiffusionModel,
    sigma_n: MeasureSpec,
    n: Interval,
    opts: &'a SolverOptions,
}

impl Enlarger<'_> {
    fn integrate_open<F: Fn(f64) -> f64>(&self, f: &F, lo: f64, hi: f64) -> Result<f64> {
        if lo < hi {
            Ok(self
                .sigma_n
                .integrate_detailed(f, Interval::new(lo, hi)?, &[], &self.opts.quadrature)?
                .value)
        } else {
            Ok(0.0)
        }
    }

    /// A positive atom of `σ_N` outside `n` at `p`. An end of `C` resting on
    /// one is held by the kink there, so there is no smooth fit at that end.
    fn pinned(&self, p: f64) -> bool {
        p.is_finite()
            && !self.n.contains_closed(p)
            && self.sigma_n.atoms().iter().any(|at| at.mass > 0.0 && at.location == p)
    }

    /// `inf{z ≤ a : ∫_(z, y) φ dσ_N < 0}`. With `y` pinned, `φ` is replaced by
    /// the solution vanishing at `y`, which encodes smooth fit at the free end.
    fn left_step(&self, y: f64) -> Result<f64> {
        let a = self.n.lo();
        let ell = self.model.domain().lo();
        let ratio = if self.pinned(y) { self.model.phi(y) / self.model.psi(y) } else { 0.0 };
        let phi = |x: f64| self.model.phi(x) - ratio * self.model.psi(x);
        let base = span_integral(&self.sigma_n, &phi, a, y, self.n, &self.opts.quadrature)?;
        if base >= 0.0 {
            return Ok(a);
        }
        let value_at = |z: f64| -> Result<f64> { Ok(base + self.integrate_open(&phi, z, a)?) };
        let outside = if ell.is_finite() {
            // the integral may diverge at the boundary itself; approach it
            let mut gap = 0.5 * (a - ell);
            loop {
                if value_at(ell + gap)? >= 0.0 {
                    break ell + gap;
                }
                if gap < BOUNDARY_APPROACH * (1.0 + ell.abs()) {
                    return Ok(ell);
                }
                gap *= 0.5;
            }
        } else {
            let mut z = self.opts.work_window.lo().min(a - 1.0);
            loop {
                if value_at(z)? >= 0.0 {
                    break z;
                }
                if a - z > self.opts.quadrature.tail_limit {
                    return Ok(ell);
                }
                z = a - 2.0 * (a - z);
            }
        };
        let z = bisect_transition(
            |z| Ok(value_at(z)? < 0.0),
            a,
            outside,
            self.step_tol(),
            BISECTION_MAX_ITER,
        )?;
        Ok(self.snap_to_atom(z, z - 2.0 * self.opts.root_tol, z))
    }

    /// Endpoints are located well below the convergence tolerance, otherwise
    /// a slowly contracting pass just wanders on bisection noise.
    fn step_tol(&self) -> f64 {
        self.opts.root_tol.min(1e-2 * self.opts.enlarge_tol)
    }

    /// A transition within bisection tolerance of a positive atom is the
    /// jump at that atom.
    fn snap_to_atom(&self, z: f64, lo: f64, hi: f64) -> f64 {
        self.sigma_n
            .atoms()
            .iter()
            .find(|at| at.mass > 0.0 && lo <= at.location && at.location <= hi)
            .map_or(z, |at| at.location)
    }

    /// `sup{z ≥ b : ∫_(x, z) ψ dσ_N < 0}`, with the same substitution when `x`
    /// is pinned.
    fn right_step(&self, x: f64) -> Result<f64> {
        let b = self.n.hi();
        let r = self.model.domain().hi();
        let ratio = if self.pinned(x) { self.model.psi(x) / self.model.phi(x) } else { 0.0 };
        let psi = |t: f64| self.model.psi(t) - ratio * self.model.phi(t);
        let base = span_integral(&self.sigma_n, &psi, x, b, self.n, &self.opts.quadrature)?;
        if base >= 0.0 {
            return Ok(b);
        }
        let value_at = |z: f64| -> Result<f64> { Ok(base + self.integrate_open(&psi, b, z)?) };
        let outside = if r.is_finite() {
            let mut gap = 0.5 * (r - b);
            loop {
                if value_at(r - gap)? >= 0.0 {
                    break r - gap;
                }
                if gap < BOUNDARY_APPROACH * (1.0 + r.abs()) {
                    return Ok(r);
                }
                gap *= 0.5;
            }
        } else {
            let mut z = self.opts.work_window.hi().max(b + 1.0);
            loop {
                if value_at(z)? >= 0.0 {
                    break z;
                }
                if z - b > self.opts.quadrature.tail_limit {
                    return Ok(r);
                }
                z = b + 2.0 * (z - b);
            }
        };
        let z = bisect_transition(
            |z| Ok(value_at(z)? < 0.0),
            b,
            outside,
            self.step_tol(),
            BISECTION_MAX_ITER,
        )?;
        Ok(self.snap_to_atom(z, z, z + 2.0 * self.opts.root_tol))
    }

    fn phi_rescale(&self) -> Option<f64> {
        if !self.n.is_bounded() {
            return None;
        }
        let q = &self.opts.quadrature;
        let ip = self.sigma_n.integrate_closed(|x| self.model.phi(x), self.n, q).ok()?.value;
        let is = self.sigma_n.integrate_closed(|x| self.model.psi(x), self.n, q).ok()?.value;
        (ip != 0.0 && (is / ip).is_finite()).then_some(is / ip)
    }
}

/// Δ² extrapolation of the last three iterates when they creep at a steady
/// ratio in (0.5, 1), kept inside `(lower, upper)`.
fn aitken(ys: &[f64], lower: f64, upper: f64) -> Option<f64> {
    let [y0, y1, y2] = *ys.last_chunk::<3>()?;
    if !(y0.is_finite() && y2.is_finite()) {
        return None;
    }
    let (d1, d2) = (y1 - y0, y2 - y1);
    let r = d2 / d1;
    if !(d1 != 0.0 && (0.5..0.9999).contains(&r)) {
        return None;
    }
    let jump = y2 + d2 * r / (1.0 - r);
    (lower < jump && jump < upper).then_some(jump)
}

fn moved(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

/// Enlarges `n` to the interval `C` for which `(n, C)` satisfies the
/// enlargement conditions against `σ_N`.
///
/// Alternates `x ← inf{z ≤ a : ∫_(z,y) φ dσ_N < 0}` and
/// `y ← sup{z ≥ b : ∫_(x,z) ψ dσ_N < 0}` until both endpoints settle. An end
/// of `n` already at the state-space boundary stays there. Multiplying `φ` by
/// the positive rescaling constant `∫_N ψ dσ / ∫_N φ dσ` does not change the
/// sign tests, so the iteration runs on the raw `φ`.
pub fn enlarge(
    model: &DiffusionModel,
    sigma: &MeasureSpec,
    n: Interval,
    negative_set: &[Interval],
    opts: &SolverOptions,
) -> Result<Enlargement> {
    let domain = model.domain();
    let enlarger = Enlarger {
        model,
        sigma_n: restrict_sigma(sigma, n, negative_set),
        n,
        opts,
    };
    let left_fixed = n.lo() <= domain.lo();
    let right_fixed = n.hi() >= domain.hi();
    let phi_rescale = enlarger.phi_rescale();
    if let Some(c) = phi_rescale {
        if c <= 0.0 {
            return Err(Error::Consistency(format!(
                "phi and psi integrals over {n} have opposite signs (ratio {c})"
            )));
        }
    }

    let (mut x, mut y) = (n.lo(), n.hi());
    let mut iterations = 0;
    // the state is really just y; slow geometric creep (tiny N, nearly
    // proportional φ and ψ) gets an Aitken jump, and later passes confirm it
    let mut history: Vec<f64> = Vec::new();
    loop {
        if iterations >= opts.max_enlarge_iters {
            return Err(Error::Convergence {
                iterations,
                lo: x,
                hi: y,
            });
        }
        iterations += 1;
        let x_next = if left_fixed { domain.lo() } else { enlarger.left_step(y)? };
        let y_next = if right_fixed { domain.hi() } else { enlarger.right_step(x_next)? };
        let step = moved(x_next, x).max(moved(y_next, y));
        x = x_next;
        y = y_next;
        history.push(y);
        if let Some(jump) = aitken(&history, n.hi(), domain.hi()) {
            log::trace!("enlarge {n}: extrapolating y {y} -> {jump}");
            y = jump;
            history.clear();
        }
        log::trace!("enlarge {n}: pass {iterations} -> ({x}, {y}), step {step:e}");
        if left_fixed || right_fixed || x <= domain.lo() && y >= domain.hi() {
            break;
        }
        if iterations > 1 && step < opts.enlarge_tol {
            break;
        }
    }
    let c = Interval::new(x, y)?;
    let report = check_condition(model, &enlarger.sigma_n, n, c, opts)?;
    if !report.satisfied && !(c.lo() <= domain.lo() && c.hi() >= domain.hi()) {
        return Err(Error::Consistency(format!(
            "enlargement {c} of {n} fails the enlargement conditions: {report:?}"
        )));
    }
    log::debug!("enlarged {n} to {c} in {iterations} passes");
    Ok(Enlargement {
        c,
        iterations,
        phi_rescale,
        report,
    })
}

/// Evaluates the four enlargement conditions for `(n, c)` against `σ_N`.
///
/// Integrals over an unbounded `n` of the function that grows towards the
/// infinite end are taken over `n` cut at the work window.
pub fn check_condition(
    model: &DiffusionModel,
    sigma_n: &MeasureSpec,
    n: Interval,
    c: Interval,
    opts: &SolverOptions,
) -> Result<ConditionReport> {
    let q = &opts.quadrature;
    let domain = model.domain();
    let window = opts.work_window;
    let phi = |x: f64| model.phi(x);
    let psi = |x: f64| model.psi(x);
    let tol = |scale: f64| q.abs_tol + opts.condition_rel_tol * scale;

    let n_for_phi = if n.lo() == f64::NEG_INFINITY {
        Interval::new(window.lo().min(n.hi() - 1.0), n.hi())?
    } else {
        n
    };
    let n_for_psi = if n.hi() == f64::INFINITY {
        Interval::new(n.lo(), window.hi().max(n.lo() + 1.0))?
    } else {
        n
    };
    let i_phi = sigma_n.integrate_closed(phi, n_for_phi, q)?;
    let i_psi = sigma_n.integrate_closed(psi, n_for_psi, q)?;

    // an end held by a positive atom outside n swaps the opposite weight for
    // the solution vanishing at that end
    let pinned = |p: f64| {
        p.is_finite() && !n.contains_closed(p) && sigma_n.atoms().iter().any(|at| at.mass > 0.0 && at.location == p)
    };
    let left_ratio = if pinned(c.hi()) { model.phi(c.hi()) / model.psi(c.hi()) } else { 0.0 };
    let right_ratio = if pinned(c.lo()) { model.psi(c.lo()) / model.phi(c.lo()) } else { 0.0 };
    let phi_w = |x: f64| model.phi(x) - left_ratio * model.psi(x);
    let psi_w = |x: f64| model.psi(x) - right_ratio * model.phi(x);

    let ii = if c.lo() > domain.lo() {
        Some(sigma_n.integrate_detailed(&phi_w, c, &[], q)?)
    } else {
        None
    };
    let iii = if c.hi() < domain.hi() {
        Some(sigma_n.integrate_detailed(&psi_w, c, &[], q)?)
    } else {
        None
    };

    let (iv_max, iv_scale, iv_ok) = if c.lo() <= domain.lo() && c.hi() >= domain.hi() {
        (0.0, 0.0, true)
    } else {
        let test = c.intersect(&window).unwrap_or(c);
        let k = opts.condition_grid;
        let xs: Vec<f64> = if test.is_bounded() {
            (1..=k)
                .map(|i| test.lo() + test.width() * i as f64 / (k + 1) as f64)
                .collect()
        } else {
            vec![test.lo().max(test.hi().min(0.0))]
        };
        let values: Vec<Estimate> = xs
            .par_iter()
            .map(|&x| {
                let kernel = |y: f64| model.green_unchecked(x, y);
                sigma_n.integrate_detailed(&kernel, c, &[x], q)
            })
            .collect::<Result<_>>()?;
        let mut worst = (f64::NEG_INFINITY, 0.0);
        let mut ok = true;
        for est in &values {
            ok &= est.value <= tol(est.abs_value);
            if est.value > worst.0 {
                worst = (est.value, est.abs_value);
            }
        }
        (worst.0, worst.1, ok)
    };

    let end_atom = |p: f64, f: &dyn Fn(f64) -> f64| -> f64 {
        sigma_n
            .atoms()
            .iter()
            .filter(|a| a.location == p && p.is_finite())
            .map(|a| f(p) * a.mass)
            .sum()
    };
    let ii_atom = if ii.is_some() { end_atom(c.lo(), &phi_w) } else { 0.0 };
    let iii_atom = if iii.is_some() { end_atom(c.hi(), &psi_w) } else { 0.0 };

    let satisfied = i_phi.value <= tol(i_phi.abs_value)
        && i_psi.value <= tol(i_psi.abs_value)
        && ii.is_none_or(|e| bracket_residual(e.value, ii_atom) <= tol(e.abs_value))
        && iii.is_none_or(|e| bracket_residual(e.value, iii_atom) <= tol(e.abs_value))
        && iv_ok;

    Ok(ConditionReport {
        i_phi: i_phi.value,
        i_psi: i_psi.value,
        ii_residual: ii.map(|e| e.value),
        iii_residual: iii.map(|e| e.value),
        iv_max,
        ii_atom,
        iii_atom,
        ii_scale: ii.map_or(0.0, |e| e.abs_value),
        iii_scale: iii.map_or(0.0, |e| e.abs_value),
        iv_scale,
        satisfied,
    })
}

/// One entry of the algorithm's working set.
#[derive(Debug, Clone)]
struct Entry {
    n: Interval,
    enlargement: Enlargement,
}

impl Entry {
    fn c(&self) -> Interval {
        self.enlargement.c
    }
}

/// Solves the optimal stopping problem for `reward` under `model`.
///
/// Base step: enlarge every negative component. Iterative step: stop when the
/// enlargements are pairwise disjoint; otherwise replace the offending pairs
/// (an enlargement reaching the left boundary, one reaching the right
/// boundary, or an overlapping run) by one enlarged pair over their combined
/// negative span. Each pass strictly reduces the number of pairs.
pub fn solve(model: &DiffusionModel, reward: &RewardSpec, opts: &SolverOptions) -> Result<Solution> {
    opts.validate()?;
    let domain = model.domain();
    let window = opts.window_in(domain)?;
    let grid = scan_grid(window, opts.scan_points, domain, reward.exceptional_points());
    reward.check_continuity(&grid)?;

    let sigma = reward.sigma(model);
    let negative = match reward.kind() {
        RewardKind::Smooth { .. } => negative_set(model, reward, opts)?,
        RewardKind::Represented { nu } => negative_support(nu, domain, opts)?,
    };
    log::info!("negative set: {}", display_list(&negative));
    if negative.is_empty() {
        return Ok(Solution::stop_everywhere(model.clone(), reward.clone()));
    }

    if reward.is_smooth() && opts.check_inversion {
        let points = window.linspace(opts.inversion_points);
        let inv = value::verify_inversion(model, reward, &points, opts)?;
        if inv.relative_residual > opts.inversion_rel_tol {
            return Err(Error::Hypothesis(format!(
                "inversion formula fails: residual {:e} relative to max|g| {:e}",
                inv.residual, inv.max_abs_g
            )));
        }
    }

    let mut theta: Vec<Entry> = negative
        .par_iter()
        .map(|&n| {
            enlarge(model, &sigma, n, &negative, opts).map(|enlargement| Entry { n, enlargement })
        })
        .collect::<Result<_>>()?;
    let base_pairs: Vec<PairNC> = theta.iter().map(|e| PairNC { n: e.n, c: e.c() }).collect();
    let mut stats = SolveStats {
        negative_set: negative.clone(),
        base_pairs,
        iterations: 0,
        merges: 0,
        merged: Vec::new(),
        enlarge_passes: theta.iter().map(|e| e.enlargement.iterations).sum(),
    };

    loop {
        stats.iterations += 1;
        if let Some(e) = theta.iter().find(|e| e.c().lo() <= domain.lo() && e.c().hi() >= domain.hi()) {
            return Err(Error::Degenerate(format!(
                "negative span {} enlarges to the whole state space; g must be non-negative and satisfy the inversion formula",
                e.n
            )));
        }
        let count = theta.len();
        let overlap = (0..count).find_map(|j| {
            (j + 1..count)
                .rev()
                .find(|&k| overlaps(theta[j].c(), theta[k].c(), &sigma, opts.gap_tol))
                .map(|k| (j, k))
        });
        let Some((oj, ok)) = overlap else { break };

        let (range, merged_n) = if let Some(j) = (1..count).find(|&j| theta[j].c().lo() <= domain.lo()) {
            (0..=j, Interval::new(domain.lo(), theta[j].n.hi())?)
        } else if let Some(j) = (0..count.saturating_sub(1)).find(|&j| theta[j].c().hi() >= domain.hi()) {
            (j..=count - 1, Interval::new(theta[j].n.lo(), domain.hi())?)
        } else {
            (oj..=ok, Interval::new(theta[oj].n.lo(), theta[ok].n.hi())?)
        };
        log::info!(
            "merging pairs {}..={} into N = {merged_n}",
            range.start(),
            range.end()
        );
        let enlargement = enlarge(model, &sigma, merged_n, &negative, opts)?;
        stats.merges += 1;
        stats.enlarge_passes += enlargement.iterations;
        stats.merged.push(PairNC {
            n: merged_n,
            c: enlargement.c,
        });
        let start = *range.start();
        theta.splice(range, std::iter::once(Entry { n: merged_n, enlargement }));
        debug_assert!(theta.windows(2).all(|w| w[0].n.lo() <= w[1].n.lo()) || start == 0);
    }

    let pairs: Vec<PairNC> = theta.iter().map(|e| PairNC { n: e.n, c: e.c() }).collect();
    let diagnostics = theta.iter().map(|e| e.enlargement.report).collect();
    Solution::from_pairs(model.clone(), reward.clone(), pairs, diagnostics, stats)
}

/// Whether two enlargements must be merged. Intervals meeting exactly at a
/// positive atom of `σ` are disjoint: the atom is an isolated stopping point.
fn overlaps(a: Interval, b: Interval, sigma: &MeasureSpec, gap_tol: f64) -> bool {
    if !a.touches(&b, gap_tol) {
        return false;
    }
    let at_atom = |p: f64| sigma.atoms().iter().any(|at| at.location == p && at.mass > 0.0);
    let shared = if a.hi() == b.lo() {
        Some(a.hi())
    } else if b.hi() == a.lo() {
        Some(b.hi())
    } else {
        None
    };
    !shared.is_some_and(at_atom)
}

fn display_list(items: &[Interval]) -> String {
    let parts: Vec<String> = items.iter().map(|i| i.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::make_brownian;
    use crate::reward::Polynomial;

    fn quintic(alpha: f64) -> (DiffusionModel, RewardSpec) {
        let model = make_brownian(alpha, 0.0, 1.0).unwrap();
        let p = Polynomial::from_roots(-1.0, &[2.0, 1.0, 0.0, -1.0, -2.0]).unwrap();
        let reward = RewardSpec::polynomial(&model, p.coefficients()).unwrap();
        (model, reward)
    }

    #[test]
    fn option_validation() {
        let mut o = SolverOptions::default();
        o.validate().unwrap();
        o.scan_points = 10;
        assert!(o.validate().is_err());
        let o = SolverOptions {
            gap_tol: 0.0,
            ..SolverOptions::default()
        };
        assert!(o.validate().is_err());
    }

    #[test]
    fn negative_set_rejects_represented_reward() {
        let model = make_brownian(1.0, 0.0, 1.0).unwrap();
        let r = RewardSpec::piecewise_linear(&model, &[(1.0, 1.0), (2.0, 0.0)], Some(1.0), Some(1.0)).unwrap();
        assert!(matches!(
            negative_set(&model, &r, &SolverOptions::default()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn negative_support_cases() {
        let opts = SolverOptions::default();
        let line = Interval::real_line();
        let positive = MeasureSpec::new(crate::diffusion::real_fn(|x| 1.0 + x * x), vec![], vec![]).unwrap();
        assert!(negative_support(&positive, line, &opts).unwrap().is_empty());
        let atoms = MeasureSpec::atomic(vec![
            crate::measure::Atom { location: 1.0, mass: 2.0 },
            crate::measure::Atom { location: 2.0, mass: -2.0 },
        ])
        .unwrap();
        assert_eq!(
            negative_support(&atoms, line, &opts).unwrap(),
            vec![Interval::point(2.0).unwrap()]
        );
    }

    #[test]
    fn unenlarged_interval_fails_condition() {
        let (model, reward) = quintic(2.0);
        let opts = SolverOptions::default();
        let sigma = reward.sigma(&model);
        let negs = negative_set(&model, &reward, &opts).unwrap();
        let n = negs[1];
        let sigma_n = restrict_sigma(&sigma, n, &negs);
        let report = check_condition(&model, &sigma_n, n, n, &opts).unwrap();
        assert!(!report.satisfied);
        assert!(report.ii_residual.unwrap() < 0.0);
        assert!((report.ii_residual.unwrap() - report.i_phi).abs() < 1e-9 * report.ii_scale);
    }

    #[test]
    fn too_wide_candidate_fails_condition() {
        let (model, reward) = quintic(2.0);
        let opts = SolverOptions::default();
        let sigma = reward.sigma(&model);
        let negs = negative_set(&model, &reward, &opts).unwrap();
        let n = negs[1];
        let e = enlarge(&model, &sigma, n, &negs, &opts).unwrap();
        let wide = Interval::new(e.c.lo(), e.c.hi() + 0.5).unwrap();
        let sigma_n = restrict_sigma(&sigma, n, &negs);
        let report = check_condition(&model, &sigma_n, n, wide, &opts).unwrap();
        assert!(report.iii_residual.unwrap() > 0.0);
        assert!(!report.satisfied);
    }

    #[test]
    fn excessive_reward_stops_everywhere() {
        // g = ψ + 1 on standard BM: (α − L)g = α > 0
        let model = make_brownian(1.0, 0.0, 1.0).unwrap();
        let m = model.clone();
        let reward = RewardSpec::smooth(
            crate::diffusion::real_fn(move |x| m.psi(x) * 1e-9 + 1.0),
            crate::diffusion::real_fn(|_| 1.0),
            vec![],
        );
        let opts = SolverOptions {
            check_inversion: false,
            ..SolverOptions::default()
        };
        let sol = solve(&model, &reward, &opts).unwrap();
        assert!(sol.intervals().is_empty());
        assert_eq!(sol.evaluate(0.3).unwrap(), reward.g(0.3));
    }

    #[test]
    fn resolution_error_on_unresolved_oscillation() {
        let model = make_brownian(1.0, 0.0, 1.0).unwrap();
        let reward = RewardSpec::smooth(
            crate::diffusion::real_fn(|x: f64| x.sin()),
            crate::diffusion::real_fn(|x: f64| (2003.0 * x).sin()),
            vec![],
        );
        let opts = SolverOptions {
            scan_points: 101,
            ..SolverOptions::default()
        };
        assert!(matches!(negative_set(&model, &reward, &opts), Err(Error::Resolution(_))));
    }
}
