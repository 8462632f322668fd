//! The value function built from a continuation region, and its checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::DiffusionModel;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::measure::{Atom, MeasureSpec, QuadratureOptions};
use crate::reward::RewardSpec;
use crate::solver::{ConditionReport, PairNC, SolverOptions};

const DEGENERATE_DENOMINATOR: f64 = 1e-300;

/// One continuation interval with `V = k1·φ + k2·ψ` on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalSolution {
    pub c: Interval,
    pub k1: f64,
    pub k2: f64,
}

/// Bookkeeping from a solver run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub negative_set: Vec<Interval>,
    /// Pairs after the base step, before any merge.
    pub base_pairs: Vec<PairNC>,
    pub iterations: usize,
    pub merges: usize,
    /// Pairs created by merges, in order.
    pub merged: Vec<PairNC>,
    /// Enlargement passes summed over all pairs.
    pub enlarge_passes: usize,
}

/// Where a point sits relative to the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Stop,
    /// Index into [`Solution::intervals`].
    Continue(usize),
}

#[derive(Debug, Clone)]
pub struct Solution {
    model: DiffusionModel,
    reward: RewardSpec,
    intervals: Vec<IntervalSolution>,
    pairs: Vec<PairNC>,
    diagnostics: Vec<ConditionReport>,
    stats: SolveStats,
}

impl Solution {
    /// The solution of an α-excessive reward: stop immediately everywhere.
    pub fn stop_everywhere(model: DiffusionModel, reward: RewardSpec) -> Self {
        Self {
            model,
            reward,
            intervals: Vec::new(),
            pairs: Vec::new(),
            diagnostics: Vec::new(),
            stats: SolveStats::default(),
        }
    }

    pub fn from_pairs(
        model: DiffusionModel,
        reward: RewardSpec,
        mut pairs: Vec<PairNC>,
        diagnostics: Vec<ConditionReport>,
        stats: SolveStats,
    ) -> Result<Self> {
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.sort_by(|&a, &b| pairs[a].c.lo().total_cmp(&pairs[b].c.lo()));
        let diagnostics = if diagnostics.len() == pairs.len() {
            order.iter().map(|&i| diagnostics[i]).collect()
        } else {
            diagnostics
        };
        pairs = order.iter().map(|&i| pairs[i]).collect();
        let cs: Vec<Interval> = pairs.iter().map(|p| p.c).collect();
        let mut out = Self::from_intervals(model, reward, &cs)?;
        out.pairs = pairs;
        out.diagnostics = diagnostics;
        out.stats = stats;
        Ok(out)
    }

    /// Builds the value function for a given continuation region, e.g. one
    /// read back from a report.
    pub fn from_intervals(model: DiffusionModel, reward: RewardSpec, continuation: &[Interval]) -> Result<Self> {
        let mut cs = continuation.to_vec();
        cs.sort_by(|a, b| a.lo().total_cmp(&b.lo()));
        if cs.windows(2).any(|w| w[0].hi() > w[1].lo()) {
            return Err(Error::InvalidParameter("continuation intervals overlap".into()));
        }
        let domain = model.domain();
        let g = reward.g_fn();
        let intervals = cs
            .iter()
            .map(|&c| {
                if !c.is_subset_of(&domain) || c.is_point() {
                    return Err(Error::InvalidParameter(format!(
                        "continuation interval {c} is not an open subinterval of {domain}"
                    )));
                }
                let (k1, k2) = coefficients(&model, &*g, c)?;
                Ok(IntervalSolution { c, k1, k2 })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            model,
            reward,
            intervals,
            pairs: Vec::new(),
            diagnostics: Vec::new(),
            stats: SolveStats::default(),
        })
    }

    pub fn model(&self) -> &DiffusionModel {
        &self.model
    }

    pub fn reward(&self) -> &RewardSpec {
        &self.reward
    }

    pub fn intervals(&self) -> &[IntervalSolution] {
        &self.intervals
    }

    /// Negative spans paired with their continuation intervals.
    pub fn pairs(&self) -> &[PairNC] {
        &self.pairs
    }

    pub fn diagnostics(&self) -> &[ConditionReport] {
        &self.diagnostics
    }

    pub fn stats(&self) -> &SolveStats {
        &self.stats
    }

    pub fn continuation(&self) -> Vec<Interval> {
        self.intervals.iter().map(|s| s.c).collect()
    }

    /// Closed components of the stopping region. A singleton component is
    /// returned as a point interval; `lo`/`hi` at an infinite boundary are
    /// nominal.
    pub fn stopping_set(&self) -> Vec<Interval> {
        let domain = self.model.domain();
        let mut out = Vec::new();
        let mut cursor = domain.lo();
        let mut cursor_open = true; // the domain boundary itself is excluded
        for s in &self.intervals {
            let lo = s.c.lo();
            if lo > cursor || (lo == cursor && !cursor_open) {
                out.push(Interval::new(cursor, lo).expect("ordered endpoints"));
            }
            cursor = s.c.hi();
            cursor_open = cursor >= domain.hi();
        }
        if cursor < domain.hi() {
            out.push(Interval::new(cursor, domain.hi()).expect("ordered endpoints"));
        }
        out
    }

    pub fn region(&self, x: f64) -> Region {
        self.intervals
            .iter()
            .position(|s| s.c.contains(x))
            .map_or(Region::Stop, Region::Continue)
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let domain = self.model.domain();
        if !domain.contains(x) {
            return Err(Error::Domain {
                x,
                lo: domain.lo(),
                hi: domain.hi(),
            });
        }
        Ok(match self.region(x) {
            Region::Stop => self.reward.g(x),
            Region::Continue(i) => {
                let s = &self.intervals[i];
                let mut v = 0.0;
                if s.k1 != 0.0 {
                    v += s.k1 * self.model.phi(x);
                }
                if s.k2 != 0.0 {
                    v += s.k2 * self.model.psi(x);
                }
                v
            }
        })
    }
}

/// Free-function form of [`Solution::evaluate`].
pub fn evaluate(solution: &Solution, x: f64) -> Result<f64> {
    solution.evaluate(x)
}

/// Coefficients `(k1, k2)` of `k1·φ + k2·ψ` matching `g` at the finite ends of `c`.
pub fn coefficients(model: &DiffusionModel, g: &dyn Fn(f64) -> f64, c: Interval) -> Result<(f64, f64)> {
    let domain = model.domain();
    let left_open = c.lo() <= domain.lo();
    let right_open = c.hi() >= domain.hi();
    let checked = |v: f64, what: &str| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Degenerate(format!("{what} is not finite on {c}")))
        }
    };
    match (left_open, right_open) {
        (true, true) => Ok((0.0, 0.0)),
        (true, false) => {
            let r = c.hi();
            Ok((0.0, checked(g(r) / model.psi(r), "k2")?))
        }
        (false, true) => {
            let l = c.lo();
            Ok((checked(g(l) / model.phi(l), "k1")?, 0.0))
        }
        (false, false) => {
            let (l, r) = (c.lo(), c.hi());
            let (pl, pr) = (model.psi(l), model.psi(r));
            let (fl, fr) = (model.phi(l), model.phi(r));
            let (gl, gr) = (g(l), g(r));
            let den = pl * fr - pr * fl;
            if !(den.abs() >= DEGENERATE_DENOMINATOR) {
                return Err(Error::Degenerate(format!(
                    "coefficient system on {c} is singular (determinant {den:e})"
                )));
            }
            let k1 = (gr * pl - gl * pr) / den;
            let k2 = (gl * fr - gr * fl) / den;
            Ok((checked(k1, "k1")?, checked(k2, "k2")?))
        }
    }
}

fn kernel_integral(
    model: &DiffusionModel,
    sigma: &MeasureSpec,
    over: Interval,
    closed: bool,
    x: f64,
    q: &QuadratureOptions,
) -> Result<f64> {
    let kernel = |y: f64| model.green_unchecked(x, y);
    let mut total = sigma.integrate_detailed(&kernel, over, &[x], q)?.value;
    if closed {
        for atom in sigma.atoms() {
            let p = atom.location;
            let on_edge = p == over.lo() || p == over.hi();
            if on_edge && model.domain().contains(p) {
                total += kernel(p) * atom.mass;
            }
        }
    }
    Ok(total)
}

/// `∫_S G(x, y) σ(dy)` over the closed components `stopping`.
pub fn evaluate_integral(
    model: &DiffusionModel,
    sigma: &MeasureSpec,
    stopping: &[Interval],
    x: f64,
    opts: &QuadratureOptions,
) -> Result<f64> {
    let domain = model.domain();
    if !domain.contains(x) {
        return Err(Error::Domain {
            x,
            lo: domain.lo(),
            hi: domain.hi(),
        });
    }
    let mut total = 0.0;
    for &s in stopping {
        total += kernel_integral(model, sigma, s, true, x, opts)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionReport {
    /// `max |g(x) − ∫ G(x, y) σ(dy)|` over the grid.
    pub residual: f64,
    pub max_abs_g: f64,
    pub relative_residual: f64,
    /// `|g|/φ` at the left window edge.
    pub decay_left: f64,
    /// `|g|/ψ` at the right window edge.
    pub decay_right: f64,
}

/// Checks `g(x) = ∫_I G(x, y) σ(dy)` on `grid`.
pub fn verify_inversion(
    model: &DiffusionModel,
    reward: &RewardSpec,
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<InversionReport> {
    let domain = model.domain();
    let sigma = reward.sigma(model);
    let q = opts.quadrature;
    let residuals: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&x| {
            let integral = kernel_integral(model, &sigma, domain, false, x, &q)?;
            let g = reward.g(x);
            Ok(((g - integral).abs(), g.abs()))
        })
        .collect::<Result<_>>()?;
    let residual = residuals.iter().map(|r| r.0).fold(0.0, f64::max);
    let max_abs_g = residuals.iter().map(|r| r.1).fold(0.0, f64::max);
    let window = opts.window_in(domain)?;
    let edge = |x: f64| if domain.contains(x) { Some(x) } else { None };
    let decay_left = edge(window.lo()).map_or(0.0, |x| reward.g(x).abs() / model.phi(x));
    let decay_right = edge(window.hi()).map_or(0.0, |x| reward.g(x).abs() / model.psi(x));
    Ok(InversionReport {
        residual,
        max_abs_g,
        relative_residual: if max_abs_g > 0.0 { residual / max_abs_g } else { residual },
        decay_left,
        decay_right,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub window: Interval,
    pub grid_points: usize,
    pub smooth_fit_step: f64,
    pub harmonic_step: f64,
    pub inversion_points: usize,
    /// Points where the closed form is compared with the integral form.
    pub representation_points: usize,
    pub solver: SolverOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self::from(&SolverOptions::default())
    }
}

impl From<&SolverOptions> for VerifyOptions {
    fn from(o: &SolverOptions) -> Self {
        Self {
            window: o.work_window,
            grid_points: 401,
            smooth_fit_step: 1e-5,
            harmonic_step: 1e-4,
            inversion_points: o.inversion_points,
            representation_points: 50,
            solver: *o,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub inversion_residual: f64,
    pub inversion_relative: f64,
    /// `min (V − g)` over the grid.
    pub majorant_min_gap: f64,
    /// `max |V − g|` over grid points in the stopping region.
    pub stop_region_max_gap: f64,
    /// Largest one-sided derivative mismatch at a finite contact point.
    pub smooth_fit_max: f64,
    pub contact_points: usize,
    /// Contact points on a kink of `g`, left out of `smooth_fit_max`. In the
    /// integral form of `V` the atom of `σ` there is replaced by `V`'s own kink.
    pub kink_contacts: usize,
    /// `max |(α − L)V|` over continuation grid points.
    pub harmonicity_max: f64,
    /// `harmonicity_max` divided by `max |αV|` over the same points.
    pub harmonicity_relative: f64,
    /// Largest relative gap between the closed form and the integral form of `V`.
    pub representation_max: f64,
    /// Largest relative boundary-condition residual across the solver's pairs.
    pub condition_residual_max: f64,
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

/// Numerical checks of a solution; never fails on a bad solution, only on a
/// bad evaluation.
pub fn verify_solution(solution: &Solution, opts: &VerifyOptions) -> Result<VerificationReport> {
    let model = solution.model();
    let reward = solution.reward();
    let domain = model.domain();
    let window = domain
        .intersect(&opts.window)
        .ok_or_else(|| Error::InvalidParameter("verification window does not meet the state space".into()))?;
    let inner = |x: f64| domain.contains(x);
    let grid: Vec<f64> = window.linspace(opts.grid_points).into_iter().filter(|&x| inner(x)).collect();

    let mut solver_opts = opts.solver;
    solver_opts.work_window = window;
    let inv_grid: Vec<f64> = window
        .linspace(opts.inversion_points)
        .into_iter()
        .filter(|&x| inner(x))
        .collect();
    let inversion = verify_inversion(model, reward, &inv_grid, &solver_opts)?;

    let mut majorant = f64::INFINITY;
    let mut stop_gap: f64 = 0.0;
    for &x in &grid {
        let v = solution.evaluate(x)?;
        let g = reward.g(x);
        majorant = majorant.min(v - g);
        if solution.region(x) == Region::Stop {
            stop_gap = stop_gap.max((v - g).abs());
        }
    }

    let sigma = reward.sigma(model);
    let h = opts.smooth_fit_step;
    let v = |x: f64| solution.evaluate(x);
    let mut smooth_fit: f64 = 0.0;
    let mut contacts = 0;
    // contact points on a kink of g: no smooth fit expected, and V's own kink
    // replaces the atom of σ there
    let mut kink_atoms: Vec<Atom> = Vec::new();
    for s in solution.intervals() {
        for p in [s.c.lo(), s.c.hi()] {
            if !(inner(p - 2.0 * h) && inner(p + 2.0 * h)) {
                continue;
            }
            let left = (3.0 * v(p)? - 4.0 * v(p - h)? + v(p - 2.0 * h)?) / (2.0 * h);
            let right = (-3.0 * v(p)? + 4.0 * v(p + h)? - v(p + 2.0 * h)?) / (2.0 * h);
            if sigma.atoms().iter().any(|a| a.location == p) {
                if !kink_atoms.iter().any(|a| a.location == p) {
                    kink_atoms.push(Atom {
                        location: p,
                        mass: (left - right) / model.scale_density(p),
                    });
                }
                continue;
            }
            smooth_fit = smooth_fit.max((left - right).abs());
            contacts += 1;
        }
    }

    let hh = opts.harmonic_step;
    let alpha = model.alpha();
    let mut harm: f64 = 0.0;
    let mut harm_scale: f64 = 0.0;
    for &x in &grid {
        let Region::Continue(i) = solution.region(x) else { continue };
        let c = solution.intervals()[i].c;
        if !(c.contains(x - 2.0 * hh) && c.contains(x + 2.0 * hh)) {
            continue;
        }
        let vx = v(x)?;
        let lv = model.feller_generator(|y| solution.evaluate(y).unwrap_or(f64::NAN), x, hh);
        harm = harm.max((alpha * vx - lv).abs());
        harm_scale = harm_scale.max((alpha * vx).abs());
    }

    let kink_contacts = kink_atoms.len();
    let sigma = if kink_atoms.is_empty() {
        sigma
    } else {
        let mut atoms: Vec<Atom> = sigma
            .atoms()
            .iter()
            .filter(|a| !kink_atoms.iter().any(|k| k.location == a.location))
            .copied()
            .chain(kink_atoms.iter().copied())
            .collect();
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        sigma.with_atoms(atoms)?
    };
    let stopping = solution.stopping_set();
    let rep_points: Vec<f64> = window
        .linspace(opts.representation_points + 2)
        .into_iter()
        .filter(|&x| inner(x) && x > window.lo() && x < window.hi())
        .collect();
    let rep = rep_points
        .par_iter()
        .map(|&x| {
            let integral = evaluate_integral(model, &sigma, &stopping, x, &opts.solver.quadrature)?;
            Ok(relative(integral, solution.evaluate(x)?))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let condition_residual_max = solution
        .diagnostics()
        .iter()
        .map(|d| d.max_relative_residual())
        .fold(0.0, f64::max);

    Ok(VerificationReport {
        inversion_residual: inversion.residual,
        inversion_relative: inversion.relative_residual,
        majorant_min_gap: if majorant.is_finite() { majorant } else { 0.0 },
        stop_region_max_gap: stop_gap,
        smooth_fit_max: smooth_fit,
        contact_points: contacts,
        kink_contacts,
        harmonicity_max: harm,
        harmonicity_relative: if harm_scale > 0.0 { harm / harm_scale } else { harm },
        representation_max: rep,
        condition_residual_max,
    })
}
