//! Independent evaluation of interval stopping policies.
//!
//! A policy stops on first entry into a closed set. Its value is computed
//! gap by gap from boundary data alone, so comparing policies here checks the
//! solver's region without reusing any of its region-finding code.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::diffusion::{DiffusionModel, Family};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::value::{coefficients, Solution};

/// Stop on first entry into `stop_set`, a sorted list of disjoint closed
/// intervals. Infinite endpoints are nominal.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingPolicy {
    stop_set: Vec<Interval>,
}

impl StoppingPolicy {
    pub fn new(mut stop_set: Vec<Interval>) -> Result<Self> {
        stop_set.sort_by(|a, b| a.lo().total_cmp(&b.lo()));
        if stop_set.windows(2).any(|w| w[0].hi() >= w[1].lo()) {
            return Err(Error::InvalidParameter("stopping components must be disjoint".into()));
        }
        Ok(Self { stop_set })
    }

    pub fn stop_everywhere(domain: Interval) -> Self {
        Self { stop_set: vec![domain] }
    }

    pub fn never_stop() -> Self {
        Self { stop_set: Vec::new() }
    }

    /// The policy whose continuation region is `gaps`.
    pub fn from_gaps(domain: Interval, gaps: &[Interval]) -> Result<Self> {
        let mut gaps = gaps.to_vec();
        gaps.sort_by(|a, b| a.lo().total_cmp(&b.lo()));
        if gaps.windows(2).any(|w| w[0].hi() > w[1].lo()) {
            return Err(Error::InvalidParameter("continuation gaps overlap".into()));
        }
        let mut stop = Vec::new();
        let mut cursor = domain.lo();
        let mut first = true;
        for gap in &gaps {
            if gap.lo() > cursor || (gap.lo() == cursor && !first) {
                stop.push(Interval::new(cursor, gap.lo())?);
            }
            cursor = gap.hi();
            first = false;
        }
        if cursor < domain.hi() {
            stop.push(Interval::new(cursor, domain.hi())?);
        }
        Self::new(stop)
    }

    /// The stopping region of a computed solution.
    pub fn from_solution(solution: &Solution) -> Self {
        Self {
            stop_set: solution.stopping_set(),
        }
    }

    pub fn stop_set(&self) -> &[Interval] {
        &self.stop_set
    }

    pub fn stops_at(&self, x: f64) -> bool {
        self.stop_set.iter().any(|s| s.contains_closed(x))
    }

    /// The open gap of the continuation region containing `x`, or `None`
    /// when `x` is in the stopping set.
    pub fn gap_containing(&self, domain: Interval, x: f64) -> Option<Interval> {
        if self.stops_at(x) {
            return None;
        }
        let lo = self
            .stop_set
            .iter()
            .filter(|s| s.hi() < x)
            .map(|s| s.hi())
            .fold(domain.lo(), f64::max);
        let hi = self
            .stop_set
            .iter()
            .filter(|s| s.lo() > x)
            .map(|s| s.lo())
            .fold(domain.hi(), f64::min);
        Interval::new(lo, hi).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate {
    pub value: f64,
    /// Zero for deterministic evaluations.
    pub stderr: f64,
}

impl OracleEstimate {
    fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }
}

fn check_domain(model: &DiffusionModel, x: f64) -> Result<()> {
    let d = model.domain();
    if d.contains(x) {
        Ok(())
    } else {
        Err(Error::Domain {
            x,
            lo: d.lo(),
            hi: d.hi(),
        })
    }
}

/// `E_x[e^{−ατ} g(X_τ)]` for the exit time `τ` of `gap`, given `x ∈ gap`.
fn exit_value<G: Fn(f64) -> f64 + ?Sized>(model: &DiffusionModel, g: &G, gap: Interval, x: f64) -> Result<f64> {
    let (k1, k2) = coefficients(model, &|y| g(y), gap)?;
    let mut v = 0.0;
    if k1 != 0.0 {
        v += k1 * model.phi(x);
    }
    if k2 != 0.0 {
        v += k2 * model.psi(x);
    }
    Ok(v)
}

/// Value of `policy` started at `x`, in closed form.
pub fn policy_value<G: Fn(f64) -> f64 + ?Sized>(
    model: &DiffusionModel,
    g: &G,
    policy: &StoppingPolicy,
    x: f64,
) -> Result<OracleEstimate> {
    check_domain(model, x)?;
    match policy.gap_containing(model.domain(), x) {
        None => Ok(OracleEstimate::exact(g(x))),
        Some(gap) => exit_value(model, g, gap, x).map(OracleEstimate::exact),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceBest {
    pub x: f64,
    pub value: f64,
    /// Continuation gaps of the best policy; empty means stop immediately.
    pub gaps: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub best: Vec<BruteForceBest>,
    pub policies_scanned: u128,
}

/// Number of gap placements with `k` gaps over `m` grid points plus the two
/// boundary candidates, following the rules of [`brute_force`].
fn placement_count(k: usize, m: usize) -> u128 {
    if k == 0 {
        return 1;
    }
    let n = m + 2;
    // starts[i]: ways to open the next gap at endpoint i
    let mut starts: Vec<u128> = (0..n).map(|i| u128::from(i < n - 1)).collect();
    let mut ends = vec![0u128; n];
    for level in 0..k {
        let last = level + 1 == k;
        let mut running = 0u128;
        for j in 0..n {
            ends[j] = if j == 0 || (j == n - 1 && !last) { 0 } else { running };
            running = running.saturating_add(starts[j]);
        }
        // a later gap may open where the previous one closed, but not at a boundary
        let mut acc = 0u128;
        for i in 0..n {
            acc = acc.saturating_add(ends[i]);
            starts[i] = if i == 0 || i == n - 1 { 0 } else { acc };
        }
    }
    ends.iter().fold(0u128, |a, &b| a.saturating_add(b))
}

struct Search<'a> {
    endpoints: &'a [f64],
    evals: &'a [f64],
    stop_values: &'a [f64],
    /// exit[(i·n + j)·e + p]: value at eval `p` of the gap `(E_i, E_j)`, NaN
    /// when the eval point is outside it.
    exit: &'a [f64],
    k: usize,
}

#[derive(Clone)]
struct Best {
    value: Vec<f64>,
    tuple: Vec<Vec<usize>>,
}

impl Search<'_> {
    fn n(&self) -> usize {
        self.endpoints.len()
    }

    fn descend(&self, depth: usize, start_min: usize, values: &mut [f64], tuple: &mut Vec<usize>, best: &mut Best, count: &mut u128) {
        let n = self.n();
        let e = self.evals.len();
        let last = depth + 1 == self.k;
        for i in start_min.max(1)..n - 1 {
            for j in i + 1..n {
                // only the last gap may end at the right boundary
                if j == n - 1 && !last {
                    continue;
                }
                let row = &self.exit[(i * n + j) * e..(i * n + j + 1) * e];
                if last {
                    *count += 1;
                    for p in 0..e {
                        let v = if row[p].is_nan() { values[p] } else { row[p] };
                        if v > best.value[p] {
                            best.value[p] = v;
                            best.tuple[p].clone_from(tuple);
                            best.tuple[p].extend([i, j]);
                        }
                    }
                    continue;
                }
                let saved = values.to_vec();
                for p in 0..e {
                    if !row[p].is_nan() {
                        values[p] = row[p];
                    }
                }
                tuple.extend([i, j]);
                self.descend(depth + 1, j, values, tuple, best, count);
                tuple.truncate(tuple.len() - 2);
                values.copy_from_slice(&saved);
            }
        }
    }
}

/// Exhaustive search over interval policies with the given numbers of gaps.
///
/// Gap endpoints range over the grid `window.lo() + i·step` plus the two
/// state-space boundaries. Every monotone placement is scored at every
/// evaluation point, and the best score and placement per point are
/// returned. Fails with a budget error when more than `budget` placements
/// would be scanned.
pub fn brute_force<G: Fn(f64) -> f64 + Sync + ?Sized>(
    model: &DiffusionModel,
    g: &G,
    templates: &[usize],
    step: f64,
    window: Interval,
    eval_points: &[f64],
    budget: u128,
) -> Result<BruteForceResult> {
    if !(step > 0.0) || !window.is_bounded() || window.is_point() {
        return Err(Error::InvalidParameter("brute force needs a positive step and a bounded window".into()));
    }
    for &x in eval_points {
        check_domain(model, x)?;
    }
    let domain = model.domain();
    let inner = window.intersect(&domain).ok_or_else(|| {
        Error::InvalidParameter("search window does not meet the state space".into())
    })?;
    let m = ((window.width() / step) + 1e-9).floor() as usize + 1;
    let mut endpoints = vec![domain.lo()];
    endpoints.extend(
        (0..m)
            .map(|i| window.lo() + i as f64 * step)
            .filter(|&x| inner.contains(x) || (x == inner.lo() && x > domain.lo()) || (x == inner.hi() && x < domain.hi())),
    );
    endpoints.push(domain.hi());
    let grid_len = endpoints.len() - 2;

    let required: u128 = templates
        .iter()
        .map(|&k| placement_count(k, grid_len))
        .fold(0u128, |a, b| a.saturating_add(b));
    if required > budget {
        return Err(Error::Budget { required, limit: budget });
    }

    let n = endpoints.len();
    let e = eval_points.len();
    let stop_values: Vec<f64> = eval_points.iter().map(|&x| g(x)).collect();
    let exit: Vec<f64> = (0..n * n)
        .into_par_iter()
        .flat_map_iter(|ij| {
            let (i, j) = (ij / n, ij % n);
            let gap = if i < j { Interval::new(endpoints[i], endpoints[j]).ok() } else { None };
            eval_points
                .iter()
                .map(move |&x| match gap {
                    Some(gap) if gap.contains(x) => exit_value(model, g, gap, x).unwrap_or(f64::NAN),
                    _ => f64::NAN,
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let mut best = Best {
        value: stop_values.clone(),
        tuple: vec![Vec::new(); e],
    };
    let mut scanned = 0u128;
    for &k in templates {
        if k == 0 {
            scanned += 1;
            continue;
        }
        let search = Search {
            endpoints: &endpoints,
            evals: eval_points,
            stop_values: &stop_values,
            exit: &exit,
            k,
        };
        // split on the first gap's left endpoint; merge in index order
        let parts: Vec<(Best, u128)> = (0..n - 1)
            .into_par_iter()
            .map(|first| {
                let mut local = Best {
                    value: vec![f64::NEG_INFINITY; e],
                    tuple: vec![Vec::new(); e],
                };
                let mut count = 0u128;
                let mut values = search.stop_values.to_vec();
                let mut tuple = Vec::with_capacity(2 * k);
                for j in first + 1..n {
                    if j == n - 1 && k > 1 {
                        continue;
                    }
                    let base = (first * n + j) * e;
                    values.copy_from_slice(search.stop_values);
                    for (slot, &v) in values.iter_mut().zip(&search.exit[base..base + e]) {
                        if !v.is_nan() {
                            *slot = v;
                        }
                    }
                    tuple.clear();
                    tuple.extend([first, j]);
                    if k == 1 {
                        count += 1;
                        for (p, &v) in values.iter().enumerate() {
                            if v > local.value[p] {
                                local.value[p] = v;
                                local.tuple[p].clone_from(&tuple);
                            }
                        }
                    } else {
                        search.descend(1, j, &mut values, &mut tuple, &mut local, &mut count);
                    }
                }
                (local, count)
            })
            .collect();
        for (local, count) in parts {
            scanned += count;
            for p in 0..e {
                if local.value[p] > best.value[p] {
                    best.value[p] = local.value[p];
                    best.tuple[p].clone_from(&local.tuple[p]);
                }
            }
        }
    }

    let best = eval_points
        .iter()
        .enumerate()
        .map(|(p, &x)| {
            let gaps = best.tuple[p]
                .chunks(2)
                .map(|c| Interval::new(endpoints[c[0]], endpoints[c[1]]))
                .collect::<Result<_>>()?;
            Ok(BruteForceBest {
                x,
                value: best.value[p],
                gaps,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BruteForceResult {
        best,
        policies_scanned: scanned,
    })
}

const PATHS_PER_CHUNK: usize = 4096;
const DISCOUNT_CUTOFF: f64 = 1e-9;

/// Euler–Maruyama estimate of the policy value for a Brownian model.
///
/// A step that lands beyond a gap boundary stops at the boundary with the
/// crossing time interpolated linearly inside the step. A step that stays
/// inside the gap may still have crossed; that event is sampled from the
/// Brownian-bridge crossing probability. Paths whose discount factor falls
/// below `1e-9` pay nothing. Chunk `c` of paths draws from stream `c` of a
/// ChaCha8 generator seeded with `seed`, so results do not depend on the
/// thread count.
pub fn monte_carlo_value<G: Fn(f64) -> f64 + Sync + ?Sized>(
    model: &DiffusionModel,
    g: &G,
    policy: &StoppingPolicy,
    x: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<OracleEstimate> {
    let Family::Brownian { drift, volatility } = model.family() else {
        return Err(Error::InvalidParameter("Monte Carlo needs a Brownian model".into()));
    };
    if n_paths < 2 || !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need n_paths >= 2 and a positive dt (got {n_paths}, {dt})"
        )));
    }
    check_domain(model, x)?;
    let Some(gap) = policy.gap_containing(model.domain(), x) else {
        return Ok(OracleEstimate::exact(g(x)));
    };
    if !gap.lo().is_finite() && !gap.hi().is_finite() {
        return Ok(OracleEstimate::exact(0.0));
    }
    let (a, b) = (gap.lo(), gap.hi());
    let (ga, gb) = (
        if a.is_finite() { g(a) } else { 0.0 },
        if b.is_finite() { g(b) } else { 0.0 },
    );
    let alpha = model.alpha();
    let step_discount = (-alpha * dt).exp();
    let half_discount = (-0.5 * alpha * dt).exp();
    let sd = volatility * dt.sqrt();
    let bridge_scale = 2.0 / (volatility * volatility * dt);

    let chunks = n_paths.div_ceil(PATHS_PER_CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let paths = PATHS_PER_CHUNK.min(n_paths - chunk * PATHS_PER_CHUNK);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..paths {
                let mut pos = x;
                let mut discount = 1.0;
                let payoff = loop {
                    let z: f64 = rng.sample(StandardNormal);
                    let next = pos + drift * dt + sd * z;
                    if next <= a {
                        let theta = (pos - a) / (pos - next);
                        break discount * (-alpha * theta * dt).exp() * ga;
                    }
                    if next >= b {
                        let theta = (b - pos) / (next - pos);
                        break discount * (-alpha * theta * dt).exp() * gb;
                    }
                    let p_lo = if a.is_finite() { (-bridge_scale * (pos - a) * (next - a)).exp() } else { 0.0 };
                    let p_hi = if b.is_finite() { (-bridge_scale * (b - pos) * (b - next)).exp() } else { 0.0 };
                    if p_lo > 1e-12 || p_hi > 1e-12 {
                        let u: f64 = rng.random();
                        if u < p_lo {
                            break discount * half_discount * ga;
                        }
                        if u < p_lo + p_hi {
                            break discount * half_discount * gb;
                        }
                    }
                    pos = next;
                    discount *= step_discount;
                    if discount < DISCOUNT_CUTOFF {
                        break 0.0;
                    }
                };
                s1 += payoff;
                s2 += payoff * payoff;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1));
    let n = n_paths as f64;
    let mean = s1 / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(OracleEstimate {
        value: mean,
        stderr: (var / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::make_brownian;

    #[test]
    fn trivial_policies() {
        let model = make_brownian(1.0, 0.0, 1.0).unwrap();
        let g = |x: f64| 1.0 + x * x;
        let all = StoppingPolicy::stop_everywhere(model.domain());
        let none = StoppingPolicy::never_stop();
        assert_eq!(policy_value(&model, &g, &all, 0.7).unwrap(), OracleEstimate::exact(g(0.7)));
        assert_eq!(policy_value(&model, &g, &none, 0.7).unwrap(), OracleEstimate::exact(0.0));
        let mc = monte_carlo_value(&model, &g, &all, 0.7, 100, 1e-3, 1).unwrap();
        assert_eq!(mc, OracleEstimate::exact(g(0.7)));
    }

    #[test]
    fn one_sided_gap_is_laplace_transform() {
        let model = make_brownian(1.0, 0.3, 0.8).unwrap();
        let policy = StoppingPolicy::new(vec![Interval::point(1.0).unwrap()]).unwrap();
        for x in [-1.0, 0.5, 2.0] {
            let v = policy_value(&model, &|_| 1.0, &policy, x).unwrap().value;
            assert!((v - model.laplace_hitting(x, 1.0).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn gaps_round_trip() {
        let domain = Interval::real_line();
        let gaps = [Interval::new(f64::NEG_INFINITY, -1.0).unwrap(), Interval::new(0.0, 2.0).unwrap()];
        let policy = StoppingPolicy::from_gaps(domain, &gaps).unwrap();
        assert_eq!(
            policy.stop_set(),
            &[Interval::new(-1.0, 0.0).unwrap(), Interval::new(2.0, f64::INFINITY).unwrap()]
        );
        assert_eq!(policy.gap_containing(domain, 1.0), Some(gaps[1]));
        assert_eq!(policy.gap_containing(domain, -5.0), Some(gaps[0]));
        assert_eq!(policy.gap_containing(domain, 2.0), None);
    }

    #[test]
    fn placement_counts() {
        // one gap over m grid points and two boundaries: C(m + 2, 2)
        for m in [1usize, 3, 10] {
            let n = (m + 2) as u128;
            assert_eq!(placement_count(1, m), n * (n - 1) / 2, "m = {m}");
        }
        assert_eq!(placement_count(0, 5), 1);
    }

    #[test]
    fn brute_force_counts_match_enumeration() {
        let model = make_brownian(1.0, 0.0, 1.0).unwrap();
        let g = |x: f64| (1.0 - x * x).max(0.0);
        let window = Interval::new(-1.0, 1.0).unwrap();
        for k in [1usize, 2, 3] {
            let res = brute_force(&model, &g, &[k], 0.5, window, &[0.1], u128::MAX).unwrap();
            assert_eq!(res.policies_scanned, placement_count(k, 5), "k = {k}");
        }
    }

    #[test]
    fn zero_gap_template_is_stopping() {
        let model = make_brownian(1.0, 0.0, 1.0).unwrap();
        let g = |x: f64| x;
        let window = Interval::new(-1.0, 1.0).unwrap();
        let res = brute_force(&model, &g, &[0], 0.1, window, &[0.3, -0.2], 10).unwrap();
        assert_eq!(res.best[0].value, 0.3);
        assert!(res.best[1].gaps.is_empty());
    }

    #[test]
    fn budget_is_enforced() {
        let model = make_brownian(1.0, 0.0, 1.0).unwrap();
        let window = Interval::new(-5.0, 5.0).unwrap();
        let err = brute_force(&model, &|x: f64| x, &[2], 0.05, window, &[0.0], 1000).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }

    #[test]
    fn monte_carlo_is_reproducible_and_rejects_bad_input() {
        let model = make_brownian(1.0, 0.0, 1.0).unwrap();
        let policy = StoppingPolicy::new(vec![Interval::point(0.5).unwrap()]).unwrap();
        let a = monte_carlo_value(&model, &|_| 1.0, &policy, 0.0, 5000, 1e-2, 7).unwrap();
        let b = monte_carlo_value(&model, &|_| 1.0, &policy, 0.0, 5000, 1e-2, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.stderr > 0.0);
        assert!(monte_carlo_value(&model, &|_| 1.0, &policy, 0.0, 1, 1e-2, 7).is_err());
        assert!(monte_carlo_value(&model, &|_| 1.0, &policy, 0.0, 100, 0.0, 7).is_err());
        let custom = crate::diffusion::CustomDiffusion {
            domain: Interval::real_line(),
            alpha: 0.5,
            phi: crate::diffusion::real_fn(|x| (-x).exp()),
            psi: crate::diffusion::real_fn(f64::exp),
            scale_density: crate::diffusion::real_fn(|_| 1.0),
            speed_density: crate::diffusion::real_fn(|_| 2.0),
            reference_point: None,
        }
        .build()
        .unwrap();
        assert!(monte_carlo_value(&custom, &|_| 1.0, &policy, 0.0, 100, 1e-2, 7).is_err());
    }
}
