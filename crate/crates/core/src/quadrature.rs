//! Globally adaptive 21-point Gauss–Kronrod quadrature on bounded intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod abscissae on [0, 1); the Gauss nodes are the odd entries.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_980_093_406,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    /// Integral of `|f|`, used to bound roundoff.
    pub abs_value: f64,
}

impl Estimate {
    pub const ZERO: Estimate = Estimate {
        value: 0.0,
        error: 0.0,
        abs_value: 0.0,
    };
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

fn eval<F: FnMut(f64) -> f64>(f: &mut F, x: f64) -> Result<f64> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { x })
    }
}

/// One G10K21 panel on `[a, b]`.
pub fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Estimate> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = eval(f, center)?;
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut abs = WGK[10] * fc.abs();
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(f, center - dx)?;
        let f2 = eval(f, center + dx)?;
        kronrod += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let width = half.abs();
    Ok(Estimate {
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
        abs_value: abs * width,
    })
}

/// Adaptive integration of `f` over `[a, b]`, first split at `breaks`.
///
/// Stops once the summed error estimate is below
/// `max(abs_tol, rel_tol·|I|, 64·ε·∫|f|)`; the last term keeps cancelling
/// integrands from chasing accuracy below roundoff. Panels whose error does
/// not shrink when split are left alone once they are under that tolerance.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_subdivisions: usize,
) -> Result<Estimate> {
    if !(a < b) {
        return Ok(Estimate::ZERO);
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&p| a < p && p < b).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(a);
    nodes.extend(cuts);
    nodes.push(b);

    let mut heap = BinaryHeap::with_capacity(nodes.len() * 4);
    let mut total = Estimate::ZERO;
    for w in nodes.windows(2) {
        let est = gk21(&mut f, w[0], w[1])?;
        total.value += est.value;
        total.error += est.error;
        total.abs_value += est.abs_value;
        heap.push(Panel { a: w[0], b: w[1], est });
    }

    let tolerance = |t: &Estimate| {
        abs_tol
            .max(rel_tol * t.value.abs())
            .max(64.0 * f64::EPSILON * t.abs_value)
    };

    // panels whose error no longer drops on splitting are integrand roundoff
    // (a polynomial density near its root, say); they stop being refined but
    // still count towards the reported error
    let mut frozen: Vec<Panel> = Vec::new();
    let mut frozen_error = 0.0;
    let mut splits = 0usize;
    while total.error - frozen_error > tolerance(&total) {
        if splits >= max_subdivisions {
            return Err(Error::Accuracy {
                estimate: total.value,
                error: total.error,
                reason: format!("subdivision budget of {max_subdivisions} exhausted"),
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            // panel cannot be split further in floating point
            heap.push(worst);
            return Err(Error::Accuracy {
                estimate: total.value,
                error: total.error,
                reason: "panel width reached floating-point resolution".into(),
            });
        }
        let left = gk21(&mut f, worst.a, mid)?;
        let right = gk21(&mut f, mid, worst.b)?;
        total.value += left.value + right.value - worst.est.value;
        total.error += left.error + right.error - worst.est.error;
        total.abs_value += left.abs_value + right.abs_value - worst.est.abs_value;
        let children = [Panel { a: worst.a, b: mid, est: left }, Panel { a: mid, b: worst.b, est: right }];
        if left.error + right.error >= 0.7 * worst.est.error && worst.est.error <= tolerance(&total) {
            frozen_error += left.error + right.error;
            frozen.extend(children);
        } else {
            heap.extend(children);
        }
        splits += 1;
    }
    // re-sum to shed accumulated update drift
    let mut out = Estimate::ZERO;
    for p in heap.iter().chain(&frozen) {
        out.value += p.est.value;
        out.error += p.est.error;
        out.abs_value += p.est.abs_value;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_panel_is_exact_for_polynomials() {
        // Kronrod 21 integrates degree 31 exactly
        let est = gk21(&mut |x: f64| x.powi(10) - 3.0 * x.powi(3), -1.0, 2.0).unwrap();
        let exact = (2f64.powi(11) + 1.0) / 11.0 - 0.75 * (16.0 - 1.0);
        assert!((est.value - exact).abs() < 1e-12);
    }

    #[test]
    fn exponential() {
        let est = integrate_adaptive(|x: f64| (-2.0 * x).exp(), 0.0, 30.0, &[], 1e-12, 1e-15, 1000).unwrap();
        assert!((est.value - 0.5 * (1.0 - (-60f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn kink_is_handled_by_breakpoint() {
        let est = integrate_adaptive(|x: f64| x.abs(), -1.0, 2.0, &[0.0], 1e-12, 1e-15, 10).unwrap();
        assert!((est.value - 2.5).abs() < 1e-14);
        assert!(est.error < 1e-12);
    }

    #[test]
    fn integrand_noise_does_not_exhaust_the_budget() {
        // exact integral 0, with evaluation noise far above abs_tol
        let noisy = |x: f64| x + 1e-9 * ((x * 1e7).sin() * 43758.5453).fract();
        let est = integrate_adaptive(noisy, -1.0, 1.0, &[], 1e-9, 1e-15, 1 << 12).unwrap();
        assert!(est.value.abs() < 1e-8);
    }

    #[test]
    fn empty_interval() {
        let est = integrate_adaptive(|_| 1.0, 1.0, 1.0, &[], 1e-9, 1e-12, 10).unwrap();
        assert_eq!(est, Estimate::ZERO);
    }

    #[test]
    fn budget_exhaustion_reports_best_estimate() {
        let err = integrate_adaptive(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, &[], 1e-14, 1e-16, 3).unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. }));
    }

    #[test]
    fn non_finite_is_an_error() {
        let err = integrate_adaptive(|x: f64| 1.0 / (x - 0.5), 0.0, 1.0, &[], 1e-9, 1e-12, 100);
        // the panel centre lands on the pole
        assert!(err.is_err());
    }
}
