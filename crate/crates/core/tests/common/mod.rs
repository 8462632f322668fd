#![allow(dead_code)]

use ostop::{make_brownian, DiffusionModel, Polynomial, RewardSpec};

/// `g(x) = −(x + 2)(x + 1)x(x − 1)(x − 2)` under standard Brownian motion.
pub fn quintic(alpha: f64) -> (DiffusionModel, RewardSpec) {
    let model = make_brownian(alpha, 0.0, 1.0).unwrap();
    let p = Polynomial::from_roots(-1.0, &[-2.0, -1.0, 0.0, 1.0, 2.0]).unwrap();
    let reward = RewardSpec::polynomial(&model, p.coefficients()).unwrap();
    (model, reward)
}

/// `g = |x − 1|` pieces: slope 1 left of 1, down to 0 at 2, then slope 1.
pub fn kinked(alpha: f64) -> (DiffusionModel, RewardSpec) {
    let model = make_brownian(alpha, 0.0, 1.0).unwrap();
    let reward = RewardSpec::piecewise_linear(&model, &[(1.0, 1.0), (2.0, 0.0)], Some(1.0), Some(1.0)).unwrap();
    (model, reward)
}

/// Positive roots of `a x⁴ + b x² + c`, ascending.
pub fn biquadratic_roots(a: f64, b: f64, c: f64) -> [f64; 2] {
    let d = (b * b - 4.0 * a * c).sqrt();
    let mut r = [((-b - d) / (2.0 * a)).sqrt(), ((-b + d) / (2.0 * a)).sqrt()];
    r.sort_by(f64::total_cmp);
    r
}
