//! Perpetual American put under geometric Brownian motion, set up from its
//! scale and speed densities and fundamental solutions.
//!
//! With interest rate `r` equal to the discount rate, `ψ(x) = x` and
//! `φ(x) = x^(-γ)` with `γ = 2r/σ²`; the exercise boundary is `γK/(γ + 1)`.

use ostop::{real_fn, solve, verify_solution, CustomDiffusion, Interval, RewardSpec, SolverOptions, VerifyOptions};

fn main() -> ostop::Result<()> {
    let (r, sigma, strike) = (0.04, 0.2, 1.0);
    let gamma = 2.0 * r / (sigma * sigma);
    let model = CustomDiffusion {
        domain: Interval::new(0.0, f64::INFINITY)?,
        alpha: r,
        phi: real_fn(move |x| x.powf(-gamma)),
        psi: real_fn(|x| x),
        scale_density: real_fn(move |x| x.powf(-gamma)),
        speed_density: real_fn(move |x| 2.0 / (sigma * sigma * x * x * x.powf(-gamma))),
        reference_point: Some(1.0),
    }
    .build()?;
    println!("Wronskian {:.6} (closed form {:.6})", model.wronskian(), 1.0 + gamma);

    // (K − x)⁺: slope −1 left of the strike, flat beyond it
    let reward = RewardSpec::piecewise_linear(&model, &[(strike, 0.0)], Some(-1.0), Some(0.0))?;
    let solution = solve(&model, &reward, &SolverOptions::default())?;
    for s in solution.intervals() {
        println!("continuation {}  k1 = {:.6}  k2 = {:.6}", s.c, s.k1, s.k2);
    }
    let boundary = solution.intervals()[0].c.lo();
    println!("exercise boundary {boundary:.8} (closed form {:.8})", gamma * strike / (gamma + 1.0));

    let report = verify_solution(&solution, &VerifyOptions::default())?;
    println!("smooth fit mismatch {:.2e}", report.smooth_fit_max);
    for x in [0.5, 0.8, 1.0, 1.5] {
        println!("V({x}) = {:.6}  g = {:.6}", solution.evaluate(x)?, reward.g(x));
    }
    Ok(())
}
