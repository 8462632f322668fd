//! Independent checks of the solver: closed-form policy values, exhaustive
//! search over two-gap policies, and a Monte Carlo estimate.

use ostop::{brute_force, make_brownian, monte_carlo_value, policy_value, solve, Interval, Polynomial, RewardSpec, SolverOptions, StoppingPolicy};

fn main() -> ostop::Result<()> {
    let model = make_brownian(2.0, 0.0, 1.0)?;
    let p = Polynomial::from_roots(-1.0, &[-2.0, -1.0, 0.0, 1.0, 2.0])?;
    let reward = RewardSpec::polynomial(&model, p.coefficients())?;
    let solution = solve(&model, &reward, &SolverOptions::default())?;
    let g = reward.g_fn();

    let policy = StoppingPolicy::from_solution(&solution);
    let x = 0.0;
    println!("V(0) = {:.10}, policy value {:.10}", solution.evaluate(x)?, policy_value(&model, &*g, &policy, x)?.value);

    let evals: Vec<f64> = (0..10).map(|i| -4.5 + i as f64).collect();
    let start = std::time::Instant::now();
    let result = brute_force(&model, &*g, &[0, 1, 2], 0.1, Interval::new(-5.0, 5.0)?, &evals, 1 << 32)?;
    println!("scanned {} policies in {:.1?}", result.policies_scanned, start.elapsed());
    for b in &result.best {
        let gaps: Vec<String> = b.gaps.iter().map(|g| g.to_string()).collect();
        println!("x = {:5.2}: best {:10.6}  V {:10.6}  via {}", b.x, b.value, solution.evaluate(b.x)?, gaps.join(" ∪ "));
    }

    let start = std::time::Instant::now();
    let mc = monte_carlo_value(&model, &*g, &policy, x, 20_000, 1e-3, 11)?;
    println!(
        "Monte Carlo at 0: {:.5} ± {:.5} ({:.1?})",
        mc.value,
        mc.stderr,
        start.elapsed()
    );
    Ok(())
}
