//! A piecewise-linear reward with kinks at 1 and 2, represented through a
//! measure with atoms at the kinks rather than through `(α − L)g`.

use ostop::{make_brownian, solve, Atom, RewardKind, RewardSpec, SolverOptions};

fn main() -> ostop::Result<()> {
    let model = make_brownian(1.0, 0.0, 1.0)?;
    // g(x) = x for x < 1, 2 − x on [1, 2], x − 2 for x > 2
    let reward = RewardSpec::piecewise_linear(&model, &[(1.0, 1.0), (2.0, 0.0)], Some(1.0), Some(1.0))?;
    if let RewardKind::Represented { nu } = reward.kind() {
        for Atom { location, mass } in nu.atoms() {
            println!("atom at {location}: mass {mass}");
        }
        println!("density at 0.5: {} (2g = {})", nu.density(0.5), 2.0 * reward.g(0.5));
    }
    let solution = solve(&model, &reward, &SolverOptions::default())?;
    for s in solution.intervals() {
        println!("continuation {}  k1 = {:.4}  k2 = {:.4}", s.c, s.k1, s.k2);
    }
    println!(
        "k2 of the first interval against 1/(e√2): {:.6} vs {:.6}",
        solution.intervals()[0].k2,
        1.0 / (std::f64::consts::E * 2f64.sqrt())
    );
    Ok(())
}
