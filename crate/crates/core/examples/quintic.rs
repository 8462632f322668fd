//! Quintic reward `g(x) = −(x−2)(x−1)x(x+1)(x+2)` under standard Brownian
//! motion. At `α = 2` the three negative intervals enlarge to disjoint
//! continuation intervals; at `α = 1.5` the first two enlargements overlap
//! and are merged.

use ostop::{make_brownian, solve, Polynomial, RewardSpec, SolverOptions};

fn main() -> ostop::Result<()> {
    let g = Polynomial::from_roots(-1.0, &[-2.0, -1.0, 0.0, 1.0, 2.0])?;
    println!("g coefficients (ascending): {:?}", g.coefficients());
    for alpha in [2.0, 1.5] {
        let model = make_brownian(alpha, 0.0, 1.0)?;
        let reward = RewardSpec::polynomial(&model, g.coefficients())?;
        let start = std::time::Instant::now();
        let solution = solve(&model, &reward, &SolverOptions::default())?;
        let stats = solution.stats();
        println!("\nalpha = {alpha}  ({:.1} ms)", start.elapsed().as_secs_f64() * 1e3);
        for n in &stats.negative_set {
            println!("  negative     {n}");
        }
        for p in &stats.base_pairs {
            println!("  enlarged     {} -> {}", p.n, p.c);
        }
        for p in &stats.merged {
            println!("  merged       {} -> {}", p.n, p.c);
        }
        for s in solution.intervals() {
            println!("  continuation {}  k1 = {:.6}  k2 = {:.6}", s.c, s.k1, s.k2);
        }
        println!("  V(0) = {:.6}, g(0) = {}", solution.evaluate(0.0)?, reward.g(0.0));
    }
    Ok(())
}
