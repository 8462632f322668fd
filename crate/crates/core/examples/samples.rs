//! Plot-ready samples of the value function as `x,g,V,region` CSV.

use ostop::cli::report::write_samples;
use ostop::{make_brownian, solve, Interval, Polynomial, RewardSpec, SolverOptions};

fn main() -> ostop::Result<()> {
    let model = make_brownian(1.5, 0.0, 1.0)?;
    let p = Polynomial::from_roots(-1.0, &[-2.0, -1.0, 0.0, 1.0, 2.0])?;
    let reward = RewardSpec::polynomial(&model, p.coefficients())?;
    let solution = solve(&model, &reward, &SolverOptions::default())?;
    let xs = Interval::new(-4.0, 4.0)?.linspace(17);
    write_samples(std::io::stdout().lock(), &solution, &xs)
}
