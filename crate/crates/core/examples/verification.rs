//! Numerical checks of a solution: the inversion formula, the majorant
//! property, smooth fit at the contact points, harmonicity on the
//! continuation region and the integral form of the value function.

use ostop::{make_brownian, solve, verify_inversion, verify_solution, Polynomial, RewardSpec, SolverOptions, VerifyOptions};

fn main() -> ostop::Result<()> {
    let opts = SolverOptions::default();
    let g = Polynomial::from_roots(-1.0, &[-2.0, -1.0, 0.0, 1.0, 2.0])?;
    for alpha in [2.0, 1.5] {
        let model = make_brownian(alpha, 0.0, 1.0)?;
        let reward = RewardSpec::polynomial(&model, g.coefficients())?;
        let grid: Vec<f64> = (0..21).map(|i| -4.0 + 0.4 * i as f64).collect();
        let inv = verify_inversion(&model, &reward, &grid, &opts)?;
        println!(
            "alpha {alpha}: inversion residual {:.2e} (max|g| {:.1}), |g|/φ at -W {:.1e}, |g|/ψ at W {:.1e}",
            inv.residual, inv.max_abs_g, inv.decay_left, inv.decay_right
        );
        let solution = solve(&model, &reward, &opts)?;
        let report = verify_solution(&solution, &VerifyOptions::from(&opts))?;
        println!("{report:#?}");
    }
    Ok(())
}
