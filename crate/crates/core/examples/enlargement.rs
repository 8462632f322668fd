//! The building blocks of the solver used directly: the negative set, the
//! hybrid measure σ_N, one enlargement and its condition report.

use ostop::{check_condition, enlarge, make_brownian, negative_set, restrict_sigma, Polynomial, RewardSpec, SolverOptions};

fn main() -> ostop::Result<()> {
    let model = make_brownian(2.0, 0.0, 1.0)?;
    let g = Polynomial::from_roots(-1.0, &[-2.0, -1.0, 0.0, 1.0, 2.0])?;
    let reward = RewardSpec::polynomial(&model, g.coefficients())?;
    let opts = SolverOptions::default();

    let negatives = negative_set(&model, &reward, &opts)?;
    let sigma = reward.sigma(&model);
    let n = negatives[1];
    let sigma_n = restrict_sigma(&sigma, n, &negatives);

    let before = check_condition(&model, &sigma_n, n, n, &opts)?;
    println!("C = N = {n}: satisfied {}, ∫φ dσ_N = {:.4e}", before.satisfied, before.ii_residual.unwrap_or(0.0));

    let e = enlarge(&model, &sigma, n, &negatives, &opts)?;
    println!("enlarged to {} in {} passes (ψ/φ rescale {:?})", e.c, e.iterations, e.phi_rescale);
    let r = e.report;
    println!(
        "(i) {:.4e} {:.4e}  (ii) {:.2e}  (iii) {:.2e}  (iv) max {:.4e}  satisfied {}",
        r.i_phi,
        r.i_psi,
        r.ii_residual.unwrap_or(0.0),
        r.iii_residual.unwrap_or(0.0),
        r.iv_max,
        r.satisfied
    );
    Ok(())
}
