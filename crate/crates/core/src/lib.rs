//! Optimal stopping of one-dimensional diffusions.
//!
//! A reward `g` is represented through the Green kernel of the killed
//! diffusion, `g(x) = ∫ G(x, y) σ(dy)`. The continuation region is grown from
//! the set where `σ` is negative, and the value function is
//! `V = k1·φ + k2·ψ` on each continuation interval and `V = g` elsewhere.
//!
//! ```
//! use ostop::{make_brownian, solve, Polynomial, RewardSpec, SolverOptions};
//!
//! let model = make_brownian(2.0, 0.0, 1.0).unwrap();
//! let g = Polynomial::from_roots(-1.0, &[-2.0, -1.0, 0.0, 1.0, 2.0]).unwrap();
//! let reward = RewardSpec::polynomial(&model, g.coefficients()).unwrap();
//! let solution = solve(&model, &reward, &SolverOptions::default()).unwrap();
//! assert_eq!(solution.intervals().len(), 3);
//! assert!(solution.evaluate(0.0).unwrap() >= reward.g(0.0));
//! ```
// `!(a < b)` is used on purpose throughout: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diffusion;
pub mod error;
pub mod interval;
pub mod measure;
pub mod oracle;
pub mod quadrature;
pub mod reward;
pub mod roots;
pub mod solver;
pub mod value;

pub use diffusion::{make_brownian, real_fn, CustomDiffusion, DiffusionModel, Family, RealFn};
pub use error::{Error, Result};
pub use interval::Interval;
pub use measure::{restrict_sigma, Atom, MeasureSpec, QuadratureOptions};
pub use reward::{Polynomial, RewardKind, RewardSpec};
pub use solver::{check_condition, enlarge, negative_set, negative_support, solve, ConditionReport, Enlargement, PairNC, SolverOptions};
pub use value::{
    coefficients, evaluate, evaluate_integral, verify_inversion, verify_solution, InversionReport, IntervalSolution, Region,
    SolveStats, Solution, VerificationReport, VerifyOptions,
};
pub use oracle::{brute_force, monte_carlo_value, policy_value, BruteForceBest, BruteForceResult, OracleEstimate, StoppingPolicy};
