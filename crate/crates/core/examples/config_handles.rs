//! Running a JSON problem whose diffusion is given by named functions.
//!
//! The command-line binary has no functions registered; a program embedding
//! the library registers its own and drives the same commands.

use ostop::cli::{run, Command, HandleRegistry, RunArgs};
use ostop::real_fn;

const PROBLEM: &str = r#"{
  "schema": "ostop.problem.v1",
  "diffusion": {
    "family": "custom", "alpha": 0.5, "domain": ["-inf", "inf"],
    "phi": "phi", "psi": "psi", "scale_density": "one", "speed_density": "two"
  },
  "reward": { "kind": "piecewise_linear", "knots": [[1, 1], [2, 0]], "left_slope": 1, "right_slope": 1 }
}"#;

fn main() {
    // standard Brownian motion with α = 0.5: φ = e^{−x}, ψ = e^{x}
    let mut registry = HandleRegistry::new();
    registry
        .register("phi", real_fn(|x| (-x).exp()))
        .register("psi", real_fn(f64::exp))
        .register("one", real_fn(|_| 1.0))
        .register("two", real_fn(|_| 2.0));

    let dir = std::env::temp_dir().join("ostop-config-handles");
    std::fs::create_dir_all(&dir).expect("temporary directory");
    let config = dir.join("problem.json");
    std::fs::write(&config, PROBLEM).expect("write configuration");

    let args = RunArgs {
        config: Some(config),
        out: Some(dir.join("solution.json")),
        ..RunArgs::default()
    };
    let status = run(&Command::Solve(args), &registry);
    println!("exit status {status}; report in {}", dir.join("solution.json").display());
}
