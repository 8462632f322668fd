use ostop::cli::{main_with, HandleRegistry};

fn main() {
    std::process::exit(main_with(&HandleRegistry::new()));
}
