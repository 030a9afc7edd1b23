//! One line per acceptance criterion; exits non-zero if any fails.

use liftgait::verify::{Verifier, CRITERIA};

fn main() {
    let verifier = Verifier::new().expect("grids build");
    let mut failed = 0;
    for id in 1..=CRITERIA {
        let check = verifier.run(id);
        println!("{check}");
        failed += usize::from(!check.passed);
    }
    println!("acceptance: {} of {CRITERIA} criteria passed", CRITERIA - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
