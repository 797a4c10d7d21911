//! Runs the built-in acceptance suite and prints its table.
//!
//! `cargo run --release --example selfcheck -- [tol]`

use oper_spectra::app::selfcheck::{run_selfcheck, SelfcheckOptions, DEFAULT_TOL};

fn main() {
    let tol = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(DEFAULT_TOL);
    let scratch = std::env::temp_dir().join("oper-spectra-selfcheck");
    let report = run_selfcheck(&SelfcheckOptions { tol, seed: 0, scratch });
    print!("{}", report.table());
    std::process::exit(if report.all_passed { 0 } else { 1 });
}
