//! Searches the free accessory parameter of the parabolic oper on
//! {0, 1, 2, ∞} for real monodromy.
//!
//! `cargo run --release --example find_real_four_punctures -- 48`

use oper_spectra::finder::{enumerate_real_opers, isolation_factor, FinderOptions, Rect};
use oper_spectra::oper::{OperConfig, OperFamily};

fn main() -> oper_spectra::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(32);
    let family = OperFamily::new(OperConfig::from_json(include_str!("../configs/four_real.json"))?)?;
    let rect = Rect::new(-0.6, 1.1, -1.0, 1.0)?;
    let opts = FinderOptions::default();
    let found = enumerate_real_opers(&family, &rect, (n, n), &opts)?;
    println!("{n}x{n} scan: {} candidates, {} hits", found.scan.candidates.len(), found.hits.len());
    for hit in &found.hits {
        let iso = isolation_factor(&family, hit, 0.01, &opts)?;
        println!(
            "mu = {:+.12} {:+.12}i  residual {:.1e}  gap {:.3}  isolation {:.1e}",
            hit.mu.re, hit.mu.im, hit.residual_norm, hit.svd_gap, iso
        );
    }
    for f in &found.failures {
        println!("failed candidate: {f:?}");
    }
    Ok(())
}
