//! Compares `Φ_m`, built from the invariant form on `Sym^m`, with `Φ_1^m`.

use oper_spectra::finder::Rect;
use oper_spectra::monodromy::monodromy;
use oper_spectra::oper::{OperConfig, OperFamily};
use oper_spectra::section::{
    eigenvalue_section, invariant_hermitian_form, scalar_alignment, section_with_pairing, sym_power_invariant_form,
    SectionOptions,
};

fn main() -> oper_spectra::Result<()> {
    let family = OperFamily::new(OperConfig::from_json(include_str!("../configs/rigid3.json"))?)?;
    let cfg = family.config_at(family.base_mu());
    let rep = monodromy(&cfg, 1e-13)?;
    let form = invariant_hermitian_form(&rep)?;
    let grid = Rect::new(-1.0, 2.0, -1.5, 1.5)?.cell_centers(10, 10);
    let opts = SectionOptions { tol: 1e-13, ..SectionOptions::default() };
    let phi1 = eigenvalue_section(&cfg, &rep, &form, &grid, &opts)?.values();
    for m in 2..=4 {
        let sym = sym_power_invariant_form(&rep, m)?;
        let phim = section_with_pairing(&cfg, &rep, &sym.h, m, &grid, &opts)?.values();
        let power: Vec<f64> = phi1.iter().map(|v| v.powi(m as i32)).collect();
        let (c, deviation) = scalar_alignment(&phim, &power);
        println!("m = {m}: gap {:.3}  c = {c:+.6}  max relative deviation {deviation:.2e}", sym.gap());
    }
    Ok(())
}
