//! The single-valued section `Φ` of the rigid real oper: a coarse table of
//! values, a path-pair comparison and the ODE residual on a stencil.

use oper_spectra::monodromy::{monodromy, LoopBasis};
use oper_spectra::numeric::C64;
use oper_spectra::oper::{OperConfig, OperFamily};
use oper_spectra::section::{
    check_single_valued, eigenvalue_section, invariant_hermitian_form, stencil_section, verify_oper_ode,
    Continuation, SectionOptions,
};

fn main() -> oper_spectra::Result<()> {
    let family = OperFamily::new(OperConfig::from_json(include_str!("../configs/rigid3.json"))?)?;
    let cfg = family.config_at(family.base_mu());
    let rep = monodromy(&cfg, 1e-13)?;
    let form = invariant_hermitian_form(&rep)?;
    println!("det_sign {}  gap {:.3}  invariance residual {:.1e}", form.det_sign, form.gap(), form.residual);

    let opts = SectionOptions { tol: 1e-13, ..SectionOptions::default() };
    let row: Vec<C64> = (0..7).map(|k| C64::new(-1.0 + 0.5 * k as f64, 0.6)).collect();
    let section = eigenvalue_section(&cfg, &rep, &form, &row, &opts)?;
    for s in &section.samples {
        println!("Phi({:.2}) = {:+.10}", s.z, s.phi);
    }

    let z = C64::new(0.3, 0.9);
    let cont = Continuation::new(&cfg, rep.basepoint, &opts)?;
    let basis = LoopBasis::with_basepoint(cfg.punctures(), rep.basepoint)?;
    let direct = cont.path_to(z)?;
    for (k, lp) in basis.loops.iter().enumerate() {
        let d = check_single_valued(&cfg, &rep, &form, z, &direct, &lp.then(&direct)?, &opts)?;
        println!("around puncture {}: Phi {:+.12} vs {:+.12}, defect {:.1e}", basis.order[k], d.phi_a, d.phi_b, d.defect);
    }

    for h in [4e-3, 2e-3, 1e-3] {
        let st = stencil_section(&cfg, &rep, &form, C64::new(0.5, 0.5), h, 5, &opts)?;
        println!("h = {h:.0e}: ODE residual {:.3e}", verify_oper_ode(&st, &cfg, h)?.max());
    }
    Ok(())
}
