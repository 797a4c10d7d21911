//! Monodromy of the rigid parabolic oper on {0, 1, ∞}.

use oper_spectra::monodromy::{irreducibility_margin, monodromy, reality_residual};
use oper_spectra::numeric::trace2;
use oper_spectra::oper::{OperConfig, OperFamily};

fn main() -> oper_spectra::Result<()> {
    let base = OperConfig::from_json(include_str!("../configs/rigid3.json"))?;
    let family = OperFamily::new(base)?;
    let cfg = family.config_at(family.base_mu());
    let rep = monodromy(&cfg, 1e-12)?;
    println!("basepoint {:.3}", rep.basepoint);
    for (j, m) in rep.generators.iter().enumerate() {
        println!("M_{} (puncture {}): trace {:.12}", j, rep.punctures[j], trace2(m));
        println!("  [{:.6}, {:.6}]\n  [{:.6}, {:.6}]", m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    }
    if let Some(m) = &rep.infinity_generator {
        println!("M_inf: trace {:.12}", trace2(m));
    }
    println!("loop-product defect {:.2e}", rep.defect);
    println!("max |det - 1|        {:.2e}", rep.max_det_error());
    let worst = reality_residual(&rep).into_iter().fold(0.0_f64, |a, r| a.max(r.abs()));
    println!("reality residual     {worst:.2e}");
    println!("irreducibility       {:.3}", irreducibility_margin(&rep));
    Ok(())
}
