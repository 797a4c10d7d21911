//! Period matrices of a few hyperelliptic curves, with the ellipse
//! quadrature cross-check in genus two.

use oper_spectra::abelian::{period_matrix, HyperellipticCurve};
use oper_spectra::oracle::oracle_tau;

fn main() -> oper_spectra::Result<()> {
    let curves: [(&str, &[f64]); 3] = [
        ("x^3 - x", &[0.0, -1.0, 0.0, 1.0]),
        ("x^5 - x", &[0.0, -1.0, 0.0, 0.0, 0.0, 1.0]),
        ("x^6 + 2x^3 - x + 1/2", &[0.5, -1.0, 0.0, 2.0, 0.0, 0.0, 1.0]),
    ];
    for (name, coeffs) in curves {
        let curve = HyperellipticCurve::from_real(coeffs)?;
        let p = period_matrix(&curve, 1e-12)?;
        println!("y^2 = {name}  (genus {})", curve.genus());
        for i in 0..p.genus {
            let row: Vec<String> = (0..p.genus).map(|j| format!("{:+.12}", p.tau[(i, j)])).collect();
            println!("  tau[{i}] = {}", row.join("  "));
        }
        println!("  symmetry {:.1e}  min eig Im tau {:.4}  quadrature {:.1e}", p.symmetry_defect, p.min_im_eigenvalue, p.quadrature_error);
        if curve.genus() == 2 {
            let oracle = oracle_tau(&curve, 4096)?;
            let diff = (&oracle - &p.tau).iter().map(|z| z.norm()).fold(0.0, f64::max);
            println!("  ellipse quadrature differs by {diff:.1e}");
        }
    }
    Ok(())
}
