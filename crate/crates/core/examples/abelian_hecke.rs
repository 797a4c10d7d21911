//! Harmonic classes and the multiplicative function `F` on the square
//! elliptic curve, together with the eigenvalues `a`, `b`.

use oper_spectra::abelian::{
    continue_point, hecke_eigenvalue_f, integer_harmonic_class, oper_eigenvalues_ab, period_matrix, verify_df, CurvePoint,
    HyperellipticCurve,
};
use oper_spectra::numeric::C64;
use oper_spectra::transport::PathSpec;

fn main() -> oper_spectra::Result<()> {
    let curve = HyperellipticCurve::from_real(&[0.0, -1.0, 0.0, 1.0])?;
    let periods = period_matrix(&curve, 1e-12)?;
    let p0 = CurvePoint::new(C64::new(0.5, 0.8), 1);
    let corners = [C64::new(-1.5, 0.8), C64::new(-1.5, -0.8), C64::new(0.5, -0.8)];
    // Prefixes of a path running once around the branch points -1 and 0.
    let prefix = |k: usize| corners[..k].iter().fold(PathSpec::builder(p0.x), |b, &c| b.line_to(c)).build();
    let path = prefix(corners.len());
    for m in [vec![1, 0], vec![0, 1], vec![2, -1]] {
        let class = integer_harmonic_class(&periods, &m)?;
        let ev = oper_eigenvalues_ab(&class);
        println!("m = {m:?}: c = {:.6}  a = {:.6}  b = {:.6}", class.c[0], ev.a[0], ev.b[0]);
        for k in 1..=corners.len() {
            let leg = prefix(k);
            let p = continue_point(&curve, &p0, &leg)?;
            let f = hecke_eigenvalue_f(&curve, &class, &p0, &p, &leg)?;
            println!("   F at x = {:.3} (sheet {:+}) = {:.10}  |F| = {:.15}", p.x, p.sheet, f, f.norm());
        }
        let df = verify_df(&curve, &class, &p0, &path, 1e-4)?;
        println!("   dF = (a + b) F residual {:.2e}", df);
    }
    Ok(())
}
