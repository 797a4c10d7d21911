//! Transports the Euler equation `y'' + y/(4z²) = 0` once around the origin.
//! Its indicial exponents are a double 1/2, so the loop matrix is unipotent
//! up to sign and its trace is exactly -2.

use oper_spectra::numeric::{CMat, C64};
use oper_spectra::oper::OperConfig;
use oper_spectra::transport::{circle_loop, transport};

fn main() -> oper_spectra::Result<()> {
    let origin = C64::new(0.0, 0.0);
    let euler = OperConfig::new(vec![origin], true, vec![0.25], Some(0.25), vec![origin])?;
    let system = euler.to_first_order_system()?;
    let path = circle_loop(origin, C64::new(1.5, 0.0), 1.0)?;
    for tol in [1e-8, 1e-10, 1e-12] {
        let m = transport(&system, &path, &CMat::identity(2, 2), tol)?;
        let trace = m[(0, 0)] + m[(1, 1)];
        let det = m.determinant();
        println!("tol {tol:.0e}: trace = {trace:.3e}  |trace + 2| = {:.2e}  |det - 1| = {:.2e}", (trace + 2.0).norm(), (det - 1.0).norm());
    }
    Ok(())
}
