//! Invariants checked on pseudorandom inputs.

use num_complex::Complex64 as C64;
use oper_spectra::abelian::{
    abel_jacobi, continue_point, fourier_harmonic_eval, hecke_eigenvalue_f, integer_harmonic_class, period_matrix,
    CurvePoint, HyperellipticCurve, PeriodData,
};
use oper_spectra::numeric::CMat;
use oper_spectra::oper::OperConfig;
use oper_spectra::transport::{circle_loop, transport, winding_number, PathSpec};
use proptest::prelude::*;
use std::sync::OnceLock;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn square() -> &'static (HyperellipticCurve, PeriodData) {
    static CELL: OnceLock<(HyperellipticCurve, PeriodData)> = OnceLock::new();
    CELL.get_or_init(|| {
        let curve = HyperellipticCurve::from_real(&[0.0, -1.0, 0.0, 1.0]).unwrap();
        let periods = period_matrix(&curve, 1e-12).unwrap();
        (curve, periods)
    })
}

fn genus2() -> &'static (HyperellipticCurve, PeriodData) {
    static CELL: OnceLock<(HyperellipticCurve, PeriodData)> = OnceLock::new();
    CELL.get_or_init(|| {
        let curve = HyperellipticCurve::from_real(&[0.5, -1.0, 0.0, 2.0, 0.0, 0.0, 1.0]).unwrap();
        let periods = period_matrix(&curve, 1e-12).unwrap();
        (curve, periods)
    })
}

const P0: (f64, f64) = (0.5, 0.8);

/// A loop from `q` around the branch points -1 and 0 of `x³ − x`; it returns to the same sheet.
fn pair_loop(q: C64) -> PathSpec {
    circle_loop(c(-0.5, 0.0), q, 0.8).unwrap()
}

fn endpoint() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, 0.5..1.5f64).prop_map(|(re, im)| c(re, im)).prop_filter("outside the loop circle", |q| (q + 0.5).norm() > 0.9)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn t_is_invariant_under_relabeling(
        pts in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64, 0.0..0.5f64, -1.0..1.0f64, -1.0..1.0f64), 3..6),
        rot in 0usize..5,
        z in (-3.0..3.0f64, -3.0..3.0f64),
    ) {
        let z = c(z.0, z.1);
        prop_assume!(pts.iter().all(|p| (c(p.0, p.1) - z).norm() > 0.05));
        let build = |order: &[usize]| {
            OperConfig::new(
                order.iter().map(|&k| c(pts[k].0, pts[k].1)).collect(),
                true,
                order.iter().map(|&k| pts[k].2).collect(),
                Some(0.25),
                order.iter().map(|&k| c(pts[k].3, pts[k].4)).collect(),
            )
        };
        let n = pts.len();
        let identity: Vec<usize> = (0..n).collect();
        let rotated: Vec<usize> = (0..n).map(|k| (k + rot) % n).rev().collect();
        prop_assume!(pts.iter().enumerate().all(|(i, p)| pts[i + 1..].iter().all(|q| (c(p.0, p.1) - c(q.0, q.1)).norm() > 1e-6)));
        let (a, b) = (build(&identity).unwrap(), build(&rotated).unwrap());
        let (ta, tb) = (a.evaluate_t(z).unwrap(), b.evaluate_t(z).unwrap());
        prop_assert!((ta - tb).norm() <= 1e-12 * ta.norm().max(1.0));
    }

    #[test]
    fn winding_numbers_add(
        a in (-1.0..1.0f64, -1.0..1.0f64), b in (-1.0..1.0f64, -1.0..1.0f64),
        p in (-3.0..3.0f64, -3.0..3.0f64),
    ) {
        let base = c(0.0, -4.0);
        let l1 = circle_loop(c(a.0, a.1), base, 0.7).unwrap();
        let l2 = circle_loop(c(b.0, b.1), base, 0.5).unwrap();
        let p = c(p.0, p.1);
        prop_assume!(l1.distance_to(p) > 1e-3 && l2.distance_to(p) > 1e-3);
        let both = l1.then(&l2).unwrap();
        prop_assert_eq!(
            winding_number(&both, p).unwrap(),
            winding_number(&l1, p).unwrap() + winding_number(&l2, p).unwrap()
        );
    }

    #[test]
    fn transport_converges_and_preserves_det(
        lambda in (-1.5..2.5f64, 1.0..2.0f64),
        mu in (-1.0..1.0f64, -1.0..1.0f64),
    ) {
        let cfg = OperConfig::parabolic(vec![c(0.0, 0.0), c(1.0, 0.0), c(lambda.0, lambda.1)], true, c(mu.0, mu.1)).unwrap();
        let system = cfg.to_first_order_system().unwrap();
        let path = circle_loop(c(0.0, 0.0), c(0.5, -1.0), 0.4).unwrap();
        let id = CMat::identity(2, 2);
        let coarse = transport(&system, &path, &id, 1e-9).unwrap();
        let fine = transport(&system, &path, &id, 1e-13).unwrap();
        let scale = max_abs(&fine).max(1.0);
        prop_assert!(max_abs(&(&coarse - &fine)) < 1e-6 * scale);
        prop_assert!((fine.determinant() - 1.0).norm() < 1e-10 * scale * scale);
        let back = transport(&system, &path.reversed(), &id, 1e-13).unwrap();
        prop_assert!(max_abs(&(&fine * &back - &id)) < 1e-9 * scale * scale);
    }

    #[test]
    fn classes_are_additive(m1 in prop::collection::vec(-5i64..5, 4), m2 in prop::collection::vec(-5i64..5, 4)) {
        let (_, periods) = genus2();
        let sum: Vec<i64> = m1.iter().zip(&m2).map(|(a, b)| a + b).collect();
        let (c1, c2, cs) = (
            integer_harmonic_class(periods, &m1).unwrap(),
            integer_harmonic_class(periods, &m2).unwrap(),
            integer_harmonic_class(periods, &sum).unwrap(),
        );
        for k in 0..2 {
            prop_assert!((cs.c[k] - c1.c[k] - c2.c[k]).norm() < 1e-12 * (1.0 + cs.c[k].norm()));
        }
    }

    #[test]
    fn fourier_eval_is_lattice_periodic(
        m in prop::collection::vec(-3i64..3, 4),
        v in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 2),
        n in prop::collection::vec(-3i64..3, 4),
    ) {
        let (_, periods) = genus2();
        let class = integer_harmonic_class(periods, &m).unwrap();
        let v: Vec<C64> = v.iter().map(|&(re, im)| c(re, im)).collect();
        let pi = periods.periods();
        let shifted: Vec<C64> = (0..2)
            .map(|i| v[i] + (0..4).map(|k| pi[(i, k)] * n[k] as f64).sum::<C64>())
            .collect();
        let a = fourier_harmonic_eval(periods, &class, &v).unwrap();
        let b = fourier_harmonic_eval(periods, &class, &shifted).unwrap();
        prop_assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn appending_a_cycle_moves_by_a_period(q in endpoint()) {
        let (curve, periods) = square();
        let p0 = CurvePoint::new(c(P0.0, P0.1), 1);
        let path = PathSpec::line(p0.x, q);
        let around = path.then(&pair_loop(q)).unwrap();
        let p = continue_point(curve, &p0, &path).unwrap();
        let p_around = continue_point(curve, &p0, &around).unwrap();
        prop_assert_eq!(p.sheet, p_around.sheet);
        let v = abel_jacobi(curve, &p0, &p, &path).unwrap();
        let w = abel_jacobi(curve, &p0, &p_around, &around).unwrap();
        let x = periods.lattice_coordinates(&[w[0] - v[0]]).unwrap();
        let integral: Vec<f64> = x.iter().map(|t| t.round()).collect();
        prop_assert!(x.iter().zip(&integral).all(|(t, r)| (t - r).abs() < 1e-9));
        prop_assert!(integral.iter().any(|r| *r != 0.0));
    }

    #[test]
    fn f_is_multiplicative_and_single_valued(
        m1 in prop::collection::vec(-4i64..4, 2),
        m2 in prop::collection::vec(-4i64..4, 2),
        q in endpoint(),
    ) {
        let (curve, periods) = square();
        let p0 = CurvePoint::new(c(P0.0, P0.1), 1);
        let path = PathSpec::line(p0.x, q);
        let p = continue_point(curve, &p0, &path).unwrap();
        let sum: Vec<i64> = m1.iter().zip(&m2).map(|(a, b)| a + b).collect();
        let f = |m: &[i64], path: &PathSpec| {
            hecke_eigenvalue_f(curve, &integer_harmonic_class(periods, m).unwrap(), &p0, &p, path).unwrap()
        };
        prop_assert!((f(&sum, &path) - f(&m1, &path) * f(&m2, &path)).norm() < 1e-10);
        let around = path.then(&pair_loop(q)).unwrap();
        prop_assert!((f(&m1, &around) - f(&m1, &path)).norm() < 1e-9);
    }
}
