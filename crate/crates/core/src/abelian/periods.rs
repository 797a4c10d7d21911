//! Homology basis and period matrix.
//!
//! With branch points `e_1, …, e_n` sorted by `(Re, Im)`, the cycle `a_i`
//! encircles `{e_{2i-1}, e_{2i}}` and `b_i` encircles `{e_{2i}, …, e_{2g+1}}`.
//! Each cycle is the boundary of an inflated convex hull, traversed
//! counterclockwise. The lift of `a_j` is the one with `Re ∮ dx/y > 0`
//! (or `Im`, when the real part vanishes); the lift of each `b`-cycle is then
//! chosen so that `tau = A⁻¹B` is symmetric with positive definite imaginary
//! part.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::curve::{holomorphic_integrals, HyperellipticCurve, PanelRule};
use crate::error::{Error, Result};
use crate::io::{ser_c64, ser_cmat};
use crate::numeric::{CMat, C64};
use crate::transport::PathSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CycleKind {
    A,
    B,
}

/// A closed cycle on the curve: a loop in the x-plane plus the value of `y`
/// at its start.
#[derive(Debug, Clone, Serialize)]
pub struct Cycle {
    pub kind: CycleKind,
    pub index: usize,
    pub enclosed: Vec<usize>,
    pub path: PathSpec,
    #[serde(serialize_with = "ser_c64")]
    pub y_start: C64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodData {
    pub genus: usize,
    pub cycles: Vec<Cycle>,
    /// `a[(i, j)] = ∮_{a_j} x^i dx / y`.
    #[serde(serialize_with = "ser_cmat")]
    pub a: CMat,
    #[serde(serialize_with = "ser_cmat")]
    pub b: CMat,
    #[serde(serialize_with = "ser_cmat")]
    pub tau: CMat,
    /// Difference against a coarser rule.
    pub quadrature_error: f64,
    pub symmetry_defect: f64,
    pub min_im_eigenvalue: f64,
}

impl PeriodData {
    /// `[A | B]`, one column per basis cycle.
    pub fn periods(&self) -> CMat {
        let g = self.genus;
        let mut pi = CMat::zeros(g, 2 * g);
        pi.view_mut((0, 0), (g, g)).copy_from(&self.a);
        pi.view_mut((0, g), (g, g)).copy_from(&self.b);
        pi
    }

    /// Real coordinates `x` with `v = Π x`.
    pub fn lattice_coordinates(&self, v: &[C64]) -> Result<Vec<f64>> {
        let g = self.genus;
        if v.len() != g {
            return Err(Error::DimensionMismatch { expected: g, found: v.len() });
        }
        let pi = self.periods();
        let mut m = DMatrix::<f64>::zeros(2 * g, 2 * g);
        let mut rhs = DVector::<f64>::zeros(2 * g);
        for i in 0..g {
            for k in 0..2 * g {
                m[(i, k)] = pi[(i, k)].re;
                m[(g + i, k)] = pi[(i, k)].im;
            }
            rhs[i] = v[i].re;
            rhs[g + i] = v[i].im;
        }
        let x = m
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularPeriodSystem(f64::INFINITY))?;
        Ok(x.iter().copied().collect())
    }

    /// Representative of `v` with lattice coordinates in `[0, 1)`.
    pub fn reduce(&self, v: &[C64]) -> Result<Vec<C64>> {
        let x = self.lattice_coordinates(v)?;
        let pi = self.periods();
        Ok((0..self.genus)
            .map(|i| {
                let shift: C64 = x.iter().enumerate().map(|(k, xk)| pi[(i, k)] * xk.floor()).sum();
                v[i] - shift
            })
            .collect())
    }
}

/// Computes the period matrix; `tol` bounds the estimated quadrature error.
pub fn period_matrix(curve: &HyperellipticCurve, tol: f64) -> Result<PeriodData> {
    let g = curve.genus();
    let points = curve.branch_points();
    let mut sets: Vec<(CycleKind, usize, Vec<usize>)> = Vec::with_capacity(2 * g);
    for i in 0..g {
        sets.push((CycleKind::A, i, vec![2 * i, 2 * i + 1]));
    }
    for i in 0..g {
        sets.push((CycleKind::B, i, (2 * i + 1..=2 * g).collect()));
    }

    let fine = PanelRule::new(20);
    let coarse = PanelRule::new(12);
    let mut cycles = Vec::with_capacity(2 * g);
    let mut columns = Vec::with_capacity(2 * g);
    let mut quadrature_error: f64 = 0.0;
    for (kind, index, enclosed) in sets {
        let path = hull_loop(points, &enclosed)?;
        let y_start = curve.principal_y(path.start());
        let (col, _) = holomorphic_integrals(curve, &path, y_start, g, &fine)?;
        let (check, _) = holomorphic_integrals(curve, &path, y_start, g, &coarse)?;
        for (u, v) in col.iter().zip(&check) {
            quadrature_error = quadrature_error.max((u - v).norm());
        }
        cycles.push(Cycle { kind, index, enclosed, path, y_start });
        columns.push(col);
    }
    if !(quadrature_error <= tol) {
        return Err(Error::QuadratureFailure(format!(
            "estimated error {quadrature_error:.3e} exceeds {tol:.1e}"
        )));
    }

    for j in 0..g {
        if !is_positive(columns[j][0]) {
            for z in columns[j].iter_mut() {
                *z = -*z;
            }
            cycles[j].y_start = -cycles[j].y_start;
        }
    }
    let a = CMat::from_fn(g, g, |i, j| columns[j][i]);
    let b_raw = CMat::from_fn(g, g, |i, j| columns[g + j][i]);
    let a_inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::QuadratureFailure("a-period matrix is singular".into()))?;

    // Choose the lift of each b-cycle.
    let mut best: Option<(f64, f64, u32)> = None;
    for mask in 0..(1u32 << g) {
        let mut b = b_raw.clone();
        for j in 0..g {
            if mask & (1 << j) != 0 {
                b.column_mut(j).neg_mut();
            }
        }
        let tau = &a_inv * &b;
        let (asym, min_eig) = riemann_defects(&tau);
        if min_eig > 0.0 && best.is_none_or(|(s, _, _)| asym < s) {
            best = Some((asym, min_eig, mask));
        }
    }
    let (symmetry_defect, min_im_eigenvalue, mask) = best.ok_or_else(|| {
        Error::QuadratureFailure("no orientation of the b-cycles gives Im tau > 0".into())
    })?;
    let mut b = b_raw;
    for j in 0..g {
        if mask & (1 << j) != 0 {
            b.column_mut(j).neg_mut();
            cycles[g + j].y_start = -cycles[g + j].y_start;
        }
    }
    let scale = tau_scale(&a_inv, &b);
    if symmetry_defect > 1e-6 * scale {
        return Err(Error::QuadratureFailure(format!(
            "period matrix is not symmetric (defect {symmetry_defect:.3e})"
        )));
    }
    let tau = &a_inv * &b;
    Ok(PeriodData {
        genus: g,
        cycles,
        a,
        b,
        tau,
        quadrature_error,
        symmetry_defect,
        min_im_eigenvalue,
    })
}

/// Orientation test for `∮_{a_j} dx / y`: by real part unless it is negligible.
fn is_positive(z: C64) -> bool {
    if z.re.abs() > 1e-8 * z.norm() {
        z.re > 0.0
    } else {
        z.im > 0.0
    }
}

fn tau_scale(a_inv: &CMat, b: &CMat) -> f64 {
    (a_inv * b).iter().map(|z| z.norm()).fold(1.0, f64::max)
}

/// `‖tau − tauᵀ‖_max` and the smallest eigenvalue of the symmetric part of `Im tau`.
pub fn riemann_defects(tau: &CMat) -> (f64, f64) {
    let g = tau.nrows();
    let mut asym: f64 = 0.0;
    for i in 0..g {
        for j in 0..g {
            asym = asym.max((tau[(i, j)] - tau[(j, i)]).norm());
        }
    }
    let im = DMatrix::<f64>::from_fn(g, g, |i, j| 0.5 * (tau[(i, j)].im + tau[(j, i)].im));
    let min_eig = im
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    (asym, min_eig)
}

/// Counterclockwise boundary of the convex hull of `points[members]`, pushed
/// outward by a distance proportional to the gap to every other point.
pub fn hull_loop(points: &[C64], members: &[usize]) -> Result<PathSpec> {
    let inside: Vec<C64> = members.iter().map(|&k| points[k]).collect();
    let hull = convex_hull(&inside);
    let mut gap = f64::INFINITY;
    for (k, &p) in points.iter().enumerate() {
        if members.contains(&k) {
            continue;
        }
        if contains(&hull, p) {
            return Err(Error::QuadratureFailure(format!(
                "cycle around {members:?} would enclose branch point {p}"
            )));
        }
        gap = gap.min(polygon_distance(&hull, p));
    }
    let radius = if gap.is_finite() { 0.4 * gap } else { 0.5 };

    let n = hull.len();
    let normal = |k: usize| {
        let e = hull[(k + 1) % n] - hull[k];
        C64::new(e.im, -e.re) / e.norm()
    };
    let start = hull[0] + normal(0) * radius;
    let mut builder = PathSpec::builder(start);
    for k in 0..n {
        let next = (k + 1) % n;
        builder = builder.line_to(hull[next] + normal(k) * radius);
        let sweep = (normal(next) / normal(k)).arg().rem_euclid(TAU);
        let sweep = if sweep == 0.0 { TAU } else { sweep };
        builder = if next == 0 {
            builder.arc_to(hull[next], sweep, start)
        } else {
            builder.arc_around(hull[next], sweep)
        };
    }
    Ok(builder.build())
}

fn cross(o: C64, a: C64, b: C64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// Andrew's monotone chain; counterclockwise, collinear points dropped.
fn convex_hull(points: &[C64]) -> Vec<C64> {
    let mut p = points.to_vec();
    p.sort_by(crate::numeric::cmp_re_im);
    p.dedup();
    if p.len() <= 2 {
        return p;
    }
    let mut lower: Vec<C64> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<C64> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn contains(hull: &[C64], p: C64) -> bool {
    if hull.len() < 3 {
        return polygon_distance(hull, p) == 0.0;
    }
    (0..hull.len()).all(|k| cross(hull[k], hull[(k + 1) % hull.len()], p) >= 0.0)
}

fn segment_distance(a: C64, b: C64, p: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

fn polygon_distance(hull: &[C64], p: C64) -> f64 {
    (0..hull.len())
        .map(|k| segment_distance(hull[k], hull[(k + 1) % hull.len()], p))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::winding_number;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn hull_loop_encloses_exactly_the_members() {
        let points = [c(-1.0, 0.0), c(0.0, -1.0), c(0.0, 0.0), c(0.0, 1.0), c(1.0, 0.0)];
        for members in [vec![0, 1], vec![2, 3], vec![1, 2, 3, 4], vec![3, 4]] {
            let path = hull_loop(&points, &members).unwrap();
            assert!(path.is_closed());
            for (k, &p) in points.iter().enumerate() {
                let w = winding_number(&path, p).unwrap();
                assert_eq!(w, i64::from(members.contains(&k)), "{members:?} at {p}");
            }
        }
    }

    #[test]
    fn square_lattice_curve() {
        let curve = HyperellipticCurve::from_real(&[0.0, -1.0, 0.0, 1.0]).unwrap();
        let data = period_matrix(&curve, 1e-10).unwrap();
        assert!((data.tau[(0, 0)] - c(0.0, 1.0)).norm() < 1e-12, "{}", data.tau);
    }

    #[test]
    fn reduction_lands_in_the_fundamental_cell() {
        let curve = HyperellipticCurve::from_real(&[0.0, -1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let data = period_matrix(&curve, 1e-10).unwrap();
        let v = vec![c(3.7, -2.1), c(-0.4, 5.5)];
        let r = data.reduce(&v).unwrap();
        for x in data.lattice_coordinates(&r).unwrap() {
            assert!((-1e-9..1.0 + 1e-9).contains(&x));
        }
    }
}
