//! Abelian (rank one) theory on hyperelliptic curves: periods, harmonic
//! classes with integer periods, characters of the Jacobian and their Hecke
//! eigenvalues.
//!
//! Conventions: `ω_i = x^{i} dx / y` for `i < g`; a class is
//! `ω_γ = Σ c_i ω_i` with `2 Re ∮ ω_γ = m_k` on the k-th basis cycle
//! (a-cycles first). Jacobian points are vectors `v ∈ ℂ^g` modulo the
//! columns of `[A | B]`.

pub mod curve;
pub mod periods;

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use curve::{CurvePoint, HyperellipticCurve, PanelRule};
pub use periods::{period_matrix, riemann_defects, Cycle, CycleKind, PeriodData};

use crate::error::{Error, Result};
use crate::io::ser_c64_vec;
use crate::numeric::{compensated_sum, CompensatedSum, C64, I};
use crate::transport::PathSpec;

/// Largest condition number accepted for the period system.
pub const MAX_PERIOD_CONDITION: f64 = 1e12;

const ENDPOINT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicClass {
    pub m: Vec<i64>,
    #[serde(serialize_with = "ser_c64_vec")]
    pub c: Vec<C64>,
    /// `max_k |2 Re ∮_k ω_γ − m_k|`.
    pub residual: f64,
}

impl HarmonicClass {
    pub fn genus(&self) -> usize {
        self.c.len()
    }

    /// `∮ ω_γ` over each basis cycle.
    pub fn cycle_integrals(&self, periods: &PeriodData) -> Vec<C64> {
        let pi = periods.periods();
        (0..pi.ncols())
            .map(|k| compensated_sum((0..pi.nrows()).map(|i| self.c[i] * pi[(i, k)])))
            .collect()
    }
}

/// Solves `2 Re(Σ_i c_i Π_ik) = m_k` for the coefficients `c`.
pub fn integer_harmonic_class(periods: &PeriodData, m: &[i64]) -> Result<HarmonicClass> {
    let g = periods.genus;
    if m.len() != 2 * g {
        return Err(Error::DimensionMismatch { expected: 2 * g, found: m.len() });
    }
    let pi = periods.periods();
    let system = DMatrix::<f64>::from_fn(2 * g, 2 * g, |k, col| {
        if col < g {
            2.0 * pi[(col, k)].re
        } else {
            -2.0 * pi[(col - g, k)].im
        }
    });
    let sv = system.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < MAX_PERIOD_CONDITION) {
        return Err(Error::SingularPeriodSystem(condition));
    }
    let rhs = DVector::<f64>::from_iterator(2 * g, m.iter().map(|&v| v as f64));
    let x = system
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularPeriodSystem(condition))?;
    let c: Vec<C64> = (0..g).map(|i| C64::new(x[i], x[g + i])).collect();
    let mut class = HarmonicClass { m: m.to_vec(), c, residual: 0.0 };
    class.residual = class
        .cycle_integrals(periods)
        .iter()
        .zip(m)
        .map(|(z, &mk)| (2.0 * z.re - mk as f64).abs())
        .fold(0.0, f64::max);
    Ok(class)
}

fn check_endpoints(path: &PathSpec, p0: &CurvePoint, p: &CurvePoint) -> Result<()> {
    let scale = 1.0 + p0.x.norm().max(p.x.norm());
    if (path.start() - p0.x).norm() > ENDPOINT_TOLERANCE * scale
        || (path.end() - p.x).norm() > ENDPOINT_TOLERANCE * scale
    {
        return Err(Error::InvalidConfig(format!(
            "path runs from {} to {}, expected {} to {}",
            path.start(),
            path.end(),
            p0.x,
            p.x
        )));
    }
    Ok(())
}

fn check_sheet(curve: &HyperellipticCurve, p: &CurvePoint, y_end: C64) -> Result<()> {
    let found = curve.sheet_of(p.x, y_end);
    if found != p.sheet {
        return Err(Error::SheetMismatch { expected: p.sheet, found });
    }
    Ok(())
}

/// `∫ ω_γ` along `path` starting at `y_start`; also returns the final `y`.
fn class_integral(
    curve: &HyperellipticCurve,
    class: &HarmonicClass,
    path: &PathSpec,
    y_start: C64,
) -> Result<(C64, C64)> {
    let mut sum = CompensatedSum::default();
    let y_end = curve::walk_path(curve, path, y_start, &PanelRule::default(), |x, y, wdx| {
        let poly = class.c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * x + c);
        sum.add(poly * wdx / y);
    })?;
    Ok((sum.value(), y_end))
}

fn unimodular(phase: f64) -> C64 {
    let (s, c) = (TAU * phase).sin_cos();
    C64::new(c, s)
}

/// The point reached by continuing `p0` along `path`.
pub fn continue_point(curve: &HyperellipticCurve, p0: &CurvePoint, path: &PathSpec) -> Result<CurvePoint> {
    let y = curve::walk_path(curve, path, p0.y(curve), &PanelRule::new(4), |_, _, _| {})?;
    Ok(CurvePoint::new(path.end(), curve.sheet_of(path.end(), y)))
}

/// `F_γ(p) = exp(2πi · 2 Re ∫_{p0}^{p} ω_γ)`.
pub fn hecke_eigenvalue_f(
    curve: &HyperellipticCurve,
    class: &HarmonicClass,
    p0: &CurvePoint,
    p: &CurvePoint,
    path: &PathSpec,
) -> Result<C64> {
    check_endpoints(path, p0, p)?;
    let (integral, y_end) = class_integral(curve, class, path, p0.y(curve))?;
    check_sheet(curve, p, y_end)?;
    let f = unimodular(2.0 * integral.re);
    debug_assert!((f.norm() - 1.0).abs() < 1e-12);
    Ok(f)
}

/// `(∫_{p0}^{p} ω_i)_i`; reduce with [`PeriodData::reduce`] if needed.
pub fn abel_jacobi(
    curve: &HyperellipticCurve,
    p0: &CurvePoint,
    p: &CurvePoint,
    path: &PathSpec,
) -> Result<Vec<C64>> {
    check_endpoints(path, p0, p)?;
    let (v, y_end) =
        curve::holomorphic_integrals(curve, path, p0.y(curve), curve.genus(), &PanelRule::default())?;
    check_sheet(curve, p, y_end)?;
    Ok(v)
}

/// `f_γ(v) = exp(2πi · 2 Re(c · v))`, evaluated on the reduced representative.
pub fn fourier_harmonic_eval(periods: &PeriodData, class: &HarmonicClass, v: &[C64]) -> Result<C64> {
    let reduced = periods.reduce(v)?;
    let pairing = compensated_sum(class.c.iter().zip(&reduced).map(|(c, v)| c * v));
    Ok(unimodular(2.0 * pairing.re))
}

/// `|f_γ(v + AJ(p)) − F_γ(p) f_γ(v)|`.
pub fn verify_hecke_relation(
    curve: &HyperellipticCurve,
    periods: &PeriodData,
    class: &HarmonicClass,
    v: &[C64],
    p0: &CurvePoint,
    p: &CurvePoint,
    path: &PathSpec,
) -> Result<f64> {
    let aj = abel_jacobi(curve, p0, p, path)?;
    let f = hecke_eigenvalue_f(curve, class, p0, p, path)?;
    let shifted: Vec<C64> = v.iter().zip(&aj).map(|(a, b)| a + b).collect();
    let lhs = fourier_harmonic_eval(periods, class, &shifted)?;
    let rhs = f * fourier_harmonic_eval(periods, class, v)?;
    Ok((lhs - rhs).norm())
}

/// Eigenvalues `(a, b)` of the rank-one oper `d + a ω + b ω̄`: `a = 2πi c`,
/// `b = 2πi c̄`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperEigenvalues {
    #[serde(serialize_with = "ser_c64_vec")]
    pub a: Vec<C64>,
    #[serde(serialize_with = "ser_c64_vec")]
    pub b: Vec<C64>,
}

impl OperEigenvalues {
    /// `max_i |b_i + conj(a_i)|`.
    pub fn conjugation_defect(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| (b + a.conj()).norm())
            .fold(0.0, f64::max)
    }

    /// `∮ (a ω + b ω̄)` over each basis cycle.
    pub fn cycle_exponents(&self, periods: &PeriodData) -> Vec<C64> {
        let pi = periods.periods();
        (0..pi.ncols())
            .map(|k| {
                compensated_sum(
                    (0..pi.nrows()).map(|i| self.a[i] * pi[(i, k)] + self.b[i] * pi[(i, k)].conj()),
                )
            })
            .collect()
    }
}

pub fn oper_eigenvalues_ab(class: &HarmonicClass) -> OperEigenvalues {
    let a = class.c.iter().map(|c| C64::new(-TAU * c.im, TAU * c.re)).collect();
    let b = class.c.iter().map(|c| C64::new(TAU * c.im, TAU * c.re)).collect();
    OperEigenvalues { a, b }
}

/// Central-difference check of `dF = 2πi (ω_γ + ω̄_γ) F` at the end of `path`,
/// in the real and imaginary directions. Returns the residual relative to
/// the largest predicted derivative.
pub fn verify_df(
    curve: &HyperellipticCurve,
    class: &HarmonicClass,
    p0: &CurvePoint,
    path: &PathSpec,
    h: f64,
) -> Result<f64> {
    if path.start() != p0.x {
        return Err(Error::InvalidConfig("path does not start at p0".into()));
    }
    let x = path.end();
    let distance = curve.distance_to_branch_points(x);
    if distance <= 10.0 * h {
        return Err(Error::StencilNearBranchPoint { distance });
    }
    let (integral, y) = class_integral(curve, class, path, p0.y(curve))?;
    let f_center = unimodular(2.0 * integral.re);
    let poly = class.c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * x + c);
    let g = poly / y;
    let f_at = |delta: C64| -> Result<C64> {
        let (piece, _) = class_integral(curve, class, &PathSpec::line(x, x + delta), y)?;
        Ok(f_center * unimodular(2.0 * piece.re))
    };
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for dir in [C64::new(1.0, 0.0), I] {
        let fd = (f_at(dir * h)? - f_at(-dir * h)?) / (2.0 * h);
        let predicted = I * TAU * 2.0 * (g * dir).re * f_center;
        worst = worst.max((fd - predicted).norm());
        scale = scale.max(predicted.norm());
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn square() -> (HyperellipticCurve, PeriodData) {
        let curve = HyperellipticCurve::from_real(&[0.0, -1.0, 0.0, 1.0]).unwrap();
        let periods = period_matrix(&curve, 1e-10).unwrap();
        (curve, periods)
    }

    #[test]
    fn zero_class_is_trivial() {
        let (curve, periods) = square();
        let class = integer_harmonic_class(&periods, &[0, 0]).unwrap();
        assert!(class.c.iter().all(|z| z.norm() == 0.0));
        let p0 = CurvePoint::new(c(0.5, 1.0), 1);
        let path = PathSpec::line(p0.x, c(2.0, 0.5));
        let p = CurvePoint::new(path.end(), 1);
        let p = match hecke_eigenvalue_f(&curve, &class, &p0, &p, &path) {
            Err(Error::SheetMismatch { found, .. }) => CurvePoint::new(p.x, found),
            _ => p,
        };
        assert_eq!(hecke_eigenvalue_f(&curve, &class, &p0, &p, &path).unwrap(), c(1.0, 0.0));
        let v = vec![c(0.3, 0.2)];
        assert_eq!(verify_hecke_relation(&curve, &periods, &class, &v, &p0, &p, &path).unwrap(), 0.0);
        assert_eq!(verify_df(&curve, &class, &p0, &path, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn classes_are_additive() {
        let (_, periods) = square();
        let a = integer_harmonic_class(&periods, &[1, -2]).unwrap();
        let b = integer_harmonic_class(&periods, &[3, 5]).unwrap();
        let sum = integer_harmonic_class(&periods, &[4, 3]).unwrap();
        for i in 0..1 {
            assert!((a.c[i] + b.c[i] - sum.c[i]).norm() < 1e-10);
        }
        assert!(a.residual < 1e-12 && b.residual < 1e-12);
    }

    #[test]
    fn conjugation_identity_is_exact() {
        let (_, periods) = square();
        let class = integer_harmonic_class(&periods, &[2, -7]).unwrap();
        let ab = oper_eigenvalues_ab(&class);
        assert_eq!(ab.conjugation_defect(), 0.0);
        for z in ab.cycle_exponents(&periods) {
            assert!(z.re.abs() < 1e-9);
        }
    }

    #[test]
    fn fourier_harmonic_is_lattice_periodic() {
        let (_, periods) = square();
        let class = integer_harmonic_class(&periods, &[1, 2]).unwrap();
        let v = vec![c(0.37, -0.21)];
        let base = fourier_harmonic_eval(&periods, &class, &v).unwrap();
        let shifted = vec![v[0] + periods.a[(0, 0)] * 3.0 - periods.b[(0, 0)]];
        assert!((fourier_harmonic_eval(&periods, &class, &shifted).unwrap() - base).norm() < 1e-9);
        let neg = integer_harmonic_class(&periods, &[-1, -2]).unwrap();
        assert!((fourier_harmonic_eval(&periods, &neg, &v).unwrap() - base.conj()).norm() < 1e-12);
    }
}
