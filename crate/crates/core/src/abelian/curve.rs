//! Hyperelliptic curves `y² = f(x)` and line integrals of `x^k dx / y` with
//! the branch of `y` continued along the path.

use gauss_quad::GaussLegendre;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{cmp_re_im, sqrt_near, C64};
use crate::transport::PathSpec;

/// Smallest admissible distance between two roots of `f`.
pub const MIN_ROOT_SEPARATION: f64 = 1e-8;

/// Closest a quadrature path may come to a branch point.
pub const MIN_PATH_CLEARANCE: f64 = 1e-7;

const MAX_PANELS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperellipticCurve {
    coefficients: Vec<C64>,
    branch_points: Vec<C64>,
    genus: usize,
}

/// A point of the curve: `x` together with the sign of `y` relative to the
/// principal square root of `f(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: C64,
    pub sheet: i8,
}

impl CurvePoint {
    pub fn new(x: C64, sheet: i8) -> Self {
        Self { x, sheet: if sheet < 0 { -1 } else { 1 } }
    }

    pub fn y(&self, curve: &HyperellipticCurve) -> C64 {
        curve.principal_y(self.x) * f64::from(self.sheet)
    }
}

impl HyperellipticCurve {
    /// `coefficients[k]` multiplies `x^k`; the degree must be 3 to 6.
    pub fn new(coefficients: Vec<C64>) -> Result<Self> {
        let degree = coefficients.len().saturating_sub(1);
        if !(3..=6).contains(&degree) {
            return Err(Error::InvalidConfig(format!(
                "curve polynomial must have degree 3 to 6, got {} coefficients",
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidConfig("curve coefficients must be finite".into()));
        }
        if coefficients[degree].norm() == 0.0 {
            return Err(Error::InvalidConfig("leading coefficient is zero".into()));
        }
        let branch_points = roots(&coefficients);
        let mut separation = f64::INFINITY;
        for (i, a) in branch_points.iter().enumerate() {
            for b in &branch_points[i + 1..] {
                separation = separation.min((a - b).norm());
            }
        }
        if separation <= MIN_ROOT_SEPARATION {
            return Err(Error::BranchPointCollision(separation));
        }
        Ok(Self {
            coefficients,
            branch_points,
            genus: (degree - 1) / 2,
        })
    }

    pub fn from_real(coefficients: &[f64]) -> Result<Self> {
        Self::new(coefficients.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    /// Roots of `f`, sorted by real part, then imaginary part.
    pub fn branch_points(&self) -> &[C64] {
        &self.branch_points
    }

    pub fn f(&self, x: C64) -> C64 {
        self.coefficients.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    pub fn principal_y(&self, x: C64) -> C64 {
        self.f(x).sqrt()
    }

    pub fn distance_to_branch_points(&self, x: C64) -> f64 {
        self.branch_points
            .iter()
            .map(|e| (x - e).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Sheet of `(x, y)` relative to the principal root.
    pub fn sheet_of(&self, x: C64, y: C64) -> i8 {
        let r = self.principal_y(x);
        if (y - r).norm_sqr() <= (y + r).norm_sqr() {
            1
        } else {
            -1
        }
    }
}

fn roots(coefficients: &[C64]) -> Vec<C64> {
    let n = coefficients.len() - 1;
    let lead = coefficients[n];
    let mut companion = DMatrix::<C64>::zeros(n, n);
    for i in 1..n {
        companion[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..n {
        companion[(i, n - 1)] = -coefficients[i] / lead;
    }
    let f = |x: C64| coefficients.iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * x + c);
    let df = |x: C64| {
        coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, (k, &c)| acc * x + c * k as f64)
    };
    // The Schur iteration stalls on some highly symmetric companion matrices.
    let schur = nalgebra::linalg::Schur::try_new(companion, f64::EPSILON, 1000)
        .and_then(|s| s.eigenvalues());
    let mut roots: Vec<C64> = match schur {
        Some(v) => v.iter().copied().collect(),
        None => aberth(n, &f, &df, coefficients),
    };
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let d = df(*r);
            if d.norm() == 0.0 {
                break;
            }
            let step = f(*r) / d;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    roots.sort_by(cmp_re_im);
    roots
}

/// Simultaneous Newton iteration with mutual repulsion between estimates.
fn aberth(n: usize, f: &dyn Fn(C64) -> C64, df: &dyn Fn(C64) -> C64, coefficients: &[C64]) -> Vec<C64> {
    let lead = coefficients[n].norm();
    let radius = 1.0 + coefficients[..n].iter().map(|c| c.norm() / lead).fold(0.0, f64::max);
    let mut z: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(0.5 * radius, 0.4 + std::f64::consts::TAU * k as f64 / n as f64))
        .collect();
    for _ in 0..500 {
        let mut moved: f64 = 0.0;
        for k in 0..n {
            let ratio = f(z[k]) / df(z[k]);
            let repulsion: C64 = (0..n).filter(|&j| j != k).map(|j| 1.0 / (z[k] - z[j])).sum();
            let step = ratio / (1.0 - ratio * repulsion);
            if step.re.is_finite() && step.im.is_finite() {
                z[k] -= step;
                moved = moved.max(step.norm());
            }
        }
        if moved < 1e-15 * radius {
            break;
        }
    }
    z
}

/// Gauss–Legendre nodes on `[0, 1]` in increasing order.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pairs: Vec<(f64, f64)>,
}

impl PanelRule {
    pub fn new(nodes: usize) -> Self {
        let rule = GaussLegendre::new(nodes.max(2)).expect("degree is at least 2");
        let mut pairs: Vec<(f64, f64)> = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { pairs }
    }
}

impl Default for PanelRule {
    fn default() -> Self {
        Self::new(20)
    }
}

/// Walks `path` with `y` continued from `y_start`, calling `visit(x, y, w dx)`
/// at every quadrature node. Panels are at most half the distance from
/// their start to the nearest branch point. Returns `y` at the path end.
pub fn walk_path<F>(
    curve: &HyperellipticCurve,
    path: &PathSpec,
    y_start: C64,
    rule: &PanelRule,
    mut visit: F,
) -> Result<C64>
where
    F: FnMut(C64, C64, C64),
{
    let mut y = y_start;
    let mut panels = 0usize;
    for segment in path.segments() {
        let length = segment.length();
        if length == 0.0 {
            continue;
        }
        let mut s = 0.0;
        while s < 1.0 {
            let x0 = segment.point(s);
            let d = curve.distance_to_branch_points(x0);
            if d < MIN_PATH_CLEARANCE {
                let point = nearest(curve, x0);
                return Err(Error::PathThroughBranchPoint { point, distance: d });
            }
            let ds = (0.5 * d / length).min(1.0 - s);
            let s1 = if s + ds >= 1.0 - 1e-15 { 1.0 } else { s + ds };
            let width = s1 - s;
            for &(t, w) in &rule.pairs {
                let u = s + width * t;
                let x = segment.point(u);
                y = sqrt_near(curve.f(x), y);
                visit(x, y, segment.derivative(u) * (w * width));
            }
            y = sqrt_near(curve.f(segment.point(s1)), y);
            s = s1;
            panels += 1;
            if panels > MAX_PANELS {
                return Err(Error::QuadratureFailure(format!(
                    "more than {MAX_PANELS} panels; the path hugs a branch point"
                )));
            }
        }
    }
    Ok(y)
}

fn nearest(curve: &HyperellipticCurve, x: C64) -> C64 {
    *curve
        .branch_points
        .iter()
        .min_by(|a, b| (x - *a).norm().total_cmp(&(x - *b).norm()))
        .expect("curve has branch points")
}

/// `∫ x^k dx / y` along `path` for `k < count`, and the final `y`.
pub fn holomorphic_integrals(
    curve: &HyperellipticCurve,
    path: &PathSpec,
    y_start: C64,
    count: usize,
    rule: &PanelRule,
) -> Result<(Vec<C64>, C64)> {
    let mut sums = vec![crate::numeric::CompensatedSum::default(); count];
    let y_end = walk_path(curve, path, y_start, rule, |x, y, wdx| {
        let mut term = wdx / y;
        for sum in sums.iter_mut() {
            sum.add(term);
            term *= x;
        }
    })?;
    Ok((sums.iter().map(|s| s.value()).collect(), y_end))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn roots_are_sorted_and_accurate() {
        let curve = HyperellipticCurve::from_real(&[0.0, -1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let expected = [c(-1.0, 0.0), c(0.0, -1.0), c(0.0, 0.0), c(0.0, 1.0), c(1.0, 0.0)];
        assert_eq!(curve.genus(), 2);
        for (r, e) in curve.branch_points().iter().zip(expected) {
            assert!((r - e).norm() < 1e-13, "{r} vs {e}");
        }
    }

    #[test]
    fn genus_from_degree() {
        for (deg, g) in [(3, 1), (4, 1), (5, 2), (6, 2)] {
            let mut coeffs = vec![0.0; deg + 1];
            coeffs[deg] = 1.0;
            coeffs[0] = -1.0;
            assert_eq!(HyperellipticCurve::from_real(&coeffs).unwrap().genus(), g);
        }
    }

    #[test]
    fn rejects_repeated_roots_and_bad_degree() {
        // x^3 - x^2 has a double root at 0.
        let err = HyperellipticCurve::from_real(&[0.0, 0.0, -1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::BranchPointCollision(_)));
        assert!(HyperellipticCurve::from_real(&[1.0, 0.0, 1.0]).is_err());
        assert!(HyperellipticCurve::from_real(&[1.0, 0.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn line_integral_matches_closed_form() {
        // y^2 = x^3 - x near x = 2..3: compare against a dense midpoint sum.
        let curve = HyperellipticCurve::from_real(&[0.0, -1.0, 0.0, 1.0]).unwrap();
        let path = PathSpec::line(c(2.0, 0.0), c(3.0, 0.0));
        let y0 = curve.principal_y(c(2.0, 0.0));
        let (v, _) = holomorphic_integrals(&curve, &path, y0, 1, &PanelRule::default()).unwrap();
        let n = 200_000;
        let mut reference = 0.0;
        for k in 0..n {
            let x = 2.0 + (k as f64 + 0.5) / n as f64;
            reference += 1.0 / (x * x * x - x).sqrt() / n as f64;
        }
        assert!((v[0].re - reference).abs() < 1e-9 && v[0].im.abs() < 1e-14);
    }

    #[test]
    fn path_through_branch_point_fails() {
        let curve = HyperellipticCurve::from_real(&[0.0, -1.0, 0.0, 1.0]).unwrap();
        let path = PathSpec::line(c(-0.5, 0.0), c(0.5, 0.0));
        let y0 = curve.principal_y(c(-0.5, 0.0));
        let err = holomorphic_integrals(&curve, &path, y0, 1, &PanelRule::default()).unwrap_err();
        assert!(matches!(err, Error::PathThroughBranchPoint { .. }));
    }
}
