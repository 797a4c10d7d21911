//! Independent period computation used to cross-check the main quadrature.
//!
//! Each basis cycle is replaced by an ellipse around the same set of branch
//! points, integrated with the periodic trapezoid rule. The branch of `y` is
//! continued through ratios `y_k = y_{k-1} sqrt(f(x_k) / f(x_{k-1}))` rather
//! than by nearest-root selection. Nothing here is shared with
//! [`crate::abelian`] beyond the curve's polynomial.

use std::f64::consts::TAU;

use crate::abelian::HyperellipticCurve;
use crate::error::{Error, Result};
use crate::numeric::{CMat, C64};

/// An ellipse `center + e^{iθ}(a cos t + i b sin t)`.
#[derive(Debug, Clone, Copy)]
pub struct Ellipse {
    pub center: C64,
    pub angle: f64,
    pub a: f64,
    pub b: f64,
}

impl Ellipse {
    fn point(&self, t: f64) -> C64 {
        self.center + C64::from_polar(1.0, self.angle) * C64::new(self.a * t.cos(), self.b * t.sin())
    }

    fn derivative(&self, t: f64) -> C64 {
        C64::from_polar(1.0, self.angle) * C64::new(-self.a * t.sin(), self.b * t.cos())
    }

    /// Elliptic "radius" of `p`: below 1 inside, above 1 outside.
    fn level(&self, p: C64) -> f64 {
        let q = (p - self.center) * C64::from_polar(1.0, -self.angle);
        ((q.re / self.a).powi(2) + (q.im / self.b).powi(2)).sqrt()
    }
}

/// Picks the ellipse with the widest margin between `inside` and `outside`
/// from a grid of axis lengths aligned with the principal direction of `inside`.
pub fn separating_ellipse(inside: &[C64], outside: &[C64]) -> Option<(Ellipse, f64)> {
    let n = inside.len() as f64;
    let center = inside.iter().sum::<C64>() / n;
    let spread: C64 = inside.iter().map(|p| (p - center) * (p - center)).sum();
    let angle = if spread.norm() > 0.0 { 0.5 * spread.arg() } else { 0.0 };
    let extent = inside
        .iter()
        .chain(outside)
        .map(|p| (p - center).norm())
        .fold(0.0, f64::max)
        .max(1e-3);
    let mut best: Option<(Ellipse, f64)> = None;
    let steps = 120;
    for i in 1..=steps {
        for j in 1..=steps {
            let e = Ellipse {
                center,
                angle,
                a: extent * i as f64 / steps as f64,
                b: extent * j as f64 / steps as f64,
            };
            let inner = inside.iter().map(|&p| e.level(p)).fold(0.0, f64::max);
            let outer = outside.iter().map(|&p| e.level(p)).fold(f64::INFINITY, f64::min);
            let margin = (1.0 - inner).min(outer - 1.0) * e.a.min(e.b);
            if margin > 0.0 && best.is_none_or(|(_, m)| margin > m) {
                best = Some((e, margin));
            }
        }
    }
    best
}

/// `∮ x^k dx / y` for `k < count` around `ellipse` by the `n`-point trapezoid rule.
pub fn ellipse_periods(curve: &HyperellipticCurve, ellipse: &Ellipse, count: usize, n: usize) -> Vec<C64> {
    let mut sums = vec![C64::new(0.0, 0.0); count];
    let mut x_prev = ellipse.point(0.0);
    let mut f_prev = curve.f(x_prev);
    let mut y = f_prev.sqrt();
    for k in 0..n {
        let t = TAU * k as f64 / n as f64;
        let x = ellipse.point(t);
        let fx = curve.f(x);
        if k > 0 {
            y *= (fx / f_prev).sqrt();
        }
        let w = ellipse.derivative(t) * (TAU / n as f64) / y;
        let mut power = C64::new(1.0, 0.0);
        for s in sums.iter_mut() {
            *s += w * power;
            power *= x;
        }
        x_prev = x;
        f_prev = fx;
    }
    let _ = x_prev;
    sums
}

/// Period matrix `tau` from ellipse contours. Each a-cycle lift has
/// `Re ∮ dx/y > 0`; the b-cycle lifts are chosen by testing every sign
/// pattern against symmetry and `Im tau > 0`.
pub fn oracle_tau(curve: &HyperellipticCurve, n: usize) -> Result<CMat> {
    let g = curve.genus();
    let mut e = curve.branch_points().to_vec();
    e.sort_by(|p, q| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im)));
    let mut columns = Vec::new();
    let sets: Vec<Vec<usize>> = (0..g)
        .map(|i| vec![2 * i, 2 * i + 1])
        .chain((0..g).map(|i| (2 * i + 1..=2 * g).collect()))
        .collect();
    for set in &sets {
        let inside: Vec<C64> = set.iter().map(|&k| e[k]).collect();
        let outside: Vec<C64> = (0..e.len()).filter(|k| !set.contains(k)).map(|k| e[k]).collect();
        let (ellipse, _) = separating_ellipse(&inside, &outside)
            .ok_or_else(|| Error::QuadratureFailure(format!("no ellipse separates {set:?}")))?;
        columns.push(ellipse_periods(curve, &ellipse, g, n));
    }
    for col in columns.iter_mut().take(g) {
        let lead = col[0];
        let flip = if lead.re.abs() > 1e-8 * lead.norm() { lead.re < 0.0 } else { lead.im < 0.0 };
        if flip {
            col.iter_mut().for_each(|z| *z = -*z);
        }
    }
    let a = CMat::from_fn(g, g, |i, j| columns[j][i]);
    let a_inv = a
        .try_inverse()
        .ok_or_else(|| Error::QuadratureFailure("singular a-periods".into()))?;
    let mut chosen: Option<(f64, CMat)> = None;
    for mask in 0..(1u32 << g) {
        let b = CMat::from_fn(g, g, |i, j| {
            let s = if mask & (1 << j) != 0 { -1.0 } else { 1.0 };
            columns[g + j][i] * s
        });
        let tau = &a_inv * b;
        let asym = (0..g)
            .flat_map(|i| (0..g).map(move |j| (i, j)))
            .map(|(i, j)| (tau[(i, j)] - tau[(j, i)]).norm())
            .fold(0.0, f64::max);
        let positive = if g == 1 {
            tau[(0, 0)].im > 0.0
        } else {
            let (p, q, r) = (tau[(0, 0)].im, 0.5 * (tau[(0, 1)].im + tau[(1, 0)].im), tau[(1, 1)].im);
            p > 0.0 && p * r - q * q > 0.0
        };
        if positive && chosen.as_ref().is_none_or(|(s, _)| asym < *s) {
            chosen = Some((asym, tau));
        }
    }
    chosen
        .map(|(_, tau)| tau)
        .ok_or_else(|| Error::QuadratureFailure("no b-cycle orientation gives Im tau > 0".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_finds_square_lattice() {
        let curve = HyperellipticCurve::from_real(&[0.0, -1.0, 0.0, 1.0]).unwrap();
        let tau = oracle_tau(&curve, 4096).unwrap();
        assert!((tau[(0, 0)] - C64::new(0.0, 1.0)).norm() < 1e-10, "{tau}");
    }
}
