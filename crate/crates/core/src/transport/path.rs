//! Piecewise paths in the complex plane built from straight segments and
//! circular arcs.
//!
//! Paths are *constructed*: every segment stores its exact start and end
//! point, and a builder threads the end of one segment into the start of the
//! next, so consecutive segments always share endpoints bit-for-bit.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::C64;

/// One piece of a path, parametrized by `s` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Line {
        from: C64,
        to: C64,
    },
    Arc {
        center: C64,
        radius: f64,
        start_angle: f64,
        sweep: f64,
        from: C64,
        to: C64,
    },
}

impl Segment {
    pub fn start(&self) -> C64 {
        match *self {
            Segment::Line { from, .. } | Segment::Arc { from, .. } => from,
        }
    }

    pub fn end(&self) -> C64 {
        match *self {
            Segment::Line { to, .. } | Segment::Arc { to, .. } => to,
        }
    }

    pub fn point(&self, s: f64) -> C64 {
        if s == 0.0 {
            return self.start();
        }
        if s == 1.0 {
            return self.end();
        }
        match *self {
            Segment::Line { from, to } => from + (to - from) * s,
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
                ..
            } => center + C64::from_polar(radius, start_angle + s * sweep),
        }
    }

    /// dz/ds.
    pub fn derivative(&self, s: f64) -> C64 {
        match *self {
            Segment::Line { from, to } => to - from,
            Segment::Arc {
                radius,
                start_angle,
                sweep,
                ..
            } => C64::new(0.0, sweep) * C64::from_polar(radius, start_angle + s * sweep),
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { from, to } => (to - from).norm(),
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    pub fn reversed(&self) -> Segment {
        match *self {
            Segment::Line { from, to } => Segment::Line { from: to, to: from },
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
                from,
                to,
            } => Segment::Arc {
                center,
                radius,
                start_angle: start_angle + sweep,
                sweep: -sweep,
                from: to,
                to: from,
            },
        }
    }

    /// Euclidean distance from `p` to the point set of the segment.
    pub fn distance_to(&self, p: C64) -> f64 {
        match *self {
            Segment::Line { from, to } => {
                let d = to - from;
                let len2 = d.norm_sqr();
                if len2 == 0.0 {
                    return (p - from).norm();
                }
                let t = ((p - from) * d.conj()).re / len2;
                let t = t.clamp(0.0, 1.0);
                (p - (from + d * t)).norm()
            }
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
                from,
                to,
            } => {
                let rel = p - center;
                let r = rel.norm();
                if r == 0.0 {
                    return radius;
                }
                if angle_within(rel.arg(), start_angle, sweep) {
                    (r - radius).abs()
                } else {
                    (p - from).norm().min((p - to).norm())
                }
            }
        }
    }

    /// Continuous change of `arg(z - p)` along the segment, from exact geometry.
    fn arg_change(&self, p: C64) -> Result<f64> {
        if self.distance_to(p) == 0.0 {
            return Err(Error::PointOnPath(p));
        }
        match *self {
            Segment::Line { from, to } => Ok(((to - p) / (from - p)).arg()),
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
                ..
            } => {
                // Split into sub-arcs of at most a quarter turn. Along each one the
                // change equals the change along its chord, corrected by a full
                // turn when p sits in the circular segment between chord and arc.
                let pieces = ((sweep.abs() / (PI / 2.0)).ceil() as usize).max(1);
                arc_arg_change(center, radius, start_angle, sweep, pieces, p, 0)
            }
        }
    }
}

fn arc_arg_change(
    center: C64,
    radius: f64,
    start_angle: f64,
    sweep: f64,
    pieces: usize,
    p: C64,
    depth: u32,
) -> Result<f64> {
    let mut total = 0.0;
    let step = sweep / pieces as f64;
    let inside_circle = (p - center).norm() < radius;
    for k in 0..pieces {
        let a0 = start_angle + step * k as f64;
        let a1 = a0 + step;
        let z0 = center + C64::from_polar(radius, a0);
        let z1 = center + C64::from_polar(radius, a1);
        let chord = Segment::Line { from: z0, to: z1 };
        let chord_dist = chord.distance_to(p);
        if chord_dist <= 1e-12 * radius.max(1.0) {
            // p lies on (or numerically at) this chord; refine.
            if depth > 60 {
                return Err(Error::PointOnPath(p));
            }
            total += arc_arg_change(center, radius, a0, step, 2, p, depth + 1)?;
            continue;
        }
        total += ((z1 - p) / (z0 - p)).arg();
        if inside_circle {
            // p is in the circular segment iff it lies on the far side of the
            // chord from the center.
            let mid = (z0 + z1) * 0.5;
            let side_p = ((z1 - z0).conj() * (p - mid)).im;
            let side_c = ((z1 - z0).conj() * (center - mid)).im;
            if side_p * side_c < 0.0 {
                total += TAU * step.signum();
            }
        }
    }
    Ok(total)
}

fn angle_within(phi: f64, start: f64, sweep: f64) -> bool {
    if sweep.abs() >= TAU {
        return true;
    }
    let (lo, span) = if sweep >= 0.0 {
        (start, sweep)
    } else {
        (start + sweep, -sweep)
    };
    (phi - lo).rem_euclid(TAU) <= span
}

/// An ordered chain of segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    start: C64,
    segments: Vec<Segment>,
}

impl PathSpec {
    /// Empty path sitting at `start`.
    pub fn at(start: C64) -> Self {
        PathSpec {
            start,
            segments: Vec::new(),
        }
    }

    pub fn builder(start: C64) -> PathBuilder {
        PathBuilder {
            path: PathSpec::at(start),
        }
    }

    pub fn line(from: C64, to: C64) -> Self {
        PathSpec::builder(from).line_to(to).build()
    }

    /// Builds from raw segments, checking that endpoints chain exactly.
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        let start = segments
            .first()
            .map(Segment::start)
            .ok_or_else(|| Error::InvalidConfig("empty segment list".into()))?;
        for w in segments.windows(2) {
            if w[0].end() != w[1].start() {
                return Err(Error::DisjointPaths {
                    end: w[0].end(),
                    start: w[1].start(),
                });
            }
        }
        Ok(PathSpec { start, segments })
    }

    pub fn start(&self) -> C64 {
        self.start
    }

    pub fn end(&self) -> C64 {
        self.segments.last().map_or(self.start, Segment::end)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_closed(&self) -> bool {
        self.start() == self.end()
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn reversed(&self) -> PathSpec {
        PathSpec {
            start: self.end(),
            segments: self.segments.iter().rev().map(Segment::reversed).collect(),
        }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &PathSpec) -> Result<PathSpec> {
        if self.end() != next.start() {
            return Err(Error::DisjointPaths {
                end: self.end(),
                start: next.start(),
            });
        }
        let mut segments = self.segments.clone();
        segments.extend(next.segments.iter().cloned());
        Ok(PathSpec {
            start: self.start,
            segments,
        })
    }

    /// Distance from `p` to the nearest point of the path.
    pub fn distance_to(&self, p: C64) -> f64 {
        if self.segments.is_empty() {
            return (p - self.start).norm();
        }
        self.segments
            .iter()
            .map(|s| s.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks that every point of the path keeps `clearance` from each of `points`.
    pub fn check_clearance(&self, points: &[C64], clearance: f64) -> Result<()> {
        for &q in points {
            let d = self.distance_to(q);
            if d < clearance {
                return Err(Error::ClearanceViolation {
                    point: q,
                    distance: d,
                    clearance,
                });
            }
        }
        Ok(())
    }

    /// Rotates a closed path so that it starts at the beginning of segment `k`.
    pub fn rotated(&self, k: usize) -> Result<PathSpec> {
        if !self.is_closed() {
            return Err(Error::PathNotClosed {
                start: self.start(),
                end: self.end(),
            });
        }
        if self.segments.is_empty() {
            return Ok(self.clone());
        }
        let k = k % self.segments.len();
        let mut segments = self.segments[k..].to_vec();
        segments.extend_from_slice(&self.segments[..k]);
        PathSpec::from_segments(segments)
    }
}

/// Incremental path construction; each call starts where the last one ended.
#[derive(Debug, Clone)]
pub struct PathBuilder {
    path: PathSpec,
}

impl PathBuilder {
    pub fn current(&self) -> C64 {
        self.path.end()
    }

    pub fn line_to(mut self, to: C64) -> Self {
        let from = self.current();
        if from != to {
            self.path.segments.push(Segment::Line { from, to });
        }
        self
    }

    /// Arc around `center` through the signed angle `sweep`, starting at the
    /// current point. Whole turns return exactly to the current point.
    pub fn arc_around(mut self, center: C64, sweep: f64) -> Self {
        let from = self.current();
        let rel = from - center;
        let radius = rel.norm();
        let start_angle = rel.arg();
        let turns = sweep / TAU;
        let to = if turns == turns.round() {
            from
        } else {
            center + C64::from_polar(radius, start_angle + sweep)
        };
        self.path.segments.push(Segment::Arc {
            center,
            radius,
            start_angle,
            sweep,
            from,
            to,
        });
        self
    }

    /// Arc around `center` that ends exactly at `to`, which must lie on the
    /// same circle; `sweep` fixes direction and number of turns.
    pub fn arc_to(mut self, center: C64, sweep: f64, to: C64) -> Self {
        let from = self.current();
        let rel = from - center;
        self.path.segments.push(Segment::Arc {
            center,
            radius: rel.norm(),
            start_angle: rel.arg(),
            sweep,
            from,
            to,
        });
        self
    }

    pub fn append(mut self, other: &PathSpec) -> Result<Self> {
        self.path = self.path.then(other)?;
        Ok(self)
    }

    pub fn build(self) -> PathSpec {
        self.path
    }
}

/// Loop from `basepoint` to the nearest point of the circle `|z - center| = radius`,
/// once counterclockwise around it, and back.
pub fn circle_loop(center: C64, basepoint: C64, radius: f64) -> Result<PathSpec> {
    let rel = basepoint - center;
    let distance = rel.norm();
    if !(radius > 0.0) || distance <= radius {
        return Err(Error::BasepointInsideCircle { distance, radius });
    }
    let entry = center + rel * (radius / distance);
    Ok(PathSpec::builder(basepoint)
        .line_to(entry)
        .arc_around(center, TAU)
        .line_to(basepoint)
        .build())
}

/// Straight line from `from` to `to`, except that wherever it comes within
/// `radius` of an obstacle it follows the circle of that radius around it.
///
/// Each detour takes the short way round, i.e. passes the obstacle on the
/// side away from it; an obstacle exactly on the line is passed on the left.
/// Straight legs fanning out from a common point therefore stay in the same
/// angular order after detouring.
pub fn detour_line(from: C64, to: C64, obstacles: &[C64], radius: f64) -> Result<PathSpec> {
    let d = to - from;
    let len = d.norm();
    if len == 0.0 {
        return Ok(PathSpec::at(from));
    }
    let u = d / len;
    let mut hits: Vec<(f64, f64, C64, f64)> = Vec::new();
    for &q in obstacles {
        let rel = (q - from) * u.conj();
        let (t, h) = (rel.re, rel.im);
        if h.abs() >= radius {
            continue;
        }
        let half = (radius * radius - h * h).sqrt();
        let (t1, t2) = (t - half, t + half);
        if t2 <= 0.0 || t1 >= len {
            continue;
        }
        if t1 <= 0.0 || t2 >= len {
            let end = if t1 <= 0.0 { from } else { to };
            return Err(Error::ClearanceViolation {
                point: q,
                distance: (end - q).norm(),
                clearance: radius,
            });
        }
        hits.push((t1, t2, q, h));
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in hits.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::ClearanceViolation {
                point: w[1].2,
                distance: (w[1].2 - w[0].2).norm(),
                clearance: 2.0 * radius,
            });
        }
    }
    let mut b = PathSpec::builder(from);
    for (t1, t2, q, h) in hits {
        let p1 = from + u * t1;
        let p2 = from + u * t2;
        let sweep = if h == 0.0 {
            -PI
        } else {
            ((p2 - q) / (p1 - q)).arg()
        };
        b = b.line_to(p1).arc_to(q, sweep, p2);
    }
    Ok(b.line_to(to).build())
}

/// Like [`circle_loop`], but the legs detour around `obstacles` at
/// distance `detour` (see [`detour_line`]).
pub fn circle_loop_avoiding(
    center: C64,
    basepoint: C64,
    radius: f64,
    obstacles: &[C64],
    detour: f64,
) -> Result<PathSpec> {
    let rel = basepoint - center;
    let distance = rel.norm();
    if !(radius > 0.0) || distance <= radius {
        return Err(Error::BasepointInsideCircle { distance, radius });
    }
    let entry = center + rel * (radius / distance);
    let leg = detour_line(basepoint, entry, obstacles, detour)?;
    let around = PathSpec::builder(entry).arc_around(center, TAU).build();
    leg.then(&around)?.then(&leg.reversed())
}

/// Winding number of a closed path around `point`, summed from exact
/// per-segment angle changes.
pub fn winding_number(path: &PathSpec, point: C64) -> Result<i64> {
    if !path.is_closed() {
        return Err(Error::PathNotClosed {
            start: path.start(),
            end: path.end(),
        });
    }
    let mut total = 0.0;
    for seg in path.segments() {
        total += seg.arg_change(point)?;
    }
    Ok((total / TAU).round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn unit_circle_winding() {
        let p = PathSpec::builder(c(1.0, 0.0)).arc_around(c(0.0, 0.0), TAU).build();
        assert!(p.is_closed());
        assert_eq!(winding_number(&p, c(0.0, 0.0)).unwrap(), 1);
        assert_eq!(winding_number(&p, c(3.0, 0.0)).unwrap(), 0);
        assert_eq!(winding_number(&p, c(0.99, 0.0)).unwrap(), 1);
        assert_eq!(winding_number(&p, c(0.0, -0.999_999)).unwrap(), 1);
        assert_eq!(winding_number(&p, c(0.0, -1.000_001)).unwrap(), 0);
    }

    #[test]
    fn loop_and_reverse_cancel() {
        let l = circle_loop(c(0.0, 0.0), c(2.0, 0.0), 1.0).unwrap();
        let both = l.then(&l.reversed()).unwrap();
        for q in [c(0.0, 0.0), c(0.5, 0.5), c(5.0, 1.0)] {
            assert_eq!(winding_number(&both, q).unwrap(), 0);
        }
    }

    #[test]
    fn circle_loop_winds_once() {
        let l = circle_loop(c(0.0, 0.0), c(2.0, 0.0), 1.0).unwrap();
        assert_eq!(winding_number(&l, c(0.0, 0.0)).unwrap(), 1);
        assert_eq!(winding_number(&l, c(0.3, -0.4)).unwrap(), 1);
        assert_eq!(winding_number(&l, c(-3.0, 0.0)).unwrap(), 0);
        assert_eq!(winding_number(&l, c(1.5, 0.2)).unwrap(), 0);
    }

    #[test]
    fn loops_around_two_punctures_compose() {
        let b = c(0.5, -2.0);
        let l0 = circle_loop(c(0.0, 0.0), b, 0.3).unwrap();
        let l1 = circle_loop(c(1.0, 0.0), b, 0.3).unwrap();
        let both = l0.then(&l1).unwrap();
        assert_eq!(winding_number(&both, c(0.0, 0.0)).unwrap(), 1);
        assert_eq!(winding_number(&both, c(1.0, 0.0)).unwrap(), 1);
        assert_eq!(winding_number(&both, c(3.0, 0.0)).unwrap(), 0);
    }

    #[test]
    fn basepoint_inside_is_rejected() {
        assert!(matches!(
            circle_loop(c(0.0, 0.0), c(0.5, 0.0), 1.0),
            Err(Error::BasepointInsideCircle { .. })
        ));
    }

    #[test]
    fn point_on_path_is_rejected() {
        let p = PathSpec::builder(c(1.0, 0.0)).arc_around(c(0.0, 0.0), TAU).build();
        assert!(matches!(
            winding_number(&p, c(1.0, 0.0)),
            Err(Error::PointOnPath(_))
        ));
        let sq = PathSpec::builder(c(0.0, 0.0))
            .line_to(c(1.0, 0.0))
            .line_to(c(1.0, 1.0))
            .line_to(c(0.0, 0.0))
            .build();
        assert!(winding_number(&sq, c(0.5, 0.0)).is_err());
    }

    #[test]
    fn negative_sweep_winds_negatively() {
        let p = PathSpec::builder(c(1.0, 0.0)).arc_around(c(0.0, 0.0), -2.0 * TAU).build();
        assert_eq!(winding_number(&p, c(0.2, 0.1)).unwrap(), -2);
    }

    #[test]
    fn distance_to_arc() {
        let seg = Segment::Arc {
            center: c(0.0, 0.0),
            radius: 1.0,
            start_angle: 0.0,
            sweep: PI / 2.0,
            from: c(1.0, 0.0),
            to: c(0.0, 1.0),
        };
        assert!((seg.distance_to(c(2.0, 2.0)) - (8f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((seg.distance_to(c(0.0, -1.0)) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn detour_keeps_clearance_and_side() {
        let obstacles = [c(1.0, 0.05), c(2.0, -0.05), c(3.0, 0.0)];
        let p = detour_line(c(0.0, 0.0), c(4.0, 0.0), &obstacles, 0.3).unwrap();
        assert_eq!(p.end(), c(4.0, 0.0));
        for q in obstacles {
            assert!(p.distance_to(q) > 0.3 - 1e-12);
        }
        // obstacle above the line is passed below and vice versa; the
        // collinear one is passed on the left (above)
        let mids: Vec<C64> = p
            .segments()
            .iter()
            .filter(|s| matches!(s, Segment::Arc { .. }))
            .map(|s| s.point(0.5))
            .collect();
        assert_eq!(mids.len(), 3);
        assert!(mids[0].im < -0.2);
        assert!(mids[1].im > 0.2);
        assert!((mids[2].im - 0.3).abs() < 1e-12);
        assert!(detour_line(c(0.0, 0.0), c(1.1, 0.0), &obstacles, 0.3).is_err());
    }

    #[test]
    fn avoiding_loop_winds_once() {
        let l = circle_loop_avoiding(c(0.0, 2.0), c(0.0, -1.0), 0.4, &[c(0.0, 0.0)], 0.4).unwrap();
        assert!(l.distance_to(c(0.0, 0.0)) > 0.399);
        assert_eq!(winding_number(&l, c(0.0, 2.0)).unwrap(), 1);
        assert_eq!(winding_number(&l, c(0.0, 0.0)).unwrap(), 0);
    }

    #[test]
    fn rotation_keeps_winding() {
        let l = circle_loop(c(0.0, 0.0), c(2.0, 0.0), 1.0).unwrap();
        let r = l.rotated(1).unwrap();
        assert_eq!(r.start(), l.segments()[1].start());
        assert_eq!(winding_number(&r, c(0.0, 0.0)).unwrap(), 1);
    }
}
