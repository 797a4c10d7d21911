//! Parallel transport of linear ODE systems `Y' = A(z) Y` along paths in ℂ.
//!
//! This is the engine under every monodromy and section computation: a path
//! is traversed segment by segment, each segment reparametrized to `s ∈ [0,1]`
//! and integrated with an adaptive eighth-order Dormand–Prince method.

mod dop853;
pub mod path;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numeric::{CMat, C64};

pub use dop853::StepControl;
pub use path::{
    circle_loop, circle_loop_avoiding, detour_line, winding_number, PathBuilder, PathSpec, Segment,
};

/// Coefficient evaluator `z ↦ A(z)` writing into a preallocated `n×n` buffer.
pub type CoefficientFn = dyn Fn(C64, &mut CMat) + Send + Sync;

/// A first-order linear system with declared singular points.
#[derive(Clone)]
pub struct LinearSystemSpec {
    dimension: usize,
    coefficients: Arc<CoefficientFn>,
    singular_points: Vec<C64>,
    /// Minimum distance every transport path must keep from the singular points.
    pub clearance: f64,
    /// Set when `A(z)` has zero trace everywhere.
    pub traceless: bool,
}

impl fmt::Debug for LinearSystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearSystemSpec")
            .field("dimension", &self.dimension)
            .field("singular_points", &self.singular_points)
            .field("clearance", &self.clearance)
            .finish_non_exhaustive()
    }
}

impl LinearSystemSpec {
    pub fn new<F>(dimension: usize, singular_points: Vec<C64>, coefficients: F) -> Result<Self>
    where
        F: Fn(C64, &mut CMat) + Send + Sync + 'static,
    {
        if dimension == 0 {
            return Err(Error::InvalidConfig("system dimension must be positive".into()));
        }
        let system = LinearSystemSpec {
            dimension,
            coefficients: Arc::new(coefficients),
            singular_points,
            clearance: 0.0,
            traceless: false,
        };
        system.validate()?;
        Ok(system)
    }

    pub fn with_clearance(mut self, clearance: f64) -> Self {
        self.clearance = clearance;
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn singular_points(&self) -> &[C64] {
        &self.singular_points
    }

    pub fn coefficient(&self, z: C64) -> CMat {
        let mut a = CMat::zeros(self.dimension, self.dimension);
        (self.coefficients)(z, &mut a);
        a
    }

    /// Samples the evaluator on a ring around the singular set and at
    /// midpoints between singular points; every value must be finite.
    pub fn validate(&self) -> Result<()> {
        let mut samples = Vec::new();
        let (center, radius) = enclosing_disk(&self.singular_points);
        for k in 0..16 {
            let theta = std::f64::consts::TAU * (k as f64 + 0.5) / 16.0;
            samples.push(center + C64::from_polar(radius + 1.0, theta));
        }
        for (i, &p) in self.singular_points.iter().enumerate() {
            for &q in &self.singular_points[i + 1..] {
                samples.push((p + q) * 0.5 + C64::new(0.0, 1e-3 * (p - q).norm()));
            }
        }
        let mut a = CMat::zeros(self.dimension, self.dimension);
        for z in samples {
            if self.singular_points.contains(&z) {
                continue;
            }
            a.fill(C64::new(0.0, 0.0));
            (self.coefficients)(z, &mut a);
            if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::NonFiniteCoefficient(z));
            }
        }
        Ok(())
    }
}

fn enclosing_disk(points: &[C64]) -> (C64, f64) {
    if points.is_empty() {
        return (C64::new(0.0, 0.0), 1.0);
    }
    let center = points.iter().sum::<C64>() / points.len() as f64;
    let radius = points
        .iter()
        .map(|p| (p - center).norm())
        .fold(0.0, f64::max);
    (center, radius)
}

/// Transports `initial` along `path`: a solution with value `Y` at the path
/// start has value `T·Y` at the end, and this returns `T·initial`.
pub fn transport(
    system: &LinearSystemSpec,
    path: &PathSpec,
    initial: &CMat,
    tol: f64,
) -> Result<CMat> {
    transport_with(system, path, initial, &StepControl::new(tol))
}

pub fn transport_with(
    system: &LinearSystemSpec,
    path: &PathSpec,
    initial: &CMat,
    ctrl: &StepControl,
) -> Result<CMat> {
    let n = system.dimension;
    if initial.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: initial.nrows(),
        });
    }
    if !(ctrl.tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {}", ctrl.tol)));
    }
    path.check_clearance(&system.singular_points, system.clearance)?;

    let cols = initial.ncols();
    // Column-major flattening, matching nalgebra's storage.
    let mut y: Vec<C64> = initial.iter().copied().collect();
    let mut a = CMat::zeros(n, n);
    let mut ctrl = *ctrl;

    for (index, seg) in path.segments().iter().enumerate() {
        let mut rhs = |s: f64, state: &[C64], out: &mut [C64]| -> Result<()> {
            let z = seg.point(s);
            let dz = seg.derivative(s);
            (system.coefficients)(z, &mut a);
            for col in 0..cols {
                let yc = &state[col * n..(col + 1) * n];
                let oc = &mut out[col * n..(col + 1) * n];
                for (i, o) in oc.iter_mut().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for (j, v) in yc.iter().enumerate() {
                        acc += a[(i, j)] * v;
                    }
                    if !acc.re.is_finite() || !acc.im.is_finite() {
                        return Err(Error::NonFiniteCoefficient(z));
                    }
                    *o = acc * dz;
                }
            }
            Ok(())
        };
        let h_last = dop853::integrate_unit(&mut rhs, &mut y, &ctrl, index)?;
        // Warm start the next segment with a comparable arclength step.
        let len = seg.length();
        if let Some(next) = path.segments().get(index + 1) {
            let next_len = next.length();
            if next_len > 0.0 && len > 0.0 {
                ctrl.h_init = (h_last * len / next_len).clamp(1e-4, 0.25);
            }
        }
    }
    Ok(DMatrix::from_column_slice(n, cols, &y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{det2, to_mat2, trace};
    use std::f64::consts::TAU;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn euler_system(delta: f64) -> LinearSystemSpec {
        LinearSystemSpec::new(2, vec![c(0.0, 0.0)], move |z, a| {
            a[(0, 0)] = c(0.0, 0.0);
            a[(0, 1)] = c(1.0, 0.0);
            a[(1, 0)] = -delta / (z * z);
            a[(1, 1)] = c(0.0, 0.0);
        })
        .unwrap()
        .with_clearance(0.1)
    }

    #[test]
    fn zero_field_is_identity() {
        let sys = LinearSystemSpec::new(3, vec![], |_, a| a.fill(c(0.0, 0.0))).unwrap();
        let path = PathSpec::builder(c(0.0, 0.0))
            .line_to(c(1.0, 2.0))
            .arc_around(c(0.0, 0.5), 1.3)
            .build();
        let t = transport(&sys, &path, &CMat::identity(3, 3), 1e-10).unwrap();
        assert_eq!(t, CMat::identity(3, 3));
    }

    #[test]
    fn euler_loop_trace_is_minus_two() {
        // Basis z^{1/2}, z^{1/2} log z: one turn maps it to -(basis) plus a
        // nilpotent shift, so the trace is exactly -2.
        let sys = euler_system(0.25);
        let path = PathSpec::builder(c(1.0, 0.0)).arc_around(c(0.0, 0.0), TAU).build();
        let t = transport(&sys, &path, &CMat::identity(2, 2), 1e-12).unwrap();
        assert!((trace(&t) - c(-2.0, 0.0)).norm() < 1e-10);
        assert!((det2(&to_mat2(&t)) - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn reversed_path_inverts() {
        let sys = euler_system(0.3);
        let path = PathSpec::builder(c(1.0, 0.5))
            .line_to(c(2.0, -1.0))
            .arc_around(c(0.0, 0.0), 2.0)
            .line_to(c(-0.5, 0.7))
            .build();
        let fwd = transport(&sys, &path, &CMat::identity(2, 2), 1e-12).unwrap();
        let back = transport(&sys, &path.reversed(), &CMat::identity(2, 2), 1e-12).unwrap();
        assert!(((&fwd * &back) - CMat::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn clearance_and_dimension_errors() {
        let sys = euler_system(0.25);
        let close = PathSpec::line(c(-1.0, 0.05), c(1.0, 0.05));
        assert!(matches!(
            transport(&sys, &close, &CMat::identity(2, 2), 1e-10),
            Err(Error::ClearanceViolation { .. })
        ));
        let ok = PathSpec::line(c(1.0, 1.0), c(2.0, 1.0));
        assert!(matches!(
            transport(&sys, &ok, &CMat::identity(3, 3), 1e-10),
            Err(Error::DimensionMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn non_finite_coefficients_are_rejected() {
        let r = LinearSystemSpec::new(1, vec![], |z, a| {
            a[(0, 0)] = if z.re > 0.0 { c(f64::NAN, 0.0) } else { c(0.0, 0.0) };
        });
        assert!(matches!(r, Err(Error::NonFiniteCoefficient(_))));
    }
}
